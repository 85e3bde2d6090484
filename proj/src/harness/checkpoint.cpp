#include "cma/harness/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "cma/error.hpp"
#include "cma/harness/hash.hpp"

namespace cma {
namespace {

constexpr const char* kFormat = "cma-lstm-checkpoint";
constexpr int kVersion = 1;

template <typename T>
void AppendTensor(std::string& bytes, const std::string& name, const T& t) {
  bytes += name;
  bytes += fmt::format(":{}x{}:", t.rows(), t.cols());
  bytes.append(reinterpret_cast<const char*>(t.data()), sizeof(double) * t.size());
}

}  // namespace

std::string ParamsChecksum(const LstmParams& params) {
  std::string bytes;
  LstmParams::ForEachTensor(params, [&](const std::string& name, const auto& t) {
    AppendTensor(bytes, name, t);
  });
  return Sha256Hex(bytes);
}

std::string SerializeCheckpoint(const Checkpoint& ckpt) {
  ckpt.params.CheckShapes();
  nlohmann::json tensors = nlohmann::json::object();
  LstmParams::ForEachTensor(ckpt.params, [&](const std::string& name, const auto& t) {
    std::vector<double> data(t.data(), t.data() + t.size());
    tensors[name] = {{"rows", t.rows()}, {"cols", t.cols()}, {"data", data}};
  });
  const NormalizationTable& n = ckpt.norm;
  nlohmann::json j = {
      {"format", kFormat},
      {"version", kVersion},
      {"normalization", {{"pixel_x_scale", n.pixel_x_scale},
                         {"pixel_y_scale", n.pixel_y_scale},
                         {"speed_scale", n.speed_scale},
                         {"offset_scale", n.offset_scale},
                         {"absent_obstacle_row", n.absent_obstacle_row}}},
      {"meta", ckpt.meta},
      {"tensors", tensors},
      {"checksum", ParamsChecksum(ckpt.params)},
  };
  return j.dump(1) + "\n";
}

Checkpoint ParseCheckpoint(const std::string& text) {
  Checkpoint ckpt;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("format") != kFormat || j.at("version") != kVersion) {
      throw Error(ErrorCode::kIoError, "not a version 1 checkpoint");
    }
    const auto& n = j.at("normalization");
    ckpt.norm.pixel_x_scale = n.at("pixel_x_scale");
    ckpt.norm.pixel_y_scale = n.at("pixel_y_scale");
    ckpt.norm.speed_scale = n.at("speed_scale");
    ckpt.norm.offset_scale = n.at("offset_scale");
    ckpt.norm.absent_obstacle_row = n.at("absent_obstacle_row");
    ckpt.meta = j.value("meta", nlohmann::json::object());
    ckpt.params = LstmParams::Zeros();
    const auto& tensors = j.at("tensors");
    if (tensors.size() != 13) throw Error(ErrorCode::kShapeMismatch, "expected 13 tensors");
    LstmParams::ForEachTensor(ckpt.params, [&](const std::string& name, auto& t) {
      const auto& e = tensors.at(name);
      const auto rows = e.at("rows").get<long>(), cols = e.at("cols").get<long>();
      const auto data = e.at("data").get<std::vector<double>>();
      if (rows != t.rows() || cols != t.cols() ||
          data.size() != static_cast<std::size_t>(rows * cols)) {
        throw Error(ErrorCode::kShapeMismatch,
                    fmt::format("{} is {}x{}, expected {}x{}", name, rows, cols, t.rows(),
                                t.cols()));
      }
      std::memcpy(t.data(), data.data(), sizeof(double) * data.size());
    });
    if (j.at("checksum") != ParamsChecksum(ckpt.params)) {
      throw Error(ErrorCode::kIoError, "checkpoint checksum mismatch");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIoError, fmt::format("malformed checkpoint: {}", e.what()));
  }
  return ckpt;
}

void SaveCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string text = SerializeCheckpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, fmt::format("cannot write {}", path.string()));
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, fmt::format("cannot read {}", path.string()));
  std::stringstream text;
  text << in.rdbuf();
  return ParseCheckpoint(text.str());
}

}  // namespace cma
