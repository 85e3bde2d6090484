#pragma once

// Trained network on disk: JSON with every tensor, the normalisation table
// the network was trained with, free-form metadata and a SHA-256 checksum
// over the tensor values.

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "cma/neuro.hpp"

namespace cma {

struct Checkpoint {
  LstmParams params;
  NormalizationTable norm;
  nlohmann::json meta = nlohmann::json::object();
};

// Checksum of the tensor values (shapes and exact bit patterns).
std::string ParamsChecksum(const LstmParams& params);

std::string SerializeCheckpoint(const Checkpoint& ckpt);
// Throws Error(kIoError) on malformed input or checksum mismatch and
// Error(kShapeMismatch) when tensor shapes are wrong.
Checkpoint ParseCheckpoint(const std::string& text);

void SaveCheckpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace cma
