#include "cma/neuro.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cma/error.hpp"

namespace cma {
namespace {

constexpr int kH = kLstmWidth;

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<std::span<double>> Views(LstmParams& p) {
  std::vector<std::span<double>> views;
  LstmParams::ForEachTensor(p, [&](const std::string&, auto& t) {
    views.emplace_back(t.data(), static_cast<std::size_t>(t.size()));
  });
  return views;
}

std::vector<std::span<const double>> Views(const LstmParams& p) {
  std::vector<std::span<const double>> views;
  LstmParams::ForEachTensor(p, [&](const std::string&, const auto& t) {
    views.emplace_back(t.data(), static_cast<std::size_t>(t.size()));
  });
  return views;
}

MatrixXd Sigmoid(const MatrixXd& z) {
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

// Columns are time-major blocks: column t * B + b holds step t of sample b.
struct LayerCache {
  MatrixXd x;                    // input, in x T*B
  MatrixXd i, f, g, o, c, tc, h; // H x T*B
};

struct ForwardCache {
  int batch = 0;
  MatrixXd input;  // kMapSize x T*B
  MatrixXd dense;  // kDenseWidth x T*B
  std::array<LayerCache, kLstmLayers> layers;
  Eigen::RowVectorXd out;  // 1 x B
};

void RunLstm(const LstmLayer& layer, const MatrixXd& x, int batch,
             LayerCache& cache) {
  const int T = kSequenceLength;
  const int B = batch;
  cache.x = x;
  const MatrixXd zx = layer.W * x;
  for (MatrixXd* m : {&cache.i, &cache.f, &cache.g, &cache.o, &cache.c,
                      &cache.tc, &cache.h}) {
    m->resize(kH, T * B);
  }
  MatrixXd h = MatrixXd::Zero(kH, B);
  MatrixXd c = MatrixXd::Zero(kH, B);
  for (int t = 0; t < T; ++t) {
    MatrixXd z = zx.middleCols(t * B, B) + layer.U * h;
    z.colwise() += layer.b;
    const MatrixXd i = Sigmoid(z.topRows(kH));
    const MatrixXd f = Sigmoid(z.middleRows(kH, kH));
    const MatrixXd g = z.middleRows(2 * kH, kH).array().tanh().matrix();
    const MatrixXd o = Sigmoid(z.bottomRows(kH));
    c = f.cwiseProduct(c) + i.cwiseProduct(g);
    const MatrixXd tc = c.array().tanh().matrix();
    h = o.cwiseProduct(tc);
    cache.i.middleCols(t * B, B) = i;
    cache.f.middleCols(t * B, B) = f;
    cache.g.middleCols(t * B, B) = g;
    cache.o.middleCols(t * B, B) = o;
    cache.c.middleCols(t * B, B) = c;
    cache.tc.middleCols(t * B, B) = tc;
    cache.h.middleCols(t * B, B) = h;
  }
}

// dh_ext: gradient arriving at every h_t from above (H x T*B). Accumulates
// parameter gradients and returns the gradient w.r.t. the layer input.
MatrixXd BackpropLstm(const LstmLayer& layer, const LayerCache& cache,
                      const MatrixXd& dh_ext, int batch, LstmLayer& grad) {
  const int T = kSequenceLength;
  const int B = batch;
  MatrixXd dz_all(4 * kH, T * B);
  MatrixXd dh_next = MatrixXd::Zero(kH, B);
  MatrixXd dc_next = MatrixXd::Zero(kH, B);
  for (int t = T - 1; t >= 0; --t) {
    const auto i = cache.i.middleCols(t * B, B).array();
    const auto f = cache.f.middleCols(t * B, B).array();
    const auto g = cache.g.middleCols(t * B, B).array();
    const auto o = cache.o.middleCols(t * B, B).array();
    const auto tc = cache.tc.middleCols(t * B, B).array();
    const MatrixXd dh = dh_ext.middleCols(t * B, B) + dh_next;
    const auto dha = dh.array();
    const MatrixXd dc =
        (dha * o * (1.0 - tc.square())).matrix() + dc_next;
    const auto dca = dc.array();
    MatrixXd c_prev = MatrixXd::Zero(kH, B);
    if (t > 0) c_prev = cache.c.middleCols((t - 1) * B, B);

    auto dz = dz_all.middleCols(t * B, B);
    dz.topRows(kH) = (dca * g * i * (1.0 - i)).matrix();
    dz.middleRows(kH, kH) = (dca * c_prev.array() * f * (1.0 - f)).matrix();
    dz.middleRows(2 * kH, kH) = (dca * i * (1.0 - g.square())).matrix();
    dz.bottomRows(kH) = (dha * tc * o * (1.0 - o)).matrix();

    dc_next = (dca * f).matrix();
    dh_next = layer.U.transpose() * dz;
  }
  grad.W += dz_all * cache.x.transpose();
  grad.b += dz_all.rowwise().sum();
  if (T > 1) {
    grad.U += dz_all.rightCols((T - 1) * B) *
              cache.h.leftCols((T - 1) * B).transpose();
  }
  return layer.W.transpose() * dz_all;
}

ForwardCache RunForward(const LstmParams& params,
                        std::span<const Sequence* const> batch) {
  const int T = kSequenceLength;
  const int B = static_cast<int>(batch.size());
  ForwardCache cache;
  cache.batch = B;
  cache.input.resize(kMapSize, T * B);
  for (int b = 0; b < B; ++b) {
    for (int t = 0; t < T; ++t) {
      cache.input.col(t * B + b) =
          Eigen::Map<const VectorXd>(batch[b]->maps[t].data(), kMapSize);
    }
  }
  cache.dense = params.dense_in.W * cache.input;
  cache.dense.colwise() += params.dense_in.b;
  const MatrixXd* x = &cache.dense;
  for (int l = 0; l < kLstmLayers; ++l) {
    RunLstm(params.lstm[l], *x, B, cache.layers[l]);
    x = &cache.layers[l].h;
  }
  const MatrixXd& h3 = cache.layers.back().h;
  cache.out = params.dense_out.W * h3.rightCols(B);
  cache.out.array() += params.dense_out.b(0);
  return cache;
}

Sequence ToSequence(std::span<const FlatMap> seq) {
  if (seq.size() != static_cast<std::size_t>(kSequenceLength)) {
    throw Error(ErrorCode::kShapeMismatch,
                "sequence length " + std::to_string(seq.size()) +
                    " != " + std::to_string(kSequenceLength));
  }
  Sequence s;
  std::copy(seq.begin(), seq.end(), s.maps.begin());
  return s;
}

double SquaredNorm(const LstmParams& p) {
  double sum = 0.0;
  for (auto v : Views(p)) {
    for (double x : v) sum += x * x;
  }
  return sum;
}

}  // namespace

NormalizationTable NormalizationTable::ForCamera(const CameraModel& cam) {
  NormalizationTable n;
  n.pixel_x_scale = 1.0 / cam.image_w;
  n.pixel_y_scale = 1.0 / cam.image_h;
  n.absent_obstacle_row = cam.u0;
  return n;
}

FlatMap Flatten(const CognitiveMap& map, const NormalizationTable& norm) {
  FlatMap out{};
  auto put = [&](int offset, const PerceptionVector& X) {
    const double row = X.p_o.value_or(norm.absent_obstacle_row);
    if (X.lane_present) {
      out[offset + 0] = X.p_l_t * norm.pixel_x_scale;
      out[offset + 1] = X.p_l_b * norm.pixel_x_scale;
      out[offset + 2] = X.p_r_t * norm.pixel_x_scale;
      out[offset + 3] = X.p_r_b * norm.pixel_x_scale;
      out[offset + 4] = row * norm.pixel_y_scale;
    } else {
      out[offset + 4] = norm.absent_obstacle_row * norm.pixel_y_scale;
    }
  };
  put(0, map.Xm);
  put(5, map.Xl);
  put(10, map.Xr);
  out[15 + static_cast<int>(map.intention)] = 1.0;
  out[19] = map.vstate.speed * norm.speed_scale;
  out[20] = map.vstate.yaw_rate;
  out[21] = map.vstate.prev_steering;
  out[22] = map.D_o * norm.offset_scale;
  return out;
}

LstmParams LstmParams::Zeros() {
  LstmParams p;
  p.dense_in = {MatrixXd::Zero(kDenseWidth, kMapSize), VectorXd::Zero(kDenseWidth)};
  int in = kDenseWidth;
  for (auto& layer : p.lstm) {
    layer = {MatrixXd::Zero(4 * kH, in), MatrixXd::Zero(4 * kH, kH),
             VectorXd::Zero(4 * kH)};
    in = kH;
  }
  p.dense_out = {MatrixXd::Zero(1, kH), VectorXd::Zero(1)};
  return p;
}

LstmParams LstmParams::Random(std::uint64_t seed) {
  LstmParams p = Zeros();
  std::mt19937_64 rng(seed);
  auto glorot = [&](MatrixXd& m, int fan_in, int fan_out) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = limit * u(rng);
  };
  glorot(p.dense_in.W, kMapSize, kDenseWidth);
  for (auto& layer : p.lstm) {
    glorot(layer.W, static_cast<int>(layer.W.cols()), kH);
    glorot(layer.U, kH, kH);
    layer.b.segment(kH, kH).setOnes();
  }
  glorot(p.dense_out.W, kH, 1);
  return p;
}

std::size_t LstmParams::ParameterCount() const {
  std::size_t n = 0;
  for (auto v : Views(*this)) n += v.size();
  return n;
}

void LstmParams::CheckShapes() const {
  const LstmParams ref = Zeros();
  std::vector<std::pair<Eigen::Index, Eigen::Index>> expected;
  ForEachTensor(ref, [&](const std::string&, const auto& t) {
    expected.emplace_back(t.rows(), t.cols());
  });
  std::size_t k = 0;
  ForEachTensor(*this, [&](const std::string& name, const auto& t) {
    if (t.rows() != expected[k].first || t.cols() != expected[k].second) {
      throw Error(ErrorCode::kShapeMismatch,
                  name + " has shape " + std::to_string(t.rows()) + "x" +
                      std::to_string(t.cols()));
    }
    ++k;
  });
}

bool LstmParams::AllFinite() const {
  for (auto v : Views(*this)) {
    for (double x : v) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

double BatchLossAndGradients(const LstmParams& params,
                             std::span<const Sequence* const> batch,
                             LstmGradients* grads) {
  params.CheckShapes();
  const int B = static_cast<int>(batch.size());
  if (B == 0) throw Error(ErrorCode::kEmptyDataset, "empty batch");
  const ForwardCache cache = RunForward(params, batch);

  Eigen::RowVectorXd err(B);
  for (int b = 0; b < B; ++b) err(b) = cache.out(b) - batch[b]->target;
  const double loss = 0.5 * err.squaredNorm() / B;
  if (grads == nullptr) return loss;

  *grads = LstmParams::Zeros();
  const Eigen::RowVectorXd dS = err / B;
  const MatrixXd& h3 = cache.layers.back().h;
  grads->dense_out.W = dS * h3.rightCols(B).transpose();
  grads->dense_out.b(0) = dS.sum();

  const int TB = kSequenceLength * B;
  MatrixXd dh = MatrixXd::Zero(kH, TB);
  dh.rightCols(B) = params.dense_out.W.transpose() * dS;
  for (int l = kLstmLayers - 1; l >= 0; --l) {
    dh = BackpropLstm(params.lstm[l], cache.layers[l], dh, B, grads->lstm[l]);
  }
  grads->dense_in.W = dh * cache.input.transpose();
  grads->dense_in.b = dh.rowwise().sum();
  return loss;
}

double Forward(const LstmParams& params, std::span<const FlatMap> seq) {
  params.CheckShapes();
  const Sequence s = ToSequence(seq);
  const Sequence* ptr = &s;
  return RunForward(params, {&ptr, 1}).out(0);
}

std::vector<double> ForwardAllSteps(const LstmParams& params,
                                    std::span<const FlatMap> seq) {
  params.CheckShapes();
  const Sequence s = ToSequence(seq);
  const Sequence* ptr = &s;
  const ForwardCache cache = RunForward(params, {&ptr, 1});
  const Eigen::RowVectorXd all =
      params.dense_out.W * cache.layers.back().h;
  std::vector<double> out(kSequenceLength);
  for (int t = 0; t < kSequenceLength; ++t) out[t] = all(t) + params.dense_out.b(0);
  return out;
}

LstmGradients Backward(const LstmParams& params, std::span<const FlatMap> seq,
                       double target) {
  Sequence s = ToSequence(seq);
  s.target = target;
  const Sequence* ptr = &s;
  LstmGradients g;
  BatchLossAndGradients(params, {&ptr, 1}, &g);
  return g;
}

double GradCheck(const LstmParams& params, std::span<const FlatMap> seq,
                 double target, double eps, const GradCheckOptions& options) {
  if (!(eps > 0.0)) throw Error(ErrorCode::kConfigInvalid, "eps must be > 0");
  const LstmGradients analytic = options.backward
                                     ? options.backward(params, seq, target)
                                     : Backward(params, seq, target);
  analytic.CheckShapes();
  auto loss = [&](const LstmParams& p) {
    const double e = Forward(p, seq) - target;
    return 0.5 * e * e;
  };

  LstmParams probe = params;
  auto probe_views = Views(probe);
  const auto grad_views = Views(analytic);
  std::mt19937_64 rng(options.seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < probe_views.size(); ++k) {
    const std::size_t n = probe_views[k].size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(std::min<std::size_t>(n, options.coords_per_tensor));
    for (std::size_t j : coords) {
      double& theta = probe_views[k][j];
      const double saved = theta;
      theta = saved + eps;
      const double up = loss(probe);
      theta = saved - eps;
      const double down = loss(probe);
      theta = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = grad_views[k][j];
      const double rel = std::abs(a - numeric) /
                         std::max(1e-12, std::abs(a) + std::abs(numeric));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

double MeanSquaredError(const LstmParams& params,
                        const std::vector<Sequence>& dataset) {
  if (dataset.empty()) throw Error(ErrorCode::kEmptyDataset, "no sequences");
  constexpr std::size_t kChunk = 256;
  double sum = 0.0;
  std::vector<const Sequence*> chunk;
  for (std::size_t start = 0; start < dataset.size(); start += kChunk) {
    chunk.clear();
    for (std::size_t k = start; k < std::min(dataset.size(), start + kChunk); ++k) {
      chunk.push_back(&dataset[k]);
    }
    sum += 2.0 * BatchLossAndGradients(params, chunk, nullptr) * chunk.size();
  }
  return sum / dataset.size();
}

TrainResult Train(const std::vector<Sequence>& dataset, const TrainHyper& hyper,
                  const LstmParams* init, const EpochCallback& on_epoch) {
  if (dataset.empty()) throw Error(ErrorCode::kEmptyDataset, "no sequences");
  if (hyper.batch <= 0 || hyper.epochs <= 0) {
    throw Error(ErrorCode::kConfigInvalid, "batch and epochs must be positive");
  }
  TrainResult result{init ? *init : LstmParams::Random(hyper.seed), {}};
  LstmParams& params = result.params;
  params.CheckShapes();

  LstmParams adam_m = LstmParams::Zeros();
  LstmParams adam_v = LstmParams::Zeros();
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;
  long step = 0;

  std::mt19937_64 rng(hyper.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const Sequence*> batch;
  LstmGradients grads;
  double reference = -1.0;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += hyper.batch) {
      batch.clear();
      const std::size_t end = std::min(order.size(), start + hyper.batch);
      for (std::size_t k = start; k < end; ++k) batch.push_back(&dataset[order[k]]);

      const double loss = BatchLossAndGradients(params, batch, &grads);
      if (reference < 0.0) reference = std::max(loss, 1.0);
      if (!std::isfinite(loss) || loss > hyper.divergence_factor * reference) {
        throw Error(ErrorCode::kDivergenceDetected,
                    "minibatch loss " + std::to_string(loss) + " at epoch " +
                        std::to_string(epoch));
      }
      epoch_sum += 2.0 * loss * batch.size();

      const double norm = std::sqrt(SquaredNorm(grads));
      const double scale =
          (hyper.clip_norm > 0.0 && norm > hyper.clip_norm) ? hyper.clip_norm / norm
                                                            : 1.0;
      auto p = Views(params);
      const auto g = Views(static_cast<const LstmParams&>(grads));
      if (hyper.optimizer == Optimizer::kSgd) {
        for (std::size_t k = 0; k < p.size(); ++k) {
          for (std::size_t j = 0; j < p[k].size(); ++j) {
            p[k][j] -= hyper.lr * scale * g[k][j];
          }
        }
      } else {
        ++step;
        auto m = Views(adam_m);
        auto v = Views(adam_v);
        const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
        for (std::size_t k = 0; k < p.size(); ++k) {
          for (std::size_t j = 0; j < p[k].size(); ++j) {
            const double gj = scale * g[k][j];
            m[k][j] = kBeta1 * m[k][j] + (1.0 - kBeta1) * gj;
            v[k][j] = kBeta2 * v[k][j] + (1.0 - kBeta2) * gj * gj;
            p[k][j] -= hyper.lr * (m[k][j] / c1) /
                       (std::sqrt(v[k][j] / c2) + kAdamEps);
          }
        }
      }
    }
    const double mse = epoch_sum / dataset.size();
    result.loss_curve.push_back(mse);
    if (on_epoch) on_epoch(epoch, mse);
  }
  if (!params.AllFinite()) {
    throw Error(ErrorCode::kDivergenceDetected, "non-finite parameters");
  }
  return result;
}

}  // namespace cma
