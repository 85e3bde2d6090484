#pragma once

// Recurrent steering network: dense(23->16) -> LSTM(64) -> LSTM(64) ->
// LSTM(64, last step only) -> dense(64->1). Forward pass, backpropagation
// through time, a finite-difference gradient checker and a minibatch trainer.
//
// LSTM cell, per layer and step (gate rows stacked as [i; f; g; o]):
//   z = W x_t + U h_{t-1} + b
//   i = sigmoid(z_i), f = sigmoid(z_f), g = tanh(z_g), o = sigmoid(z_o)
//   c_t = f * c_{t-1} + i * g,   h_t = o * tanh(c_t)
// Hidden and cell state start at zero for every sequence.

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cma/cogmap.hpp"

namespace cma {

inline constexpr int kMapSize = 23;
inline constexpr int kSequenceLength = 20;
inline constexpr int kDenseWidth = 16;
inline constexpr int kLstmWidth = 64;
inline constexpr int kLstmLayers = 3;

// Normalised network input. Layout:
//   [0,5) Xm, [5,10) Xl, [10,15) Xr   (p_l_t, p_l_b, p_r_t, p_r_b, p_o)
//   [15,19) intention one-hot (Stay, Left, Right, Brake)
//   [19,22) speed, yaw rate, previous steering
//   [22]    D_o
using FlatMap = std::array<double, kMapSize>;

struct NormalizationTable {
  double pixel_x_scale = 1.0 / 320.0;
  double pixel_y_scale = 1.0 / 240.0;
  double speed_scale = 1.0 / 30.0;
  double offset_scale = 1.0 / 3.5;
  // Row fed in for "no obstacle" (the horizon, i.e. infinitely far).
  double absent_obstacle_row = 120.0;

  static NormalizationTable ForCamera(const CameraModel& cam);
  bool operator==(const NormalizationTable&) const = default;
};

// Absent lanes flatten to zero boundary columns with the obstacle on the
// horizon row.
FlatMap Flatten(const CognitiveMap& map, const NormalizationTable& norm);

struct Sequence {
  std::array<FlatMap, kSequenceLength> maps;  // t-19 .. t
  double target = 0.0;                         // steering at t [rad]
};

struct DenseLayer {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

struct LstmLayer {
  Eigen::MatrixXd W;  // 4H x input
  Eigen::MatrixXd U;  // 4H x H
  Eigen::VectorXd b;  // 4H
};

struct LstmParams {
  DenseLayer dense_in;
  std::array<LstmLayer, kLstmLayers> lstm;
  DenseLayer dense_out;

  static LstmParams Zeros();
  // Glorot-uniform weights, zero biases except forget-gate bias 1.
  static LstmParams Random(std::uint64_t seed);

  std::size_t ParameterCount() const;
  // Throws Error(kShapeMismatch) unless every tensor has the fixed shape.
  void CheckShapes() const;
  bool AllFinite() const;

  // Calls fn(name, tensor) for every tensor in a fixed order. The tensor is
  // an Eigen::MatrixXd or Eigen::VectorXd.
  template <typename Self, typename Fn>
  static void ForEachTensor(Self& self, Fn&& fn) {
    fn("dense_in.W", self.dense_in.W);
    fn("dense_in.b", self.dense_in.b);
    for (int l = 0; l < kLstmLayers; ++l) {
      const std::string p = "lstm" + std::to_string(l + 1);
      fn(p + ".W", self.lstm[l].W);
      fn(p + ".U", self.lstm[l].U);
      fn(p + ".b", self.lstm[l].b);
    }
    fn("dense_out.W", self.dense_out.W);
    fn("dense_out.b", self.dense_out.b);
  }
};

using LstmGradients = LstmParams;

double Forward(const LstmParams& params, std::span<const FlatMap> seq);

// Same network with the third layer returning its whole output sequence and
// the output layer applied at every step.
std::vector<double> ForwardAllSteps(const LstmParams& params,
                                    std::span<const FlatMap> seq);

// Gradients of 0.5 * (Forward(seq) - target)^2.
LstmGradients Backward(const LstmParams& params, std::span<const FlatMap> seq,
                       double target);

// Batched forward/backward. Loss is the mean over the batch of
// 0.5 * (S - target)^2; returns that loss and fills grads (if non-null).
double BatchLossAndGradients(const LstmParams& params,
                             std::span<const Sequence* const> batch,
                             LstmGradients* grads);

using BackwardFn = std::function<LstmGradients(
    const LstmParams&, std::span<const FlatMap>, double)>;

struct GradCheckOptions {
  int coords_per_tensor = 20;
  std::uint64_t seed = 0;
  BackwardFn backward;  // defaults to Backward
};

// Max over sampled coordinates of |g_a - g_n| / max(1e-12, |g_a| + |g_n|),
// with g_n from central differences.
double GradCheck(const LstmParams& params, std::span<const FlatMap> seq,
                 double target, double eps, const GradCheckOptions& options = {});

enum class Optimizer { kSgd, kAdam };

struct TrainHyper {
  double lr = 0.05;
  int epochs = 50;
  int batch = 32;
  std::uint64_t seed = 1;
  double clip_norm = 1.0;
  Optimizer optimizer = Optimizer::kSgd;
  // A minibatch loss above this multiple of max(first minibatch loss, 1) is
  // treated as divergence, as is any non-finite loss.
  double divergence_factor = 1e6;
};

struct TrainResult {
  LstmParams params;
  std::vector<double> loss_curve;  // per-epoch mean squared error
};

using EpochCallback = std::function<void(int epoch, double mse)>;

// Deterministic for a given seed and dataset. Starts from `init` when given,
// otherwise LstmParams::Random(hyper.seed).
TrainResult Train(const std::vector<Sequence>& dataset, const TrainHyper& hyper,
                  const LstmParams* init = nullptr,
                  const EpochCallback& on_epoch = {});

double MeanSquaredError(const LstmParams& params,
                        const std::vector<Sequence>& dataset);

}  // namespace cma
