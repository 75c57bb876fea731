#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "kinn/linalg.hpp"

namespace kinn {

inline constexpr float kLeakySlope = 0.01f;

/// Shape of the MLP: an input projection, `blocks` residual hidden layers of
/// size `width`, and one linear head of width primal + inequality + equality.
struct Architecture {
  int input_dim = 7;
  int width = 512;
  int blocks = 3;
  int primal_dim = 2;
  int inequality_dim = 7;
  int equality_dim = 0;

  int output_dim() const { return primal_dim + inequality_dim + equality_dim; }
  /// Input projection + residual blocks + head.
  int layer_count() const { return blocks + 2; }

  /// Throws ContractViolation on non-positive sizes.
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

enum class TensorKind { Weight, Bias };

struct TensorSlot {
  int layer = 0;
  TensorKind kind = TensorKind::Weight;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

/// Layout table: per layer a weight (out x in, row-major) then a bias (out x 1),
/// layers in forward order.
std::vector<TensorSlot> make_layout(const Architecture& arch);

/// All weights and biases in one flat float vector.
class NetworkParams {
 public:
  using WeightMap = Eigen::Map<MatF>;
  using ConstWeightMap = Eigen::Map<const MatF>;
  using BiasMap = Eigen::Map<Eigen::VectorXf>;
  using ConstBiasMap = Eigen::Map<const Eigen::VectorXf>;

  /// Zero-initialized parameters for `arch`.
  explicit NetworkParams(const Architecture& arch);

  const Architecture& arch() const noexcept { return arch_; }
  const std::vector<TensorSlot>& layout() const noexcept { return layout_; }

  std::size_t size() const noexcept { return values_.size(); }
  std::span<float> values() noexcept { return values_; }
  std::span<const float> values() const noexcept { return values_; }

  WeightMap weight(int layer);
  ConstWeightMap weight(int layer) const;
  BiasMap bias(int layer);
  ConstBiasMap bias(int layer) const;

  friend bool operator==(const NetworkParams& a, const NetworkParams& b) {
    return a.arch_ == b.arch_ && a.values_ == b.values_;
  }

 private:
  Architecture arch_;
  std::vector<TensorSlot> layout_;
  std::vector<float> values_;
};

/// The head starts small with positive multiplier outputs. With unscaled head
/// weights the early Adam steps drive every raw multiplier below zero, the
/// ReLU then passes no gradient and the multiplier branch never recovers.
inline constexpr float kHeadInitScale = 0.01f;
inline constexpr float kMultiplierBiasInit = 1.0f;

/// Kaiming-uniform weights with the LeakyReLU(0.01) gain and zero biases for
/// the hidden layers. Weight bound is gain * sqrt(3 / fan_in), gain =
/// sqrt(2 / (1 + 0.01^2)). Head weights are additionally scaled by
/// kHeadInitScale and the multiplier biases set to kMultiplierBiasInit.
NetworkParams init_params(Rng& rng, const Architecture& arch);

/// Standard deviation of the weights produced by `init_params` for `fan_in`.
double init_weight_std(int fan_in);

struct NetworkOutput {
  MatF x_hat;       ///< B x primal_dim
  MatF lambda_hat;  ///< B x inequality_dim, elementwise >= 0
  MatF nu_hat;      ///< B x equality_dim
};

/// Activations retained by `forward` for `backward`.
struct ForwardTape {
  /// inputs[l] is the input of layer l (inputs[0] is the parameter batch,
  /// inputs[l + 1] the output of layer l).
  std::vector<MatF> inputs;
  /// pre[l] is layer l's affine output before its activation; the last entry
  /// is the raw head output.
  std::vector<MatF> pre;

  Eigen::Index batch() const { return inputs.empty() ? 0 : inputs.front().rows(); }
};

struct ForwardResult {
  NetworkOutput out;
  ForwardTape tape;
};

/// Batched forward pass. Throws DivergenceError (step -1) on non-finite output.
ForwardResult forward(const NetworkParams& params, const MatF& theta);

/// Same as `forward`, reusing the buffers already held by `result`.
void forward_into(const NetworkParams& params, const MatF& theta, ForwardResult& result);

/// Forward pass without a tape.
NetworkOutput predict(const NetworkParams& params, const MatF& theta);

/// Forward pass with the float weights promoted to double. Returns the
/// concatenated output [x_hat, lambda_hat, nu_hat] as B x output_dim.
MatD forward_reference(const NetworkParams& params, const MatD& theta);

/// Gradient of sum(d_x .* x_hat) + sum(d_lambda .* lambda_hat)
/// + sum(d_nu .* nu_hat) with respect to every parameter, in layout order.
/// An empty `d_nu` is treated as zero. ReLU and LeakyReLU derivatives at
/// exactly zero take the positive-branch value 1.
std::vector<float> backward(const NetworkParams& params, const ForwardTape& tape,
                            const MatF& d_x, const MatF& d_lambda, const MatF& d_nu = {});

/// Scratch buffers for `backward_into`; reusable across calls.
struct BackwardWorkspace {
  MatF delta;
  MatF d_hidden;
  MatF d_pre;
  Eigen::VectorXd bias_acc;
};

/// `backward` writing into `grad` (length params.size()).
void backward_into(const NetworkParams& params, const ForwardTape& tape, const MatF& d_x,
                   const MatF& d_lambda, const MatF& d_nu, std::span<float> grad,
                   BackwardWorkspace& ws);

}  // namespace kinn
