#include "kinn/network.hpp"

#include <cmath>
#include <string>

#include "kinn/error.hpp"

namespace kinn {

namespace {

template <typename Scalar>
Scalar leaky(Scalar z) {
  return z >= Scalar(0) ? z : Scalar(kLeakySlope) * z;
}

// d_pre = d_out * LeakyReLU'(pre), with derivative 1 at 0.
void leaky_backward(const MatF& pre, const MatF& d_out, MatF& d_pre) {
  d_pre.resize(pre.rows(), pre.cols());
  const float* z = pre.data();
  const float* g = d_out.data();
  float* o = d_pre.data();
  const Eigen::Index n = pre.size();
  // Multiplying by the slope (rather than selecting) lets the loop vectorize.
  for (Eigen::Index i = 0; i < n; ++i) {
    const float slope = z[i] >= 0.0f ? 1.0f : kLeakySlope;
    o[i] = g[i] * slope;
  }
}

void check_theta(const Architecture& arch, Eigen::Index cols) {
  if (cols != arch.input_dim) {
    throw ContractViolation("forward: expected " + std::to_string(arch.input_dim) +
                            " input columns, got " + std::to_string(cols));
  }
}

// One hidden layer: pre = in W^T + b, out = leaky(pre) (+ in for residual
// blocks). max(z, 0.01 z) equals LeakyReLU for a slope below 1.
void hidden_layer(const NetworkParams& params, int l, const MatF& in, MatF& pre, MatF& out) {
  pre.resize(in.rows(), params.arch().width);
  pre.noalias() = in * params.weight(l).transpose();
  pre.rowwise() += params.bias(l).transpose();
  if (l > 0) {
    out = pre.cwiseMax(kLeakySlope * pre) + in;
  } else {
    out = pre.cwiseMax(kLeakySlope * pre);
  }
}

void head_layer(const NetworkParams& params, const MatF& in, MatF& raw) {
  const int head = params.arch().layer_count() - 1;
  raw.resize(in.rows(), params.arch().output_dim());
  raw.noalias() = in * params.weight(head).transpose();
  raw.rowwise() += params.bias(head).transpose();
}

void split_head(const Architecture& arch, const MatF& raw, NetworkOutput& out) {
  if (!raw.allFinite()) throw DivergenceError("non-finite network output", -1);
  out.x_hat = raw.leftCols(arch.primal_dim);
  out.lambda_hat = raw.middleCols(arch.primal_dim, arch.inequality_dim).cwiseMax(0.0f);
  out.nu_hat = raw.rightCols(arch.equality_dim);
}

}  // namespace

void Architecture::validate() const {
  if (input_dim <= 0 || width <= 0 || blocks < 0 || primal_dim <= 0 || inequality_dim < 0 ||
      equality_dim < 0) {
    throw ContractViolation("invalid architecture dimensions");
  }
}

std::vector<TensorSlot> make_layout(const Architecture& arch) {
  arch.validate();
  std::vector<TensorSlot> layout;
  std::size_t offset = 0;
  auto add = [&](int layer, TensorKind kind, int rows, int cols) {
    layout.push_back({layer, kind, rows, cols, offset});
    offset += layout.back().size();
  };
  for (int l = 0; l < arch.layer_count(); ++l) {
    const int in = l == 0 ? arch.input_dim : arch.width;
    const int out = l == arch.layer_count() - 1 ? arch.output_dim() : arch.width;
    add(l, TensorKind::Weight, out, in);
    add(l, TensorKind::Bias, out, 1);
  }
  return layout;
}

NetworkParams::NetworkParams(const Architecture& arch) : arch_(arch), layout_(make_layout(arch)) {
  const auto& last = layout_.back();
  values_.assign(last.offset + last.size(), 0.0f);
}

NetworkParams::WeightMap NetworkParams::weight(int layer) {
  const auto& s = layout_[2 * layer];
  return {values_.data() + s.offset, s.rows, s.cols};
}

NetworkParams::ConstWeightMap NetworkParams::weight(int layer) const {
  const auto& s = layout_[2 * layer];
  return {values_.data() + s.offset, s.rows, s.cols};
}

NetworkParams::BiasMap NetworkParams::bias(int layer) {
  const auto& s = layout_[2 * layer + 1];
  return {values_.data() + s.offset, s.rows};
}

NetworkParams::ConstBiasMap NetworkParams::bias(int layer) const {
  const auto& s = layout_[2 * layer + 1];
  return {values_.data() + s.offset, s.rows};
}

double init_weight_std(int fan_in) {
  const double gain = std::sqrt(2.0 / (1.0 + double(kLeakySlope) * double(kLeakySlope)));
  return gain / std::sqrt(static_cast<double>(fan_in));
}

NetworkParams init_params(Rng& rng, const Architecture& arch) {
  NetworkParams params(arch);
  auto values = params.values();
  for (const auto& slot : params.layout()) {
    if (slot.kind != TensorKind::Weight) continue;
    // Uniform(-b, b) has std b / sqrt(3).
    const double bound = init_weight_std(slot.cols) * std::sqrt(3.0);
    for (std::size_t i = 0; i < slot.size(); ++i) {
      values[slot.offset + i] = static_cast<float>(rng.uniform(-bound, bound));
    }
  }
  const int head = arch.layer_count() - 1;
  params.weight(head) *= kHeadInitScale;
  params.bias(head).segment(arch.primal_dim, arch.inequality_dim).setConstant(kMultiplierBiasInit);
  return params;
}

void forward_into(const NetworkParams& params, const MatF& theta, ForwardResult& result) {
  const auto& arch = params.arch();
  check_theta(arch, theta.cols());
  const auto layers = static_cast<std::size_t>(arch.layer_count());
  auto& tape = result.tape;
  tape.inputs.resize(layers);
  tape.pre.resize(layers);
  tape.inputs[0] = theta;
  for (int l = 0; l <= arch.blocks; ++l) {
    hidden_layer(params, l, tape.inputs[l], tape.pre[l], tape.inputs[l + 1]);
  }
  head_layer(params, tape.inputs[layers - 1], tape.pre[layers - 1]);
  split_head(arch, tape.pre[layers - 1], result.out);
}

ForwardResult forward(const NetworkParams& params, const MatF& theta) {
  ForwardResult result;
  forward_into(params, theta, result);
  return result;
}

NetworkOutput predict(const NetworkParams& params, const MatF& theta) {
  const auto& arch = params.arch();
  check_theta(arch, theta.cols());
  MatF pre, a, b;
  hidden_layer(params, 0, theta, pre, a);
  for (int l = 1; l <= arch.blocks; ++l) {
    hidden_layer(params, l, a, pre, b);
    std::swap(a, b);
  }
  head_layer(params, a, pre);
  NetworkOutput out;
  split_head(arch, pre, out);
  return out;
}

MatD forward_reference(const NetworkParams& params, const MatD& theta) {
  const auto& arch = params.arch();
  check_theta(arch, theta.cols());
  MatD input = theta;
  for (int l = 0; l <= arch.blocks; ++l) {
    MatD z = input * params.weight(l).cast<double>().transpose();
    z.rowwise() += params.bias(l).cast<double>().transpose();
    MatD h = z.unaryExpr([](double v) { return leaky(v); });
    if (l > 0) h += input;
    input = std::move(h);
  }
  const int head = arch.layer_count() - 1;
  MatD raw = input * params.weight(head).cast<double>().transpose();
  raw.rowwise() += params.bias(head).cast<double>().transpose();
  raw.middleCols(arch.primal_dim, arch.inequality_dim) =
      raw.middleCols(arch.primal_dim, arch.inequality_dim).cwiseMax(0.0);
  return raw;
}

void backward_into(const NetworkParams& params, const ForwardTape& tape, const MatF& d_x,
                   const MatF& d_lambda, const MatF& d_nu, std::span<float> grad,
                   BackwardWorkspace& ws) {
  const auto& arch = params.arch();
  const int layers = arch.layer_count();
  const Eigen::Index batch = tape.batch();
  if (static_cast<int>(tape.inputs.size()) != layers || static_cast<int>(tape.pre.size()) != layers ||
      tape.pre.back().cols() != arch.output_dim() || tape.inputs.front().cols() != arch.input_dim) {
    throw ContractViolation("backward: tape does not match the network architecture");
  }
  if (d_x.rows() != batch || d_x.cols() != arch.primal_dim || d_lambda.rows() != batch ||
      d_lambda.cols() != arch.inequality_dim ||
      (d_nu.size() != 0 && (d_nu.rows() != batch || d_nu.cols() != arch.equality_dim))) {
    throw ContractViolation("backward: seed shapes do not match the tape");
  }
  if (grad.size() != params.size()) {
    throw ContractViolation("backward: gradient buffer has the wrong length");
  }

  auto grad_weight = [&](int l) {
    const auto& s = params.layout()[2 * l];
    return Eigen::Map<MatF>(grad.data() + s.offset, s.rows, s.cols);
  };
  auto grad_bias = [&](int l, const MatF& delta) {
    const auto& s = params.layout()[2 * l + 1];
    Eigen::VectorXd& acc = ws.bias_acc;
    acc.setZero(s.rows);
    for (Eigen::Index r = 0; r < delta.rows(); ++r) acc += delta.row(r).transpose().cast<double>();
    Eigen::Map<Eigen::VectorXf>(grad.data() + s.offset, s.rows) = acc.cast<float>();
  };

  const MatF& raw = tape.pre.back();
  MatF& delta = ws.delta;
  delta.resize(batch, arch.output_dim());
  delta.leftCols(arch.primal_dim) = d_x;
  delta.middleCols(arch.primal_dim, arch.inequality_dim) =
      (raw.middleCols(arch.primal_dim, arch.inequality_dim).array() >= 0.0f)
          .select(d_lambda.array(), 0.0f);
  if (arch.equality_dim > 0) {
    if (d_nu.size() == 0) {
      delta.rightCols(arch.equality_dim).setZero();
    } else {
      delta.rightCols(arch.equality_dim) = d_nu;
    }
  }

  const int head = layers - 1;
  grad_weight(head).noalias() = delta.transpose() * tape.inputs[head];
  grad_bias(head, delta);
  MatF& d_hidden = ws.d_hidden;
  d_hidden.resize(batch, arch.width);
  d_hidden.noalias() = delta * params.weight(head);

  MatF& d_pre = ws.d_pre;
  for (int l = head - 1; l >= 0; --l) {
    leaky_backward(tape.pre[l], d_hidden, d_pre);
    grad_weight(l).noalias() = d_pre.transpose() * tape.inputs[l];
    grad_bias(l, d_pre);
    if (l > 0) d_hidden.noalias() += d_pre * params.weight(l);
  }
}

std::vector<float> backward(const NetworkParams& params, const ForwardTape& tape,
                            const MatF& d_x, const MatF& d_lambda, const MatF& d_nu) {
  std::vector<float> grad(params.size(), 0.0f);
  BackwardWorkspace ws;
  backward_into(params, tape, d_x, d_lambda, d_nu, grad, ws);
  return grad;
}

}  // namespace kinn
