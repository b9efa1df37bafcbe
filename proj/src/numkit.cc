#include "uplift/numkit.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <string>

#include "uplift/errors.h"

namespace uplift {
namespace {

std::uint64_t next_net_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

std::string shape_of(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void activate(Activation activation, const Matrix& pre, Matrix& post) {
  switch (activation) {
    case Activation::kIdentity:
      post = pre;
      return;
    case Activation::kRelu:
      post = pre.cwiseMax(0.0);
      return;
    case Activation::kElu:
      post = pre.unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
      return;
    case Activation::kSigmoid:
      post = pre.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
      return;
  }
}

// upstream * d(post)/d(pre), elementwise.
Matrix activation_backward(Activation activation, const Matrix& pre,
                           const Matrix& post, const Matrix& upstream) {
  switch (activation) {
    case Activation::kIdentity:
      return upstream;
    case Activation::kRelu:
      return upstream.cwiseProduct(
          pre.unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; }));
    case Activation::kElu:
      return upstream.cwiseProduct(pre.binaryExpr(
          post, [](double x, double y) { return x > 0.0 ? 1.0 : y + 1.0; }));
    case Activation::kSigmoid:
      return upstream.cwiseProduct(
          post.unaryExpr([](double y) { return y * (1.0 - y); }));
  }
  return upstream;
}

}  // namespace

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::kIdentity:
      return "identity";
    case Activation::kRelu:
      return "relu";
    case Activation::kElu:
      return "elu";
    case Activation::kSigmoid:
      return "sigmoid";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::kIdentity;
  if (name == "relu") return Activation::kRelu;
  if (name == "elu") return Activation::kElu;
  if (name == "sigmoid") return Activation::kSigmoid;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Matrix init_params(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed) {
  if (fan_in == 0 || fan_out == 0) {
    throw ContractError("init_params: dimensions must be positive");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(double(fan_in)));
  Matrix w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
  return w;
}

Matrix init_bias(std::size_t n) { return Matrix::Zero(1, Eigen::Index(n)); }

DenseNet::DenseNet() : id_(next_net_id()) {}

DenseNet::DenseNet(std::span<const std::size_t> dims, Activation hidden,
                   Activation output, std::uint64_t seed)
    : id_(next_net_id()) {
  if (dims.size() < 2) throw ContractError("DenseNet needs at least in and out dims");
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    Layer layer;
    layer.weight = init_params(dims[k], dims[k + 1], derive_seed(seed, k));
    layer.bias = init_bias(dims[k + 1]);
    layer.activation = (k + 2 == dims.size()) ? output : hidden;
    layers_.push_back(std::move(layer));
  }
}

DenseNet::DenseNet(std::vector<Layer> layers)
    : layers_(std::move(layers)), id_(next_net_id()) {
  validate();
}

DenseNet::DenseNet(const DenseNet& other)
    : layers_(other.layers_), id_(next_net_id()) {}

DenseNet& DenseNet::operator=(const DenseNet& other) {
  if (this != &other) {
    layers_ = other.layers_;
    id_ = next_net_id();
  }
  return *this;
}

void DenseNet::validate() const {
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const Layer& layer = layers_[k];
    if (layer.bias.rows() != 1 || layer.bias.cols() != layer.weight.cols()) {
      throw ShapeError("layer " + std::to_string(k) + ": bias " +
                       shape_of(layer.bias) + " does not match weight " +
                       shape_of(layer.weight));
    }
    if (k > 0 && layers_[k - 1].weight.cols() != layer.weight.rows()) {
      throw ShapeError("layer " + std::to_string(k) + " input " +
                       std::to_string(layer.weight.rows()) +
                       " != previous output " +
                       std::to_string(layers_[k - 1].weight.cols()));
    }
  }
}

std::size_t DenseNet::in_dim() const {
  return layers_.empty() ? 0 : std::size_t(layers_.front().weight.rows());
}

std::size_t DenseNet::out_dim() const {
  return layers_.empty() ? 0 : std::size_t(layers_.back().weight.cols());
}

ForwardResult DenseNet::forward(const Matrix& batch, OpCounter* counter) const {
  if (std::size_t(batch.cols()) != in_dim()) {
    throw ShapeError("forward: batch has " + std::to_string(batch.cols()) +
                     " columns, net expects " + std::to_string(in_dim()));
  }
  ForwardResult result;
  Tape& tape = result.tape;
  tape.net_id = id_;
  tape.inputs.reserve(layers_.size());
  tape.pre_activations.reserve(layers_.size());
  Matrix current = batch;
  for (const Layer& layer : layers_) {
    Matrix pre = current * layer.weight;
    pre.rowwise() += layer.bias.row(0);
    Matrix post;
    activate(layer.activation, pre, post);
    if (counter != nullptr) {
      const auto n = std::uint64_t(batch.rows());
      const auto in = std::uint64_t(layer.weight.rows());
      const auto out = std::uint64_t(layer.weight.cols());
      counter->flops += n * out * (2 * in + 1);
      if (layer.activation != Activation::kIdentity) counter->flops += n * out;
    }
    tape.inputs.push_back(std::move(current));
    tape.pre_activations.push_back(std::move(pre));
    current = std::move(post);
  }
  tape.output = current;
  result.output = std::move(current);
  return result;
}

Matrix DenseNet::infer(const Matrix& batch, OpCounter* counter) const {
  if (std::size_t(batch.cols()) != in_dim()) {
    throw ShapeError("infer: batch has " + std::to_string(batch.cols()) +
                     " columns, net expects " + std::to_string(in_dim()));
  }
  Matrix current = batch;
  for (const Layer& layer : layers_) {
    Matrix pre = current * layer.weight;
    pre.rowwise() += layer.bias.row(0);
    activate(layer.activation, pre, current);
    if (counter != nullptr) {
      const auto n = std::uint64_t(batch.rows());
      const auto in = std::uint64_t(layer.weight.rows());
      const auto out = std::uint64_t(layer.weight.cols());
      counter->flops += n * out * (2 * in + 1);
      if (layer.activation != Activation::kIdentity) counter->flops += n * out;
    }
  }
  return current;
}

BackwardResult DenseNet::backward(const Tape& tape, const Matrix& output_grad) const {
  if (tape.net_id != id_ || tape.inputs.size() != layers_.size() ||
      tape.pre_activations.size() != layers_.size()) {
    throw ContractError("backward: tape was not produced by this network");
  }
  if (output_grad.rows() != tape.output.rows() ||
      output_grad.cols() != tape.output.cols()) {
    throw ContractError("backward: output_grad " + shape_of(output_grad) +
                        " does not match forward output " +
                        shape_of(tape.output));
  }
  BackwardResult result;
  result.param_grads.resize(2 * layers_.size());
  Matrix upstream = output_grad;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const Layer& layer = layers_[k];
    const Matrix& pre = tape.pre_activations[k];
    const Matrix& post = (k + 1 == layers_.size()) ? tape.output : tape.inputs[k + 1];
    Matrix delta = activation_backward(layer.activation, pre, post, upstream);
    result.param_grads[2 * k] = tape.inputs[k].transpose() * delta;
    result.param_grads[2 * k + 1] = delta.colwise().sum();
    upstream = delta * layer.weight.transpose();
  }
  result.input_grad = std::move(upstream);
  return result;
}

std::vector<Matrix*> DenseNet::params() {
  std::vector<Matrix*> out;
  out.reserve(2 * layers_.size());
  for (Layer& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

std::vector<const Matrix*> DenseNet::params() const {
  std::vector<const Matrix*> out;
  out.reserve(2 * layers_.size());
  for (const Layer& layer : layers_) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

std::size_t DenseNet::param_count() const {
  std::size_t n = 0;
  for (const Layer& layer : layers_) {
    n += std::size_t(layer.weight.size() + layer.bias.size());
  }
  return n;
}

AdamState::AdamState(std::span<Matrix* const> params, AdamConfig config)
    : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Matrix* p : params) {
    m_.push_back(Matrix::Zero(p->rows(), p->cols()));
    v_.push_back(Matrix::Zero(p->rows(), p->cols()));
  }
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m_.size()) {
    throw ContractError("adam_step: " + std::to_string(params.size()) +
                        " params, " + std::to_string(grads.size()) +
                        " grads, " + std::to_string(state.m_.size()) +
                        " moment buffers");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i].rows() ||
        params[i]->cols() != grads[i].cols() ||
        params[i]->rows() != state.m_[i].rows() ||
        params[i]->cols() != state.m_[i].cols()) {
      throw ContractError("adam_step: shape mismatch at parameter " +
                          std::to_string(i));
    }
  }
  const AdamConfig& c = state.config_;
  ++state.step_;
  const double t = double(state.step_);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& m = state.m_[i];
    Matrix& v = state.v_[i];
    m = c.beta1 * m + (1.0 - c.beta1) * grads[i];
    v = c.beta2 * v + (1.0 - c.beta2) * grads[i].cwiseProduct(grads[i]);
    params[i]->array() -=
        c.learning_rate * (m.array() / correction1) /
        ((v.array() / correction2).sqrt() + c.epsilon);
  }
}

std::vector<Matrix> finite_diff_grad(const std::function<double()>& loss,
                                     std::span<Matrix* const> params,
                                     double step) {
  std::vector<Matrix> grads;
  grads.reserve(params.size());
  for (Matrix* p : params) {
    Matrix g(p->rows(), p->cols());
    for (Eigen::Index i = 0; i < p->size(); ++i) {
      double& entry = p->data()[i];
      const double saved = entry;
      entry = saved + step;
      const double plus = loss();
      entry = saved - step;
      const double minus = loss();
      entry = saved;
      g.data()[i] = (plus - minus) / (2.0 * step);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

double max_relative_error(std::span<const Matrix> analytic,
                          std::span<const Matrix> numeric, double floor) {
  if (analytic.size() != numeric.size()) {
    throw ShapeError("max_relative_error: gradient lists differ in length");
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < analytic.size(); ++k) {
    const Matrix& a = analytic[k];
    const Matrix& b = numeric[k];
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
      throw ShapeError("max_relative_error: shape mismatch at " + std::to_string(k));
    }
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const double x = a.data()[i];
      const double y = b.data()[i];
      const double denom = std::max({std::abs(x), std::abs(y), floor});
      worst = std::max(worst, std::abs(x - y) / denom);
    }
  }
  return worst;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> rows) {
  Matrix out(Eigen::Index(rows.size()), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(Eigen::Index(i)) = src.row(Eigen::Index(rows[i]));
  }
  return out;
}

}  // namespace uplift
