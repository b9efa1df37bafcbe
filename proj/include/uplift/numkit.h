#ifndef UPLIFT_NUMKIT_H_
#define UPLIFT_NUMKIT_H_

// Dense feed-forward networks with hand-written backpropagation, Adam, and a
// central-difference gradient oracle. Everything is double precision.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace uplift {

// Row-major so that a batch is N rows of features.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Activation { kIdentity, kRelu, kElu, kSigmoid };

std::string_view to_string(Activation activation);
// Throws ConfigError on an unknown name.
Activation parse_activation(std::string_view name);

// Mixes `stream` into `seed` (splitmix64) so sub-components get independent
// RNG streams from one user-facing seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Weight matrix [fan_in x fan_out] with entries N(0, 1) / sqrt(fan_in).
Matrix init_params(std::size_t fan_in, std::size_t fan_out, std::uint64_t seed);
// Zero bias row [1 x n].
Matrix init_bias(std::size_t n);

// Counts floating-point operations issued by forward passes.
struct OpCounter {
  std::uint64_t flops = 0;
};

struct Layer {
  Matrix weight;  // [in x out]
  Matrix bias;    // [1 x out]
  Activation activation = Activation::kIdentity;
};

// Everything backward() needs from a forward pass.
struct Tape {
  std::uint64_t net_id = 0;
  std::vector<Matrix> inputs;           // input to layer k
  std::vector<Matrix> pre_activations;  // affine output of layer k
  Matrix output;
};

struct ForwardResult {
  Matrix output;
  Tape tape;
};

struct BackwardResult {
  // Ordered like DenseNet::params(): W0, b0, W1, b1, ...
  std::vector<Matrix> param_grads;
  Matrix input_grad;
};

class DenseNet {
 public:
  DenseNet();
  // `dims` = {in, h1, ..., out}. Hidden layers use `hidden`, the last layer
  // uses `output`.
  DenseNet(std::span<const std::size_t> dims, Activation hidden,
           Activation output, std::uint64_t seed);
  explicit DenseNet(std::vector<Layer> layers);

  // Copies are new networks: tapes from one are rejected by the other.
  DenseNet(const DenseNet& other);
  DenseNet& operator=(const DenseNet& other);
  DenseNet(DenseNet&&) noexcept = default;
  DenseNet& operator=(DenseNet&&) noexcept = default;

  ForwardResult forward(const Matrix& batch, OpCounter* counter = nullptr) const;
  // Forward pass without recording a tape.
  Matrix infer(const Matrix& batch, OpCounter* counter = nullptr) const;
  BackwardResult backward(const Tape& tape, const Matrix& output_grad) const;

  std::vector<Matrix*> params();
  std::vector<const Matrix*> params() const;
  std::size_t param_count() const;

  std::size_t in_dim() const;
  std::size_t out_dim() const;
  bool empty() const { return layers_.empty(); }
  const std::vector<Layer>& layers() const { return layers_; }

 private:
  void validate() const;

  std::vector<Layer> layers_;
  std::uint64_t id_;
};

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(std::span<Matrix* const> params, AdamConfig config);

  const AdamConfig& config() const { return config_; }
  std::uint64_t step_count() const { return step_; }
  const std::vector<Matrix>& first_moments() const { return m_; }
  const std::vector<Matrix>& second_moments() const { return v_; }

 private:
  friend void adam_step(std::span<Matrix* const>, std::span<const Matrix>,
                        AdamState&);
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

// Bias-corrected Adam update in place. Throws ContractError when params,
// grads and state disagree in count or shape.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads,
               AdamState& state);

// Central differences (f(θ+h) - f(θ-h)) / 2h for every entry of every
// parameter. `loss` must read the parameters through the given pointers;
// each entry is restored after probing.
std::vector<Matrix> finite_diff_grad(const std::function<double()>& loss,
                                     std::span<Matrix* const> params,
                                     double step = 1e-5);

// max |a - b| / max(|a|, |b|, floor) over all entries.
double max_relative_error(std::span<const Matrix> analytic,
                          std::span<const Matrix> numeric, double floor = 1e-6);

bool all_finite(const Matrix& m);

// Rows of `src` selected by `rows`, in that order.
Matrix gather_rows(const Matrix& src, std::span<const std::size_t> rows);

}  // namespace uplift

#endif  // UPLIFT_NUMKIT_H_
