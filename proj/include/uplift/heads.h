#ifndef UPLIFT_HEADS_H_
#define UPLIFT_HEADS_H_

// Treatment-adaptation heads. Each maps a hidden representation phi [N x h]
// plus one observed treatment per row to a logit per row, and can score every
// arm for counterfactual prediction.
//
//   FA   logit = g(concat(phi, onehot(t)))
//   SA   logit = g_t(phi), one branch network per arm
//   OFA  logit = sum_j a_j(phi) * P_j(u(t)), P_j Legendre, u(t) in [-1, 1]

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "uplift/numkit.h"

namespace uplift {

enum class HeadKind { kFa, kSa, kOfa };

std::string_view to_string(HeadKind kind);
HeadKind parse_head_kind(std::string_view name);

// Arm index on an evenly spaced grid over [-1, 1]; index 0 -> -1,
// index m-1 -> +1. Requires m >= 2 and 0 <= index < m.
double treatment_to_scalar(int index, int arms);

// [P_0(t), ..., P_p(t)] by the three-term recurrence
// (k+1) P_{k+1} = (2k+1) t P_k - k P_{k-1}.
std::vector<double> legendre_eval(int degree, double t);

struct HeadConfig {
  HeadKind kind = HeadKind::kOfa;
  // Hidden widths of the head network (per branch for SA).
  std::vector<std::size_t> hidden;
  // OFA polynomial degree; negative means arms - 1.
  int degree = -1;
  Activation activation = Activation::kElu;
};

struct HeadTape {
  std::vector<Tape> tapes;
  // SA: rows routed to each branch. FA/OFA: unused.
  std::vector<std::vector<std::size_t>> routes;
  // OFA: Legendre basis per row [N x (p+1)].
  Matrix basis;
  std::size_t rows = 0;
  std::size_t phi_cols = 0;
};

struct HeadGrads {
  std::vector<Matrix> params;  // ordered like TreatmentHead::params()
  Matrix phi_grad;             // [N x h]
};

class TreatmentHead {
 public:
  virtual ~TreatmentHead() = default;

  virtual HeadKind kind() const = 0;
  std::size_t in_dim() const { return in_dim_; }
  std::size_t arms() const { return arms_; }

  // Logits [N x 1] for the observed treatments. Records a tape when `tape`
  // is non-null.
  virtual Matrix forward(const Matrix& phi, std::span<const int> treatments,
                         HeadTape* tape, OpCounter* counter = nullptr) const = 0;
  virtual HeadGrads backward(const HeadTape& tape,
                             const Matrix& logit_grad) const = 0;
  // Logits [N x arms] with every row evaluated under every arm.
  virtual Matrix logits_all(const Matrix& phi) const = 0;

  virtual std::vector<Matrix*> params() = 0;
  virtual std::vector<const Matrix*> params() const = 0;
  std::size_t param_count() const;

  virtual std::unique_ptr<TreatmentHead> clone() const = 0;

 protected:
  TreatmentHead(std::size_t in_dim, std::size_t arms) : in_dim_(in_dim), arms_(arms) {}
  void check_inputs(const Matrix& phi, std::span<const int> treatments) const;

 private:
  std::size_t in_dim_;
  std::size_t arms_;
};

class FeatureAdaptationHead final : public TreatmentHead {
 public:
  FeatureAdaptationHead(std::size_t in_dim, std::size_t arms,
                        std::span<const std::size_t> hidden,
                        Activation activation, std::uint64_t seed);
  FeatureAdaptationHead(std::size_t in_dim, std::size_t arms, DenseNet net);

  HeadKind kind() const override { return HeadKind::kFa; }
  Matrix forward(const Matrix& phi, std::span<const int> treatments,
                 HeadTape* tape, OpCounter* counter = nullptr) const override;
  HeadGrads backward(const HeadTape& tape, const Matrix& logit_grad) const override;
  Matrix logits_all(const Matrix& phi) const override;
  std::vector<Matrix*> params() override { return net_.params(); }
  std::vector<const Matrix*> params() const override { return net_.params(); }
  std::unique_ptr<TreatmentHead> clone() const override;

  const DenseNet& net() const { return net_; }

 private:
  Matrix concat(const Matrix& phi, std::span<const int> treatments) const;
  DenseNet net_;
};

class StructureAdaptationHead final : public TreatmentHead {
 public:
  StructureAdaptationHead(std::size_t in_dim, std::size_t arms,
                          std::span<const std::size_t> hidden,
                          Activation activation, std::uint64_t seed);
  StructureAdaptationHead(std::size_t in_dim, std::vector<DenseNet> branches);

  HeadKind kind() const override { return HeadKind::kSa; }
  Matrix forward(const Matrix& phi, std::span<const int> treatments,
                 HeadTape* tape, OpCounter* counter = nullptr) const override;
  HeadGrads backward(const HeadTape& tape, const Matrix& logit_grad) const override;
  Matrix logits_all(const Matrix& phi) const override;
  std::vector<Matrix*> params() override;
  std::vector<const Matrix*> params() const override;
  std::unique_ptr<TreatmentHead> clone() const override;

  const std::vector<DenseNet>& branches() const { return branches_; }

 private:
  std::vector<DenseNet> branches_;
};

class OrthogonalFunctionHead final : public TreatmentHead {
 public:
  OrthogonalFunctionHead(std::size_t in_dim, std::size_t arms, int degree,
                         std::span<const std::size_t> hidden,
                         Activation activation, std::uint64_t seed);
  OrthogonalFunctionHead(std::size_t in_dim, std::size_t arms, int degree,
                         DenseNet coefficients);

  HeadKind kind() const override { return HeadKind::kOfa; }
  int degree() const { return degree_; }

  Matrix forward(const Matrix& phi, std::span<const int> treatments,
                 HeadTape* tape, OpCounter* counter = nullptr) const override;
  HeadGrads backward(const HeadTape& tape, const Matrix& logit_grad) const override;
  Matrix logits_all(const Matrix& phi) const override;
  // Logits for arbitrary scaled treatments u in [-1, 1], one per row.
  Matrix forward_scaled(const Matrix& phi, std::span<const double> scaled) const;
  // Coefficients a_j(phi) [N x (p+1)].
  Matrix coefficients(const Matrix& phi) const { return net_.infer(phi); }

  std::vector<Matrix*> params() override { return net_.params(); }
  std::vector<const Matrix*> params() const override { return net_.params(); }
  std::unique_ptr<TreatmentHead> clone() const override;

  const DenseNet& net() const { return net_; }

 private:
  int degree_;
  DenseNet net_;
  Matrix arm_basis_;  // [arms x (p+1)], row k = Legendre values at u(k)
};

// Builds a head of the configured kind with freshly initialized weights.
std::unique_ptr<TreatmentHead> make_head(const HeadConfig& config,
                                         std::size_t in_dim, std::size_t arms,
                                         std::uint64_t seed);

}  // namespace uplift

#endif  // UPLIFT_HEADS_H_
