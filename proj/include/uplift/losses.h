#ifndef UPLIFT_LOSSES_H_
#define UPLIFT_LOSSES_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

#include "uplift/numkit.h"

namespace uplift {

inline constexpr double kProbClamp = 1e-7;

struct BceResult {
  double loss = 0.0;
  Matrix logit_grad;  // [N x 1], (prob - y) / N
};

// Mean negative log-likelihood. Probabilities are clamped to
// [1e-7, 1 - 1e-7] before the log; the logit gradient uses the raw values.
BceResult bce_loss(std::span<const double> probs, std::span<const double> labels);

struct PairDiscrepancy {
  double value = 0.0;
  Matrix grad_a;
  Matrix grad_b;
};

struct MmdOptions {
  bool unbiased = true;
  // The median-distance bandwidth is taken over at most this many pooled
  // rows (evenly strided) so large samples stay tractable.
  std::size_t median_sample_cap = 2048;
};

// Squared MMD with an RBF kernel exp(-|x - y|^2 / (2 sigma^2)), sigma the
// median pairwise distance of the pooled sample (1 if that median is 0).
// Gradients include the dependence of sigma on the inputs.
PairDiscrepancy mmd_rbf(const Matrix& a, const Matrix& b, const MmdOptions& options = {});

// Mean over columns of the exact 1-D W1 distance between equally sized
// samples: mean |sorted(a_col) - sorted(b_col)|.
PairDiscrepancy wasserstein_1d(const Matrix& a, const Matrix& b);

enum class DiscKind { kNone, kMmd, kWass };
enum class Pairing { kAllPairs, kControlVsEach };

std::string_view to_string(DiscKind kind);
DiscKind parse_disc_kind(std::string_view name);
std::string_view to_string(Pairing pairing);
Pairing parse_pairing(std::string_view name);

struct MultiDiscrepancy {
  double value = 0.0;
  Matrix grad;  // [N x h], gradient w.r.t. every row of phi
  int pairs = 0;
};

struct DiscrepancyOptions {
  DiscKind kind = DiscKind::kWass;
  Pairing pairing = Pairing::kAllPairs;
  MmdOptions mmd;
  // Seeds the subsampling that equalizes group sizes for Wasserstein.
  std::uint64_t resample_seed = 0;
};

// Average pairwise discrepancy between the representation groups induced by
// the observed treatment. Groups with fewer than 2 rows are skipped; with no
// usable pair the result is 0 and a warning is logged.
MultiDiscrepancy discrepancy_multi(const Matrix& phi, std::span<const int> treatments,
                                   int arms, const DiscrepancyOptions& options);

}  // namespace uplift

#endif  // UPLIFT_LOSSES_H_
