#ifndef UPLIFT_EVAL_H_
#define UPLIFT_EVAL_H_

// Qini curves and the mean Qini score over treatment arms.
//
// On the {control, target arm} subpopulation of size N, ranked by predicted
// uplift, the curve at prefix k is
//   v(k) = Y_T(k) - Y_C(k) * N_T(k) / N_C(k)    (v(k) = Y_T(k) while N_C(k) = 0)
// and the score is the area between the curve and the random-targeting
// diagonal, normalized by N_T * N_C:
//   Q = sum_k [v(k) - (k/N) v(N)] / (N_T * N_C).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "uplift/dataset.h"
#include "uplift/numkit.h"

namespace uplift {

class UpliftModel;

struct CurvePoint {
  double fraction = 0.0;  // k / N
  double value = 0.0;     // v(k)
};

struct QiniCurve {
  std::vector<CurvePoint> points;  // starts at (0, 0)
  std::size_t n_treated = 0;
  std::size_t n_control = 0;
};

// kStable keeps the input order among equal scores, kRandom shuffles it
// (seeded), kGrouped interpolates v linearly across each block of ties.
enum class TieMode { kStable, kRandom, kGrouped };

struct QiniOptions {
  TieMode ties = TieMode::kStable;
  std::uint64_t tie_seed = 0;
};

// `is_treated` is 1 for target-arm rows, 0 for control rows. Throws
// MetricError when either group is empty.
QiniCurve qini_curve(std::span<const double> scores, std::span<const int> outcomes,
                     std::span<const int> is_treated, const QiniOptions& options = {});

double qini_score(const QiniCurve& curve);

struct ArmQini {
  int arm = 0;
  QiniCurve curve;
  double qini = 0.0;
};

struct QiniReport {
  std::vector<ArmQini> arms;  // non-control arms only
  double mqini = 0.0;
};

struct MqiniOptions {
  QiniOptions qini;
  // Randomly permute uplift scores within each subpopulation (null model).
  bool shuffle_scores = false;
  std::uint64_t shuffle_seed = 0;
};

// Scores arm i by probs(:, i) - probs(:, control) on the rows observed under
// control or arm i. Throws MetricError naming any arm absent from `test`.
QiniReport mqini_from_predictions(const Matrix& probs, const Dataset& test, int control = 0,
                                  const MqiniOptions& options = {});
QiniReport mqini(const UpliftModel& model, const Dataset& test, int control = 0,
                 const MqiniOptions& options = {});
// Uses the stored truth matrix as the prediction (oracle upper bound).
QiniReport mqini_oracle(const Dataset& test, int control = 0, const MqiniOptions& options = {});

// {"arms":[{"arm":k,"qini":q},...],"mqini":m}
nlohmann::json report_to_json(const QiniReport& report);
// "fraction,value" rows.
std::string curve_to_csv(const QiniCurve& curve);

}  // namespace uplift

#endif  // UPLIFT_EVAL_H_
