#include "uplift/eval.h"

#include <algorithm>
#include <charconv>
#include <numeric>
#include <random>

#include "uplift/errors.h"
#include "uplift/model.h"

namespace uplift {

QiniCurve qini_curve(std::span<const double> scores, std::span<const int> outcomes,
                     std::span<const int> is_treated, const QiniOptions& options) {
  const std::size_t n = scores.size();
  if (outcomes.size() != n || is_treated.size() != n) {
    throw ShapeError("qini_curve: scores, outcomes and treatment flags differ in length");
  }
  QiniCurve curve;
  for (int flag : is_treated) (flag != 0 ? curve.n_treated : curve.n_control) += 1;
  if (curve.n_treated == 0) throw MetricError("qini_curve: no treated rows");
  if (curve.n_control == 0) throw MetricError("qini_curve: no control rows");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t(0));
  if (options.ties == TieMode::kRandom) {
    std::mt19937_64 rng(options.tie_seed);
    std::shuffle(order.begin(), order.end(), rng);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  curve.points.reserve(n + 1);
  curve.points.push_back({0.0, 0.0});
  double y_t = 0.0, y_c = 0.0, n_t = 0.0, n_c = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = order[k];
    if (is_treated[i] != 0) {
      n_t += 1.0;
      y_t += outcomes[i];
    } else {
      n_c += 1.0;
      y_c += outcomes[i];
    }
    const double v = n_c > 0.0 ? y_t - y_c * n_t / n_c : y_t;
    curve.points.push_back({double(k + 1) / double(n), v});
  }
  if (options.ties == TieMode::kGrouped) {
    // Replace each run of equal scores by the chord between its end points.
    std::size_t begin = 0;
    while (begin < n) {
      std::size_t end = begin + 1;
      while (end < n && scores[order[end]] == scores[order[begin]]) ++end;
      const double v0 = curve.points[begin].value;
      const double v1 = curve.points[end].value;
      for (std::size_t k = begin + 1; k < end; ++k) {
        curve.points[k].value = v0 + (v1 - v0) * double(k - begin) / double(end - begin);
      }
      begin = end;
    }
  }
  return curve;
}

double qini_score(const QiniCurve& curve) {
  if (curve.points.size() < 2) return 0.0;
  const double n = double(curve.points.size() - 1);
  const double final_value = curve.points.back().value;
  double area = 0.0;
  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    area += curve.points[k].value - (double(k) / n) * final_value;
  }
  return area / (double(curve.n_treated) * double(curve.n_control));
}

QiniReport mqini_from_predictions(const Matrix& probs, const Dataset& test, int control,
                                  const MqiniOptions& options) {
  if (std::size_t(probs.rows()) != test.size() || probs.cols() != test.arms) {
    throw ShapeError("mqini: predictions are " + std::to_string(probs.rows()) + "x" +
                     std::to_string(probs.cols()) + ", test data needs " +
                     std::to_string(test.size()) + "x" + std::to_string(test.arms));
  }
  if (control < 0 || control >= test.arms) throw MetricError("mqini: invalid control arm");
  std::vector<std::size_t> counts(std::size_t(test.arms), 0);
  for (int t : test.t) ++counts[std::size_t(t)];
  for (int k = 0; k < test.arms; ++k) {
    if (counts[std::size_t(k)] == 0) {
      throw MetricError("mqini: arm " + std::to_string(k) + " has no rows in the test data");
    }
  }

  QiniReport report;
  for (int arm = 0; arm < test.arms; ++arm) {
    if (arm == control) continue;
    std::vector<double> scores;
    std::vector<int> outcomes;
    std::vector<int> treated;
    for (std::size_t i = 0; i < test.size(); ++i) {
      if (test.t[i] != arm && test.t[i] != control) continue;
      scores.push_back(probs(Eigen::Index(i), arm) - probs(Eigen::Index(i), control));
      outcomes.push_back(test.y[i]);
      treated.push_back(test.t[i] == arm ? 1 : 0);
    }
    if (options.shuffle_scores) {
      std::mt19937_64 rng(derive_seed(options.shuffle_seed, std::uint64_t(arm)));
      std::shuffle(scores.begin(), scores.end(), rng);
    }
    ArmQini aq;
    aq.arm = arm;
    aq.curve = qini_curve(scores, outcomes, treated, options.qini);
    aq.qini = qini_score(aq.curve);
    report.mqini += aq.qini;
    report.arms.push_back(std::move(aq));
  }
  report.mqini /= double(report.arms.size());
  return report;
}

QiniReport mqini(const UpliftModel& model, const Dataset& test, int control,
                 const MqiniOptions& options) {
  if (model.dim() != test.dim() || model.arms() != std::size_t(test.arms)) {
    throw ConfigError("mqini: model (d=" + std::to_string(model.dim()) + ", m=" +
                      std::to_string(model.arms()) + ") does not match test data (d=" +
                      std::to_string(test.dim()) + ", m=" + std::to_string(test.arms) + ")");
  }
  return mqini_from_predictions(model.predict_all(test.x), test, control, options);
}

QiniReport mqini_oracle(const Dataset& test, int control, const MqiniOptions& options) {
  if (!test.truth) throw MetricError("mqini_oracle: test data carries no truth matrix");
  return mqini_from_predictions(*test.truth, test, control, options);
}

nlohmann::json report_to_json(const QiniReport& report) {
  nlohmann::json arms = nlohmann::json::array();
  for (const ArmQini& a : report.arms) arms.push_back({{"arm", a.arm}, {"qini", a.qini}});
  return {{"arms", arms}, {"mqini", report.mqini}};
}

std::string curve_to_csv(const QiniCurve& curve) {
  std::string out = "fraction,value\n";
  char buf[40];
  for (const CurvePoint& p : curve.points) {
    auto r = std::to_chars(buf, buf + sizeof(buf), p.fraction, std::chars_format::general, 17);
    out.append(buf, r.ptr);
    out += ',';
    r = std::to_chars(buf, buf + sizeof(buf), p.value, std::chars_format::general, 17);
    out.append(buf, r.ptr);
    out += '\n';
  }
  return out;
}

}  // namespace uplift
