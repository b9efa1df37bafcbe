#ifndef UPLIFT_DATASET_H_
#define UPLIFT_DATASET_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uplift/numkit.h"

namespace uplift {

// Covariates, observed treatment and binary outcome per row, plus optional
// true response probabilities under every arm.
struct Dataset {
  Matrix x;                    // [N x d]
  std::vector<int> t;          // arm index in [0, arms)
  std::vector<int> y;          // 0 or 1
  std::optional<Matrix> truth; // [N x arms]
  int arms = 0;

  std::size_t size() const { return t.size(); }
  std::size_t dim() const { return std::size_t(x.cols()); }
  bool has_truth() const { return truth.has_value(); }

  // Throws ContractError on any broken invariant.
  void validate() const;
  // Rows selected by index, in the given order.
  Dataset subset(std::span<const std::size_t> rows) const;
  std::vector<double> labels() const { return {y.begin(), y.end()}; }
};

// CSV with header x0,...,x{d-1},t,y[,mu0,...,mu{m-1}]; floats printed with
// 17 significant digits.
std::string to_csv(const Dataset& data);
void write_csv(const Dataset& data, const std::filesystem::path& path);

// Parses the CSV layout above. The arm count is `arms` when given, else the
// number of mu columns when present, else max(t) + 1. Errors name the row.
Dataset parse_csv(const std::string& text, std::optional<int> arms = std::nullopt);
Dataset read_csv(const std::filesystem::path& path, std::optional<int> arms = std::nullopt);

}  // namespace uplift

#endif  // UPLIFT_DATASET_H_
