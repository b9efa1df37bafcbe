#include "uplift/dataset.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

#include "uplift/errors.h"

namespace uplift {
namespace {

void append_double(std::string& out, double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  out.append(buf, res.ptr);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  for (auto& f : fields) {
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.remove_suffix(1);
    while (!f.empty() && f.front() == ' ') f.remove_prefix(1);
  }
  return fields;
}

[[noreturn]] void fail(std::size_t row, const std::string& what) {
  throw ParseError("row " + std::to_string(row) + ": " + what);
}

double parse_double(std::string_view field, std::size_t row, std::string_view column) {
  double v = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    fail(row, "column " + std::string(column) + ": '" + std::string(field) +
                  "' is not a number");
  }
  return v;
}

long parse_integer(std::string_view field, std::size_t row, std::string_view column) {
  long v = 0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    fail(row, "column " + std::string(column) + ": '" + std::string(field) +
                  "' is not an integer");
  }
  return v;
}

}  // namespace

void Dataset::validate() const {
  const std::size_t n = t.size();
  if (std::size_t(x.rows()) != n || y.size() != n) {
    throw ContractError("dataset: x has " + std::to_string(x.rows()) + " rows, t " +
                        std::to_string(n) + ", y " + std::to_string(y.size()));
  }
  if (arms < 2) throw ContractError("dataset: need at least 2 arms");
  for (std::size_t i = 0; i < n; ++i) {
    if (t[i] < 0 || t[i] >= arms) {
      throw ContractError("dataset: row " + std::to_string(i) + " treatment " +
                          std::to_string(t[i]) + " outside [0, " + std::to_string(arms) + ")");
    }
    if (y[i] != 0 && y[i] != 1) {
      throw ContractError("dataset: row " + std::to_string(i) + " outcome not binary");
    }
  }
  if (truth) {
    if (std::size_t(truth->rows()) != n || truth->cols() != arms) {
      throw ContractError("dataset: truth matrix must be N x arms");
    }
    if ((truth->array() <= 0.0).any() || (truth->array() >= 1.0).any()) {
      throw ContractError("dataset: truth probabilities must lie in (0, 1)");
    }
  }
  if (!x.allFinite()) throw ContractError("dataset: non-finite covariate");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.arms = arms;
  out.x = gather_rows(x, rows);
  out.t.reserve(rows.size());
  out.y.reserve(rows.size());
  for (std::size_t r : rows) {
    out.t.push_back(t[r]);
    out.y.push_back(y[r]);
  }
  if (truth) out.truth = gather_rows(*truth, rows);
  return out;
}

std::string to_csv(const Dataset& data) {
  std::string out;
  const std::size_t d = data.dim();
  for (std::size_t j = 0; j < d; ++j) out += "x" + std::to_string(j) + ",";
  out += "t,y";
  if (data.truth) {
    for (int k = 0; k < data.arms; ++k) out += ",mu" + std::to_string(k);
  }
  out += '\n';
  out.reserve(out.size() + data.size() * (d + 2) * 24);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      append_double(out, data.x(Eigen::Index(i), Eigen::Index(j)));
      out += ',';
    }
    out += std::to_string(data.t[i]);
    out += ',';
    out += std::to_string(data.y[i]);
    if (data.truth) {
      for (int k = 0; k < data.arms; ++k) {
        out += ',';
        append_double(out, (*data.truth)(Eigen::Index(i), k));
      }
    }
    out += '\n';
  }
  return out;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os << to_csv(data);
  if (!os) throw IoError("failed writing '" + path.string() + "'");
}

Dataset parse_csv(const std::string& text, std::optional<int> arms) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("row 0: missing header");
  const auto header = split_fields(line);

  std::vector<int> x_cols;
  int t_col = -1;
  int y_col = -1;
  std::vector<int> mu_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string_view name = header[c];
    if (name == "t") {
      t_col = int(c);
    } else if (name == "y") {
      y_col = int(c);
    } else if (name.size() > 1 && name[0] == 'x') {
      x_cols.push_back(int(c));
      if (name != "x" + std::to_string(x_cols.size() - 1)) {
        fail(0, "covariate columns must be x0..x{d-1} in order, found '" +
                    std::string(name) + "'");
      }
    } else if (name.size() > 2 && name.substr(0, 2) == "mu") {
      mu_cols.push_back(int(c));
      if (name != "mu" + std::to_string(mu_cols.size() - 1)) {
        fail(0, "truth columns must be mu0..mu{m-1} in order, found '" +
                    std::string(name) + "'");
      }
    } else {
      fail(0, "unexpected column '" + std::string(name) + "'");
    }
  }
  if (x_cols.empty()) fail(0, "missing covariate columns x0..");
  if (t_col < 0) fail(0, "missing column t");
  if (y_col < 0) fail(0, "missing column y");
  if (arms && !mu_cols.empty() && int(mu_cols.size()) != *arms) {
    fail(0, std::to_string(mu_cols.size()) + " truth columns but " + std::to_string(*arms) +
                " arms declared");
  }
  const std::optional<int> declared =
      arms ? arms : (mu_cols.empty() ? std::nullopt : std::optional<int>(int(mu_cols.size())));

  std::vector<double> xs;
  std::vector<double> mus;
  Dataset data;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      fail(row, "expected " + std::to_string(header.size()) + " fields, found " +
                    std::to_string(fields.size()));
    }
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
      xs.push_back(parse_double(fields[std::size_t(x_cols[j])], row, header[std::size_t(x_cols[j])]));
    }
    const long t = parse_integer(fields[std::size_t(t_col)], row, "t");
    if (t < 0) fail(row, "treatment " + std::to_string(t) + " is negative");
    if (declared && t >= *declared) {
      fail(row, "treatment " + std::to_string(t) + " outside [0, " + std::to_string(*declared) + ")");
    }
    const long y = parse_integer(fields[std::size_t(y_col)], row, "y");
    if (y != 0 && y != 1) fail(row, "outcome " + std::to_string(y) + " is not 0 or 1");
    data.t.push_back(int(t));
    data.y.push_back(int(y));
    for (int c : mu_cols) mus.push_back(parse_double(fields[std::size_t(c)], row, header[std::size_t(c)]));
  }
  const auto n = Eigen::Index(data.t.size());
  data.x = Eigen::Map<Matrix>(xs.data(), n, Eigen::Index(x_cols.size()));
  if (!mu_cols.empty()) {
    data.truth = Matrix(Eigen::Map<Matrix>(mus.data(), n, Eigen::Index(mu_cols.size())));
  }
  if (declared) {
    data.arms = *declared;
  } else {
    data.arms = data.t.empty() ? 0 : *std::max_element(data.t.begin(), data.t.end()) + 1;
  }
  return data;
}

Dataset read_csv(const std::filesystem::path& path, std::optional<int> arms) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_csv(ss.str(), arms);
}

}  // namespace uplift
