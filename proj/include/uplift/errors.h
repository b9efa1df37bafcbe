#ifndef UPLIFT_ERRORS_H_
#define UPLIFT_ERRORS_H_

#include <stdexcept>
#include <string>

namespace uplift {

// Base for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A precondition on arguments or object state was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid or incompatible configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. The message carries the offending row.
class ParseError : public Error {
 public:
  using Error::Error;
};

// The evaluation data cannot support the requested metric.
class MetricError : public Error {
 public:
  using Error::Error;
};

// Training diverged (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace uplift

#endif  // UPLIFT_ERRORS_H_
