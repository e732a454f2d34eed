#pragma once

#include <stdexcept>
#include <string>

namespace psqrnn {

// Base for every error raised by the library. The CLI maps the subclasses
// onto exit codes (configuration -> 1, data/shape/lookup -> 2,
// domain/training/search -> 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class LookupError : public DataError {
 public:
  using DataError::DataError;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t stage, std::size_t iteration)
      : Error(what + " (stage " + std::to_string(stage) + ", iteration " +
              std::to_string(iteration) + ")"),
        stage_(stage),
        iteration_(iteration) {}

  std::size_t stage() const noexcept { return stage_; }
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t stage_;
  std::size_t iteration_;
};

class SearchError : public Error {
 public:
  using Error::Error;
};

}  // namespace psqrnn
