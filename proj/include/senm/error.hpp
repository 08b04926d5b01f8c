#pragma once

#include <stdexcept>
#include <string>

namespace senm {

/// Coarse classification used by the CLI to choose an exit code.
enum class ErrorKind {
  validation,  ///< bad configuration, arguments or missing files
  data,        ///< well-formed configuration but unusable input data
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

}  // namespace senm
