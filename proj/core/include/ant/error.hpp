#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ant {

// Coarse error classes; the CLI maps them onto exit codes 2/3/4.
enum class ErrorKind { usage, data, compute };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class ComputeError : public Error {
 public:
  explicit ComputeError(const std::string& what) : Error(ErrorKind::compute, what) {}
};

}  // namespace ant
