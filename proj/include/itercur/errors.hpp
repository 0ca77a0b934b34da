#pragma once

#include <stdexcept>
#include <string>

namespace itercur {

// Exit-code contract used by the CLI: 0 success, 2 validation,
// 3 ingestion, 4 numerical failure.
enum class errc : int {
  ok = 0,
  validation = 2,
  ingestion = 3,
  numerical = 4,
};

class error : public std::runtime_error {
public:
  error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  errc code() const noexcept { return code_; }

private:
  errc code_;
};

// Bad arguments, incompatible dimensions, invalid configuration.
class validation_error : public error {
public:
  explicit validation_error(const std::string& what) : error(errc::validation, what) {}
};

// File parsing / unsupported formats.
class ingest_error : public error {
public:
  explicit ingest_error(const std::string& what) : error(errc::ingestion, what) {}
};

// Rank deficiency, singular interpolation systems, convergence aborts.
class numerical_error : public error {
public:
  explicit numerical_error(const std::string& what) : error(errc::numerical, what) {}
};

// Raised by deim() when the interpolation system U(s,1:j-1) is singular;
// carries the failing step so callers can fall back per index.
class deim_singular_error : public numerical_error {
public:
  explicit deim_singular_error(int step)
      : numerical_error("deim: singular interpolation system at step " + std::to_string(step)),
        step_(step) {}
  int step() const noexcept { return step_; }

private:
  int step_;
};

}  // namespace itercur
