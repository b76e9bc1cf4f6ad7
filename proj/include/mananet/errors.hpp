#pragma once

#include <stdexcept>
#include <string>

namespace mananet {

/// Bad inputs: violated preconditions, malformed data, dimension mismatches.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// File-level problems (unreadable path, malformed row). Carries a message
/// that names the offending line or date where one is known.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Training produced a non-finite loss.
class DivergedError : public std::runtime_error {
 public:
  explicit DivergedError(const std::string& what) : std::runtime_error(what) {}
};

/// Every trial of a grid search diverged.
class TuningFailedError : public std::runtime_error {
 public:
  explicit TuningFailedError(const std::string& what) : std::runtime_error(what) {}
};

/// Sharpe ratio requested on a return series with zero variance.
class UndefinedSharpeError : public std::runtime_error {
 public:
  explicit UndefinedSharpeError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mananet
