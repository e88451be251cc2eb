#ifndef DDGAN_ERRORS_HPP_
#define DDGAN_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace ddgan {

/// Shape/extent mismatch. `axis()` names the offending axis, or -1 when the
/// problem is the rank itself.
class DimensionError : public std::invalid_argument {
 public:
  DimensionError(const std::string& op, int axis, const std::string& what)
      : std::invalid_argument(op + ": axis " + std::to_string(axis) + ": " + what), op_(op), axis_(axis) {}

  const std::string& op() const { return op_; }
  int axis() const { return axis_; }

 private:
  std::string op_;
  int axis_;
};

/// Invalid configuration or model specification. `key()` names the offending
/// setting when there is one.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what, std::string key = {})
      : std::invalid_argument(what), key_(std::move(key)) {}

  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

class IoError : public std::runtime_error {
 public:
  IoError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}

  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Non-finite losses or other numerical breakdown during training.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ddgan

#endif  // DDGAN_ERRORS_HPP_
