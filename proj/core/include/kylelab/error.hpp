#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace kylelab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration input. key_path is a dotted path such as "model.prior[1]".
class ConfigError : public Error {
 public:
  ConfigError(std::string key_path, const std::string& what)
      : Error(key_path.empty() ? what : key_path + ": " + what), key_path_(std::move(key_path)) {}
  const std::string& key_path() const noexcept { return key_path_; }

 private:
  std::string key_path_;
};

// Argument outside the domain of an operation (e.g. a cost queried outside A).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Node-level fixed point in the grid solver did not converge.
class InnerFixedPointError : public Error {
 public:
  InnerFixedPointError(double t, std::vector<double> x, const std::string& what)
      : Error(what), t_(t), x_(std::move(x)) {}
  double t() const noexcept { return t_; }
  const std::vector<double>& x() const noexcept { return x_; }

 private:
  double t_;
  std::vector<double> x_;
};

class PicardNonConvergence : public Error {
 public:
  PicardNonConvergence(std::vector<double> deltas, const std::string& what)
      : Error(what), deltas_(std::move(deltas)) {}
  const std::vector<double>& deltas() const noexcept { return deltas_; }

 private:
  std::vector<double> deltas_;
};

}  // namespace kylelab
