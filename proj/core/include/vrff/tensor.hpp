#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vrff {

/// Error raised when a checked value contains NaN or Inf.
struct NonFiniteError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense row-major array of 64-bit floats.
///
/// Rank is arbitrary, but all differentiable math operates on rank-2 values;
/// vectors are stored as 1xN rows. Entries are not checked for finiteness on
/// construction; NaN/Inf detection is an explicit operation (all_finite,
/// ensure_finite).
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape);  // zero-filled
  Tensor(std::vector<int64_t> shape, std::vector<double> data);

  static Tensor scalar(double value);
  static Tensor row(std::vector<double> values);  // 1xN
  static Tensor zeros(int64_t rows, int64_t cols);
  static Tensor ones(int64_t rows, int64_t cols);
  static Tensor filled(int64_t rows, int64_t cols, double value);
  static Tensor identity(int64_t n);
  static Tensor diagonal(int64_t n, double value);

  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  int rank() const { return static_cast<int>(shape_.size()); }
  bool empty() const { return data_.empty(); }

  // Rank-2 accessors; throw on other ranks.
  int64_t rows() const;
  int64_t cols() const;
  double& at(int64_t r, int64_t c);
  double at(int64_t r, int64_t c) const;

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  std::string shape_str() const;  // e.g. "3x4"

  bool all_finite() const;

private:
  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

/// Throws std::invalid_argument naming both shapes if they differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* op);

/// Throws NonFiniteError naming `context` if any entry is NaN or Inf.
void ensure_finite(const Tensor& t, const std::string& context);

}  // namespace vrff
