#include "vrff/tensor.hpp"

#include <cmath>
#include <sstream>

namespace vrff {

namespace {

int64_t checked_element_count(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) {
      std::ostringstream os;
      os << "tensor dimensions must be positive, got " << d;
      throw std::invalid_argument(os.str());
    }
    n *= d;
  }
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<int64_t> shape)
    : shape_(std::move(shape)),
      data_(static_cast<size_t>(checked_element_count(shape_)), 0.0) {}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const int64_t expected = checked_element_count(shape_);
  if (expected != static_cast<int64_t>(data_.size())) {
    std::ostringstream os;
    os << "tensor data length " << data_.size() << " does not match shape "
       << shape_str() << " (" << expected << " elements)";
    throw std::invalid_argument(os.str());
  }
}

Tensor Tensor::scalar(double value) { return Tensor({1, 1}, {value}); }

Tensor Tensor::row(std::vector<double> values) {
  const int64_t n = static_cast<int64_t>(values.size());
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::zeros(int64_t rows, int64_t cols) { return Tensor({rows, cols}); }

Tensor Tensor::ones(int64_t rows, int64_t cols) {
  return filled(rows, cols, 1.0);
}

Tensor Tensor::filled(int64_t rows, int64_t cols, double value) {
  Tensor t({rows, cols});
  for (auto& x : t.data_) x = value;
  return t;
}

Tensor Tensor::identity(int64_t n) { return diagonal(n, 1.0); }

Tensor Tensor::diagonal(int64_t n, double value) {
  Tensor t({n, n});
  for (int64_t i = 0; i < n; ++i) t.at(i, i) = value;
  return t;
}

int64_t Tensor::rows() const {
  if (rank() != 2) throw std::invalid_argument("rows(): tensor rank is not 2");
  return shape_[0];
}

int64_t Tensor::cols() const {
  if (rank() != 2) throw std::invalid_argument("cols(): tensor rank is not 2");
  return shape_[1];
}

double& Tensor::at(int64_t r, int64_t c) {
  return data_[static_cast<size_t>(r * cols() + c)];
}

double Tensor::at(int64_t r, int64_t c) const {
  return data_[static_cast<size_t>(r * cols() + c)];
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << 'x';
    os << shape_[i];
  }
  if (shape_.empty()) os << "scalar";
  return os.str();
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    std::ostringstream os;
    os << op << ": shape mismatch " << a.shape_str() << " vs " << b.shape_str();
    throw std::invalid_argument(os.str());
  }
}

void ensure_finite(const Tensor& t, const std::string& context) {
  if (!t.all_finite()) {
    throw NonFiniteError(context + ": tensor contains NaN or Inf");
  }
}

}  // namespace vrff
