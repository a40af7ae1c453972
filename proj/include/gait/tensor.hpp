#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gait {

// Exit-code buckets for the CLI: usage 1, data 2, numeric 3.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : UsageError {
  using UsageError::UsageError;
};

struct Shape4 {
  long n = 0, c = 0, h = 0, w = 0;
  bool operator==(const Shape4&) const = default;
  long size() const { return n * c * h * w; }
  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

/// Dense row-major rank-4 tensor (n outermost, w innermost), double precision.
/// A tensor with w == 1 doubles as the rank-3 view (n, c, h).
class Tensor4 {
 public:
  Tensor4() = default;
  explicit Tensor4(Shape4 s, double fill = 0.0)
      : shape_(s), data_(static_cast<size_t>(check_shape(s)), fill) {}
  Tensor4(Shape4 s, std::vector<double> values) : shape_(s), data_(std::move(values)) {
    if (static_cast<long>(data_.size()) != s.size())
      throw ShapeError("Tensor4: " + std::to_string(data_.size()) +
                       " values for shape " + s.str());
  }

  const Shape4& shape() const { return shape_; }
  long n() const { return shape_.n; }
  long c() const { return shape_.c; }
  long h() const { return shape_.h; }
  long w() const { return shape_.w; }
  long size() const { return static_cast<long>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& at(long i, long j, long k, long l) { return data_[idx(i, j, k, l)]; }
  double at(long i, long j, long k, long l) const { return data_[idx(i, j, k, l)]; }
  double& operator[](long flat) { return data_[flat]; }
  double operator[](long flat) const { return data_[flat]; }

  long idx(long i, long j, long k, long l) const {
    return ((i * shape_.c + j) * shape_.h + k) * shape_.w + l;
  }

  bool same_shape(const Tensor4& o) const { return shape_ == o.shape_; }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  static long check_shape(const Shape4& s) {
    if (s.n <= 0 || s.c <= 0 || s.h <= 0 || s.w <= 0)
      throw ShapeError("Tensor4: zero-sized dimension in " + s.str());
    return s.size();
  }
  Shape4 shape_;
  std::vector<double> data_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

}  // namespace gait
