#pragma once

#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <string>
#include <vector>

#include "pslab/common.hpp"

namespace pslab {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

// Dense row-major n-dimensional array of doubles with an optional gradient
// buffer of the same shape. All numeric state in the library lives in
// Tensors; the autodiff graph accumulates into grad() for tensors that
// require gradients.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor full(Shape shape, double v) { return Tensor(std::move(shape), v); }

  const Shape& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](std::int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Multi-index accessor, O(rank); for tests and small maps.
  double& at(std::initializer_list<int> idx);
  double at(std::initializer_list<int> idx) const;

  bool requires_grad() const { return requires_grad_; }
  Tensor& set_requires_grad(bool on) {
    requires_grad_ = on;
    return *this;
  }

  bool has_grad() const { return !grad_.empty(); }
  // Allocates (zero-filled) on first use.
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void zero_grad();

  // Throws Error if any value is NaN/Inf. Called by graph ops when debug
  // checks are enabled.
  void assert_finite(const char* context) const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  Shape shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
  bool requires_grad_ = false;
};

// Binary tensor format: magic "PSLT", u32 version, u32 rank, u32 dims,
// u8 dtype tag (0 = f64, 1 = f32), raw little-endian values.
enum class Dtype : std::uint8_t { f64 = 0, f32 = 1 };

void write_tensor(std::ostream& out, const Tensor& t, Dtype dtype = Dtype::f64);
Tensor read_tensor(std::istream& in);
void save_tensor(const std::string& path, const Tensor& t, Dtype dtype = Dtype::f64);
Tensor load_tensor(const std::string& path);

}  // namespace pslab
