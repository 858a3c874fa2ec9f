#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dfir {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape contract violation. `dimension()` names the offending axis or field.
class ShapeError : public Error {
 public:
  ShapeError(std::string dimension, const std::string& what)
      : Error(what), dimension_(std::move(dimension)) {}
  const std::string& dimension() const noexcept { return dimension_; }

 private:
  std::string dimension_;
};

// Non-finite or otherwise unusable numeric intermediate. `stage()` names where.
class NumericError : public Error {
 public:
  NumericError(std::string stage, const std::string& what)
      : Error(what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

enum class DType : std::uint8_t { f32 = 1, f64 = 2 };

const char* dtype_name(DType dtype);
DType parse_dtype(const std::string& name);
// The wider of two dtypes; any f64 operand makes the result f64.
DType promote(DType a, DType b);

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// Dense row-major real tensor. Feature maps use (B, C, H, W).
//
// Values are held in double precision. An f32 tensor stores values that are
// exactly representable as float: every operation producing an f32 result
// rounds its output through float, so f32 paths carry float rounding error.
class Tensor {
 public:
  // Undefined tensor (no shape, no data). Used for "absent" slots such as a
  // missing bias or a gradient that does not flow.
  Tensor() = default;
  explicit Tensor(Shape shape, DType dtype = DType::f64);
  Tensor(Shape shape, std::vector<double> data, DType dtype = DType::f64);

  static Tensor full(Shape shape, double value, DType dtype = DType::f64);
  static Tensor scalar(double value, DType dtype = DType::f64);

  bool defined() const noexcept { return !shape_.empty(); }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const noexcept { return data_.size(); }
  DType dtype() const noexcept { return dtype_; }

  // (B, C, H, W) accessors; require rank 4.
  std::size_t batch() const { return dim4(0); }
  std::size_t channels() const { return dim4(1); }
  std::size_t height() const { return dim4(2); }
  std::size_t width() const { return dim4(3); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t b, std::size_t c, std::size_t h, std::size_t w);
  double at(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const;
  std::size_t offset(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const;

  // Converts to `dtype`, rounding through float for f32.
  Tensor to(DType dtype) const;
  // Reinterprets the extents; element count must match.
  Tensor reshaped(Shape shape) const;
  // Rounds stored values to the precision of dtype() (no-op for f64).
  void round_to_dtype();
  void set_dtype(DType dtype);

  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.dtype_ == b.dtype_ && a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::size_t dim4(std::size_t axis) const;

  Shape shape_;
  std::vector<double> data_;
  DType dtype_ = DType::f64;
};

// Complex 2-D spectrum of a (B, C, H, W) feature map, transformed over the last
// two axes. Values are row-major in the same layout as the source tensor.
class ComplexSpectrum {
 public:
  using value_type = std::complex<double>;

  ComplexSpectrum() = default;
  explicit ComplexSpectrum(Shape shape, DType dtype = DType::f64);
  ComplexSpectrum(Shape shape, std::vector<value_type> data, DType dtype = DType::f64);

  bool defined() const noexcept { return !shape_.empty(); }
  const Shape& shape() const noexcept { return shape_; }
  std::size_t batch() const { return shape_.at(0); }
  std::size_t channels() const { return shape_.at(1); }
  std::size_t height() const { return shape_.at(2); }
  std::size_t width() const { return shape_.at(3); }
  std::size_t numel() const noexcept { return data_.size(); }
  DType dtype() const noexcept { return dtype_; }

  std::span<value_type> data() noexcept { return data_; }
  std::span<const value_type> data() const noexcept { return data_; }
  value_type& operator[](std::size_t i) { return data_[i]; }
  const value_type& operator[](std::size_t i) const { return data_[i]; }

  value_type& at(std::size_t b, std::size_t c, std::size_t u, std::size_t v);
  const value_type& at(std::size_t b, std::size_t c, std::size_t u, std::size_t v) const;

  void round_to_dtype();
  bool all_finite() const;

 private:
  Shape shape_;
  std::vector<value_type> data_;
  DType dtype_ = DType::f64;
};

// Throws ShapeError unless `t` is rank 4.
void require_rank4(const Tensor& t, const char* what);

}  // namespace dfir
