#include "dfir/tensor.hpp"

#include <cmath>
#include <sstream>

namespace dfir {

const char* dtype_name(DType dtype) {
  return dtype == DType::f32 ? "f32" : "f64";
}

DType parse_dtype(const std::string& name) {
  if (name == "f32") return DType::f32;
  if (name == "f64") return DType::f64;
  throw Error("unknown dtype '" + name + "' (expected f32 or f64)");
}

DType promote(DType a, DType b) {
  return (a == DType::f64 || b == DType::f64) ? DType::f64 : DType::f32;
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("rank", "tensor shape must have at least one axis");
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == 0) {
      throw ShapeError("axis " + std::to_string(i),
                       "tensor extent " + std::to_string(i) + " is zero in " + shape_string(shape));
    }
  }
}

}  // namespace

Tensor::Tensor(Shape shape, DType dtype) : shape_(std::move(shape)), dtype_(dtype) {
  validate_shape(shape_);
  data_.assign(shape_numel(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data, DType dtype)
    : shape_(std::move(shape)), data_(std::move(data)), dtype_(dtype) {
  validate_shape(shape_);
  if (data_.size() != shape_numel(shape_)) {
    throw ShapeError("data", "data length " + std::to_string(data_.size()) +
                                 " does not match shape " + shape_string(shape_));
  }
  round_to_dtype();
}

Tensor Tensor::full(Shape shape, double value, DType dtype) {
  Tensor t(std::move(shape), dtype);
  for (double& v : t.data_) v = value;
  t.round_to_dtype();
  return t;
}

Tensor Tensor::scalar(double value, DType dtype) { return full({1}, value, dtype); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis),
                     "axis " + std::to_string(axis) + " out of range for shape " + shape_string(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::dim4(std::size_t axis) const {
  if (shape_.size() != 4) {
    throw ShapeError("rank", "expected a (B, C, H, W) tensor, got shape " + shape_string(shape_));
  }
  return shape_[axis];
}

std::size_t Tensor::offset(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const {
  return ((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
}

double& Tensor::at(std::size_t b, std::size_t c, std::size_t h, std::size_t w) {
  return data_[offset(b, c, h, w)];
}

double Tensor::at(std::size_t b, std::size_t c, std::size_t h, std::size_t w) const {
  return data_[offset(b, c, h, w)];
}

Tensor Tensor::to(DType dtype) const {
  Tensor out = *this;
  out.dtype_ = dtype;
  out.round_to_dtype();
  return out;
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw ShapeError("shape", "cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  Tensor out = *this;
  out.shape_ = std::move(shape);
  validate_shape(out.shape_);
  return out;
}

void Tensor::round_to_dtype() {
  if (dtype_ != DType::f32) return;
  for (double& v : data_) v = static_cast<double>(static_cast<float>(v));
}

void Tensor::set_dtype(DType dtype) {
  dtype_ = dtype;
  round_to_dtype();
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

ComplexSpectrum::ComplexSpectrum(Shape shape, DType dtype) : shape_(std::move(shape)), dtype_(dtype) {
  if (shape_.size() != 4) throw ShapeError("rank", "spectrum shape must be (B, C, H, W)");
  validate_shape(shape_);
  data_.assign(shape_numel(shape_), value_type{});
}

ComplexSpectrum::ComplexSpectrum(Shape shape, std::vector<value_type> data, DType dtype)
    : shape_(std::move(shape)), data_(std::move(data)), dtype_(dtype) {
  if (shape_.size() != 4) throw ShapeError("rank", "spectrum shape must be (B, C, H, W)");
  validate_shape(shape_);
  if (data_.size() != shape_numel(shape_)) {
    throw ShapeError("data", "spectrum data length does not match shape " + shape_string(shape_));
  }
  round_to_dtype();
}

ComplexSpectrum::value_type& ComplexSpectrum::at(std::size_t b, std::size_t c, std::size_t u,
                                                 std::size_t v) {
  return data_[((b * shape_[1] + c) * shape_[2] + u) * shape_[3] + v];
}

const ComplexSpectrum::value_type& ComplexSpectrum::at(std::size_t b, std::size_t c, std::size_t u,
                                                       std::size_t v) const {
  return data_[((b * shape_[1] + c) * shape_[2] + u) * shape_[3] + v];
}

void ComplexSpectrum::round_to_dtype() {
  if (dtype_ != DType::f32) return;
  for (auto& z : data_) {
    z = {static_cast<double>(static_cast<float>(z.real())),
         static_cast<double>(static_cast<float>(z.imag()))};
  }
}

bool ComplexSpectrum::all_finite() const {
  for (const auto& z : data_) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  }
  return true;
}

void require_rank4(const Tensor& t, const char* what) {
  if (!t.defined() || t.rank() != 4) {
    throw ShapeError("rank", std::string(what) + ": expected a (B, C, H, W) tensor, got " +
                                 (t.defined() ? shape_string(t.shape()) : std::string("undefined")));
  }
}

}  // namespace dfir
