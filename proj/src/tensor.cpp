#include "pjfit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pjfit/errors.hpp"

namespace pjfit {

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i != 0) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != shape_size(shape_)) {
    throw ShapeError("Tensor: " + std::to_string(values_.size()) +
                     " values do not fill shape " + shape_string(shape_));
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

std::span<double> Tensor::row(std::size_t i) {
  const std::size_t width = shape_.at(1);
  return std::span<double>(values_).subspan(i * width, width);
}

std::span<const double> Tensor::row(std::size_t i) const {
  const std::size_t width = shape_.at(1);
  return std::span<const double>(values_).subspan(i * width, width);
}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != values_.size()) {
    throw ShapeError("reshape: cannot view " + shape_string(shape_) + " as " +
                     shape_string(shape));
  }
  return Tensor(std::move(shape), values_);
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

void require_shape(const Tensor& t, const Shape& expected, const char* op) {
  if (t.shape() != expected) {
    throw ShapeError(std::string(op) + ": expected shape " + shape_string(expected) +
                     ", got " + shape_string(t.shape()));
  }
}

void require_size(std::size_t actual, std::size_t expected, const char* op) {
  if (actual != expected) {
    throw ShapeError(std::string(op) + ": expected length " + std::to_string(expected) +
                     ", got " + std::to_string(actual));
  }
}

Tensor concat(std::initializer_list<const Tensor*> parts) {
  std::vector<double> out;
  for (const Tensor* p : parts) {
    out.insert(out.end(), p->values().begin(), p->values().end());
  }
  return Tensor::vector(std::move(out));
}

std::vector<Tensor> split(const Tensor& t, std::initializer_list<std::size_t> lengths) {
  std::size_t total = 0;
  for (auto n : lengths) total += n;
  require_size(t.size(), total, "split");
  std::vector<Tensor> out;
  std::size_t offset = 0;
  for (auto n : lengths) {
    auto piece = t.values().subspan(offset, n);
    out.push_back(Tensor::vector(std::vector<double>(piece.begin(), piece.end())));
    offset += n;
  }
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_size(b.size(), a.size(), "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_size(y.size(), x.size(), "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace pjfit
