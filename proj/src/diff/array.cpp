#include "numerate/diff/array.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "numerate/errors.hpp"

namespace numerate::diff {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

}  // namespace

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += "x";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

Array::Array(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(product(shape_), fill) {}

Array::Array(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (data_.size() != product(shape_)) {
    throw ShapeError("array data length " + std::to_string(data_.size()) +
                     " does not match shape " + diff::shape_string(shape_));
  }
}

Array Array::row(std::vector<double> v) {
  const std::size_t n = v.size();
  return Array({1, n}, std::move(v));
}

std::size_t Array::rows() const noexcept {
  return shape_.size() >= 2 ? shape_[0] : 1;
}

std::size_t Array::cols() const noexcept {
  if (shape_.empty()) return 1;
  return shape_.back();
}

double Array::item() const {
  if (data_.size() != 1) {
    throw ShapeError("item() requires a single element, got shape " + shape_string());
  }
  return data_[0];
}

bool Array::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Array::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Array::accumulate(const Array& other) {
  if (data_.size() != other.data_.size()) {
    throw ShapeError("cannot accumulate " + other.shape_string() + " into " + shape_string());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

std::string Array::shape_string() const { return diff::shape_string(shape_); }

}  // namespace numerate::diff
