#include "asymdiff/numeric/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "asymdiff/errors.hpp"

namespace asymdiff {

Tensor2::Tensor2(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ConfigError("ragged tensor literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Tensor2 Tensor2::row_vector(std::span<const double> values) {
  Tensor2 t(1, values.size());
  std::copy(values.begin(), values.end(), t.data_.begin());
  return t;
}

void Tensor2::resize(std::size_t rows, std::size_t cols) {
  rows_ = rows;
  cols_ = cols;
  data_.resize(rows * cols);
}

void Tensor2::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor2::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string shape_string(const Tensor2& t) {
  return "[" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + "]";
}

void require_shape(const Tensor2& t, std::size_t rows, std::size_t cols, const char* what) {
  if (t.rows() != rows || t.cols() != cols) {
    throw ConfigError(std::string(what) + ": expected [" + std::to_string(rows) + "x" +
                      std::to_string(cols) + "], got " + shape_string(t));
  }
}

}  // namespace asymdiff
