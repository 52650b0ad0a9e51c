#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace lsc {

/// Thrown when tensor extents do not agree with what an operation expects.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a NaN or Inf shows up where finite values are required.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

inline std::string to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

/// Dense row-major n-dimensional array with an optional gradient buffer.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;

  explicit BasicTensor(Shape shape, T fill = T{0})
      : shape_(std::move(shape)), values_(numel(shape_), fill) {}

  BasicTensor(Shape shape, std::vector<T> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    if (numel(shape_) != values_.size()) {
      throw ShapeError("tensor: shape " + to_string(shape_) + " holds " +
                       std::to_string(numel(shape_)) + " values, got " +
                       std::to_string(values_.size()));
    }
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_.size(); }
  std::size_t dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
      throw ShapeError("tensor: axis " + std::to_string(axis) + " out of range for shape " +
                       to_string(shape_));
    }
    return shape_[axis];
  }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }
  std::vector<T>& storage() noexcept { return values_; }
  const std::vector<T>& storage() const noexcept { return values_; }

  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  bool has_grad() const noexcept { return grad_.has_value(); }
  std::span<T> grad() {
    ensure_grad();
    return *grad_;
  }
  std::span<const T> grad() const {
    if (!grad_) throw std::logic_error("tensor: no gradient buffer");
    return *grad_;
  }
  void ensure_grad() {
    if (!grad_) grad_.emplace(values_.size(), T{0});
  }
  void zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), T{0});
  }
  void drop_grad() noexcept { grad_.reset(); }

  /// Same values under a new shape with equal element count.
  BasicTensor reshaped(Shape shape) const {
    if (numel(shape) != values_.size()) {
      throw ShapeError("reshape: cannot view " + to_string(shape_) + " as " + to_string(shape));
    }
    return BasicTensor(std::move(shape), values_);
  }

  bool all_finite() const noexcept {
    for (auto v : values_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  void check_finite(std::string_view what) const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i])) {
        throw NonFiniteError(std::string(what) + ": non-finite value at flat index " +
                             std::to_string(i));
      }
    }
  }

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(values_.begin(), values_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  Shape shape_;
  std::vector<T> values_;
  std::optional<std::vector<T>> grad_;
};

using Tensor = BasicTensor<float>;

/// Copies rows [begin, end) along the leading axis.
template <typename T>
BasicTensor<T> slice_rows(const BasicTensor<T>& t, std::size_t begin, std::size_t end) {
  if (t.rank() == 0 || begin > end || end > t.dim(0)) {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") invalid for shape " + to_string(t.shape()));
  }
  const std::size_t row = t.size() / t.dim(0);
  Shape shape = t.shape();
  shape[0] = end - begin;
  std::vector<T> out(t.values().begin() + static_cast<std::ptrdiff_t>(begin * row),
                     t.values().begin() + static_cast<std::ptrdiff_t>(end * row));
  return BasicTensor<T>(std::move(shape), std::move(out));
}

/// Gathers rows by index along the leading axis.
template <typename T>
BasicTensor<T> gather_rows(const BasicTensor<T>& t, std::span<const std::size_t> rows) {
  if (t.rank() == 0) throw ShapeError("gather_rows: scalar tensor");
  const std::size_t n = t.dim(0);
  const std::size_t row = n ? t.size() / n : 0;
  Shape shape = t.shape();
  shape[0] = rows.size();
  std::vector<T> out;
  out.reserve(rows.size() * row);
  for (auto r : rows) {
    if (r >= n) {
      throw ShapeError("gather_rows: row " + std::to_string(r) + " out of range " +
                       std::to_string(n));
    }
    auto first = t.values().begin() + static_cast<std::ptrdiff_t>(r * row);
    out.insert(out.end(), first, first + static_cast<std::ptrdiff_t>(row));
  }
  return BasicTensor<T>(std::move(shape), std::move(out));
}

/// Concatenates tensors along the leading axis; trailing extents must agree.
template <typename T>
BasicTensor<T> concat_rows(std::span<const BasicTensor<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: nothing to concatenate");
  Shape shape = parts[0].shape();
  std::size_t rows = 0;
  std::vector<T> out;
  for (const auto& p : parts) {
    if (p.rank() != shape.size() ||
        !std::equal(p.shape().begin() + 1, p.shape().end(), shape.begin() + 1)) {
      throw ShapeError("concat_rows: " + to_string(p.shape()) + " vs " + to_string(shape));
    }
    rows += p.dim(0);
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  shape[0] = rows;
  return BasicTensor<T>(std::move(shape), std::move(out));
}

}  // namespace lsc
