/* Copyright 2026 The MCE-NMT Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef MCE_TENSOR_HPP_
#define MCE_TENSOR_HPP_

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mce {

/// Base error for everything this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an operation would produce or consume NaN/Inf.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

using Shape = std::vector<std::size_t>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ')';
  return os.str();
}

/// Dense row-major array. A default-constructed tensor is "absent": rank 0
/// and no data. Every constructed tensor has strictly positive extents.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)) {
    if (shape_.empty()) throw ShapeError("tensor shape must have at least one extent");
    for (auto extent : shape_) {
      if (extent == 0) throw ShapeError("zero extent in shape " + shape_string(shape_));
    }
    data_.assign(element_count(shape_), fill);
  }

  Tensor(Shape shape, std::vector<T> data) : Tensor(std::move(shape)) {
    if (data.size() != data_.size()) {
      throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " +
                       shape_string(shape_));
    }
    data_ = std::move(data);
  }

  static Tensor vector(std::vector<T> values) {
    Shape shape{values.size()};
    return Tensor(std::move(shape), std::move(values));
  }

  static Tensor zeros_like(const Tensor& other) {
    Tensor out;
    out.shape_ = other.shape_;
    out.data_.assign(other.data_.size(), T(0));
    return out;
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t rows() const {
    require_rank(2);
    return shape_[0];
  }
  std::size_t cols() const {
    require_rank(2);
    return shape_[1];
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  std::span<T> row(std::size_t r) {
    const std::size_t width = cols();
    return std::span<T>(data_).subspan(r * width, width);
  }
  std::span<const T> row(std::size_t r) const {
    const std::size_t width = cols();
    return std::span<const T>(data_).subspan(r * width, width);
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool operator==(const Tensor& other) const = default;

  static std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  }

 private:
  void require_rank(std::size_t r) const {
    if (shape_.size() != r) {
      throw ShapeError("expected rank " + std::to_string(r) + ", got shape " + shape_string(shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
bool all_finite(std::span<const T> values) {
  for (T v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
void require_finite(std::span<const T> values, std::string_view what) {
  if (!all_finite(values)) throw NonFiniteError("non-finite value in " + std::string(what));
}

/// Converts between precisions; used to bridge 64-bit checkpoints and 32-bit training.
template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& in) {
  if (in.empty()) return {};
  std::vector<To> data(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) data[i] = static_cast<To>(in[i]);
  return Tensor<To>(in.shape(), std::move(data));
}

/// A flat, ordered collection of named tensors. Anything exposing the same
/// `visit` member can be handed to the optimizer, clipper, checker and
/// checkpoint writer.
template <typename T>
class NamedTensors {
 public:
  Tensor<T>& add(std::string name, Tensor<T> tensor) {
    entries_.emplace_back(std::move(name), std::move(tensor));
    return entries_.back().second;
  }

  Tensor<T>& get(std::string_view name) {
    for (auto& [n, t] : entries_) {
      if (n == name) return t;
    }
    throw Error("no tensor named '" + std::string(name) + "'");
  }
  const Tensor<T>& get(std::string_view name) const {
    return const_cast<NamedTensors*>(this)->get(name);
  }

  std::size_t size() const { return entries_.size(); }

  template <typename F>
  void visit(F&& f) {
    for (auto& [n, t] : entries_) f(std::string_view(n), t);
  }
  template <typename F>
  void visit(F&& f) const {
    for (const auto& [n, t] : entries_) f(std::string_view(n), t);
  }

 private:
  std::vector<std::pair<std::string, Tensor<T>>> entries_;
};

/// Parameter structs (anything with `visit`) share these helpers. Absent
/// tensors are skipped by every visitor.
template <typename P>
P zeros_like_params(const P& params) {
  P out = params;
  out.visit([](std::string_view, auto& t) { t.fill(0); });
  return out;
}

template <typename P>
std::size_t parameter_count(const P& params) {
  std::size_t total = 0;
  params.visit([&](std::string_view, const auto& t) { total += t.size(); });
  return total;
}

}  // namespace mce

#endif  // MCE_TENSOR_HPP_
