// Copyright 2026 The PST2 Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "pst2/errors.h"

namespace pst2 {

enum class DType : std::uint8_t { kFloat32, kFloat64 };

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);
const char* dtype_name(DType dtype);

/// Maps a possibly negative axis onto [0, rank). Throws DimensionError.
std::size_t normalize_axis(long axis, std::size_t rank);

/// Invokes `fn` with a value-initialized scalar of the concrete type behind
/// `dtype`, so kernels can be written once as generic lambdas.
template <class Fn>
decltype(auto) visit_dtype(DType dtype, Fn&& fn) {
  if (dtype == DType::kFloat32) {
    return std::forward<Fn>(fn)(float{});
  }
  return std::forward<Fn>(fn)(double{});
}

template <class T>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? DType::kFloat32 : DType::kFloat64;
}

/// Dense row-major array of 32- or 64-bit floats.
///
/// Copies share storage. Writers go through mutable_data(), which detaches
/// the buffer first when it is shared, so a Tensor behaves as a value.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, DType dtype);

  static Tensor zeros(Shape shape, DType dtype = DType::kFloat32);
  static Tensor full(Shape shape, double value, DType dtype = DType::kFloat32);
  static Tensor from_values(Shape shape, std::span<const double> values,
                            DType dtype = DType::kFloat64);
  static Tensor from_values(Shape shape, std::initializer_list<double> values,
                            DType dtype = DType::kFloat64);
  template <class T>
  static Tensor from_vector(Shape shape, std::vector<T> values);

  /// Independent uniform draws in [lo, hi).
  static Tensor uniform(Shape shape, double lo, double hi, DType dtype,
                        std::mt19937_64& rng);
  static Tensor normal(Shape shape, double mean, double stddev, DType dtype,
                       std::mt19937_64& rng);

  bool defined() const { return storage_ != nullptr; }
  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(long axis) const;
  std::size_t numel() const { return shape_numel(shape_); }
  DType dtype() const { return dtype_; }

  template <class T>
  std::span<const T> data() const;
  template <class T>
  std::span<T> mutable_data();

  /// Element at a flat row-major offset, widened to double.
  double item(std::size_t flat = 0) const;
  void set_item(std::size_t flat, double value);
  std::vector<double> to_vector() const;

  Tensor astype(DType dtype) const;
  /// Same data under a new shape with equal element count.
  Tensor reshape(Shape shape) const;
  bool all_finite() const;

  /// True when shape, dtype and every bit of the payload agree.
  bool bit_equal(const Tensor& other) const;

 private:
  using Buffer = std::variant<std::vector<float>, std::vector<double>>;

  Shape shape_;
  DType dtype_ = DType::kFloat32;
  std::shared_ptr<Buffer> storage_;
};

template <class T>
Tensor Tensor::from_vector(Shape shape, std::vector<T> values) {
  Tensor t;
  t.shape_ = std::move(shape);
  t.dtype_ = dtype_of<T>();
  if (shape_numel(t.shape_) != values.size()) {
    throw DimensionError("Tensor::from_vector: " +
                                std::to_string(values.size()) +
                                " values for shape " +
                                shape_to_string(t.shape_));
  }
  t.storage_ = std::make_shared<Buffer>(std::move(values));
  return t;
}

template <class T>
std::span<const T> Tensor::data() const {
  if (!storage_) return {};
  const auto* vec = std::get_if<std::vector<T>>(storage_.get());
  if (vec == nullptr) {
    throw std::invalid_argument(std::string("Tensor::data: tensor is ") +
                                dtype_name(dtype_));
  }
  return {vec->data(), vec->size()};
}

template <class T>
std::span<T> Tensor::mutable_data() {
  if (!storage_) return {};
  if (storage_.use_count() > 1) {
    storage_ = std::make_shared<Buffer>(*storage_);
  }
  auto* vec = std::get_if<std::vector<T>>(storage_.get());
  if (vec == nullptr) {
    throw std::invalid_argument(std::string("Tensor::mutable_data: tensor is ") +
                                dtype_name(dtype_));
  }
  return {vec->data(), vec->size()};
}

}  // namespace pst2
