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

#include "pst2/tensor.h"

#include <cmath>
#include <cstring>
#include <sstream>

namespace pst2 {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

const char* dtype_name(DType dtype) {
  return dtype == DType::kFloat32 ? "float32" : "float64";
}

std::size_t normalize_axis(long axis, std::size_t rank) {
  const long r = static_cast<long>(rank);
  const long a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw DimensionError("axis " + std::to_string(axis) +
                         " out of range for rank " + std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

Tensor::Tensor(Shape shape, DType dtype) : shape_(std::move(shape)), dtype_(dtype) {
  const std::size_t n = shape_numel(shape_);
  if (dtype == DType::kFloat32) {
    storage_ = std::make_shared<Buffer>(std::vector<float>(n, 0.0f));
  } else {
    storage_ = std::make_shared<Buffer>(std::vector<double>(n, 0.0));
  }
}

Tensor Tensor::zeros(Shape shape, DType dtype) { return Tensor(std::move(shape), dtype); }

Tensor Tensor::full(Shape shape, double value, DType dtype) {
  Tensor t(std::move(shape), dtype);
  visit_dtype(dtype, [&](auto tag) {
    using T = decltype(tag);
    for (T& v : t.mutable_data<T>()) v = static_cast<T>(value);
  });
  return t;
}

Tensor Tensor::from_values(Shape shape, std::span<const double> values, DType dtype) {
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("Tensor::from_values: " + std::to_string(values.size()) +
                         " values for shape " + shape_to_string(shape));
  }
  Tensor t(std::move(shape), dtype);
  visit_dtype(dtype, [&](auto tag) {
    using T = decltype(tag);
    auto out = t.mutable_data<T>();
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = static_cast<T>(values[i]);
  });
  return t;
}

Tensor Tensor::from_values(Shape shape, std::initializer_list<double> values, DType dtype) {
  return from_values(std::move(shape), std::span<const double>(values.begin(), values.size()),
                     dtype);
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, DType dtype, std::mt19937_64& rng) {
  Tensor t(std::move(shape), dtype);
  std::uniform_real_distribution<double> dist(lo, hi);
  visit_dtype(dtype, [&](auto tag) {
    using T = decltype(tag);
    for (T& v : t.mutable_data<T>()) v = static_cast<T>(dist(rng));
  });
  return t;
}

Tensor Tensor::normal(Shape shape, double mean, double stddev, DType dtype,
                      std::mt19937_64& rng) {
  Tensor t(std::move(shape), dtype);
  std::normal_distribution<double> dist(mean, stddev);
  visit_dtype(dtype, [&](auto tag) {
    using T = decltype(tag);
    for (T& v : t.mutable_data<T>()) v = static_cast<T>(dist(rng));
  });
  return t;
}

std::size_t Tensor::dim(long axis) const { return shape_[normalize_axis(axis, rank())]; }

double Tensor::item(std::size_t flat) const {
  if (flat >= numel()) {
    throw DimensionError("Tensor::item: offset " + std::to_string(flat) +
                         " out of range for shape " + shape_to_string(shape_));
  }
  return visit_dtype(dtype_, [&](auto tag) -> double {
    using T = decltype(tag);
    return static_cast<double>(data<T>()[flat]);
  });
}

void Tensor::set_item(std::size_t flat, double value) {
  if (flat >= numel()) {
    throw DimensionError("Tensor::set_item: offset out of range");
  }
  visit_dtype(dtype_, [&](auto tag) {
    using T = decltype(tag);
    mutable_data<T>()[flat] = static_cast<T>(value);
  });
}

std::vector<double> Tensor::to_vector() const {
  std::vector<double> out(numel());
  visit_dtype(dtype_, [&](auto tag) {
    using T = decltype(tag);
    auto src = data<T>();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(src[i]);
  });
  return out;
}

Tensor Tensor::astype(DType dtype) const {
  if (dtype == dtype_) return *this;
  const auto values = to_vector();
  return from_values(shape_, values, dtype);
}

Tensor Tensor::reshape(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw DimensionError("reshape: cannot view " + shape_to_string(shape_) + " as " +
                         shape_to_string(shape));
  }
  Tensor t = *this;
  t.shape_ = std::move(shape);
  return t;
}

bool Tensor::all_finite() const {
  return visit_dtype(dtype_, [&](auto tag) {
    using T = decltype(tag);
    for (T v : data<T>()) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  });
}

bool Tensor::bit_equal(const Tensor& other) const {
  if (shape_ != other.shape_ || dtype_ != other.dtype_) return false;
  return visit_dtype(dtype_, [&](auto tag) {
    using T = decltype(tag);
    auto a = data<T>();
    auto b = other.data<T>();
    return a.size() == b.size() &&
           (a.empty() || std::memcmp(a.data(), b.data(), a.size_bytes()) == 0);
  });
}

}  // namespace pst2
