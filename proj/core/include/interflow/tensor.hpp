// Copyright 2026 The Interflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef INTERFLOW_TENSOR_HPP_
#define INTERFLOW_TENSOR_HPP_

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace interflow {

/// Dimensions of a dense row-major tensor. Rank >= 1, every extent >= 1.
class Shape {
 public:
  Shape() = default;
  Shape(std::initializer_list<std::size_t> dims);
  explicit Shape(std::vector<std::size_t> dims);

  std::size_t rank() const { return dims_.size(); }
  std::size_t operator[](std::size_t axis) const { return dims_[axis]; }
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t numel() const;

  bool operator==(const Shape&) const = default;

  /// "[2, 3, 4]"
  std::string to_string() const;

 private:
  void validate() const;

  std::vector<std::size_t> dims_;
};

/// Dense 64-bit tensor with an optional gradient buffer.
///
/// Tensor is a handle: copies alias the same storage, which is what lets the
/// tape identify its inputs and lets several branch heads share one
/// classifier. Use `clone()` for a deep copy.
class Tensor {
 public:
  /// Null handle; only `defined()` may be called on it.
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return storage_ != nullptr; }

  const Shape& shape() const { return storage_->shape; }
  std::size_t numel() const { return storage_->values.size(); }

  std::span<const double> values() const { return storage_->values; }
  std::span<double> mutable_values() { return storage_->values; }

  /// Value of a single-element tensor.
  double item() const;

  bool requires_grad() const { return storage_->requires_grad; }
  void set_requires_grad(bool on) { storage_->requires_grad = on; }

  bool has_grad() const { return !storage_->grad.empty(); }
  /// Empty span when no gradient has been accumulated yet.
  std::span<const double> grad() const { return storage_->grad; }
  /// Allocates a zero gradient on first use.
  std::span<double> mutable_grad();
  void zero_grad();

  /// Deep copy of shape and values; the copy has no gradient.
  Tensor clone() const;

  bool same_as(const Tensor& other) const { return storage_ == other.storage_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };

  std::shared_ptr<Storage> storage_;
};

}  // namespace interflow

#endif  // INTERFLOW_TENSOR_HPP_
