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

#include "interflow/tensor.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <utility>

#include "interflow/error.hpp"

namespace interflow {

Shape::Shape(std::initializer_list<std::size_t> dims) : dims_(dims) {
  validate();
}

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  validate();
}

void Shape::validate() const {
  if (dims_.empty()) {
    throw ShapeError("tensor rank must be at least 1");
  }
  for (std::size_t d : dims_) {
    if (d == 0) {
      throw ShapeError("tensor extents must be positive, got " + to_string());
    }
  }
}

std::size_t Shape::numel() const {
  return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string Shape::to_string() const {
  std::string out = "[";
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(dims_[i]);
  }
  return out + "]";
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : storage_(std::make_shared<Storage>()) {
  if (shape.rank() == 0) {
    throw ShapeError("tensor rank must be at least 1");
  }
  if (values.size() != shape.numel()) {
    throw ShapeError("shape " + shape.to_string() + " needs " +
                     std::to_string(shape.numel()) + " values, got " +
                     std::to_string(values.size()));
  }
  storage_->shape = std::move(shape);
  storage_->values = std::move(values);
  storage_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape.numel();
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{1}, {value}, requires_grad);
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item() needs a single-element tensor, got " +
                     shape().to_string());
  }
  return storage_->values[0];
}

std::span<double> Tensor::mutable_grad() {
  if (storage_->grad.empty()) {
    storage_->grad.assign(storage_->values.size(), 0.0);
  }
  return storage_->grad;
}

void Tensor::zero_grad() {
  std::fill(storage_->grad.begin(), storage_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  return Tensor(shape(), storage_->values, false);
}

}  // namespace interflow
