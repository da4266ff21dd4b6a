// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncg {

struct TensorImpl {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;     // allocated lazily, same length as data
  bool requires_grad = false;   // leaf parameter flag
  bool track = false;           // true if gradients must flow through this
};

// Value-semantics handle to a shared buffer. Tensors are immutable once
// they have entered a Tape; parameters are mutated only between passes.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
    Tensor t;
    t.p_ = std::make_shared<TensorImpl>();
    t.p_->shape = std::move(shape);
    t.p_->data.assign(numel_of(t.p_->shape), 0.0);
    t.p_->requires_grad = requires_grad;
    t.p_->track = requires_grad;
    return t;
  }

  static Tensor from_values(std::vector<std::size_t> shape,
                            std::vector<double> values,
                            bool requires_grad = false) {
    if (numel_of(shape) != values.size())
      throw std::invalid_argument("tensor: data length " +
                                  std::to_string(values.size()) +
                                  " does not match shape product " +
                                  std::to_string(numel_of(shape)));
    Tensor t;
    t.p_ = std::make_shared<TensorImpl>();
    t.p_->shape = std::move(shape);
    t.p_->data = std::move(values);
    t.p_->requires_grad = requires_grad;
    t.p_->track = requires_grad;
    return t;
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from_values({1}, {v}, requires_grad);
  }

  bool valid() const { return static_cast<bool>(p_); }
  const std::vector<std::size_t>& shape() const { return p_->shape; }
  std::size_t rank() const { return p_->shape.size(); }
  std::size_t dim(std::size_t i) const { return p_->shape.at(i); }
  std::size_t numel() const { return p_->data.size(); }

  // The handle is const, not the buffer: a const Tensor still exposes
  // mutable data/grad so backward closures can accumulate through copies.
  std::vector<double>& data() const { return p_->data; }

  bool requires_grad() const { return p_->requires_grad; }
  bool track() const { return p_->track; }
  void set_track(bool v) const { p_->track = v; }

  std::vector<double>& grad() const {
    if (p_->grad.size() != p_->data.size()) p_->grad.assign(p_->data.size(), 0.0);
    return p_->grad;
  }
  bool has_grad() const { return p_->grad.size() == p_->data.size(); }
  void zero_grad() const { p_->grad.assign(p_->data.size(), 0.0); }

  double item() const {
    if (numel() != 1) throw std::invalid_argument("tensor: item() on non-scalar");
    return p_->data[0];
  }

  // Flat accessor for the [batch, channels, time] layout used throughout.
  double& at3(std::size_t b, std::size_t c, std::size_t t) const {
    return p_->data[(b * p_->shape[1] + c) * p_->shape[2] + t];
  }

  TensorImpl* impl() const { return p_.get(); }
  std::shared_ptr<TensorImpl> share() const { return p_; }

  static std::size_t numel_of(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
  }

 private:
  std::shared_ptr<TensorImpl> p_;
};

}  // namespace ncg
