// SPDX-License-Identifier: Apache-2.0
//
// Copyright (C) 2026 The nrxsim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nrx/ad/tensor.hpp"

namespace nrx::ad {

template <typename Scalar>
class Tape;

/// Handle to a node recorded on a tape.
template <typename Scalar>
class Var {
 public:
  Var() = default;
  Var(Tape<Scalar>* tape, int id) : tape_(tape), id_(id) {}

  Tape<Scalar>& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  const Tensor<Scalar>& value() const { return tape_->value(id_); }
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }

 private:
  Tape<Scalar>* tape_ = nullptr;
  int id_ = -1;
};

/// Records the forward computation so that reverse-mode gradients can be
/// accumulated afterwards. Nodes are appended in evaluation order, which is a
/// topological order by construction.
template <typename Scalar>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, int)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> constant(Tensor<Scalar> value) { return push("constant", std::move(value), {}, false, {}); }
  Var<Scalar> parameter(Tensor<Scalar> value) { return push("parameter", std::move(value), {}, true, {}); }

  /// Appends an op node. The backward closure and saved tensors are only
  /// kept when at least one input requires a gradient.
  Var<Scalar> record(std::string_view op, Tensor<Scalar> value, std::vector<int> inputs, BackwardFn backward,
                     std::vector<Tensor<Scalar>> saved = {}) {
    if (!value.all_finite()) {
      throw std::runtime_error("non-finite value produced by op '" + std::string(op) + "' with output shape " +
                               to_string(value.shape()));
    }
    bool needs_grad = false;
    for (int in : inputs) needs_grad = needs_grad || nodes_.at(in).requires_grad;
    if (!needs_grad) {
      backward = nullptr;
      saved.clear();
    }
    auto var = push(op, std::move(value), std::move(inputs), needs_grad, std::move(saved));
    nodes_.back().backward = std::move(backward);
    return var;
  }

  const Tensor<Scalar>& value(int id) const { return nodes_.at(id).value; }
  bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }
  const std::vector<int>& inputs(int id) const { return nodes_.at(id).inputs; }
  const std::vector<Tensor<Scalar>>& saved(int id) const { return nodes_.at(id).saved; }
  const std::string& op_name(int id) const { return nodes_.at(id).op; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient accumulator of a node, allocated as zeros on first use.
  Tensor<Scalar>& grad_buffer(int id) {
    auto& node = nodes_.at(id);
    if (node.grad.size() != node.value.size() || node.grad.shape() != node.value.shape()) {
      node.grad = Tensor<Scalar>(node.value.shape());
    }
    return node.grad;
  }

  /// Gradient of the last backward pass with respect to the given node.
  const Tensor<Scalar>& grad(const Var<Scalar>& v) {
    if (!backward_done_) throw std::logic_error("grad() requested before backward()");
    if (!nodes_.at(v.id()).requires_grad) throw std::logic_error("node does not require a gradient");
    return grad_buffer(v.id());
  }

  /// Reverse sweep from a scalar loss. A tape supports exactly one sweep.
  void backward(const Var<Scalar>& loss) {
    if (backward_done_) throw std::logic_error("backward() called twice on the same tape");
    if (loss.value().size() != 1) {
      throw std::invalid_argument("backward() needs a scalar loss, got shape " + to_string(loss.shape()));
    }
    backward_done_ = true;
    if (!nodes_.at(loss.id()).requires_grad) return;
    grad_buffer(loss.id()).values().setConstant(Scalar(1));
    for (int id = loss.id(); id >= 0; --id) {
      auto& node = nodes_[id];
      if (!node.requires_grad || !node.backward || node.grad.size() == 0) continue;
      node.backward(*this, id);
    }
  }

  bool backward_done() const { return backward_done_; }

 private:
  struct Node {
    std::string op;
    Tensor<Scalar> value;
    Tensor<Scalar> grad;
    std::vector<int> inputs;
    bool requires_grad = false;
    BackwardFn backward;
    std::vector<Tensor<Scalar>> saved;
  };

  Var<Scalar> push(std::string_view op, Tensor<Scalar> value, std::vector<int> inputs, bool requires_grad,
                   std::vector<Tensor<Scalar>> saved) {
    if (backward_done_) throw std::logic_error("cannot record on a tape after backward()");
    Node node;
    node.op = std::string(op);
    node.value = std::move(value);
    node.inputs = std::move(inputs);
    node.requires_grad = requires_grad;
    node.saved = std::move(saved);
    nodes_.push_back(std::move(node));
    return Var<Scalar>(this, static_cast<int>(nodes_.size()) - 1);
  }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace nrx::ad
