// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "drfuse/rng.hpp"
#include "drfuse/tensor.hpp"

namespace drfuse {

// A named, persistent tensor. Gradients accumulate across per-sample tapes
// until the optimizer consumes them.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;
};

// Ordered registry of parameters; map iteration order (lexicographic by name)
// makes checkpoints and optimizer sweeps deterministic.
class ParamStore {
 public:
  Parameter& create(const std::string& name, std::vector<std::size_t> shape,
                    bool trainable = true);
  Parameter& create_xavier(const std::string& name, std::size_t fan_in, std::size_t fan_out,
                           Rng& rng);
  Parameter& create_gaussian(const std::string& name, std::vector<std::size_t> shape,
                             double stddev, Rng& rng);
  Parameter& create_constant(const std::string& name, std::vector<std::size_t> shape,
                             double v, bool trainable = true);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);

  void zero_grads();
  std::size_t n_tensors() const { return params_.size(); }

  std::map<std::string, Tensor> snapshot() const;
  void load(const std::map<std::string, Tensor>& values);

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  std::map<std::string, std::unique_ptr<Parameter>> params_;
};

// One node of the dynamically built computation graph.
struct Node {
  Tensor value;
  Tensor grad;  // lazily allocated on first accumulation
  bool needs_grad = false;
  Parameter* param = nullptr;
  std::function<void()> vjp;  // pulls this->grad into the parents
};

using Var = Node*;

// Per-forward-pass arena. Nodes are appended in evaluation order, which is a
// valid topological order, so the backward sweep is a single reverse pass.
class Tape {
 public:
  Var constant(Tensor v);
  Var leaf(Parameter& p);
  Var make(Tensor v, bool needs_grad, std::function<void()> vjp);

  // Seeds d(root)/d(root) = seed and propagates to every reachable leaf.
  // root must be scalar.
  void backward(Var root, double seed = 1.0);

  static void accumulate(Var v, const Tensor& g);
  static void accumulate(Var v, Tensor&& g);

  std::size_t size() const { return nodes_.size(); }

 private:
  std::deque<Node> nodes_;
};

}  // namespace drfuse
