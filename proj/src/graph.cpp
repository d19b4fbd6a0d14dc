// SPDX-License-Identifier: Apache-2.0
#include "drfuse/graph.hpp"

#include <cmath>

#include "drfuse/errors.hpp"

namespace drfuse {

Parameter& ParamStore::create(const std::string& name, std::vector<std::size_t> shape,
                              bool trainable) {
  if (params_.count(name)) throw InvalidConfigError("duplicate parameter: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->value = Tensor(shape);
  p->grad = Tensor(std::move(shape));
  p->trainable = trainable;
  auto& ref = *p;
  params_.emplace(name, std::move(p));
  return ref;
}

Parameter& ParamStore::create_xavier(const std::string& name, std::size_t fan_in,
                                     std::size_t fan_out, Rng& rng) {
  Parameter& p = create(name, {fan_in, fan_out});
  double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = rng.uniform(-bound, bound);
  return p;
}

Parameter& ParamStore::create_gaussian(const std::string& name,
                                       std::vector<std::size_t> shape, double stddev,
                                       Rng& rng) {
  Parameter& p = create(name, std::move(shape));
  for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = rng.gaussian(0.0, stddev);
  return p;
}

Parameter& ParamStore::create_constant(const std::string& name,
                                       std::vector<std::size_t> shape, double v,
                                       bool trainable) {
  Parameter& p = create(name, std::move(shape), trainable);
  p.value.fill(v);
  return p;
}

Parameter* ParamStore::find(const std::string& name) {
  auto it = params_.find(name);
  return it == params_.end() ? nullptr : it->second.get();
}

const Parameter* ParamStore::find(const std::string& name) const {
  auto it = params_.find(name);
  return it == params_.end() ? nullptr : it->second.get();
}

Parameter& ParamStore::at(const std::string& name) {
  Parameter* p = find(name);
  if (!p) throw InvalidConfigError("unknown parameter: " + name);
  return *p;
}

void ParamStore::zero_grads() {
  for (auto& [name, p] : params_) p->grad.fill(0.0);
}

std::map<std::string, Tensor> ParamStore::snapshot() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, p] : params_) out.emplace(name, p->value);
  return out;
}

void ParamStore::load(const std::map<std::string, Tensor>& values) {
  for (auto& [name, p] : params_) {
    auto it = values.find(name);
    if (it == values.end()) throw InvalidConfigError("checkpoint missing parameter: " + name);
    if (!(it->second.shape() == p->value.shape()))
      throw ShapeError("checkpoint shape mismatch for " + name);
    p->value = it->second;
  }
}

Var Tape::constant(Tensor v) {
  nodes_.emplace_back();
  Node& n = nodes_.back();
  n.value = std::move(v);
  return &n;
}

Var Tape::leaf(Parameter& p) {
  nodes_.emplace_back();
  Node& n = nodes_.back();
  n.value = p.value;
  n.needs_grad = p.trainable;
  n.param = &p;
  Node* self = &n;
  n.vjp = [self]() { add_inplace(self->param->grad, self->grad); };
  return &n;
}

Var Tape::make(Tensor v, bool needs_grad, std::function<void()> vjp) {
  nodes_.emplace_back();
  Node& n = nodes_.back();
  n.value = std::move(v);
  n.needs_grad = needs_grad;
  if (needs_grad) n.vjp = std::move(vjp);
  return &n;
}

void Tape::backward(Var root, double seed) {
  if (root->value.size() != 1) throw ShapeError("backward: root must be scalar");
  if (!root->needs_grad) return;
  Tensor s(root->value.shape());
  s[0] = seed;
  accumulate(root, std::move(s));
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = *it;
    if (n.needs_grad && !n.grad.empty() && n.vjp) n.vjp();
  }
}

void Tape::accumulate(Var v, const Tensor& g) {
  if (!v->needs_grad) return;
  if (v->grad.empty())
    v->grad = g;
  else
    add_inplace(v->grad, g);
}

void Tape::accumulate(Var v, Tensor&& g) {
  if (!v->needs_grad) return;
  if (v->grad.empty())
    v->grad = std::move(g);
  else
    add_inplace(v->grad, g);
}

}  // namespace drfuse
