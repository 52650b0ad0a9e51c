#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "lsc/numerics/param_store.hpp"
#include "lsc/numerics/tensor.hpp"

namespace lsc {

template <typename T>
class Tape;

/// Handle to a value recorded on a Tape.
template <typename T>
class BasicVar {
 public:
  BasicVar() = default;
  BasicVar(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>& tape() const {
    if (!tape_) throw std::logic_error("var: not bound to a tape");
    return *tape_;
  }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const BasicTensor<T>& value() const { return tape().value(id_); }
  const Shape& shape() const { return value().shape(); }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording of one forward computation.
///
/// Every op appends a node holding its output value and a closure that pushes
/// the node's gradient into its parents. Parameters bound via `param` are
/// leaves tagged with their store name so `param_grads` can collect them.
template <typename T>
class Tape {
 public:
  using Var = BasicVar<T>;
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  /// With `track_params` false, bound parameters are plain constants (inference only).
  explicit Tape(bool track_params) : track_params_(track_params) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(BasicTensor<T> value) { return push(std::move(value), false, {}); }

  /// Leaf whose gradient is tracked (used for inputs under test).
  Var variable(BasicTensor<T> value) { return push(std::move(value), true, {}); }

  /// Leaf bound to a named parameter; repeated binds return the same node.
  Var param(const ParamStore<T>& store, const std::string& name) {
    if (auto it = bound_.find(name); it != bound_.end()) return Var(this, it->second);
    Var v = push(store.at(name), track_params_, {});
    bound_.emplace(name, v.id());
    return v;
  }

  /// Pre-binds every parameter of `store` as an untracked constant, so a
  /// network can be evaluated on this tape without receiving gradients.
  void bind_constants(const ParamStore<T>& store) {
    for (const auto& [name, value] : store) {
      if (bound_.count(name)) throw std::logic_error("tape: parameter " + name + " already bound");
      bound_.emplace(name, push(value, false, {}).id());
    }
  }

  /// Records an op output. `fn` runs during backward only if some parent tracks gradients.
  Var record(BasicTensor<T> value, std::initializer_list<Var> parents, BackwardFn fn) {
    bool needs = false;
    for (const auto& p : parents) {
      check_owned(p);
      needs = needs || nodes_[p.id()].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(fn) : BackwardFn{});
  }

  Var record(BasicTensor<T> value, const std::vector<Var>& parents, BackwardFn fn) {
    bool needs = false;
    for (const auto& p : parents) {
      check_owned(p);
      needs = needs || nodes_[p.id()].requires_grad;
    }
    return push(std::move(value), needs, needs ? std::move(fn) : BackwardFn{});
  }

  const BasicTensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  /// Mutable gradient buffer of a node; only valid during/after backward.
  std::span<T> grad_buffer(std::size_t id) { return nodes_.at(id).value.grad(); }

  std::span<const T> grad(Var v) const {
    check_owned(v);
    const auto& node = nodes_[v.id()];
    if (!node.value.has_grad()) throw std::logic_error("tape: gradient requested before backward");
    return node.value.grad();
  }

  BasicTensor<T> grad_tensor(Var v) const {
    auto g = grad(v);
    return BasicTensor<T>(nodes_[v.id()].value.shape(), std::vector<T>(g.begin(), g.end()));
  }

  /// Propagates d(loss)/d(node) to every tracked node. The loss must be a scalar.
  void backward(Var loss) {
    check_owned(loss);
    const auto& out = nodes_[loss.id()];
    if (out.value.size() != 1) {
      throw ShapeError("backward: loss must be scalar, got shape " + to_string(out.value.shape()));
    }
    if (!out.requires_grad) {
      throw std::logic_error("backward: loss is detached from every tracked leaf");
    }
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      auto& node = nodes_[i];
      if (!node.requires_grad || i > loss.id()) {
        node.value.drop_grad();
        continue;
      }
      node.value.ensure_grad();
      node.value.zero_grad();
    }
    nodes_[loss.id()].value.grad()[0] = T{1};
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      auto& node = nodes_[i];
      if (node.requires_grad && node.backward) node.backward(*this, i);
    }
  }

  /// Gradients for every parameter in `store`; parameters never bound get zeros.
  ParamStore<T> param_grads(const ParamStore<T>& store) const {
    ParamStore<T> out;
    for (const auto& [name, p] : store) {
      auto it = bound_.find(name);
      if (it != bound_.end() && nodes_[it->second].value.has_grad()) {
        const auto& g = nodes_[it->second].value.grad();
        out.add(name, BasicTensor<T>(p.shape(), std::vector<T>(g.begin(), g.end())));
      } else {
        out.add(name, BasicTensor<T>(p.shape(), T{0}));
      }
    }
    return out;
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    BasicTensor<T> value;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(BasicTensor<T> value, bool requires_grad, BackwardFn fn) {
    nodes_.push_back(Node{std::move(value), requires_grad, std::move(fn)});
    return Var(this, nodes_.size() - 1);
  }

  void check_owned(const Var& v) const {
    if (&v.tape() != this || v.id() >= nodes_.size()) {
      throw std::logic_error("tape: var belongs to a different tape");
    }
  }

  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> bound_;
  bool track_params_ = true;
};

}  // namespace lsc
