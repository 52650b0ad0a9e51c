#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "lsc/numerics/tensor.hpp"

namespace lsc {

/// Named parameter tensors, iterated in lexicographic name order.
template <typename T>
class ParamStore {
 public:
  using Map = std::map<std::string, BasicTensor<T>>;

  void add(const std::string& name, BasicTensor<T> value) {
    auto [it, inserted] = params_.emplace(name, std::move(value));
    if (!inserted) throw std::invalid_argument("param store: duplicate name '" + name + "'");
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  BasicTensor<T>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("param store: no parameter '" + name + "'");
    return it->second;
  }
  const BasicTensor<T>& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("param store: no parameter '" + name + "'");
    return it->second;
  }

  std::size_t size() const noexcept { return params_.size(); }
  bool empty() const noexcept { return params_.empty(); }

  /// Total scalar count across all tensors.
  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : params_) n += t.size();
    return n;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void check_finite(const std::string& what) const {
    for (const auto& [name, t] : params_) t.check_finite(what + " '" + name + "'");
  }

  friend bool operator==(const ParamStore& a, const ParamStore& b) { return a.params_ == b.params_; }

 private:
  Map params_;
};

}  // namespace lsc
