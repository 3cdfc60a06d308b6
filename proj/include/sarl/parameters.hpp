#ifndef SARL_PARAMETERS_HPP_
#define SARL_PARAMETERS_HPP_

#include <string>
#include <utility>
#include <vector>

#include "sarl/tape.hpp"
#include "sarl/tensor.hpp"

namespace sarl {

template <typename Scalar>
struct NamedTensor {
  std::string name;
  Tensor<Scalar> value;
};

/// Ordered collection of named parameter tensors. Order is insertion order and
/// is what checkpoints and optimizer state follow.
template <typename Scalar>
class ParameterSet {
 public:
  void add(std::string name, Tensor<Scalar> value) {
    if (contains(name)) throw ContractError("duplicate parameter '" + name + "'");
    entries_.push_back({std::move(name), std::move(value)});
  }

  bool contains(const std::string& name) const { return find(name) != nullptr; }

  const Tensor<Scalar>& at(const std::string& name) const {
    const auto* e = find(name);
    if (!e) throw ContractError("no parameter named '" + name + "'");
    return e->value;
  }
  Tensor<Scalar>& at(const std::string& name) {
    return const_cast<Tensor<Scalar>&>(std::as_const(*this).at(name));
  }

  std::size_t size() const { return entries_.size(); }
  Index total_size() const {
    Index n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  const NamedTensor<Scalar>& operator[](std::size_t i) const { return entries_[i]; }
  NamedTensor<Scalar>& operator[](std::size_t i) { return entries_[i]; }

  template <typename Other>
  ParameterSet<Other> cast() const {
    ParameterSet<Other> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<Other>());
    return out;
  }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      if (a.entries_[i].name != b.entries_[i].name || !(a.entries_[i].value == b.entries_[i].value)) return false;
    }
    return true;
  }

 private:
  const NamedTensor<Scalar>* find(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return &e;
    return nullptr;
  }

  std::vector<NamedTensor<Scalar>> entries_;
};

/// Parameters placed on a tape, either as trainable leaves or as constants.
template <typename Scalar>
class BoundParameters {
 public:
  BoundParameters(Tape<Scalar>& tape, const ParameterSet<Scalar>& params, bool trainable) {
    for (const auto& e : params) {
      vars_.emplace_back(e.name, trainable ? tape.leaf(e.value) : tape.constant(e.value));
    }
  }

  /// Binds Vars that are already on a tape, e.g. leaves built by a gradient check.
  BoundParameters(const std::vector<std::string>& names, const std::vector<Var<Scalar>>& vars) {
    if (names.size() != vars.size()) throw ContractError("BoundParameters: name and var counts differ");
    for (std::size_t i = 0; i < names.size(); ++i) vars_.emplace_back(names[i], vars[i]);
  }

  const Var<Scalar>& operator[](const std::string& name) const {
    for (const auto& [n, v] : vars_)
      if (n == name) return v;
    throw ContractError("no bound parameter named '" + name + "'");
  }

  bool contains(const std::string& name) const {
    for (const auto& [n, v] : vars_)
      if (n == name) return true;
    return false;
  }

  /// Gradients after backward(), in parameter order.
  std::vector<Tensor<Scalar>> gradients() const {
    std::vector<Tensor<Scalar>> out;
    for (const auto& [n, v] : vars_) out.push_back(v.grad());
    return out;
  }

 private:
  std::vector<std::pair<std::string, Var<Scalar>>> vars_;
};

}  // namespace sarl

#endif  // SARL_PARAMETERS_HPP_
