// Copyright (c) 2026 The FEPCross Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "fepcross/numcore/autodiff.hpp"
#include "fepcross/numcore/checkpoint.hpp"

namespace fepcross::numcore {

/// Named trainable leaves of one model.
template <typename T>
class ParameterStore {
 public:
  Var<T>& add(const std::string& name, Tensor<T> value) {
    auto [it, inserted] = params_.emplace(name, parameter(std::move(value)));
    if (!inserted) throw std::invalid_argument("duplicate parameter " + name);
    return it->second;
  }

  const Var<T>& get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter " + name);
    return it->second;
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  /// Replaces a leaf, e.g. to evaluate the model at probe values.
  void bind(const std::string& name, Var<T> var) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter " + name);
    if (it->second.shape() != var.shape()) throw ShapeError("bind: shape mismatch for " + name);
    it->second = std::move(var);
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [name, _] : params_) out.push_back(name);
    return out;
  }

  /// Leaves in name order; copies alias the stored nodes.
  std::vector<Var<T>> vars() const {
    std::vector<Var<T>> out;
    for (const auto& [_, v] : params_) out.push_back(v);
    return out;
  }

  void zero_grad() {
    for (auto& [_, v] : params_) v.zero_grad();
  }

  bool all_finite() const {
    for (const auto& [_, v] : params_) {
      for (T x : v.value().data()) {
        if (!std::isfinite(x)) return false;
      }
    }
    return true;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [_, v] : params_) n += v.size();
    return n;
  }

  NamedTensors export_tensors(const std::string& prefix) const {
    NamedTensors out;
    for (const auto& [name, v] : params_) out.emplace(prefix + name, v.value().template cast<float>());
    return out;
  }

  /// Overwrites every parameter from `tensors[prefix + name]`.
  void import_tensors(const NamedTensors& tensors, const std::string& prefix) {
    for (auto& [name, v] : params_) {
      auto it = tensors.find(prefix + name);
      if (it == tensors.end()) throw CheckpointError("checkpoint is missing " + prefix + name);
      if (it->second.shape() != v.shape()) {
        throw CheckpointError("checkpoint shape mismatch for " + prefix + name + ": " +
                              shape_to_string(it->second.shape()) + " vs " + shape_to_string(v.shape()));
      }
      v.mutable_value() = it->second.template cast<T>();
    }
  }

 private:
  std::map<std::string, Var<T>> params_;
};

/// Uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out)).
template <typename T>
Tensor<T> xavier_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (T& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
Tensor<T> normal_init(Shape shape, double stddev, std::mt19937_64& rng) {
  Tensor<T> t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (T& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

}  // namespace fepcross::numcore
