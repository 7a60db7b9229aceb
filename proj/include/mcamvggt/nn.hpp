/*
 * Copyright 2026 The mcamvggt Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MCAMVGGT_NN_HPP_
#define MCAMVGGT_NN_HPP_

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mcamvggt/autograd.hpp"
#include "mcamvggt/errors.hpp"

namespace mcamvggt::nn {

using ag::Matrix;
using ag::Var;

// Named, ordered trainable parameters. Initial values are drawn in double
// precision so float and double models built from one seed agree.
template <typename T>
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : rng_(seed) {}

  Var<T> normal(const std::string& name, Eigen::Index rows, Eigen::Index cols, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    Matrix<T> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(dist(rng_));
    return add(name, std::move(m));
  }

  Var<T> constant(const std::string& name, Eigen::Index rows, Eigen::Index cols, double value) {
    return add(name, Matrix<T>::Constant(rows, cols, static_cast<T>(value)));
  }

  Var<T> add(const std::string& name, Matrix<T> value) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name '" + name + "'");
    index_[name] = params_.size();
    params_.emplace_back(name, Var<T>::leaf(std::move(value)));
    return params_.back().second;
  }

  const std::vector<std::pair<std::string, Var<T>>>& all() const { return params_; }
  std::vector<std::pair<std::string, Var<T>>>& all() { return params_; }

  Var<T> get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw MissingCheckpoint("unknown parameter '" + name + "'");
    return params_[it->second].second;
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  void zero_grad() {
    for (auto& [name, p] : params_) p.mutable_grad().resize(0, 0);
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params_) n += static_cast<std::size_t>(p.value().size());
    return n;
  }

 private:
  std::mt19937_64 rng_;
  std::vector<std::pair<std::string, Var<T>>> params_;
  std::map<std::string, std::size_t> index_;
};

template <typename T>
struct Linear {
  Var<T> weight;  // in x out
  Var<T> bias;    // 1 x out

  Linear() = default;
  Linear(ParameterStore<T>& store, const std::string& name, int in, int out,
         double gain = 1.0) {
    weight = store.normal(name + ".weight", in, out, gain / std::sqrt(static_cast<double>(in)));
    bias = store.constant(name + ".bias", 1, out, 0.0);
  }

  Var<T> operator()(const Var<T>& x) const { return ag::add_row(ag::matmul(x, weight), bias); }
};

template <typename T>
struct LayerNorm {
  Var<T> gamma;
  Var<T> beta;

  LayerNorm() = default;
  LayerNorm(ParameterStore<T>& store, const std::string& name, int dim) {
    gamma = store.constant(name + ".gamma", 1, dim, 1.0);
    beta = store.constant(name + ".beta", 1, dim, 0.0);
  }

  Var<T> operator()(const Var<T>& x) const { return ag::layer_norm(x, gamma, beta); }
};

// Two linear layers with GELU in between.
template <typename T>
struct Mlp {
  Linear<T> fc1;
  Linear<T> fc2;

  Mlp() = default;
  Mlp(ParameterStore<T>& store, const std::string& name, int in, int hidden, int out,
      double out_gain = 1.0) {
    fc1 = Linear<T>(store, name + ".fc1", in, hidden);
    fc2 = Linear<T>(store, name + ".fc2", hidden, out, out_gain);
  }

  Var<T> operator()(const Var<T>& x) const { return fc2(ag::gelu(fc1(x))); }
};

using AttentionMask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Pre-norm transformer block: x + Attn(LN(x)), then + MLP(LN(.)).
template <typename T>
struct Block {
  LayerNorm<T> norm1;
  Linear<T> q, k, v, proj;
  LayerNorm<T> norm2;
  Mlp<T> mlp;
  int heads = 1;

  Block() = default;
  Block(ParameterStore<T>& store, const std::string& name, int dim, int num_heads,
        int mlp_hidden, double residual_gain) {
    if (num_heads <= 0 || dim % num_heads != 0) throw ConfigError("heads must divide token width");
    heads = num_heads;
    norm1 = LayerNorm<T>(store, name + ".norm1", dim);
    q = Linear<T>(store, name + ".attn.q", dim, dim);
    k = Linear<T>(store, name + ".attn.k", dim, dim);
    v = Linear<T>(store, name + ".attn.v", dim, dim);
    proj = Linear<T>(store, name + ".attn.proj", dim, dim, residual_gain);
    norm2 = LayerNorm<T>(store, name + ".norm2", dim);
    mlp = Mlp<T>(store, name + ".mlp", dim, mlp_hidden, dim, residual_gain);
  }

  Var<T> operator()(const Var<T>& x, const AttentionMask* allowed = nullptr) const {
    const Var<T> h = norm1(x);
    const Var<T> attn = ag::attention(q(h), k(h), v(h), heads, allowed);
    const Var<T> x1 = ag::add(x, proj(attn));
    return ag::add(x1, mlp(norm2(x1)));
  }
};

}  // namespace mcamvggt::nn

#endif  // MCAMVGGT_NN_HPP_
