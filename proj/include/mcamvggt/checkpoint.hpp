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

#ifndef MCAMVGGT_CHECKPOINT_HPP_
#define MCAMVGGT_CHECKPOINT_HPP_

#include <filesystem>
#include <map>
#include <string>

#include "mcamvggt/config.hpp"
#include "mcamvggt/io.hpp"
#include "mcamvggt/model.hpp"

namespace mcamvggt {

// First and second Adam moments, keyed by parameter name.
template <typename T>
struct AdamMoments {
  std::map<std::string, ag::Matrix<T>> m;
  std::map<std::string, ag::Matrix<T>> v;
  long long updates = 0;
};

struct CheckpointInfo {
  ModelConfig model;
  std::string fingerprint;
  int step = 0;
};

namespace detail {

template <typename T>
io::NamedArray to_named(const std::string& name, const ag::Matrix<T>& m) {
  io::NamedArray a{name, {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())}, {}};
  a.data.resize(static_cast<std::size_t>(m.size()));
  for (Eigen::Index k = 0; k < m.size(); ++k) a.data[k] = static_cast<float>(m.data()[k]);
  return a;
}

template <typename T>
ag::Matrix<T> from_named(const io::NamedArray& a) {
  if (a.shape.size() != 2) throw IoError("checkpoint array '" + a.name + "' is not 2-D");
  ag::Matrix<T> m(a.shape[0], a.shape[1]);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = static_cast<T>(a.data[k]);
  return m;
}

}  // namespace detail

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const DriveModel<T>& model, int step,
                     const AdamMoments<T>* moments = nullptr) {
  io::CheckpointFile ck;
  ck.header = {{"model", model_to_json(model.config())},
               {"fingerprint", model_fingerprint(model.config())},
               {"step", step},
               {"adam_updates", moments ? moments->updates : 0}};
  for (const auto& [name, p] : model.parameters().all()) ck.arrays.push_back(detail::to_named("param/" + name, p.value()));
  if (moments != nullptr) {
    for (const auto& [name, m] : moments->m) ck.arrays.push_back(detail::to_named("adam.m/" + name, m));
    for (const auto& [name, v] : moments->v) ck.arrays.push_back(detail::to_named("adam.v/" + name, v));
  }
  io::write_checkpoint(path, ck);
}

inline CheckpointInfo checkpoint_info(const io::CheckpointFile& ck) {
  CheckpointInfo info;
  try {
    info.model = model_from_json(ck.header.at("model"));
    info.fingerprint = ck.header.at("fingerprint").get<std::string>();
    info.step = ck.header.at("step").get<int>();
  } catch (const json::exception& e) {
    throw IoError(std::string("checkpoint header: ") + e.what());
  }
  return info;
}

// Restores parameters (and optionally optimizer moments) into `model`, whose
// configuration must carry the checkpoint's fingerprint.
template <typename T>
CheckpointInfo load_checkpoint(const std::filesystem::path& path, DriveModel<T>& model,
                               AdamMoments<T>* moments = nullptr) {
  const io::CheckpointFile ck = io::read_checkpoint(path);
  const CheckpointInfo info = checkpoint_info(ck);
  if (info.fingerprint != model_fingerprint(model.config())) {
    throw FingerprintMismatch("checkpoint fingerprint " + info.fingerprint + " does not match model config " +
                              model_fingerprint(model.config()));
  }
  std::map<std::string, const io::NamedArray*> by_name;
  for (const auto& a : ck.arrays) by_name[a.name] = &a;
  for (auto& [name, p] : model.parameters().all()) {
    auto it = by_name.find("param/" + name);
    if (it == by_name.end()) throw MissingCheckpoint("checkpoint lacks parameter '" + name + "'");
    ag::Matrix<T> value = detail::from_named<T>(*it->second);
    if (value.rows() != p.rows() || value.cols() != p.cols()) {
      throw FingerprintMismatch("parameter '" + name + "' has a different shape in the checkpoint");
    }
    p.mutable_value() = std::move(value);
  }
  if (moments != nullptr) {
    moments->m.clear();
    moments->v.clear();
    moments->updates = ck.header.value("adam_updates", 0LL);
    for (const auto& a : ck.arrays) {
      if (a.name.rfind("adam.m/", 0) == 0) moments->m[a.name.substr(7)] = detail::from_named<T>(a);
      if (a.name.rfind("adam.v/", 0) == 0) moments->v[a.name.substr(7)] = detail::from_named<T>(a);
    }
  }
  return info;
}

// Builds a model from the configuration stored in the checkpoint itself.
template <typename T>
DriveModel<T> model_from_checkpoint(const std::filesystem::path& path, CheckpointInfo* info = nullptr) {
  const CheckpointInfo ci = checkpoint_info(io::read_checkpoint(path));
  DriveModel<T> model(ci.model);
  load_checkpoint(path, model);
  if (info != nullptr) *info = ci;
  return model;
}

}  // namespace mcamvggt

#endif  // MCAMVGGT_CHECKPOINT_HPP_
