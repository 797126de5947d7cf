// Copyright 2026 The samgar Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <string>

#include "sam/binary_io.hpp"
#include "sam/json_fields.hpp"
#include "sam/pipeline/model.hpp"
#include "sam/pipeline/train.hpp"

namespace sam {

inline void to_json(json& j, const ModelDims& d) {
  j = json{{"raw_dim", d.raw_dim},         {"embed_dim", d.embed_dim},
           {"relation_dim", d.relation_dim}, {"num_classes", d.num_classes},
           {"spatial_sam", d.spatial_sam},   {"k_proposals", d.k_proposals},
           {"temporal_sam", d.temporal_sam}, {"k_frames", d.k_frames}};
}

inline ModelDims parse_model_dims(const json& j, const std::string& prefix = "dims") {
  ModelDims d;
  FieldReader r(j, prefix);
  r.read("raw_dim", d.raw_dim);
  r.read("embed_dim", d.embed_dim);
  r.read("relation_dim", d.relation_dim);
  r.read("num_classes", d.num_classes);
  r.read("spatial_sam", d.spatial_sam);
  r.read("k_proposals", d.k_proposals);
  r.read("temporal_sam", d.temporal_sam);
  r.read("k_frames", d.k_frames);
  r.reject_unknown();
  if (d.raw_dim < 1 || d.embed_dim < 1 || d.relation_dim < 1 || d.num_classes < 2) {
    throw ConfigError(prefix, "dimensions must be positive and num_classes >= 2");
  }
  if (d.k_proposals < 1 || d.k_frames < 1) throw ConfigError(prefix, "K must be >= 1");
  return d;
}

/// A model together with the training configuration it was produced under.
template <typename T>
struct Checkpoint {
  Model<T> model;
  TrainConfig train;
};

/**
 * Writes `dir/checkpoint.json` plus one `dir/params/<name>.bin` per tensor.
 * Tensors are stored as little-endian doubles regardless of T.
 */
template <typename T>
void save_checkpoint(Model<T>& model, const TrainConfig& cfg, const std::filesystem::path& dir) {
  json params = json::array();
  for (const auto& p : model.parameters()) {
    const std::string rel = "params/" + p.name + ".bin";
    io::Writer w;
    w.header({io::kParamMagic, io::kFormatVersion, static_cast<std::int64_t>(p.value->rows()),
              static_cast<std::int64_t>(p.value->cols()), 0, 0, 0, 0});
    for (T v : p.value->flat()) w.f64(static_cast<double>(v));
    w.save(dir / rel);
    params.push_back({{"name", p.name}, {"file", rel}, {"rows", p.value->rows()}, {"cols", p.value->cols()}});
  }
  json doc{{"format", "samgar-checkpoint"},
           {"version", io::kFormatVersion},
           {"dims", model.dims},
           {"train", cfg},
           {"parameters", params}};
  io::write_text(dir / "checkpoint.json", doc.dump(1) + "\n");
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& dir) {
  const auto meta = dir / "checkpoint.json";
  if (!std::filesystem::exists(meta)) throw io::IoError("checkpoint not found: " + meta.string());
  const json doc = json::parse(io::read_text(meta));
  if (doc.value("format", "") != "samgar-checkpoint") throw io::IoError("not a samgar checkpoint: " + dir.string());
  if (doc.value("version", 0) != io::kFormatVersion) {
    throw io::IoError("checkpoint version mismatch: file has " + doc.at("version").dump() + ", expected " +
                      std::to_string(io::kFormatVersion));
  }
  const ModelDims dims = parse_model_dims(doc.at("dims"));
  Checkpoint<T> ck{Model<T>(dims), parse_train_config(doc.at("train"))};
  auto refs = ck.model.parameters();
  const auto& listed = doc.at("parameters");
  if (listed.size() != refs.size()) throw io::IoError("checkpoint parameter count does not match its dims");
  for (std::size_t k = 0; k < refs.size(); ++k) {
    if (listed[k].at("name").get<std::string>() != refs[k].name) {
      throw io::IoError("checkpoint parameter " + std::to_string(k) + " is " + listed[k].at("name").dump() +
                        ", expected " + refs[k].name);
    }
    io::Reader r(dir / listed[k].at("file").get<std::string>());
    const auto h = r.header();
    io::expect_magic(h, io::kParamMagic, r.name());
    auto& m = *refs[k].value;
    if (h[2] != static_cast<std::int64_t>(m.rows()) || h[3] != static_cast<std::int64_t>(m.cols())) {
      throw io::IoError(r.name() + ": shape " + std::to_string(h[2]) + "x" + std::to_string(h[3]) +
                        " does not match " + m.shape());
    }
    for (auto& v : m.flat()) v = static_cast<T>(r.f64());
    if (!r.at_end()) throw io::IoError(r.name() + ": trailing bytes");
  }
  return ck;
}

}  // namespace sam
