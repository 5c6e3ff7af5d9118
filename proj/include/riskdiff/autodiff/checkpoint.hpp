// Copyright 2026 The riskdiff Authors
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

#ifndef RISKDIFF__AUTODIFF__CHECKPOINT_HPP_
#define RISKDIFF__AUTODIFF__CHECKPOINT_HPP_

#include "riskdiff/autodiff/adam.hpp"
#include "riskdiff/autodiff/nn.hpp"
#include "riskdiff/autodiff/tensor.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

// Persistent format shared by checkpoints and the scene cache:
//   <stem>.json  manifest: entry names, shapes, byte offsets, free-form metadata
//   <stem>.bin   one flat little-endian float32 blob
namespace riskdiff::io
{

class FormatError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct BlobEntry
{
  std::string name;
  ad::Shape shape;
  std::vector<float> data;
};

struct BlobBundle
{
  std::vector<BlobEntry> entries;
  nlohmann::json metadata = nlohmann::json::object();

  const BlobEntry & get(const std::string & name) const
  {
    for (const auto & e : entries) {
      if (e.name == name) {
        return e;
      }
    }
    throw FormatError("blob bundle: no entry '" + name + "'");
  }
  bool contains(const std::string & name) const
  {
    for (const auto & e : entries) {
      if (e.name == name) {
        return true;
      }
    }
    return false;
  }
};

inline constexpr const char * kBlobFormat = "riskdiff-blob-v1";

namespace detail
{

inline void put_f32_le(std::vector<unsigned char> & out, float f)
{
  std::uint32_t u = 0;
  std::memcpy(&u, &f, sizeof u);
  for (int b = 0; b < 4; ++b) {
    out.push_back(static_cast<unsigned char>((u >> (8 * b)) & 0xffU));
  }
}

inline float get_f32_le(const unsigned char * p)
{
  std::uint32_t u = 0;
  for (int b = 0; b < 4; ++b) {
    u |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  }
  float f = 0;
  std::memcpy(&f, &u, sizeof f);
  return f;
}

}  // namespace detail

/// Writes `<stem>.json` and `<stem>.bin`.
inline void write_bundle(const std::filesystem::path & stem, const BlobBundle & bundle)
{
  std::vector<unsigned char> bytes;
  nlohmann::json entries = nlohmann::json::array();
  for (const auto & e : bundle.entries) {
    if (ad::numel(e.shape) != e.data.size()) {
      throw FormatError("blob bundle: entry '" + e.name + "' shape/data mismatch");
    }
    entries.push_back(
      {{"name", e.name}, {"shape", e.shape}, {"offset", bytes.size()}, {"count", e.data.size()}});
    for (float f : e.data) {
      detail::put_f32_le(bytes, f);
    }
  }
  const std::filesystem::path blob_path = std::filesystem::path(stem.string() + ".bin");
  const std::filesystem::path json_path = std::filesystem::path(stem.string() + ".json");
  nlohmann::json manifest = {
    {"format", kBlobFormat},
    {"dtype", "float32"},
    {"byte_order", "little"},
    {"blob", blob_path.filename().string()},
    {"blob_bytes", bytes.size()},
    {"entries", entries},
    {"metadata", bundle.metadata}};
  {
    std::ofstream bin(blob_path, std::ios::binary | std::ios::trunc);
    if (!bin) {
      throw FormatError("cannot open " + blob_path.string() + " for writing");
    }
    bin.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!bin) {
      throw FormatError("write failed: " + blob_path.string());
    }
  }
  std::ofstream js(json_path, std::ios::trunc);
  if (!js) {
    throw FormatError("cannot open " + json_path.string() + " for writing");
  }
  js << manifest.dump(2) << '\n';
  if (!js) {
    throw FormatError("write failed: " + json_path.string());
  }
}

inline BlobBundle read_bundle(const std::filesystem::path & stem)
{
  const std::filesystem::path json_path = std::filesystem::path(stem.string() + ".json");
  std::ifstream js(json_path);
  if (!js) {
    throw FormatError("cannot open manifest " + json_path.string());
  }
  nlohmann::json manifest;
  try {
    js >> manifest;
  } catch (const nlohmann::json::exception & e) {
    throw FormatError("malformed manifest " + json_path.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != kBlobFormat) {
    throw FormatError("unsupported manifest format in " + json_path.string());
  }
  const std::filesystem::path blob_path =
    json_path.parent_path() / manifest.at("blob").get<std::string>();
  std::ifstream bin(blob_path, std::ios::binary);
  if (!bin) {
    throw FormatError("cannot open blob " + blob_path.string());
  }
  std::vector<unsigned char> bytes(
    (std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  if (bytes.size() != manifest.at("blob_bytes").get<std::size_t>()) {
    throw FormatError("blob size mismatch for " + blob_path.string());
  }
  BlobBundle bundle;
  bundle.metadata = manifest.value("metadata", nlohmann::json::object());
  for (const auto & e : manifest.at("entries")) {
    BlobEntry entry;
    entry.name = e.at("name").get<std::string>();
    entry.shape = e.at("shape").get<ad::Shape>();
    const auto offset = e.at("offset").get<std::size_t>();
    const auto count = e.at("count").get<std::size_t>();
    if (ad::numel(entry.shape) != count || offset + 4 * count > bytes.size()) {
      throw FormatError("manifest entry '" + entry.name + "' out of bounds");
    }
    entry.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      entry.data[i] = detail::get_f32_le(bytes.data() + offset + 4 * i);
    }
    bundle.entries.push_back(std::move(entry));
  }
  return bundle;
}

/// Appends every parameter (and, when given, its Adam moments) to a bundle.
template <class T>
void append_params(
  BlobBundle & bundle, const ad::ParamSet<T> & params, const ad::AdamState<T> * adam = nullptr)
{
  std::size_t i = 0;
  for (const auto & [name, t] : params.entries()) {
    BlobEntry e{name, t.shape(), {}};
    e.data.assign(t.values().begin(), t.values().end());
    bundle.entries.push_back(std::move(e));
    if (adam != nullptr) {
      const auto & m = adam->first_moments().at(i);
      const auto & v = adam->second_moments().at(i);
      bundle.entries.push_back({"adam.m." + name, t.shape(), {m.begin(), m.end()}});
      bundle.entries.push_back({"adam.v." + name, t.shape(), {v.begin(), v.end()}});
    }
    ++i;
  }
  if (adam != nullptr) {
    bundle.metadata["adam_step"] = adam->step_count();
  }
}

/// Restores parameters by name; every parameter must be present with the
/// same shape.
template <class T>
void restore_params(
  const BlobBundle & bundle, ad::ParamSet<T> & params, ad::AdamState<T> * adam = nullptr)
{
  std::size_t i = 0;
  for (const auto & [name, t] : params.entries()) {
    const BlobEntry & e = bundle.get(name);
    if (e.shape != t.shape()) {
      throw FormatError(
        "checkpoint: shape mismatch for '" + name + "': stored " + ad::shape_str(e.shape) +
        ", model " + ad::shape_str(t.shape()));
    }
    ad::Tensor<T> p = t;
    auto dst = p.mutable_values();
    for (std::size_t k = 0; k < dst.size(); ++k) {
      dst[k] = static_cast<T>(e.data[k]);
    }
    if (adam != nullptr) {
      const auto & m = bundle.get("adam.m." + name).data;
      const auto & v = bundle.get("adam.v." + name).data;
      adam->first_moments().at(i).assign(m.begin(), m.end());
      adam->second_moments().at(i).assign(v.begin(), v.end());
    }
    ++i;
  }
  if (adam != nullptr) {
    adam->set_step_count(bundle.metadata.value("adam_step", std::int64_t{0}));
  }
}

}  // namespace riskdiff::io

#endif  // RISKDIFF__AUTODIFF__CHECKPOINT_HPP_
