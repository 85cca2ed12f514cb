#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsrlab/nn.hpp"
#include "vsrlab/tensor.hpp"

// Archive layout: 8-byte magic "VSRLABCK", u64 little-endian header length,
// JSON header {"meta", "tensors": [{name, shape, dtype, offset, bytes}]},
// then the raw little-endian tensor blobs in header order.
namespace vsrlab::ckpt {

enum class DType { f32, f16 };

struct Entry {
  std::string name;
  Tensor value;
};

struct Archive {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<Entry> tensors;

  [[nodiscard]] const Tensor* find(const std::string& name) const;
};

void save(const std::filesystem::path& file, const Archive& archive, DType dtype = DType::f32);
Archive load(const std::filesystem::path& file);  // IoError on malformed files

// Entries for every parameter, names prefixed with `prefix`.
void append(Archive& archive, const nn::ParamList& params, const std::string& prefix = "");
// Copies tensors named prefix + param name into the parameters. Missing names
// or mismatched shapes throw ConsistencyError.
void restore(const Archive& archive, const nn::ParamList& params, const std::string& prefix = "");

}  // namespace vsrlab::ckpt
