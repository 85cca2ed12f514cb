#include "vsrlab/checkpoint.hpp"

#include <Eigen/Core>

#include <bit>
#include <cstring>
#include <fstream>

#include "vsrlab/errors.hpp"

namespace vsrlab::ckpt {
namespace {

constexpr char kMagic[8] = {'V', 'S', 'R', 'L', 'A', 'B', 'C', 'K'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u64(std::ostream& os, std::uint64_t v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  os.write(buf, 8);
}

std::uint64_t get_u64(std::istream& is) {
  char buf[8];
  if (!is.read(buf, 8)) throw IoError("checkpoint truncated");
  std::uint64_t v;
  std::memcpy(&v, buf, 8);
  return v;
}

}  // namespace

const Tensor* Archive::find(const std::string& name) const {
  for (const auto& e : tensors)
    if (e.name == name) return &e.value;
  return nullptr;
}

void save(const std::filesystem::path& file, const Archive& archive, DType dtype) {
  const std::size_t elem = dtype == DType::f32 ? 4 : 2;
  nlohmann::json header;
  header["meta"] = archive.meta;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& e : archive.tensors) {
    const Shape s = e.value.shape();
    const std::uint64_t bytes = e.value.size() * elem;
    header["tensors"].push_back({{"name", e.name},
                                 {"shape", {s.n, s.c, s.h, s.w}},
                                 {"dtype", dtype == DType::f32 ? "f32" : "f16"},
                                 {"offset", offset},
                                 {"bytes", bytes}});
    offset += bytes;
  }
  const std::string text = header.dump();

  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint " + file.string());
  os.write(kMagic, sizeof kMagic);
  put_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& e : archive.tensors) {
    if (dtype == DType::f32) {
      os.write(reinterpret_cast<const char*>(e.value.data()),
               static_cast<std::streamsize>(e.value.size() * 4));
    } else {
      std::vector<Eigen::half> half(e.value.size());
      for (std::size_t i = 0; i < half.size(); ++i) half[i] = Eigen::half(e.value[i]);
      os.write(reinterpret_cast<const char*>(half.data()), static_cast<std::streamsize>(half.size() * 2));
    }
  }
  if (!os) throw IoError("failed writing checkpoint " + file.string());
}

Archive load(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + file.string());
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw IoError(file.string() + " is not a vsrlab checkpoint");
  }
  const std::uint64_t len = get_u64(is);
  if (len > (std::uint64_t{1} << 32)) throw IoError("checkpoint header too large");
  std::string text(len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(len))) throw IoError("checkpoint truncated");

  Archive archive;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    archive.meta = header.at("meta");
    for (const auto& t : header.at("tensors")) {
      const auto dims = t.at("shape").get<std::vector<int>>();
      if (dims.size() != 4) throw IoError("checkpoint tensor shape must have 4 dims");
      const Shape shape{dims[0], dims[1], dims[2], dims[3]};
      const auto dtype = t.at("dtype").get<std::string>();
      Tensor value(shape);
      if (dtype == "f32") {
        if (!is.read(reinterpret_cast<char*>(value.data()), static_cast<std::streamsize>(value.size() * 4))) {
          throw IoError("checkpoint truncated in " + t.at("name").get<std::string>());
        }
      } else if (dtype == "f16") {
        std::vector<Eigen::half> half(value.size());
        if (!is.read(reinterpret_cast<char*>(half.data()), static_cast<std::streamsize>(half.size() * 2))) {
          throw IoError("checkpoint truncated in " + t.at("name").get<std::string>());
        }
        for (std::size_t i = 0; i < half.size(); ++i) value[i] = static_cast<float>(half[i]);
      } else {
        throw IoError("unsupported checkpoint dtype " + dtype);
      }
      archive.tensors.push_back({t.at("name").get<std::string>(), std::move(value)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad checkpoint header: ") + e.what());
  }
  return archive;
}

void append(Archive& archive, const nn::ParamList& params, const std::string& prefix) {
  for (const auto& p : params) archive.tensors.push_back({prefix + p.name, p.var.value()});
}

void restore(const Archive& archive, const nn::ParamList& params, const std::string& prefix) {
  for (const auto& p : params) {
    const Tensor* t = archive.find(prefix + p.name);
    if (!t) throw ConsistencyError("checkpoint has no tensor " + prefix + p.name);
    if (t->shape() != p.var.shape()) {
      throw ConsistencyError("checkpoint tensor " + prefix + p.name + " has shape " + t->shape().str() +
                             ", model expects " + p.var.shape().str());
    }
    auto v = p.var;
    v.mutable_value() = *t;
  }
}

}  // namespace vsrlab::ckpt
