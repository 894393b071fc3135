#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "jz/model.hpp"
#include "jz/optim.hpp"

namespace jz {

namespace detail {

inline std::uint64_t fnv1a64(const char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace detail

struct Checkpoint {
  ModelParams params;
  AdamState opt;
  std::int64_t trained_steps = 0;
};

/**
 * Checkpoint format: `manifest.json` describing config, tensor names,
 * shapes, byte offsets, endianness and an FNV-1a checksum, plus
 * `params.bin`, a flat little-endian array of 64-bit floats. Optimizer
 * moments are stored alongside the parameters under `adam.m.*` / `adam.v.*`
 * so a resumed run continues identically.
 */
inline void save_checkpoint(const ModelParams& params, const AdamState* opt,
                            std::int64_t trained_steps, const std::string& dir) {
  static_assert(std::endian::native == std::endian::little,
                "checkpoint writer assumes a little-endian host");
  std::filesystem::create_directories(dir);

  std::vector<std::pair<std::string, const Tensor*>> entries;
  for (const auto& [name, t] : params.tensors) entries.emplace_back(name, &t);
  if (opt) {
    for (const auto& [name, t] : opt->m) entries.emplace_back("adam.m." + name, &t);
    for (const auto& [name, t] : opt->v) entries.emplace_back("adam.v." + name, &t);
  }

  std::vector<double> payload;
  nlohmann::json tensor_list = nlohmann::json::array();
  for (const auto& [name, t] : entries) {
    tensor_list.push_back({{"name", name},
                           {"shape", t->shape},
                           {"offset", payload.size() * sizeof(double)}});
    for (real v : t->data) payload.push_back(static_cast<double>(v));
  }
  const char* bytes = reinterpret_cast<const char*>(payload.data());
  const std::size_t nbytes = payload.size() * sizeof(double);

  nlohmann::json manifest;
  manifest["config"] = params.config.to_json();
  manifest["dtype"] = "f64";
  manifest["endianness"] = "little";
  manifest["tensors"] = tensor_list;
  manifest["checksum"] = detail::hex64(detail::fnv1a64(bytes, nbytes));
  manifest["payload_bytes"] = nbytes;
  manifest["trained_steps"] = trained_steps;

  std::ofstream bin(std::filesystem::path(dir) / "params.bin", std::ios::binary);
  require(bin.good(), "save_checkpoint: cannot write params.bin in " + dir);
  bin.write(bytes, static_cast<std::streamsize>(nbytes));
  std::ofstream mf(std::filesystem::path(dir) / "manifest.json");
  require(mf.good(), "save_checkpoint: cannot write manifest.json in " + dir);
  mf << manifest.dump(2) << "\n";
}

/// Loads and validates a checkpoint: checksum, payload size, and the shape
/// of every core parameter against the stored config.
inline Checkpoint load_checkpoint(const std::string& dir) {
  std::ifstream mf(std::filesystem::path(dir) / "manifest.json");
  require(mf.good(), "load_checkpoint: cannot open manifest.json in " + dir);
  nlohmann::json manifest = nlohmann::json::parse(mf);
  require(manifest.value("endianness", "") == "little",
          "load_checkpoint: unsupported endianness");
  require(manifest.value("dtype", "") == "f64", "load_checkpoint: unsupported dtype");

  std::ifstream bin(std::filesystem::path(dir) / "params.bin", std::ios::binary);
  require(bin.good(), "load_checkpoint: cannot open params.bin in " + dir);
  std::vector<char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  require(bytes.size() == manifest.at("payload_bytes").get<std::size_t>(),
          "load_checkpoint: payload size mismatch");
  require(detail::hex64(detail::fnv1a64(bytes.data(), bytes.size())) ==
              manifest.at("checksum").get<std::string>(),
          "load_checkpoint: checksum mismatch");
  const double* payload = reinterpret_cast<const double*>(bytes.data());
  const std::size_t n_doubles = bytes.size() / sizeof(double);

  Checkpoint ck;
  ck.params.config = ModelConfig::from_json(manifest.at("config"));
  ck.params.config.validate();
  ck.trained_steps = manifest.value("trained_steps", std::int64_t(0));

  for (const auto& entry : manifest.at("tensors")) {
    std::string name = entry.at("name").get<std::string>();
    std::vector<std::size_t> shape = entry.at("shape").get<std::vector<std::size_t>>();
    std::size_t offset = entry.at("offset").get<std::size_t>() / sizeof(double);
    std::size_t count = Tensor::count(shape);
    require(offset + count <= n_doubles, "load_checkpoint: tensor " + name + " out of payload");
    Tensor t(shape);
    for (std::size_t i = 0; i < count; ++i) t.data[i] = static_cast<real>(payload[offset + i]);
    if (name.rfind("adam.m.", 0) == 0)
      ck.opt.m.emplace(name.substr(7), std::move(t));
    else if (name.rfind("adam.v.", 0) == 0)
      ck.opt.v.emplace(name.substr(7), std::move(t));
    else
      ck.params.tensors.emplace(name, std::move(t));
  }

  for (const auto& [name, shape, kind] : param_registry(ck.params.config)) {
    auto it = ck.params.tensors.find(name);
    require(it != ck.params.tensors.end(), "load_checkpoint: missing parameter " + name);
    require(it->second.shape == shape,
            "load_checkpoint: shape mismatch for " + name + ": stored " +
                Tensor::shape_str(it->second.shape) + ", config expects " +
                Tensor::shape_str(shape));
  }
  return ck;
}

}  // namespace jz
