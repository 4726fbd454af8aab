#pragma once

// Checkpoint container:
//   "SUHM" | version u32 | metadata length u32 | metadata JSON bytes |
//   records { name length u32, name, rank u32, dims u32 x rank, f32 payload }
// until end of file. Optimizer moments use the leaf name plus ".m1" / ".m2".

#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "suhmo/binary_io.hpp"
#include "suhmo/params.hpp"
#include "suhmo/tensor.hpp"

namespace suhmo {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Tensor<float>> tensors;

  bool operator==(const Checkpoint&) const = default;

  template <class T>
  void put(const ParamSet<T>& ps, const std::string& suffix = "") {
    for (const auto& [name, t] : ps) tensors.insert_or_assign(name + suffix, t.template cast<float>());
  }

  template <class T>
  void put(const std::map<std::string, Tensor<T>>& leaves, const std::string& suffix) {
    for (const auto& [name, t] : leaves) tensors.insert_or_assign(name + suffix, t.template cast<float>());
  }

  // Overwrites every leaf of `ps` with the stored record of the same name.
  template <class T>
  void get(ParamSet<T>& ps, const std::string& suffix = "") const {
    for (auto& [name, t] : ps) {
      auto it = tensors.find(name + suffix);
      if (it == tensors.end()) throw FormatError("checkpoint: missing record '" + name + suffix + "'");
      if (it->second.shape() != t.shape()) {
        throw FormatError("checkpoint: record '" + name + suffix + "' has shape " + shape_str(it->second.shape()) +
                          ", model expects " + shape_str(t.shape()));
      }
      t = it->second.template cast<T>();
    }
  }

  std::vector<unsigned char> encode() const {
    ByteWriter w;
    w.str("SUHM");
    w.u32(kCheckpointVersion);
    const std::string m = meta.dump();
    w.u32(static_cast<std::uint32_t>(m.size()));
    w.str(m);
    for (const auto& [name, t] : tensors) {
      w.u32(static_cast<std::uint32_t>(name.size()));
      w.str(name);
      w.u32(static_cast<std::uint32_t>(t.shape().size()));
      for (auto d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
      for (float v : t.values()) w.f32(v);
    }
    return w.buffer();
  }

  static Checkpoint decode(ByteReader r) {
    if (r.str(4, "magic") != "SUHM") throw FormatError(r.what() + ": not a checkpoint (bad magic)");
    const auto version = r.u32("version");
    if (version != kCheckpointVersion) {
      throw FormatError(r.what() + ": unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint c;
    const auto mlen = r.u32("metadata length");
    try {
      c.meta = nlohmann::json::parse(r.str(mlen, "metadata"));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(r.what() + ": bad metadata: " + e.what());
    }
    while (!r.done()) {
      const auto nlen = r.u32("record name length");
      std::string name = r.str(nlen, "record name");
      const auto rank = r.u32("record rank");
      if (rank > 3) throw FormatError(r.what() + ": record '" + name + "' has rank " + std::to_string(rank));
      Shape shape;
      for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.u32("record dims"));
      r.need(4 * numel(shape), "record payload");
      std::vector<float> data(numel(shape));
      for (auto& v : data) v = r.f32();
      c.tensors.insert_or_assign(std::move(name), Tensor<float>(std::move(shape), std::move(data)));
    }
    return c;
  }

  void save(const std::string& path) const {
    ByteWriter w;
    const auto bytes = encode();
    w.bytes(bytes.data(), bytes.size());
    w.save(path);
  }

  static Checkpoint load(const std::string& path) { return decode(ByteReader::from_file(path)); }
};

}  // namespace suhmo
