//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#include "erpflow/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "erpflow/binio.hpp"
#include "erpflow/hash.hpp"

namespace erpflow::ad {

namespace {
constexpr std::string_view kMagic = "ERPTNSR1";
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::string serialize_tensors(const NamedTensors& t) {
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(t.items.size()));
  for (const auto& [name, tensor] : t.items) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(tensor.rows()));
    w.u32(static_cast<std::uint32_t>(tensor.cols()));
    for (const double v : tensor.raw()) w.f64(v);
  }
  Fnv1a sum;
  sum.update(w.data());
  w.u64(sum.digest());
  return w.take();
}

NamedTensors deserialize_tensors(std::string_view blob) {
  if (blob.size() < kMagic.size() + 8)
    throw CheckpointError("tensor blob truncated");
  const std::string_view body = blob.substr(0, blob.size() - 8);
  Fnv1a sum;
  sum.update(body);
  ByteReader tail(blob.substr(blob.size() - 8));
  if (tail.u64() != sum.digest())
    throw CheckpointError("tensor blob checksum mismatch");

  try {
    ByteReader r(body);
    if (r.bytes(kMagic.size()) != kMagic)
      throw CheckpointError("bad tensor blob magic");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
      throw CheckpointError("unsupported tensor blob version " +
                            std::to_string(version));
    NamedTensors out;
    const std::uint32_t count = r.u32();
    out.items.reserve(count);
    for (std::uint32_t k = 0; k < count; ++k) {
      std::string name = r.str();
      const std::uint32_t rows = r.u32();
      const std::uint32_t cols = r.u32();
      Tensor tensor(static_cast<int>(rows), static_cast<int>(cols));
      for (double& v : tensor.raw()) v = r.f64();
      out.items.emplace_back(std::move(name), std::move(tensor));
    }
    if (!r.done()) throw CheckpointError("trailing bytes in tensor blob");
    return out;
  } catch (const std::runtime_error& e) {
    throw CheckpointError(e.what());
  }
}

void save_checkpoint(const std::string& path, const NamedTensors& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path);
  const std::string blob = serialize_tensors(t);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw CheckpointError("checkpoint write failed: " + path);
}

NamedTensors load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_tensors(ss.str());
}

}  // namespace erpflow::ad
