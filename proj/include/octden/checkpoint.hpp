#pragma once

#include <zlib.h>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "octden/binary_io.hpp"
#include "octden/error.hpp"
#include "octden/model.hpp"

namespace octden {

struct EpochRecord {
  std::uint64_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  bool operator==(const EpochRecord&) const = default;
};

struct TrainingMeta {
  std::uint64_t epoch = 0;  // epoch the stored parameters come from
  std::uint64_t seed = 0;
  std::vector<EpochRecord> history;
  bool operator==(const TrainingMeta&) const = default;
};

struct Checkpoint {
  Network<double> network;
  TrainingMeta meta;
  bool operator==(const Checkpoint&) const = default;
};

inline constexpr std::string_view kCheckpointMagic = "OCTD";
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::uint32_t crc32_of(std::span<const char> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto n = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + done), n);
    done += n;
  }
  return static_cast<std::uint32_t>(crc);
}

/// Layout (little-endian):
///   "OCTD" u32:version
///   u32:in_channels u32:width u32:kernel f64:bn_eps f64:bn_momentum
///   u32:block_count u32:block_kind * block_count
///   f64 * N   parameters in block order (state_arrays order)
///   u64:epoch u64:seed u64:history_len (u64:epoch f64:train f64:val) * history_len
///   u32:crc32 of every preceding byte
inline std::vector<char> encode_checkpoint(const Checkpoint& c) {
  detail::ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  const NetworkSpec& s = c.network.spec;
  w.u32(static_cast<std::uint32_t>(s.in_channels));
  w.u32(static_cast<std::uint32_t>(s.width));
  w.u32(static_cast<std::uint32_t>(s.kernel));
  w.f64(s.bn_eps);
  w.f64(s.bn_momentum);
  w.u32(static_cast<std::uint32_t>(s.blocks.size()));
  for (BlockKind k : s.blocks) w.u32(static_cast<std::uint32_t>(k));
  for (const auto& p : state_arrays(const_cast<Network<double>&>(c.network))) w.f64s(p.values);
  w.u64(c.meta.epoch);
  w.u64(c.meta.seed);
  w.u64(c.meta.history.size());
  for (const auto& r : c.meta.history) {
    w.u64(r.epoch);
    w.f64(r.train_loss);
    w.f64(r.val_loss);
  }
  w.u32(crc32_of(w.buffer()));
  return std::move(w.buffer());
}

inline Checkpoint decode_checkpoint(std::span<const char> bytes,
                                    const std::string& what = "checkpoint") {
  if (bytes.size() >= kCheckpointMagic.size() &&
      std::string_view(bytes.data(), kCheckpointMagic.size()) != kCheckpointMagic) {
    throw BadMagicError(what + ": not an octden checkpoint");
  }
  detail::ByteReader r(bytes, what);
  r.bytes(kCheckpointMagic.size());
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw VersionMismatchError(what + ": checkpoint version " + std::to_string(version) +
                               ", expected " + std::to_string(kCheckpointVersion));
  }
  NetworkSpec spec;
  spec.in_channels = r.u32();
  spec.width = r.u32();
  spec.kernel = r.u32();
  spec.bn_eps = r.f64();
  spec.bn_momentum = r.f64();
  const std::uint32_t nblocks = r.u32();
  if (nblocks > 1024) throw MalformedHeaderError(what + ": implausible block count");
  spec.blocks.clear();
  for (std::uint32_t i = 0; i < nblocks; ++i) {
    const std::uint32_t k = r.u32();
    if (k < 1 || k > 4) throw MalformedHeaderError(what + ": unknown block kind " + std::to_string(k));
    spec.blocks.push_back(static_cast<BlockKind>(k));
  }
  if (spec.width > 4096 || spec.in_channels > 64 || spec.kernel > 15) {
    throw MalformedHeaderError(what + ": implausible network dimensions");
  }
  Checkpoint c;
  try {
    c.network = make_zero_network<double>(spec);
  } catch (const InputError& e) {
    throw MalformedHeaderError(what + ": " + e.what());
  }
  for (auto& p : state_arrays(c.network)) r.f64s(p.values);
  c.meta.epoch = r.u64();
  c.meta.seed = r.u64();
  const std::uint64_t nhist = r.u64();
  r.need(nhist > r.remaining() / 24 ? r.remaining() + 1 : nhist * 24);
  c.meta.history.resize(nhist);
  for (auto& h : c.meta.history) {
    h.epoch = r.u64();
    h.train_loss = r.f64();
    h.val_loss = r.f64();
  }
  const std::size_t body = r.position();
  const std::uint32_t stored = r.u32();
  if (r.remaining() != 0) throw MalformedHeaderError(what + ": trailing bytes after checksum");
  if (stored != crc32_of(bytes.first(body))) throw ChecksumError(what + ": CRC-32 mismatch");
  return c;
}

/// Atomic: the file at `path` is either the old one or the complete new one.
inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  detail::write_file_atomic(path, encode_checkpoint(c));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file(path), path.string());
}

}  // namespace octden
