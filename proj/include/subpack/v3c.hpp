#pragma once

// V3C-style container: sample-stream framing of typed units, a parameter set
// with packing information, and the SEI that maps packed regions to
// subpicture ids.

#include "layout.hpp"
#include "nal_hls.hpp"

#include <map>
#include <set>
#include <utility>
#include <vector>

namespace subpack {

enum class V3cUnitType : std::uint8_t { VPS = 0, AD = 1, OVD = 2, GVD = 3, AVD = 4, PVD = 5 };

constexpr auto name(V3cUnitType type) -> std::string_view {
  switch (type) {
  case V3cUnitType::VPS:
    return "V3C_VPS";
  case V3cUnitType::AD:
    return "V3C_AD";
  case V3cUnitType::OVD:
    return "V3C_OVD";
  case V3cUnitType::GVD:
    return "V3C_GVD";
  case V3cUnitType::AVD:
    return "V3C_AVD";
  case V3cUnitType::PVD:
    return "V3C_PVD";
  }
  return "?";
}

struct V3cUnit {
  V3cUnitType unit_type{V3cUnitType::VPS};
  std::uint8_t parameter_set_id{}; // 0..15
  std::uint8_t atlas_id{};         // 0..63
  Bytes payload;

  friend auto operator==(const V3cUnit &, const V3cUnit &) -> bool = default;
};

inline constexpr std::size_t v3cUnitHeaderBytes = 4;

enum class PackedRegionKind : std::uint8_t { Attribute = 0, Geometry = 1, Occupancy = 2, Filler = 3 };

constexpr auto name(PackedRegionKind kind) -> std::string_view {
  switch (kind) {
  case PackedRegionKind::Attribute:
    return "attribute";
  case PackedRegionKind::Geometry:
    return "geometry";
  case PackedRegionKind::Occupancy:
    return "occupancy";
  case PackedRegionKind::Filler:
    return "filler";
  }
  return "?";
}

struct PackedRegion {
  std::uint32_t region_id{};
  PackedRegionKind kind{PackedRegionKind::Attribute};
  std::uint32_t x{}; // luma samples in the packed frame
  std::uint32_t y{};
  std::uint32_t w{};
  std::uint32_t h{};
  Rotation rotation{Rotation::R0};

  friend auto operator==(const PackedRegion &, const PackedRegion &) -> bool = default;
};

struct PackingInformation {
  std::vector<PackedRegion> regions;

  [[nodiscard]] auto find(std::uint32_t regionId) const -> const PackedRegion * {
    for (const auto &r : regions) {
      if (r.region_id == regionId) {
        return &r;
      }
    }
    return nullptr;
  }

  friend auto operator==(const PackingInformation &, const PackingInformation &) -> bool = default;
};

struct V3cParameterSet {
  std::uint8_t vps_id{};
  std::optional<PackingInformation> packing;

  friend auto operator==(const V3cParameterSet &, const V3cParameterSet &) -> bool = default;
};

struct PackedRegionsSei {
  struct Entry {
    std::uint32_t region_id{};
    std::uint32_t subpic_id{};

    friend auto operator==(const Entry &, const Entry &) -> bool = default;
  };
  std::vector<Entry> entries;

  friend auto operator==(const PackedRegionsSei &, const PackedRegionsSei &) -> bool = default;
};

inline auto encodeVps(const V3cParameterSet &vps) -> Bytes {
  BitWriter w;
  w.writeBits(vps.vps_id, 4);
  w.writeFlag(vps.packing.has_value());
  if (vps.packing) {
    w.writeUe(vps.packing->regions.size());
    for (const auto &r : vps.packing->regions) {
      w.writeUe(r.region_id);
      w.writeBits(static_cast<unsigned>(r.kind), 3);
      w.writeUe(r.x);
      w.writeUe(r.y);
      w.writeUe(r.w);
      w.writeUe(r.h);
      w.writeBits(static_cast<unsigned>(r.rotation), 2);
    }
  }
  w.writeTrailingBits();
  return std::move(w).bytes();
}

inline auto decodeVps(ByteSpan payload, SyntaxTrace *trace = nullptr) -> V3cParameterSet {
  BitReader r{payload, trace};
  V3cParameterSet vps;
  vps.vps_id = static_cast<std::uint8_t>(r.readBits(4, "vps_id"));
  if (r.readFlag("packing_present_flag")) {
    PackingInformation pi;
    const auto count = r.readUe("num_regions");
    if (count > r.bitsLeft()) {
      fail(Errc::Malformed, "VPS region count exceeds the payload");
    }
    for (std::uint32_t i = 0; i < count; ++i) {
      PackedRegion region;
      region.region_id = r.readUe("region_id");
      const auto kind = r.readBits(3, "region_kind");
      if (kind > 3) {
        fail(Errc::Malformed, "unknown packed region kind " + std::to_string(kind));
      }
      region.kind = static_cast<PackedRegionKind>(kind);
      region.x = r.readUe("region_x");
      region.y = r.readUe("region_y");
      region.w = r.readUe("region_w");
      region.h = r.readUe("region_h");
      const auto rot = r.readBits(2, "region_rotation");
      if (rot > 1) {
        fail(Errc::Malformed, "unsupported region rotation code " + std::to_string(rot));
      }
      region.rotation = static_cast<Rotation>(rot);
      pi.regions.push_back(region);
    }
    vps.packing = std::move(pi);
  }
  r.readTrailingBits();
  return vps;
}

inline auto encodePackedRegionsSei(const PackedRegionsSei &sei) -> SeiMessage {
  BitWriter w;
  w.writeUe(sei.entries.size());
  for (const auto &e : sei.entries) {
    w.writeUe(e.region_id);
    w.writeBits(e.subpic_id, 16);
  }
  w.writeZeroAlignment();
  return {packedRegionsSeiType, std::move(w).bytes()};
}

inline auto decodePackedRegionsSei(const SeiMessage &message, SyntaxTrace *trace = nullptr)
    -> PackedRegionsSei {
  if (message.payload_type != packedRegionsSeiType) {
    fail(Errc::Malformed, "SEI payload type " + std::to_string(message.payload_type) +
                              " is not a packed-regions message");
  }
  BitReader r{message.payload, trace};
  PackedRegionsSei sei;
  const auto count = r.readUe("num_entries");
  if (count > r.bitsLeft()) {
    fail(Errc::Malformed, "SEI entry count exceeds the payload");
  }
  for (std::uint32_t i = 0; i < count; ++i) {
    PackedRegionsSei::Entry e;
    e.region_id = r.readUe("region_id");
    e.subpic_id = r.readBits(16, "subpic_id");
    sei.entries.push_back(e);
  }
  r.readZeroAlignment();
  if (r.bitsLeft() != 0) {
    fail(Errc::Malformed, "bytes after the packed-regions SEI entries");
  }
  return sei;
}

inline auto packedKind(RegionKind kind) -> PackedRegionKind {
  switch (kind) {
  case RegionKind::Texture:
    return PackedRegionKind::Attribute;
  case RegionKind::Geometry:
    return PackedRegionKind::Geometry;
  case RegionKind::Filler:
    return PackedRegionKind::Filler;
  }
  return PackedRegionKind::Filler;
}

inline auto bindPlan(const PlacementPlan &plan) -> std::pair<PackingInformation, PackedRegionsSei> {
  validatePlan(plan);
  PackingInformation pi;
  PackedRegionsSei sei;
  const auto ctu = plan.ctu_size;
  for (const auto &p : plan.placements) {
    pi.regions.push_back({p.region_id, packedKind(p.kind), p.ctu_x * ctu, p.ctu_y * ctu,
                          p.ctu_w * ctu, p.ctu_h * ctu, p.rotation});
    sei.entries.push_back({p.region_id, p.subpic_id});
  }
  return {std::move(pi), std::move(sei)};
}

// True iff the SEI maps exactly the VPS regions, injectively, onto SPS
// subpictures whose rectangles equal the regions they are mapped from.
inline auto validatePackedRegions(const PackingInformation &pi, const PackedRegionsSei &sei,
                                  const SequenceParams &sps) -> bool {
  std::set<std::uint32_t> regionIds;
  for (const auto &r : pi.regions) {
    if (!regionIds.insert(r.region_id).second) {
      return false;
    }
  }
  std::set<std::uint32_t> mapped;
  std::set<std::uint32_t> subpics;
  const auto ctu = sps.ctuSize();
  for (const auto &e : sei.entries) {
    if (!mapped.insert(e.region_id).second || !subpics.insert(e.subpic_id).second) {
      return false;
    }
    const auto *region = pi.find(e.region_id);
    const auto *subpic = sps.findSubpic(e.subpic_id);
    if (region == nullptr || subpic == nullptr) {
      return false;
    }
    if (region->x != subpic->ctu_x * ctu || region->y != subpic->ctu_y * ctu ||
        region->w != subpic->ctu_w * ctu || region->h != subpic->ctu_h * ctu) {
      return false;
    }
  }
  return mapped == regionIds;
}

// Sample stream: one header byte with the size precision, then per unit a
// big-endian size, a 32-bit unit header and the payload.
inline auto writeSampleStream(std::span<const V3cUnit> units, unsigned precision = 0) -> Bytes {
  std::size_t largest = 0;
  for (const auto &u : units) {
    largest = std::max(largest, v3cUnitHeaderBytes + u.payload.size());
  }
  if (precision == 0) {
    precision = 1;
    while (precision < 8 && (largest >> (8 * precision)) != 0) {
      ++precision;
    }
  }
  if (precision < 1 || precision > 8 || (precision < 8 && (largest >> (8 * precision)) != 0)) {
    fail(Errc::ValueOutOfRange, "unit size precision " + std::to_string(precision) +
                                    " cannot hold " + std::to_string(largest) + " bytes");
  }
  Bytes out;
  out.push_back(static_cast<std::uint8_t>((precision - 1) << 5));
  for (const auto &u : units) {
    if (static_cast<unsigned>(u.unit_type) > 5 || u.parameter_set_id > 15 || u.atlas_id > 63) {
      fail(Errc::ValueOutOfRange, "V3C unit header field out of range");
    }
    const auto size = v3cUnitHeaderBytes + u.payload.size();
    for (auto i = precision; i > 0; --i) {
      out.push_back(static_cast<std::uint8_t>(size >> (8 * (i - 1))));
    }
    const auto header = (std::uint32_t{static_cast<std::uint8_t>(u.unit_type)} << 27) |
                        (std::uint32_t{u.parameter_set_id} << 23) |
                        (std::uint32_t{u.atlas_id} << 17);
    for (int shift = 24; shift >= 0; shift -= 8) {
      out.push_back(static_cast<std::uint8_t>(header >> shift));
    }
    out.insert(out.end(), u.payload.begin(), u.payload.end());
  }
  return out;
}

inline auto readSampleStream(ByteSpan stream) -> std::vector<V3cUnit> {
  if (stream.empty()) {
    fail(Errc::TruncatedUnit, "sample stream lacks its header byte");
  }
  if ((stream[0] & 0x1F) != 0) {
    fail(Errc::Malformed, "sample stream header reserved bits are set");
  }
  const unsigned precision = (stream[0] >> 5) + 1U;
  std::vector<V3cUnit> units;
  std::size_t pos = 1;
  while (pos < stream.size()) {
    if (stream.size() - pos < precision) {
      fail(Errc::TruncatedUnit, "unit size field truncated at byte " + std::to_string(pos));
    }
    std::uint64_t size = 0;
    for (unsigned i = 0; i < precision; ++i) {
      size = (size << 8) | stream[pos++];
    }
    if (size < v3cUnitHeaderBytes) {
      fail(Errc::Malformed, "unit size " + std::to_string(size) + " smaller than its header");
    }
    if (stream.size() - pos < size) {
      fail(Errc::TruncatedUnit, "unit at byte " + std::to_string(pos) + " declares " +
                                    std::to_string(size) + " bytes, " +
                                    std::to_string(stream.size() - pos) + " remain");
    }
    std::uint32_t header = 0;
    for (int i = 0; i < 4; ++i) {
      header = (header << 8) | stream[pos + i];
    }
    const auto type = header >> 27;
    if (type > 5) {
      fail(Errc::UnknownUnitType, "unknown V3C unit type " + std::to_string(type));
    }
    if ((header & 0x1FFFFU) != 0) {
      fail(Errc::Malformed, "V3C unit header reserved bits are set");
    }
    V3cUnit u;
    u.unit_type = static_cast<V3cUnitType>(type);
    u.parameter_set_id = static_cast<std::uint8_t>((header >> 23) & 0xF);
    u.atlas_id = static_cast<std::uint8_t>((header >> 17) & 0x3F);
    const auto first = stream.begin() + static_cast<std::ptrdiff_t>(pos + v3cUnitHeaderBytes);
    u.payload.assign(first, first + static_cast<std::ptrdiff_t>(size - v3cUnitHeaderBytes));
    pos += size;
    units.push_back(std::move(u));
  }
  return units;
}

inline void checkVpsFirst(std::span<const V3cUnit> units) {
  if (units.empty() || units.front().unit_type != V3cUnitType::VPS) {
    fail(Errc::MissingVps, units.empty() ? "V3C sequence has no units"
                                         : "V3C sequence starts with " +
                                               std::string{name(units.front().unit_type)});
  }
}

// VPS, atlas data and packed video, in that order.
inline auto mux(const V3cParameterSet &vps, ByteSpan atlasMetadata, ByteSpan packedVideo,
                unsigned precision = 0) -> Bytes {
  if (atlasMetadata.empty() || packedVideo.empty()) {
    fail(Errc::EmptyComponent, atlasMetadata.empty() ? "atlas metadata is empty"
                                                     : "packed video is empty");
  }
  const std::vector<V3cUnit> units{
      {V3cUnitType::VPS, 0, 0, encodeVps(vps)},
      {V3cUnitType::AD, vps.vps_id, 0, Bytes(atlasMetadata.begin(), atlasMetadata.end())},
      {V3cUnitType::PVD, vps.vps_id, 0, Bytes(packedVideo.begin(), packedVideo.end())},
  };
  return writeSampleStream(units, precision);
}

struct Demuxed {
  V3cParameterSet vps;
  std::vector<V3cUnit> units; // including the VPS unit

  [[nodiscard]] auto first(V3cUnitType type) const -> const V3cUnit * {
    for (const auto &u : units) {
      if (u.unit_type == type) {
        return &u;
      }
    }
    return nullptr;
  }
};

inline auto demux(ByteSpan stream) -> Demuxed {
  auto units = readSampleStream(stream);
  checkVpsFirst(units);
  for (const auto &u : units) {
    if (u.payload.empty()) {
      fail(Errc::EmptyComponent, std::string{name(u.unit_type)} + " unit has no payload");
    }
  }
  auto vps = decodeVps(units.front().payload);
  return {std::move(vps), std::move(units)};
}

} // namespace subpack
