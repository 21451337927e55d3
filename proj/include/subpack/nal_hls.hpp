#pragma once

// NAL framing and the simplified high-level syntax profile: SPS with a
// subpicture layout, PPS, slices that carry their subpicture id, and SEI.

#include "bitio.hpp"

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace subpack {

enum class NalType : std::uint8_t {
  TRAIL = 0,
  IDR = 7,
  CRA = 9,
  SPS = 15,
  PPS = 16,
  PREFIX_SEI = 23,
};

constexpr auto isKnownNalType(unsigned value) noexcept {
  return value == 0 || value == 7 || value == 9 || value == 15 || value == 16 || value == 23;
}

constexpr auto isVcl(NalType type) noexcept {
  return type == NalType::TRAIL || type == NalType::IDR || type == NalType::CRA;
}

constexpr auto isIrap(NalType type) noexcept {
  return type == NalType::IDR || type == NalType::CRA;
}

constexpr auto name(NalType type) -> std::string_view {
  switch (type) {
  case NalType::TRAIL:
    return "TRAIL";
  case NalType::IDR:
    return "IDR";
  case NalType::CRA:
    return "CRA";
  case NalType::SPS:
    return "SPS";
  case NalType::PPS:
    return "PPS";
  case NalType::PREFIX_SEI:
    return "PREFIX_SEI";
  }
  return "?";
}

struct NalUnit {
  NalType nal_type{NalType::TRAIL};
  std::uint8_t temporal_id{};
  std::uint8_t layer_id{};
  Bytes rbsp; // unescaped, ends with trailing bits

  friend auto operator==(const NalUnit &, const NalUnit &) -> bool = default;
};

inline constexpr std::size_t nalHeaderBytes = 2;

// Number of bytes the unit occupies in an Annex-B stream, start code included.
inline auto framedSize(const NalUnit &nal, bool first) -> std::size_t {
  const bool longCode = first || nal.nal_type == NalType::SPS || nal.nal_type == NalType::PPS;
  return (longCode ? 4 : 3) + nalHeaderBytes + escapeRbsp(nal.rbsp).size();
}

inline auto frameBitstream(std::span<const NalUnit> units) -> Bytes {
  if (units.empty()) {
    fail(Errc::EmptyInput, "cannot frame an empty NAL unit list");
  }
  Bytes out;
  bool first = true;
  for (const auto &nal : units) {
    if (nal.temporal_id > 6 || nal.layer_id > 63) {
      fail(Errc::ValueOutOfRange, "NAL header field out of range");
    }
    if (nal.rbsp.empty() || nal.rbsp.back() == 0) {
      fail(Errc::Malformed, "NAL RBSP must end with trailing bits");
    }
    if (first || nal.nal_type == NalType::SPS || nal.nal_type == NalType::PPS) {
      out.push_back(0);
    }
    out.insert(out.end(), {0, 0, 1});
    out.push_back(static_cast<std::uint8_t>(nal.layer_id & 0x3F));
    out.push_back(static_cast<std::uint8_t>((static_cast<unsigned>(nal.nal_type) << 3) |
                                            (nal.temporal_id + 1U)));
    const auto escaped = escapeRbsp(nal.rbsp);
    out.insert(out.end(), escaped.begin(), escaped.end());
    first = false;
  }
  return out;
}

namespace detail {
inline auto findStartCode(ByteSpan data, std::size_t from) -> std::size_t {
  for (std::size_t i = from; i + 2 < data.size(); ++i) {
    if (data[i] == 0 && data[i + 1] == 0 && data[i + 2] == 1) {
      return i;
    }
  }
  return data.size();
}

inline auto parseNal(ByteSpan data, std::size_t offset) -> NalUnit {
  if (data.size() < nalHeaderBytes) {
    fail(Errc::Malformed, "NAL unit at byte " + std::to_string(offset) + " shorter than its header");
  }
  const unsigned b0 = data[0];
  const unsigned b1 = data[1];
  if ((b0 & 0x80U) != 0) {
    fail(Errc::Malformed, "forbidden_zero_bit set at byte " + std::to_string(offset));
  }
  if ((b0 & 0x40U) != 0) {
    fail(Errc::Malformed, "reserved header bit set at byte " + std::to_string(offset));
  }
  const unsigned type = b1 >> 3;
  const unsigned tidPlus1 = b1 & 7U;
  if (!isKnownNalType(type)) {
    fail(Errc::Malformed, "unknown nal_type " + std::to_string(type) + " at byte " +
                              std::to_string(offset));
  }
  if (tidPlus1 == 0) {
    fail(Errc::Malformed, "temporal_id_plus1 is zero at byte " + std::to_string(offset));
  }
  NalUnit nal;
  nal.nal_type = static_cast<NalType>(type);
  nal.temporal_id = static_cast<std::uint8_t>(tidPlus1 - 1);
  nal.layer_id = static_cast<std::uint8_t>(b0 & 0x3FU);
  nal.rbsp = unescapeRbsp(data.subspan(nalHeaderBytes));
  if (nal.rbsp.empty() || nal.rbsp.back() == 0) {
    fail(Errc::Malformed, "NAL unit at byte " + std::to_string(offset) + " lacks trailing bits");
  }
  return nal;
}
} // namespace detail

inline auto parseBitstream(ByteSpan stream) -> std::vector<NalUnit> {
  std::size_t pos = 0;
  if (stream.size() >= 4 && stream[0] == 0 && stream[1] == 0 && stream[2] == 0 && stream[3] == 1) {
    pos = 4;
  } else if (stream.size() >= 3 && stream[0] == 0 && stream[1] == 0 && stream[2] == 1) {
    pos = 3;
  } else {
    fail(Errc::Malformed, "bitstream does not begin with a start code");
  }

  std::vector<NalUnit> units;
  while (pos < stream.size()) {
    const auto next = detail::findStartCode(stream, pos);
    auto end = next;
    if (next < stream.size() && next > pos && stream[next - 1] == 0) {
      --end; // zero_byte of a four-byte start code
    }
    units.push_back(detail::parseNal(stream.subspan(pos, end - pos), pos));
    pos = next < stream.size() ? next + 3 : stream.size();
  }
  if (units.empty()) {
    fail(Errc::Malformed, "bitstream contains a start code but no NAL unit");
  }
  return units;
}

struct SubpicEntry {
  std::uint32_t ctu_x{};
  std::uint32_t ctu_y{};
  std::uint32_t ctu_w{1};
  std::uint32_t ctu_h{1};
  bool independent{true};
  std::uint32_t subpic_id{};

  friend auto operator==(const SubpicEntry &, const SubpicEntry &) -> bool = default;
};

struct SequenceParams {
  std::uint32_t sps_id{};
  std::uint32_t ctu_size_log2{7};
  std::uint32_t pic_width_luma{};
  std::uint32_t pic_height_luma{};
  std::vector<SubpicEntry> subpics;
  std::uint32_t subpic_id_len{1};

  [[nodiscard]] auto ctuSize() const -> std::uint32_t { return 1U << ctu_size_log2; }
  [[nodiscard]] auto gridWidth() const -> std::uint32_t {
    return (pic_width_luma + ctuSize() - 1) / ctuSize();
  }
  [[nodiscard]] auto gridHeight() const -> std::uint32_t {
    return (pic_height_luma + ctuSize() - 1) / ctuSize();
  }

  [[nodiscard]] auto findSubpic(std::uint32_t id) const -> const SubpicEntry * {
    const auto it = std::find_if(subpics.begin(), subpics.end(),
                                 [id](const SubpicEntry &e) { return e.subpic_id == id; });
    return it == subpics.end() ? nullptr : &*it;
  }

  friend auto operator==(const SequenceParams &, const SequenceParams &) -> bool = default;
};

inline constexpr std::uint32_t maxPictureDimension = 65535;

inline auto fitsInBits(std::uint64_t value, std::uint32_t bits) -> bool {
  return bits >= 64 || (value >> bits) == 0;
}

// Throws InvalidLayout unless the subpictures tile the CTU grid exactly with
// distinct ids that fit the signaled id width.
inline void validateSequenceParams(const SequenceParams &sp) {
  const auto bad = [](const std::string &what) { fail(Errc::InvalidLayout, what); };
  if (sp.sps_id > 15) {
    bad("sps_id " + std::to_string(sp.sps_id) + " exceeds 15");
  }
  if (sp.ctu_size_log2 < 5 || sp.ctu_size_log2 > 7) {
    bad("ctu_size_log2 " + std::to_string(sp.ctu_size_log2) + " outside 5..7");
  }
  if (sp.pic_width_luma < 1 || sp.pic_height_luma < 1 || sp.pic_width_luma > maxPictureDimension ||
      sp.pic_height_luma > maxPictureDimension) {
    bad("picture dimensions " + std::to_string(sp.pic_width_luma) + "x" +
        std::to_string(sp.pic_height_luma) + " out of range");
  }
  if (sp.subpic_id_len < 1 || sp.subpic_id_len > 16) {
    bad("subpic_id_len " + std::to_string(sp.subpic_id_len) + " outside 1..16");
  }
  if (sp.subpics.empty()) {
    bad("no subpictures");
  }
  const auto gw = sp.gridWidth();
  const auto gh = sp.gridHeight();
  std::vector<std::uint8_t> claimed(static_cast<std::size_t>(gw) * gh, 0);
  for (std::size_t k = 0; k < sp.subpics.size(); ++k) {
    const auto &e = sp.subpics[k];
    const auto where = "subpicture " + std::to_string(k);
    if (e.ctu_w < 1 || e.ctu_h < 1) {
      bad(where + " has an empty rectangle");
    }
    if (e.ctu_x >= gw || e.ctu_y >= gh || e.ctu_w > gw - e.ctu_x || e.ctu_h > gh - e.ctu_y) {
      bad(where + " lies outside the " + std::to_string(gw) + "x" + std::to_string(gh) +
          " CTU grid");
    }
    if (!fitsInBits(e.subpic_id, sp.subpic_id_len)) {
      bad(where + " id " + std::to_string(e.subpic_id) + " does not fit in " +
          std::to_string(sp.subpic_id_len) + " bits");
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (sp.subpics[j].subpic_id == e.subpic_id) {
        bad("duplicate subpic_id " + std::to_string(e.subpic_id));
      }
    }
    for (auto y = e.ctu_y; y < e.ctu_y + e.ctu_h; ++y) {
      for (auto x = e.ctu_x; x < e.ctu_x + e.ctu_w; ++x) {
        auto &cell = claimed[static_cast<std::size_t>(y) * gw + x];
        if (cell != 0) {
          bad(where + " overlaps another subpicture at CTU (" + std::to_string(x) + "," +
              std::to_string(y) + ")");
        }
        cell = 1;
      }
    }
  }
  if (std::find(claimed.begin(), claimed.end(), std::uint8_t{0}) != claimed.end()) {
    bad("subpictures do not cover the picture");
  }
}

inline auto encodeSps(const SequenceParams &sp) -> NalUnit {
  validateSequenceParams(sp);
  BitWriter w;
  w.writeUe(sp.sps_id);
  w.writeBits(sp.ctu_size_log2, 3);
  w.writeUe(sp.pic_width_luma);
  w.writeUe(sp.pic_height_luma);
  w.writeUe(sp.subpics.size() - 1);
  for (const auto &e : sp.subpics) {
    w.writeUe(e.ctu_x);
    w.writeUe(e.ctu_y);
    w.writeUe(e.ctu_w - 1);
    w.writeUe(e.ctu_h - 1);
    w.writeFlag(e.independent);
  }
  w.writeUe(sp.subpic_id_len - 1);
  for (const auto &e : sp.subpics) {
    w.writeBits(e.subpic_id, sp.subpic_id_len);
  }
  w.writeTrailingBits();
  return {NalType::SPS, 0, 0, std::move(w).bytes()};
}

inline auto decodeSps(const NalUnit &nal, SyntaxTrace *trace = nullptr) -> SequenceParams {
  if (nal.nal_type != NalType::SPS) {
    fail(Errc::Malformed, "expected an SPS NAL unit, got " + std::string{name(nal.nal_type)});
  }
  BitReader r{nal.rbsp, trace};
  SequenceParams sp;
  sp.sps_id = r.readUe("sps_id");
  sp.ctu_size_log2 = r.readBits(3, "ctu_size_log2");
  sp.pic_width_luma = r.readUe("pic_width_luma");
  sp.pic_height_luma = r.readUe("pic_height_luma");
  if (sp.ctu_size_log2 < 5 || sp.ctu_size_log2 > 7 || sp.pic_width_luma > maxPictureDimension ||
      sp.pic_height_luma > maxPictureDimension) {
    fail(Errc::Malformed, "SPS picture geometry out of range");
  }
  const auto numSubpics = std::uint64_t{r.readUe("num_subpics_minus1")} + 1;
  if (numSubpics > std::uint64_t{sp.gridWidth()} * sp.gridHeight()) {
    fail(Errc::Malformed, "SPS signals more subpictures than CTUs");
  }
  sp.subpics.resize(numSubpics);
  for (auto &e : sp.subpics) {
    e.ctu_x = r.readUe("subpic_ctu_x");
    e.ctu_y = r.readUe("subpic_ctu_y");
    e.ctu_w = r.readUe("subpic_ctu_w_minus1") + 1;
    e.ctu_h = r.readUe("subpic_ctu_h_minus1") + 1;
    e.independent = r.readFlag("subpic_independent_flag");
  }
  sp.subpic_id_len = r.readUe("subpic_id_len_minus1") + 1;
  if (sp.subpic_id_len > 16) {
    fail(Errc::Malformed, "subpic_id_len exceeds 16");
  }
  for (auto &e : sp.subpics) {
    e.subpic_id = r.readBits(sp.subpic_id_len, "subpic_id");
  }
  r.readTrailingBits();
  try {
    validateSequenceParams(sp);
  } catch (const Error &e) {
    fail(Errc::Malformed, std::string{"inconsistent SPS: "} + e.what());
  }
  return sp;
}

struct PicParams {
  std::uint32_t pps_id{};
  std::uint32_t sps_id{};

  friend auto operator==(const PicParams &, const PicParams &) -> bool = default;
};

inline auto encodePps(const PicParams &pp) -> NalUnit {
  BitWriter w;
  w.writeUe(pp.pps_id);
  w.writeUe(pp.sps_id);
  w.writeTrailingBits();
  return {NalType::PPS, 0, 0, std::move(w).bytes()};
}

inline auto decodePps(const NalUnit &nal, SyntaxTrace *trace = nullptr) -> PicParams {
  if (nal.nal_type != NalType::PPS) {
    fail(Errc::Malformed, "expected a PPS NAL unit, got " + std::string{name(nal.nal_type)});
  }
  BitReader r{nal.rbsp, trace};
  PicParams pp;
  pp.pps_id = r.readUe("pps_id");
  pp.sps_id = r.readUe("sps_id");
  r.readTrailingBits();
  return pp;
}

enum class SliceType : std::uint8_t { I = 0, P = 1 };

struct SliceUnit {
  std::uint32_t subpic_id{};
  SliceType slice_type{SliceType::I};
  Bytes payload; // opaque coded data, copied and never inspected

  friend auto operator==(const SliceUnit &, const SliceUnit &) -> bool = default;
};

// Closes every slice RBSP so that payloads ending in zero bytes stay framable.
inline constexpr std::uint8_t sliceTrailingByte = 0x80;

inline auto encodeSlice(const SliceUnit &s, std::uint32_t subpicIdLen,
                        std::optional<NalType> nalType = std::nullopt) -> NalUnit {
  if (subpicIdLen < 1 || subpicIdLen > 16 || !fitsInBits(s.subpic_id, subpicIdLen)) {
    fail(Errc::IdWidthMismatch, "subpic_id " + std::to_string(s.subpic_id) + " does not fit in " +
                                    std::to_string(subpicIdLen) + " bits");
  }
  const auto type =
      nalType.value_or(s.slice_type == SliceType::I ? NalType::IDR : NalType::TRAIL);
  if (!isVcl(type)) {
    fail(Errc::Malformed, "slice carried in non-VCL NAL type " + std::string{name(type)});
  }
  BitWriter w;
  w.writeBits(s.subpic_id, subpicIdLen);
  w.writeUe(static_cast<unsigned>(s.slice_type));
  w.writeAlignment();
  w.writeBytes(s.payload);
  w.writeBits(sliceTrailingByte, 8);
  return {type, 0, 0, std::move(w).bytes()};
}

inline auto encodeSlice(const SliceUnit &s, const SequenceParams &sp,
                        std::optional<NalType> nalType = std::nullopt) -> NalUnit {
  return encodeSlice(s, sp.subpic_id_len, nalType);
}

inline auto decodeSlice(const NalUnit &nal, std::uint32_t subpicIdLen,
                        SyntaxTrace *trace = nullptr) -> SliceUnit {
  if (!isVcl(nal.nal_type)) {
    fail(Errc::Malformed, "expected a slice NAL unit, got " + std::string{name(nal.nal_type)});
  }
  BitReader r{nal.rbsp, trace};
  SliceUnit s;
  s.subpic_id = r.readBits(subpicIdLen, "slice_subpic_id");
  const auto type = r.readUe("slice_type");
  if (type > 1) {
    fail(Errc::Malformed, "slice_type " + std::to_string(type) + " not supported");
  }
  s.slice_type = static_cast<SliceType>(type);
  r.readAlignment("slice_header_alignment");
  const auto rest = r.bitsLeft() / 8;
  if (rest < 1 || nal.rbsp.back() != sliceTrailingByte) {
    fail(Errc::Malformed, "slice data lacks its trailing byte");
  }
  s.payload = r.readBytes(rest - 1, "slice_payload_bytes");
  return s;
}

inline auto decodeSlice(const NalUnit &nal, const SequenceParams &sp,
                        SyntaxTrace *trace = nullptr) -> SliceUnit {
  auto s = decodeSlice(nal, sp.subpic_id_len, trace);
  if (sp.findSubpic(s.subpic_id) == nullptr) {
    fail(Errc::UnknownSubpicId, "slice refers to subpic_id " + std::to_string(s.subpic_id) +
                                    " which the SPS does not define");
  }
  return s;
}

// Reads only the subpicture id from a slice header.
inline auto peekSliceSubpicId(const NalUnit &nal, std::uint32_t subpicIdLen) -> std::uint32_t {
  BitReader r{nal.rbsp};
  return r.readBits(subpicIdLen);
}

struct SeiMessage {
  std::uint32_t payload_type{};
  Bytes payload;

  friend auto operator==(const SeiMessage &, const SeiMessage &) -> bool = default;
};

inline constexpr std::uint32_t packedRegionsSeiType = 100;

inline auto encodeSei(const SeiMessage &sei) -> NalUnit {
  BitWriter w;
  w.writeUe(sei.payload_type);
  w.writeUe(sei.payload.size());
  for (const auto byte : sei.payload) {
    w.writeBits(byte, 8);
  }
  w.writeTrailingBits();
  return {NalType::PREFIX_SEI, 0, 0, std::move(w).bytes()};
}

inline auto decodeSei(const NalUnit &nal, SyntaxTrace *trace = nullptr) -> SeiMessage {
  if (nal.nal_type != NalType::PREFIX_SEI) {
    fail(Errc::Malformed, "expected an SEI NAL unit, got " + std::string{name(nal.nal_type)});
  }
  BitReader r{nal.rbsp, trace};
  SeiMessage sei;
  sei.payload_type = r.readUe("payload_type");
  const auto size = r.readUe("payload_size");
  if (size > r.bitsLeft() / 8) {
    fail(Errc::OutOfBits, "SEI payload_size " + std::to_string(size) + " exceeds the NAL unit");
  }
  sei.payload.reserve(size);
  for (std::uint32_t i = 0; i < size; ++i) {
    sei.payload.push_back(static_cast<std::uint8_t>(r.readBits(8)));
  }
  r.readTrailingBits();
  return sei;
}

} // namespace subpack
