#pragma once

// Deterministic stand-in for a video encoder and decoder. Slice payloads are a
// keyed pseudorandom byte stream, so a decoder can verify every byte, and
// "decoding" composites the caller's reference pictures into the subpicture
// rectangles.

#include "subpic_tools.hpp"
#include "yuv.hpp"

#include <functional>
#include <map>
#include <random>

namespace subpack {

struct MockCodecConfig {
  std::uint64_t seed{};
  std::uint32_t irap_payload_bytes{236};
  std::uint32_t inter_payload_bytes{14};
  std::uint32_t intra_period{17};
};

// Parameters of the single-subpicture bitstream a mock encode produces.
struct EncodeParams {
  std::uint32_t width{};
  std::uint32_t height{};
  std::uint32_t ctu_size_log2{7};
  std::uint32_t subpic_id_len{1};
  std::uint32_t sps_id{};
  std::uint32_t pps_id{};
};

inline constexpr std::uint8_t defaultFillerValue = 128;

inline auto makeFillerFrame(std::uint32_t width, std::uint32_t height,
                            std::uint8_t value = defaultFillerValue) -> YuvFrame {
  return YuvFrame{width, height, value};
}

inline auto mockPayload(std::uint64_t seed, std::uint32_t subpicId, std::uint32_t frameIndex,
                        std::size_t length) -> Bytes {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    subpicId, frameIndex};
  std::mt19937_64 gen{seq};
  Bytes out(length);
  std::uint64_t word = 0;
  for (std::size_t i = 0; i < length; ++i) {
    if (i % 8 == 0) {
      word = gen();
    }
    out[i] = static_cast<std::uint8_t>(word >> (8 * (i % 8)));
  }
  return out;
}

inline auto isIntraFrame(std::uint32_t frameIndex, std::uint32_t intraPeriod) -> bool {
  return intraPeriod == 0 ? frameIndex == 0 : frameIndex % intraPeriod == 0;
}

// Per-frame payload sizes taken from the config's IRAP and inter figures.
inline auto defaultPayloadSizes(std::uint32_t frames, const MockCodecConfig &cfg)
    -> std::vector<std::size_t> {
  std::vector<std::size_t> sizes(frames);
  for (std::uint32_t f = 0; f < frames; ++f) {
    sizes[f] = isIntraFrame(f, cfg.intra_period) ? cfg.irap_payload_bytes : cfg.inter_payload_bytes;
  }
  return sizes;
}

inline auto mockEncodeSized(std::span<const std::size_t> payloadSizes, std::uint32_t subpicId,
                            const MockCodecConfig &cfg, const EncodeParams &params)
    -> SubBitstream {
  if (payloadSizes.empty()) {
    fail(Errc::EmptyInput, "mock encode needs at least one frame");
  }
  SubBitstream out;
  out.sps.sps_id = params.sps_id;
  out.sps.ctu_size_log2 = params.ctu_size_log2;
  out.sps.pic_width_luma = params.width;
  out.sps.pic_height_luma = params.height;
  out.sps.subpic_id_len = params.subpic_id_len;
  out.sps.subpics = {{0, 0, out.sps.gridWidth(), out.sps.gridHeight(), true, subpicId}};
  validateSequenceParams(out.sps);
  out.pps = {params.pps_id, params.sps_id};
  out.access_units.reserve(payloadSizes.size());
  for (std::uint32_t f = 0; f < payloadSizes.size(); ++f) {
    if (payloadSizes[f] == 0) {
      fail(Errc::ValueOutOfRange, "slice payload sizes must be at least one byte");
    }
    const bool intra = isIntraFrame(f, cfg.intra_period);
    SliceUnit slice{subpicId, intra ? SliceType::I : SliceType::P,
                    mockPayload(cfg.seed, subpicId, f, payloadSizes[f])};
    out.access_units.push_back(
        {f, {encodeSlice(slice, params.subpic_id_len, intra ? NalType::IDR : NalType::TRAIL)}});
  }
  return out;
}

inline auto mockEncode(std::uint32_t frames, std::uint32_t subpicId, const MockCodecConfig &cfg,
                       const EncodeParams &params) -> SubBitstream {
  if (frames == 0) {
    fail(Errc::EmptyInput, "mock encode needs at least one frame");
  }
  if (cfg.irap_payload_bytes == 0 || cfg.inter_payload_bytes == 0) {
    fail(Errc::ValueOutOfRange, "payload sizes must be at least one byte");
  }
  const auto sizes = defaultPayloadSizes(frames, cfg);
  return mockEncodeSized(sizes, subpicId, cfg, params);
}

using FrameSource = std::function<YuvFrame(std::uint32_t frameIndex)>;
using FrameSink = std::function<void(std::uint32_t frameIndex, YuvFrame &&frame)>;

// Checks every slice payload against the keyed stream, then composites the
// reference picture of each subpicture into its rectangle.
inline void mockDecode(const VideoBitstream &vb,
                       const std::map<std::uint32_t, FrameSource> &references, std::uint64_t seed,
                       const FrameSink &sink) {
  validateBitstream(vb);
  for (const auto &e : vb.sps.subpics) {
    if (references.count(e.subpic_id) == 0) {
      fail(Errc::MissingReference, "no reference pictures for subpic_id " +
                                       std::to_string(e.subpic_id));
    }
  }
  for (const auto &au : vb.access_units) {
    YuvFrame picture{vb.sps.pic_width_luma, vb.sps.pic_height_luma};
    for (const auto &nal : au.slices) {
      const auto slice = decodeSlice(nal, vb.sps);
      const auto expected = mockPayload(seed, slice.subpic_id, au.frame_index, slice.payload.size());
      if (slice.payload != expected) {
        fail(Errc::PayloadCorrupt, "slice payload of subpic_id " + std::to_string(slice.subpic_id) +
                                       " in frame " + std::to_string(au.frame_index) +
                                       " does not match the coded stream");
      }
      const auto rect = subpicRect(vb.sps, *vb.sps.findSubpic(slice.subpic_id));
      const auto reference = references.at(slice.subpic_id)(au.frame_index);
      if (reference.width() != rect.w || reference.height() != rect.h) {
        fail(Errc::DimensionMismatch,
             "reference for subpic_id " + std::to_string(slice.subpic_id) + " is " +
                 std::to_string(reference.width()) + "x" + std::to_string(reference.height()) +
                 ", subpicture is " + std::to_string(rect.w) + "x" + std::to_string(rect.h));
      }
      paste(picture, reference, rect.x, rect.y);
    }
    sink(au.frame_index, std::move(picture));
  }
}

inline auto mockDecode(const VideoBitstream &vb,
                       const std::map<std::uint32_t, std::vector<YuvFrame>> &references,
                       std::uint64_t seed) -> std::vector<YuvFrame> {
  std::map<std::uint32_t, FrameSource> sources;
  for (const auto &[id, frames] : references) {
    sources[id] = [&frames, id = id](std::uint32_t f) {
      if (f >= frames.size()) {
        fail(Errc::MissingReference, "subpic_id " + std::to_string(id) + " has no reference for frame " +
                                         std::to_string(f));
      }
      return frames[f];
    };
  }
  std::vector<YuvFrame> out;
  mockDecode(vb, sources, seed, [&](std::uint32_t, YuvFrame &&frame) { out.push_back(std::move(frame)); });
  return out;
}

} // namespace subpack
