#pragma once

// End-to-end simulation of the two delivery schemes for texture/geometry atlas
// pairs: one bitstream and one decoder per atlas (anchor), or one merged
// multi-subpicture bitstream per pair carried in a V3C packed video component
// (packed). Reports decoder counts and byte overhead under the mock codec.

#include "layout.hpp"
#include "mockcodec.hpp"
#include "subpic_tools.hpp"
#include "v3c.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <future>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace subpack {

struct AtlasSource {
  RegionSpec spec;
  FrameSource frames; // native (unpadded, unrotated) pictures
};

struct AtlasPair {
  AtlasSource texture;
  AtlasSource geometry;
  std::uint32_t frame_count{};
  Bytes atlas_metadata; // opaque; a placeholder is used when empty
};

// Sizes content payloads so a pair's texture plus geometry data matches a bitrate.
struct RateTarget {
  double bitrate_bps{};
  double fps{30.0};

  [[nodiscard]] auto bytesFor(std::uint32_t frames) const -> std::uint64_t {
    return static_cast<std::uint64_t>(std::llround(bitrate_bps * frames / fps / 8.0));
  }
};

struct PipelineConfig {
  MockCodecConfig codec;
  std::optional<RateTarget> content_rate;
  bool parallel{true};
};

struct PipelineStats {
  std::uint32_t decoder_instances{};
  std::uint64_t total_vcl_bytes{}; // texture and geometry slice payloads
  std::int64_t overhead_bytes{};
  double overhead_fraction{};
  std::uint64_t filler_pixel_rate{}; // filler luma samples per frame
  std::uint64_t filler_vcl_bytes{};
  std::int64_t parameter_set_delta{};
  std::uint64_t composite_pixel_rate{}; // decoded luma samples per frame

  friend auto operator==(const PipelineStats &, const PipelineStats &) -> bool = default;
};

namespace detail {
inline void checkPairs(std::span<const AtlasPair> pairs) {
  if (pairs.empty()) {
    fail(Errc::EmptyInput, "no atlas pairs to simulate");
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto &p = pairs[i];
    if (p.frame_count == 0) {
      fail(Errc::EmptyInput, "pair " + std::to_string(i) + " has no frames");
    }
    if (!p.texture.frames || !p.geometry.frames) {
      fail(Errc::MissingReference, "pair " + std::to_string(i) + " lacks a frame source");
    }
    if (p.texture.spec.kind != RegionKind::Texture || p.geometry.spec.kind != RegionKind::Geometry) {
      fail(Errc::InvalidLayout, "pair " + std::to_string(i) + " has mislabeled atlases");
    }
    if (p.texture.spec.region_id == p.geometry.spec.region_id) {
      fail(Errc::IdCollision, "pair " + std::to_string(i) + " reuses a region id");
    }
  }
}

// Spreads total bytes over frames, IRAP frames weighted by the config's
// IRAP-to-inter size ratio. Every frame gets at least one byte.
inline auto distributeBytes(std::uint64_t total, std::uint32_t frames, const MockCodecConfig &cfg)
    -> std::vector<std::size_t> {
  const auto weights = defaultPayloadSizes(frames, cfg);
  std::uint64_t weightSum = 0;
  for (const auto w : weights) {
    weightSum += w;
  }
  std::vector<std::size_t> sizes(frames);
  std::uint64_t assigned = 0;
  for (std::uint32_t f = 0; f < frames; ++f) {
    sizes[f] = static_cast<std::size_t>(total * weights[f] / weightSum);
    assigned += sizes[f];
  }
  for (std::uint32_t f = 0; assigned < total; f = (f + 1) % frames) {
    ++sizes[f];
    ++assigned;
  }
  for (auto &s : sizes) {
    s = std::max<std::size_t>(s, 1);
  }
  return sizes;
}

// Texture and geometry payload sizes for one pair.
inline auto contentPayloadSizes(const AtlasPair &pair, const PipelineConfig &cfg)
    -> std::pair<std::vector<std::size_t>, std::vector<std::size_t>> {
  if (!cfg.content_rate) {
    const auto sizes = defaultPayloadSizes(pair.frame_count, cfg.codec);
    return {sizes, sizes};
  }
  const auto total = cfg.content_rate->bytesFor(pair.frame_count);
  const auto texArea = std::uint64_t{pair.texture.spec.width} * pair.texture.spec.height;
  const auto geoArea = std::uint64_t{pair.geometry.spec.width} * pair.geometry.spec.height;
  const auto geoBytes = total * geoArea / (texArea + geoArea);
  return {distributeBytes(total - geoBytes, pair.frame_count, cfg.codec),
          distributeBytes(geoBytes, pair.frame_count, cfg.codec)};
}

inline auto subpicIdLength(std::size_t count) -> std::uint32_t {
  return std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::bit_width(count - 1)));
}

inline auto ctuLog2(std::uint32_t ctu) -> std::uint32_t {
  if (!std::has_single_bit(ctu) || ctu < 32 || ctu > 128) {
    fail(Errc::ValueOutOfRange, "CTU size must be 32, 64 or 128, got " + std::to_string(ctu));
  }
  return static_cast<std::uint32_t>(std::countr_zero(ctu));
}

inline auto atlasMetadataOf(const AtlasPair &pair, std::size_t index) -> Bytes {
  if (!pair.atlas_metadata.empty()) {
    return pair.atlas_metadata;
  }
  const std::string text = "atlas-data pair " + std::to_string(index);
  return {text.begin(), text.end()};
}

// Picture actually coded for a region: rotated if the plan says so, then
// padded to the region's CTU rectangle.
inline auto codedPicture(const AtlasSource &src, const Placement &p, std::uint32_t ctu,
                         std::uint32_t frame) -> YuvFrame {
  auto picture = src.frames(frame);
  if (picture.width() != src.spec.width || picture.height() != src.spec.height) {
    fail(Errc::DimensionMismatch, "frame source does not match its region size");
  }
  if (p.rotation == Rotation::R90) {
    picture = rotate90(picture);
  }
  return padReplicate(picture, p.ctu_w * ctu, p.ctu_h * ctu);
}

inline auto restoredPicture(const YuvFrame &decoded, const PackedRegion &region,
                            const RegionSpec &spec) -> YuvFrame {
  auto picture = crop(decoded, {region.x, region.y, region.w, region.h});
  if (region.rotation == Rotation::R90) {
    picture = crop(picture, {0, 0, spec.height, spec.width});
    return rotate270(picture);
  }
  return crop(picture, {0, 0, spec.width, spec.height});
}

inline auto payloadsOf(const VideoBitstream &vb) -> std::vector<Bytes> {
  std::vector<Bytes> out;
  for (const auto &au : vb.access_units) {
    for (const auto &nal : au.slices) {
      out.push_back(decodeSlice(nal, vb.sps.subpic_id_len).payload);
    }
  }
  return out;
}

} // namespace detail

// The anchor's two single-layer bitstreams (texture, geometry) at native size.
// Subpicture ids and id length follow the given plan so that payload keys
// coincide with the packed path.
inline auto anchorBitstreams(const AtlasPair &pair, const PipelineConfig &cfg,
                             const PlacementPlan &plan) -> std::array<SubBitstream, 2> {
  const auto idLen = detail::subpicIdLength(plan.placements.size());
  const auto [texSizes, geoSizes] = detail::contentPayloadSizes(pair, cfg);
  const auto encode = [&](const AtlasSource &src, const std::vector<std::size_t> &sizes) {
    const auto *p = plan.find(src.spec.region_id);
    if (p == nullptr) {
      fail(Errc::UnknownSubpicId, "plan lacks region " + std::to_string(src.spec.region_id));
    }
    const EncodeParams params{src.spec.width, src.spec.height, 7, idLen, 0, 0};
    return mockEncodeSized(sizes, p->subpic_id, cfg.codec, params);
  };
  return {encode(pair.texture, texSizes), encode(pair.geometry, geoSizes)};
}

namespace detail {
inline auto anchorPair(const AtlasPair &pair, const PipelineConfig &cfg, std::uint32_t ctu,
                       bool allowRotation) -> PipelineStats {
  const auto plan = planPacking({pair.texture.spec, pair.geometry.spec}, ctu, allowRotation);
  PipelineStats stats;
  for (const auto &vb : anchorBitstreams(pair, cfg, plan)) {
    stats.total_vcl_bytes += vclPayloadBytes(vb);
    stats.composite_pixel_rate += std::uint64_t{vb.sps.pic_width_luma} * vb.sps.pic_height_luma;
    ++stats.decoder_instances;
  }
  return stats;
}
} // namespace detail

// Everything the packed path produces for one pair, kept for inspection.
struct PackedPairResult {
  PlacementPlan plan;
  std::vector<SubBitstream> inputs; // in plan order
  MergedBitstream merged;
  Bytes v3c;
  PipelineStats stats;
};

inline auto packPair(const AtlasPair &pair, std::size_t index, const PipelineConfig &cfg,
                     std::uint32_t ctu, bool allowRotation) -> PackedPairResult {
  const auto log2 = detail::ctuLog2(ctu);
  PackedPairResult result;
  result.plan = planPacking({pair.texture.spec, pair.geometry.spec}, ctu, allowRotation);
  const auto &plan = result.plan;
  const auto idLen = detail::subpicIdLength(plan.placements.size());
  const auto [texSizes, geoSizes] = detail::contentPayloadSizes(pair, cfg);

  auto &stats = result.stats;
  std::map<std::uint32_t, FrameSource> references;
  std::uint64_t contentParamBytes = 0;
  for (const auto &p : plan.placements) {
    const EncodeParams params{p.ctu_w * ctu, p.ctu_h * ctu, log2, idLen, 0, 0};
    if (p.kind == RegionKind::Filler) {
      result.inputs.push_back(mockEncode(pair.frame_count, p.subpic_id, cfg.codec, params));
      stats.filler_vcl_bytes += vclPayloadBytes(result.inputs.back());
      stats.filler_pixel_rate += std::uint64_t{params.width} * params.height;
      references[p.subpic_id] = [w = params.width, h = params.height](std::uint32_t) {
        return makeFillerFrame(w, h);
      };
      continue;
    }
    const auto &src = p.kind == RegionKind::Texture ? pair.texture : pair.geometry;
    const auto &sizes = p.kind == RegionKind::Texture ? texSizes : geoSizes;
    result.inputs.push_back(mockEncodeSized(sizes, p.subpic_id, cfg.codec, params));
    stats.total_vcl_bytes += vclPayloadBytes(result.inputs.back());
    contentParamBytes += nonVclBytes(result.inputs.back());
    references[p.subpic_id] = [&src, p, ctu](std::uint32_t f) {
      return detail::codedPicture(src, p, ctu, f);
    };
  }

  result.merged = merge(result.inputs, plan);
  auto [packing, regionsSei] = bindPlan(plan);
  result.merged.sei = {encodePackedRegionsSei(regionsSei)};
  const auto video = writeAnnexB(result.merged);
  const V3cParameterSet vps{0, packing};
  result.v3c = mux(vps, detail::atlasMetadataOf(pair, index), video);

  // Client side: demux, parse, check signalling, decode once, split.
  const auto demuxed = demux(result.v3c);
  const auto *pvd = demuxed.first(V3cUnitType::PVD);
  if (pvd == nullptr || !demuxed.vps.packing) {
    fail(Errc::RoundTripFailure, "V3C stream lost its packed video or packing information");
  }
  const auto received = readAnnexB(pvd->payload);
  if (received != result.merged || received.sei.size() != 1) {
    fail(Errc::RoundTripFailure, "merged bitstream changed across the container");
  }
  const auto receivedSei = decodePackedRegionsSei(received.sei.front());
  if (!validatePackedRegions(*demuxed.vps.packing, receivedSei, received.sps)) {
    fail(Errc::RoundTripFailure, "packing information and region SEI disagree");
  }
  for (std::size_t k = 0; k < plan.placements.size(); ++k) {
    const auto &p = plan.placements[k];
    const auto part = split(received, p.subpic_id);
    if (part.access_units != result.inputs[k].access_units) {
      fail(Errc::RoundTripFailure, "split of subpic_id " + std::to_string(p.subpic_id) +
                                       " differs from the encoded input");
    }
  }

  mockDecode(received, references, cfg.codec.seed, [&](std::uint32_t f, YuvFrame &&decoded) {
    for (const auto *src : {&pair.texture, &pair.geometry}) {
      const auto *region = demuxed.vps.packing->find(src->spec.region_id);
      if (region == nullptr ||
          detail::restoredPicture(decoded, *region, src->spec) != src->frames(f)) {
        fail(Errc::RoundTripFailure, "decoded " + std::string{name(src->spec.kind)} +
                                         " atlas differs in frame " + std::to_string(f));
      }
    }
  });

  stats.decoder_instances = 1;
  stats.composite_pixel_rate = plan.compositeArea();
  std::uint64_t mergedParamBytes = nonVclBytes(result.merged);
  stats.parameter_set_delta =
      static_cast<std::int64_t>(mergedParamBytes) - static_cast<std::int64_t>(contentParamBytes);
  stats.overhead_bytes = static_cast<std::int64_t>(stats.filler_vcl_bytes) + stats.parameter_set_delta;
  return result;
}

namespace detail {
inline auto accumulate(const std::vector<PipelineStats> &parts) -> PipelineStats {
  PipelineStats total;
  for (const auto &s : parts) {
    total.decoder_instances += s.decoder_instances;
    total.total_vcl_bytes += s.total_vcl_bytes;
    total.overhead_bytes += s.overhead_bytes;
    total.filler_pixel_rate += s.filler_pixel_rate;
    total.filler_vcl_bytes += s.filler_vcl_bytes;
    total.parameter_set_delta += s.parameter_set_delta;
    total.composite_pixel_rate += s.composite_pixel_rate;
  }
  const auto denominator = static_cast<double>(total.total_vcl_bytes) + total.overhead_bytes;
  total.overhead_fraction = denominator > 0 ? total.overhead_bytes / denominator : 0.0;
  return total;
}

// Pairs are independent; results are gathered in pair order.
template <typename Fn>
auto forEachPair(std::span<const AtlasPair> pairs, bool parallel, Fn &&fn) -> std::vector<PipelineStats> {
  std::vector<PipelineStats> out(pairs.size());
  if (!parallel || pairs.size() == 1) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      out[i] = fn(pairs[i], i);
    }
    return out;
  }
  std::vector<std::future<PipelineStats>> jobs;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    jobs.push_back(std::async(std::launch::async, [&, i] { return fn(pairs[i], i); }));
  }
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    out[i] = jobs[i].get();
  }
  return out;
}
} // namespace detail

// ctu and allowRotation only decide subpicture ids, matching the packed run.
inline auto runAnchor(std::span<const AtlasPair> pairs, const PipelineConfig &cfg,
                      std::uint32_t ctu = 128, bool allowRotation = false) -> PipelineStats {
  detail::checkPairs(pairs);
  return detail::accumulate(
      detail::forEachPair(pairs, cfg.parallel, [&](const AtlasPair &pair, std::size_t) {
        return detail::anchorPair(pair, cfg, ctu, allowRotation);
      }));
}

inline auto runPacked(std::span<const AtlasPair> pairs, const PipelineConfig &cfg,
                      std::uint32_t ctu = 128, bool allowRotation = false) -> PipelineStats {
  detail::checkPairs(pairs);
  detail::ctuLog2(ctu);
  return detail::accumulate(
      detail::forEachPair(pairs, cfg.parallel, [&](const AtlasPair &pair, std::size_t i) {
        return packPair(pair, i, cfg, ctu, allowRotation).stats;
      }));
}

struct Comparison {
  std::uint32_t anchor_decoders{};
  std::uint32_t packed_decoders{};
  double decoder_ratio{};
  std::int64_t overhead_bytes{};
  double overhead_fraction{};
  std::uint64_t filler_pixel_rate{};
  std::uint64_t anchor_pixel_rate{};
  std::uint64_t packed_pixel_rate{};
};

inline auto compare(const PipelineStats &anchor, const PipelineStats &packed) -> Comparison {
  Comparison c;
  c.anchor_decoders = anchor.decoder_instances;
  c.packed_decoders = packed.decoder_instances;
  c.decoder_ratio = packed.decoder_instances == 0
                        ? 0.0
                        : static_cast<double>(anchor.decoder_instances) / packed.decoder_instances;
  c.overhead_bytes = packed.overhead_bytes - anchor.overhead_bytes;
  const auto denominator = static_cast<double>(anchor.total_vcl_bytes) + c.overhead_bytes;
  c.overhead_fraction = denominator > 0 ? c.overhead_bytes / denominator : 0.0;
  c.filler_pixel_rate = packed.filler_pixel_rate;
  c.anchor_pixel_rate = anchor.composite_pixel_rate;
  c.packed_pixel_rate = packed.composite_pixel_rate;
  return c;
}

inline auto formatComparison(const std::string &label, const Comparison &c) -> std::string {
  std::ostringstream out;
  out << std::left << std::setw(16) << "Sequence" << std::right << std::setw(10) << "Dec.anch"
      << std::setw(10) << "Dec.pack" << std::setw(8) << "Ratio" << std::setw(12) << "Overhead B"
      << std::setw(12) << "Overhead" << std::setw(14) << "Filler px/fr" << '\n';
  out << std::left << std::setw(16) << label << std::right << std::setw(10) << c.anchor_decoders
      << std::setw(10) << c.packed_decoders << std::setw(8) << std::fixed << std::setprecision(2)
      << c.decoder_ratio << std::setw(12) << c.overhead_bytes << std::setw(11)
      << std::setprecision(3) << c.overhead_fraction * 100.0 << '%' << std::setw(14)
      << c.filler_pixel_rate << '\n';
  out << "# overhead is a byte proxy under the mock codec: filler slice payloads plus the\n"
         "# parameter-set/SEI delta; filler payload sizes apply per subpicture per frame\n";
  return out.str();
}

inline auto comparisonCsvHeader() -> std::string {
  return "sequence,anchor_decoders,packed_decoders,decoder_ratio,overhead_bytes,overhead_fraction,"
         "filler_pixel_rate,anchor_pixel_rate,packed_pixel_rate\n";
}

inline auto formatComparisonCsv(const std::string &label, const Comparison &c) -> std::string {
  std::ostringstream out;
  out << label << ',' << c.anchor_decoders << ',' << c.packed_decoders << ',' << std::setprecision(6)
      << c.decoder_ratio << ',' << c.overhead_bytes << ',' << std::setprecision(8)
      << c.overhead_fraction << ',' << c.filler_pixel_rate << ',' << c.anchor_pixel_rate << ','
      << c.packed_pixel_rate << '\n';
  return out.str();
}

// Deterministic test pattern for an atlas of the given size.
inline auto syntheticAtlas(std::uint32_t width, std::uint32_t height, std::uint32_t salt)
    -> FrameSource {
  return [=](std::uint32_t f) {
    YuvFrame frame{width, height};
    for (const auto p : allPlanes) {
      const auto k = static_cast<std::uint32_t>(p) + 1;
      for (std::uint32_t y = 0; y < frame.planeHeight(p); ++y) {
        for (std::uint32_t x = 0; x < frame.planeWidth(p); ++x) {
          frame.at(p, x, y) = static_cast<std::uint8_t>(x * 3 * k + y * 5 + f * 7 + salt * 31);
        }
      }
    }
    return frame;
  };
}

} // namespace subpack
