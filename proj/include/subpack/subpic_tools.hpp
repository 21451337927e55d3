#pragma once

// Subpicture merge and extraction. Slice NAL units are copied untouched; only
// parameter sets are rewritten.

#include "layout.hpp"
#include "nal_hls.hpp"
#include "yuv.hpp"

#include <map>
#include <set>
#include <vector>

namespace subpack {

struct AccessUnit {
  std::uint32_t frame_index{};
  std::vector<NalUnit> slices; // VCL NAL units, one per subpicture

  friend auto operator==(const AccessUnit &, const AccessUnit &) -> bool = default;
};

// A coded video sequence in the toolkit's profile. Parameter sets and SEI
// messages are repeated in front of every access unit holding an IRAP slice.
struct VideoBitstream {
  SequenceParams sps;
  PicParams pps;
  std::vector<SeiMessage> sei;
  std::vector<AccessUnit> access_units;

  [[nodiscard]] auto frameCount() const { return access_units.size(); }

  friend auto operator==(const VideoBitstream &, const VideoBitstream &) -> bool = default;
};

// Single-subpicture input of a merge, or output of a split.
using SubBitstream = VideoBitstream;
// Multi-subpicture output of a merge.
using MergedBitstream = VideoBitstream;

inline auto hasIrapSlice(const AccessUnit &au) -> bool {
  return std::any_of(au.slices.begin(), au.slices.end(),
                     [](const NalUnit &nal) { return isIrap(nal.nal_type); });
}

inline void validateBitstream(const VideoBitstream &vb) {
  validateSequenceParams(vb.sps);
  if (vb.pps.sps_id != vb.sps.sps_id) {
    fail(Errc::Malformed, "PPS refers to SPS " + std::to_string(vb.pps.sps_id) + " but the SPS id is " +
                              std::to_string(vb.sps.sps_id));
  }
  if (vb.access_units.empty()) {
    fail(Errc::EmptyInput, "bitstream has no access units");
  }
  for (std::size_t i = 0; i < vb.access_units.size(); ++i) {
    const auto &au = vb.access_units[i];
    if (au.frame_index != i) {
      fail(Errc::Malformed, "access unit " + std::to_string(i) + " carries frame index " +
                                std::to_string(au.frame_index));
    }
    std::set<std::uint32_t> seen;
    for (const auto &nal : au.slices) {
      if (!isVcl(nal.nal_type)) {
        fail(Errc::Malformed, "non-VCL NAL unit inside access unit " + std::to_string(i));
      }
      const auto id = peekSliceSubpicId(nal, vb.sps.subpic_id_len);
      if (vb.sps.findSubpic(id) == nullptr) {
        fail(Errc::UnknownSubpicId, "access unit " + std::to_string(i) + " has a slice for subpic_id " +
                                        std::to_string(id) + " absent from the SPS");
      }
      if (!seen.insert(id).second) {
        fail(Errc::Malformed, "access unit " + std::to_string(i) + " has two slices for subpic_id " +
                                  std::to_string(id));
      }
    }
    if (seen.size() != vb.sps.subpics.size()) {
      fail(Errc::Malformed, "access unit " + std::to_string(i) + " lacks slices for some subpictures");
    }
  }
}

inline auto toNalUnits(const VideoBitstream &vb) -> std::vector<NalUnit> {
  validateBitstream(vb);
  const auto sps = encodeSps(vb.sps);
  const auto pps = encodePps(vb.pps);
  std::vector<NalUnit> seis;
  for (const auto &m : vb.sei) {
    seis.push_back(encodeSei(m));
  }
  std::vector<NalUnit> units;
  for (std::size_t i = 0; i < vb.access_units.size(); ++i) {
    const auto &au = vb.access_units[i];
    if (i == 0 || hasIrapSlice(au)) {
      units.push_back(sps);
      units.push_back(pps);
      units.insert(units.end(), seis.begin(), seis.end());
    }
    units.insert(units.end(), au.slices.begin(), au.slices.end());
  }
  return units;
}

inline auto fromNalUnits(std::span<const NalUnit> units) -> VideoBitstream {
  if (units.empty() || units.front().nal_type != NalType::SPS) {
    fail(Errc::Malformed, "coded video must start with an SPS");
  }
  VideoBitstream vb;
  std::vector<NalUnit> firstGroup;
  std::vector<NalUnit> group;
  std::vector<bool> hasParams;
  std::set<std::uint32_t> auIds;

  for (const auto &nal : units) {
    if (!isVcl(nal.nal_type)) {
      group.push_back(nal);
      continue;
    }
    if (!group.empty()) {
      if (firstGroup.empty()) {
        if (group.size() < 2 || group[1].nal_type != NalType::PPS) {
          fail(Errc::Malformed, "parameter set group must be SPS, PPS, then SEI");
        }
        vb.sps = decodeSps(group[0]);
        vb.pps = decodePps(group[1]);
        for (std::size_t i = 2; i < group.size(); ++i) {
          vb.sei.push_back(decodeSei(group[i]));
        }
        firstGroup = group;
      } else if (group != firstGroup) {
        fail(Errc::Malformed, "parameter sets change within the sequence");
      }
      group.clear();
      hasParams.push_back(true);
      vb.access_units.push_back({static_cast<std::uint32_t>(vb.access_units.size()), {}});
      auIds.clear();
    }
    const auto id = peekSliceSubpicId(nal, vb.sps.subpic_id_len);
    if (!auIds.insert(id).second) {
      hasParams.push_back(false);
      vb.access_units.push_back({static_cast<std::uint32_t>(vb.access_units.size()), {}});
      auIds = {id};
    }
    vb.access_units.back().slices.push_back(nal);
  }
  if (!group.empty()) {
    fail(Errc::Malformed, "parameter sets at the end of the stream without an access unit");
  }
  for (std::size_t i = 0; i < vb.access_units.size(); ++i) {
    const bool expected = i == 0 || hasIrapSlice(vb.access_units[i]);
    if (hasParams[i] != expected) {
      fail(Errc::Malformed, "access unit " + std::to_string(i) +
                                (expected ? " is IRAP but lacks parameter sets"
                                          : " repeats parameter sets without an IRAP slice"));
    }
  }
  validateBitstream(vb);
  return vb;
}

inline auto writeAnnexB(const VideoBitstream &vb) -> Bytes {
  const auto units = toNalUnits(vb);
  return frameBitstream(units);
}

inline auto readAnnexB(ByteSpan bytes) -> VideoBitstream {
  const auto units = parseBitstream(bytes);
  return fromNalUnits(units);
}

// Sum of slice payload sizes, i.e. coded picture data without any headers.
inline auto vclPayloadBytes(const VideoBitstream &vb) -> std::uint64_t {
  std::uint64_t total = 0;
  for (const auto &au : vb.access_units) {
    for (const auto &nal : au.slices) {
      total += decodeSlice(nal, vb.sps.subpic_id_len).payload.size();
    }
  }
  return total;
}

// Annex-B bytes spent on parameter sets and SEI, start codes included.
inline auto nonVclBytes(const VideoBitstream &vb) -> std::uint64_t {
  const auto units = toNalUnits(vb);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (!isVcl(units[i].nal_type)) {
      total += framedSize(units[i], i == 0);
    }
  }
  return total;
}

inline auto merge(std::span<const SubBitstream> inputs, const PlacementPlan &plan)
    -> MergedBitstream {
  if (inputs.empty()) {
    fail(Errc::EmptyInput, "merge needs at least one input");
  }
  validatePlan(plan);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    validateBitstream(inputs[k]);
    if (inputs[k].sps.subpics.size() != 1) {
      fail(Errc::InvalidLayout, "merge input " + std::to_string(k) + " has " +
                                    std::to_string(inputs[k].sps.subpics.size()) + " subpictures");
    }
  }
  const auto &ref = inputs.front();
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto &sps = inputs[k].sps;
    if (sps.ctu_size_log2 != ref.sps.ctu_size_log2 || sps.ctuSize() != plan.ctu_size) {
      fail(Errc::CtuMismatch, "merge input " + std::to_string(k) + " uses CTU size " +
                                  std::to_string(sps.ctuSize()) + ", plan uses " +
                                  std::to_string(plan.ctu_size));
    }
    if (sps.subpic_id_len != ref.sps.subpic_id_len) {
      fail(Errc::IdWidthMismatch, "merge inputs disagree on subpic_id_len");
    }
  }
  std::map<std::uint32_t, std::size_t> byId;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const auto id = inputs[k].sps.subpics.front().subpic_id;
    if (!byId.emplace(id, k).second) {
      fail(Errc::IdCollision, "subpic_id " + std::to_string(id) + " used by more than one input");
    }
  }
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (inputs[k].frameCount() != ref.frameCount()) {
      fail(Errc::FrameCountMismatch, "merge input " + std::to_string(k) + " has " +
                                         std::to_string(inputs[k].frameCount()) + " frames, input 0 has " +
                                         std::to_string(ref.frameCount()));
    }
  }
  if (plan.placements.size() != inputs.size()) {
    fail(Errc::PlanGeometryMismatch, "plan has " + std::to_string(plan.placements.size()) +
                                         " regions for " + std::to_string(inputs.size()) + " inputs");
  }

  MergedBitstream out;
  out.sps.sps_id = ref.sps.sps_id;
  out.sps.ctu_size_log2 = ref.sps.ctu_size_log2;
  out.sps.pic_width_luma = plan.composite_w;
  out.sps.pic_height_luma = plan.composite_h;
  out.sps.subpic_id_len = ref.sps.subpic_id_len;
  out.pps = {ref.pps.pps_id, out.sps.sps_id};

  std::vector<const SubBitstream *> ordered;
  for (const auto &p : plan.placements) {
    const auto it = byId.find(p.subpic_id);
    if (it == byId.end()) {
      fail(Errc::PlanGeometryMismatch, "no input carries subpic_id " + std::to_string(p.subpic_id) +
                                           " of region " + std::to_string(p.region_id));
    }
    const auto &in = inputs[it->second];
    const auto ctu = in.sps.ctuSize();
    if (in.sps.pic_width_luma != p.ctu_w * ctu || in.sps.pic_height_luma != p.ctu_h * ctu) {
      fail(Errc::PlanGeometryMismatch,
           "input with subpic_id " + std::to_string(p.subpic_id) + " is " +
               std::to_string(in.sps.pic_width_luma) + "x" + std::to_string(in.sps.pic_height_luma) +
               " but its region is " + std::to_string(p.ctu_w * ctu) + "x" +
               std::to_string(p.ctu_h * ctu));
    }
    out.sps.subpics.push_back(
        {p.ctu_x, p.ctu_y, p.ctu_w, p.ctu_h, in.sps.subpics.front().independent, p.subpic_id});
    ordered.push_back(&in);
  }
  validateSequenceParams(out.sps);

  out.access_units.resize(ref.frameCount());
  for (std::size_t f = 0; f < out.access_units.size(); ++f) {
    auto &au = out.access_units[f];
    au.frame_index = static_cast<std::uint32_t>(f);
    for (const auto *in : ordered) {
      const auto &slices = in->access_units[f].slices;
      au.slices.insert(au.slices.end(), slices.begin(), slices.end());
    }
  }
  return out;
}

inline auto subpicRect(const SequenceParams &sp, const SubpicEntry &e) -> PixelRect {
  const auto ctu = sp.ctuSize();
  const auto x = e.ctu_x * ctu;
  const auto y = e.ctu_y * ctu;
  return {x, y, std::min(e.ctu_w * ctu, sp.pic_width_luma - x),
          std::min(e.ctu_h * ctu, sp.pic_height_luma - y)};
}

inline auto split(const MergedBitstream &m, std::uint32_t subpicId) -> SubBitstream {
  const auto *entry = m.sps.findSubpic(subpicId);
  if (entry == nullptr) {
    fail(Errc::UnknownSubpicId, "subpic_id " + std::to_string(subpicId) + " is not in the SPS");
  }
  const auto rect = subpicRect(m.sps, *entry);
  SubBitstream out;
  out.sps = m.sps;
  out.sps.pic_width_luma = rect.w;
  out.sps.pic_height_luma = rect.h;
  out.sps.subpics = {{0, 0, entry->ctu_w, entry->ctu_h, entry->independent, subpicId}};
  out.pps = m.pps;
  out.access_units.reserve(m.access_units.size());
  for (const auto &au : m.access_units) {
    AccessUnit part{au.frame_index, {}};
    for (const auto &nal : au.slices) {
      if (peekSliceSubpicId(nal, m.sps.subpic_id_len) == subpicId) {
        part.slices.push_back(nal);
      }
    }
    out.access_units.push_back(std::move(part));
  }
  return out;
}

inline auto extractDecodedRegion(const YuvFrame &frame, const SequenceParams &sp,
                                 std::uint32_t subpicId) -> YuvFrame {
  if (frame.width() != sp.pic_width_luma || frame.height() != sp.pic_height_luma) {
    fail(Errc::DimensionMismatch, "frame is " + std::to_string(frame.width()) + "x" +
                                      std::to_string(frame.height()) + ", SPS says " +
                                      std::to_string(sp.pic_width_luma) + "x" +
                                      std::to_string(sp.pic_height_luma));
  }
  const auto *entry = sp.findSubpic(subpicId);
  if (entry == nullptr) {
    fail(Errc::UnknownSubpicId, "subpic_id " + std::to_string(subpicId) + " is not in the SPS");
  }
  return crop(frame, subpicRect(sp, *entry));
}

} // namespace subpack
