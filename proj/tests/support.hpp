#pragma once

// Helpers shared by the unit tests and the acceptance runner: a randomized
// merge corpus and an exhaustive rectangle-packing oracle.

#include "subpack/subpack.hpp"

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

namespace subpack::oracle {

// Payload with start-code-like runs sprinkled in.
inline auto adversarialPayload(std::mt19937_64 &rng, std::size_t length) -> Bytes {
  Bytes out(length);
  std::uniform_int_distribution<int> byte{0, 255};
  std::uniform_int_distribution<int> small{0, 3};
  for (auto &b : out) {
    b = static_cast<std::uint8_t>(byte(rng));
  }
  std::uniform_int_distribution<std::size_t> pos{0, length - 1};
  const auto runs = length / 4 + 1;
  for (std::size_t k = 0; k < runs; ++k) {
    const auto at = pos(rng);
    for (std::size_t j = 0; j < 3 && at + j < length; ++j) {
      out[at + j] = j < 2 ? 0 : static_cast<std::uint8_t>(small(rng));
    }
  }
  if (rng() % 4 == 0) {
    out.back() = 0; // payload ending in zero
  }
  return out;
}

struct MergeCase {
  PlacementPlan plan;
  std::vector<SubBitstream> inputs; // in plan order
  std::vector<std::vector<Bytes>> payloads; // [input][frame]
};

// A random plan with 1..8 placements and one coded input per placement.
inline auto randomMergeCase(std::mt19937_64 &rng) -> MergeCase {
  static constexpr std::uint32_t ctus[] = {32, 64, 128};
  std::uniform_int_distribution<int> ctuPick{0, 2};
  std::uniform_int_distribution<int> regionCount{1, 4};
  std::uniform_int_distribution<int> frameCount{1, 17};
  std::uniform_int_distribution<std::size_t> payloadLen{1, 512};
  const auto ctu = ctus[ctuPick(rng)];
  std::uniform_int_distribution<std::uint32_t> dim{1, 6 * ctu};

  MergeCase c;
  do {
    std::vector<RegionSpec> regions;
    const auto n = regionCount(rng);
    for (int i = 0; i < n; ++i) {
      const auto kind = i % 2 == 0 ? RegionKind::Texture : RegionKind::Geometry;
      regions.push_back({kind, dim(rng), dim(rng), Rotation::R0, static_cast<std::uint32_t>(i)});
    }
    c.plan = planPacking(regions, ctu, rng() % 2 == 0);
  } while (c.plan.placements.size() > 8);

  const auto frames = static_cast<std::uint32_t>(frameCount(rng));
  const auto idLen = std::max<std::uint32_t>(
      1, static_cast<std::uint32_t>(std::bit_width(c.plan.placements.size() - 1)));
  const auto period = static_cast<std::uint32_t>(rng() % 9);
  for (const auto &p : c.plan.placements) {
    SubBitstream in;
    in.sps.ctu_size_log2 = static_cast<std::uint32_t>(std::countr_zero(ctu));
    in.sps.pic_width_luma = p.ctu_w * ctu;
    in.sps.pic_height_luma = p.ctu_h * ctu;
    in.sps.subpic_id_len = idLen;
    in.sps.subpics = {{0, 0, p.ctu_w, p.ctu_h, true, p.subpic_id}};
    std::vector<Bytes> payloads;
    for (std::uint32_t f = 0; f < frames; ++f) {
      const bool intra = isIntraFrame(f, period);
      payloads.push_back(adversarialPayload(rng, payloadLen(rng)));
      in.access_units.push_back(
          {f, {encodeSlice({p.subpic_id, intra ? SliceType::I : SliceType::P, payloads.back()},
                           idLen)}});
    }
    c.inputs.push_back(std::move(in));
    c.payloads.push_back(std::move(payloads));
  }
  return c;
}

// Smallest bounding-box area that holds the rectangles without overlap,
// searched box by box in increasing area. Candidate coordinates are subset
// sums of the rectangle sides, which is enough for some optimal packing to be
// found. Sides are limited to 64 so a grid row fits one machine word.
class PackingOracle {
public:
  PackingOracle(std::vector<std::pair<std::uint32_t, std::uint32_t>> rects, bool rotate)
      : m_rects{std::move(rects)}, m_rotate{rotate} {
    // Larger rectangles first prunes the search sooner.
    std::sort(m_rects.begin(), m_rects.end(), [](const auto &a, const auto &b) {
      return std::uint64_t{a.first} * a.second > std::uint64_t{b.first} * b.second;
    });
    std::set<std::uint32_t> sums{0};
    for (const auto &[w, h] : m_rects) {
      std::set<std::uint32_t> next = sums;
      for (const auto s : sums) {
        next.insert(s + w);
        next.insert(s + h);
      }
      sums = std::move(next);
    }
    m_coords.assign(sums.begin(), sums.end());
  }

  // Optimum area; upperBound must be the area of some feasible packing.
  auto optimumArea(std::uint64_t upperBound = 0) -> std::uint64_t {
    std::uint32_t minW = 0;
    std::uint32_t minH = 0;
    std::uint32_t sumSide = 0;
    std::uint64_t areaSum = 0;
    for (const auto &[w, h] : m_rects) {
      const auto lo = m_rotate ? std::min(w, h) : w;
      const auto loH = m_rotate ? std::min(w, h) : h;
      minW = std::max(minW, lo);
      minH = std::max(minH, loH);
      sumSide += std::max(w, h);
      areaSum += std::uint64_t{w} * h;
    }
    if (upperBound == 0) {
      upperBound = std::uint64_t{sumSide} * sumSide;
    }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> boxes;
    for (auto W = minW; W <= std::min<std::uint32_t>(sumSide, 64); ++W) {
      for (auto H = minH; H <= sumSide; ++H) {
        const auto area = std::uint64_t{W} * H;
        if (area >= areaSum && area < upperBound) {
          boxes.emplace_back(W, H);
        }
      }
    }
    std::sort(boxes.begin(), boxes.end(), [](const auto &a, const auto &b) {
      return std::uint64_t{a.first} * a.second < std::uint64_t{b.first} * b.second;
    });
    for (const auto &[W, H] : boxes) {
      if (fits(W, H)) {
        return std::uint64_t{W} * H;
      }
    }
    return upperBound;
  }

private:
  auto fits(std::uint32_t W, std::uint32_t H) -> bool {
    m_W = W;
    m_H = H;
    m_rows.assign(H, 0);
    return place(0);
  }

  auto place(std::size_t k) -> bool {
    if (k == m_rects.size()) {
      return true;
    }
    const auto [w0, h0] = m_rects[k];
    for (int turn = 0; turn < (m_rotate && w0 != h0 ? 2 : 1); ++turn) {
      const auto w = turn == 0 ? w0 : h0;
      const auto h = turn == 0 ? h0 : w0;
      if (w > m_W || h > m_H) {
        continue;
      }
      const std::uint64_t bits = w == 64 ? ~0ULL : (1ULL << w) - 1;
      for (const auto y : m_coords) {
        if (y + h > m_H) {
          break;
        }
        for (const auto x : m_coords) {
          if (x + w > m_W) {
            break;
          }
          const auto mask = bits << x;
          bool free = true;
          for (auto r = y; r < y + h && free; ++r) {
            free = (m_rows[r] & mask) == 0;
          }
          if (!free) {
            continue;
          }
          for (auto r = y; r < y + h; ++r) {
            m_rows[r] |= mask;
          }
          if (place(k + 1)) {
            return true;
          }
          for (auto r = y; r < y + h; ++r) {
            m_rows[r] &= ~mask;
          }
        }
      }
    }
    return false;
  }

  std::vector<std::pair<std::uint32_t, std::uint32_t>> m_rects;
  bool m_rotate;
  std::uint32_t m_W{};
  std::uint32_t m_H{};
  std::vector<std::uint64_t> m_rows;
  std::vector<std::uint32_t> m_coords;
};

// Marks every CTU cell; true iff each is claimed exactly once.
inline auto coversExactly(const PlacementPlan &plan) -> bool {
  const auto gw = plan.gridWidth();
  const auto gh = plan.gridHeight();
  std::vector<int> cells(static_cast<std::size_t>(gw) * gh, 0);
  for (const auto &p : plan.placements) {
    if (p.ctu_x + p.ctu_w > gw || p.ctu_y + p.ctu_h > gh) {
      return false;
    }
    for (auto y = p.ctu_y; y < p.ctu_y + p.ctu_h; ++y) {
      for (auto x = p.ctu_x; x < p.ctu_x + p.ctu_w; ++x) {
        ++cells[static_cast<std::size_t>(y) * gw + x];
      }
    }
  }
  return std::all_of(cells.begin(), cells.end(), [](int c) { return c == 1; });
}

} // namespace subpack::oracle
