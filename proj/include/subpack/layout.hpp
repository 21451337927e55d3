#pragma once

// Packing planner: pads atlases to the CTU grid, chooses orientations, places
// them in one composite picture and fills what is left with filler regions.

#include "error.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace subpack {

enum class RegionKind : std::uint8_t { Texture, Geometry, Filler };
enum class Rotation : std::uint8_t { R0, R90 };

constexpr auto name(RegionKind kind) -> std::string_view {
  switch (kind) {
  case RegionKind::Texture:
    return "texture";
  case RegionKind::Geometry:
    return "geometry";
  case RegionKind::Filler:
    return "filler";
  }
  return "?";
}

inline auto parseRegionKind(std::string_view text) -> RegionKind {
  if (text == "texture") {
    return RegionKind::Texture;
  }
  if (text == "geometry") {
    return RegionKind::Geometry;
  }
  if (text == "filler") {
    return RegionKind::Filler;
  }
  fail(Errc::Malformed, "unknown region kind '" + std::string{text} + "'");
}

constexpr auto degrees(Rotation r) -> unsigned { return r == Rotation::R90 ? 90 : 0; }

struct RegionSpec {
  RegionKind kind{RegionKind::Texture};
  std::uint32_t width{};  // luma samples before padding
  std::uint32_t height{};
  Rotation rotation{Rotation::R0};
  std::uint32_t region_id{};

  friend auto operator==(const RegionSpec &, const RegionSpec &) -> bool = default;
};

struct Placement {
  std::uint32_t region_id{};
  RegionKind kind{RegionKind::Texture};
  std::uint32_t ctu_x{};
  std::uint32_t ctu_y{};
  std::uint32_t ctu_w{};
  std::uint32_t ctu_h{};
  Rotation rotation{Rotation::R0};
  std::uint32_t subpic_id{};

  friend auto operator==(const Placement &, const Placement &) -> bool = default;
};

struct PlacementPlan {
  std::uint32_t ctu_size{128};
  std::uint32_t composite_w{}; // luma samples, CTU multiples
  std::uint32_t composite_h{};
  std::vector<Placement> placements;

  [[nodiscard]] auto gridWidth() const { return composite_w / ctu_size; }
  [[nodiscard]] auto gridHeight() const { return composite_h / ctu_size; }
  [[nodiscard]] auto compositeArea() const {
    return std::uint64_t{composite_w} * composite_h;
  }

  [[nodiscard]] auto find(std::uint32_t regionId) const -> const Placement * {
    const auto it = std::find_if(placements.begin(), placements.end(),
                                 [=](const Placement &p) { return p.region_id == regionId; });
    return it == placements.end() ? nullptr : &*it;
  }

  friend auto operator==(const PlacementPlan &, const PlacementPlan &) -> bool = default;
};

struct Size {
  std::uint32_t width{};
  std::uint32_t height{};

  friend auto operator==(const Size &, const Size &) -> bool = default;
};

inline auto padToGrid(std::uint32_t width, std::uint32_t height, std::uint32_t ctu) -> Size {
  if (width < 1 || height < 1 || ctu < 1 || !std::has_single_bit(ctu)) {
    fail(Errc::ValueOutOfRange, "pad_to_grid needs positive sizes and a power-of-two CTU");
  }
  return {ctu * ((width + ctu - 1) / ctu), ctu * ((height + ctu - 1) / ctu)};
}

namespace detail {
struct ShelfItem {
  std::uint32_t index{}; // into the region list
  std::uint32_t w{};     // CTUs, after orientation
  std::uint32_t h{};
};

struct Rect {
  std::uint32_t x{};
  std::uint32_t y{};
  std::uint32_t w{};
  std::uint32_t h{};
};

struct ShelfResult {
  std::uint32_t width{};
  std::uint32_t height{};
  std::vector<std::pair<ShelfItem, Rect>> placed; // in placement order
  std::vector<Rect> gaps;

  [[nodiscard]] auto area() const { return std::uint64_t{width} * height; }
};

// Next-fit decreasing-height shelf packing into a strip of the given width.
inline auto shelfPack(std::vector<ShelfItem> items, std::uint32_t stripWidth,
                      std::span<const RegionSpec> regions) -> ShelfResult {
  std::sort(items.begin(), items.end(), [&](const ShelfItem &a, const ShelfItem &b) {
    if (a.h != b.h) {
      return a.h > b.h;
    }
    if (a.w != b.w) {
      return a.w > b.w;
    }
    return regions[a.index].region_id < regions[b.index].region_id;
  });

  ShelfResult result;
  result.width = stripWidth;
  std::uint32_t shelfY = 0;
  std::uint32_t shelfH = 0;
  std::uint32_t cursor = 0;
  std::size_t shelfBegin = 0;

  const auto closeShelf = [&] {
    for (auto i = shelfBegin; i < result.placed.size(); ++i) {
      const auto &r = result.placed[i].second;
      if (r.h < shelfH) {
        result.gaps.push_back({r.x, r.y + r.h, r.w, shelfH - r.h});
      }
    }
    if (cursor < stripWidth && shelfH > 0) {
      result.gaps.push_back({cursor, shelfY, stripWidth - cursor, shelfH});
    }
  };

  for (const auto &item : items) {
    if (cursor + item.w > stripWidth || shelfH == 0) {
      if (shelfH > 0) {
        closeShelf();
        shelfY += shelfH;
      }
      shelfH = item.h;
      cursor = 0;
      shelfBegin = result.placed.size();
    }
    result.placed.push_back({item, {cursor, shelfY, item.w, item.h}});
    cursor += item.w;
  }
  closeShelf();
  result.height = shelfY + shelfH;
  return result;
}

// Tries every strip width between the widest item and the sum of widths; the
// smallest composite wins, ties going to the narrower strip.
inline auto bestStripPack(const std::vector<ShelfItem> &items, std::span<const RegionSpec> regions)
    -> ShelfResult {
  std::uint32_t widest = 0;
  std::uint32_t total = 0;
  for (const auto &item : items) {
    widest = std::max(widest, item.w);
    total += item.w;
  }
  std::optional<ShelfResult> best;
  for (auto w = widest; w <= total; ++w) {
    auto candidate = shelfPack(items, w, regions);
    if (!best || candidate.area() < best->area()) {
      best = std::move(candidate);
    }
  }
  return *best;
}

inline auto transpose(ShelfResult r) -> ShelfResult {
  std::swap(r.width, r.height);
  for (auto &[item, rect] : r.placed) {
    std::swap(item.w, item.h);
    std::swap(rect.x, rect.y);
    std::swap(rect.w, rect.h);
  }
  for (auto &gap : r.gaps) {
    std::swap(gap.x, gap.y);
    std::swap(gap.w, gap.h);
  }
  return r;
}

// Row shelves, or column shelves if strictly smaller.
inline auto bestShelfPack(const std::vector<ShelfItem> &items, std::span<const RegionSpec> regions)
    -> ShelfResult {
  auto rows = bestStripPack(items, regions);
  auto flipped = items;
  for (auto &item : flipped) {
    std::swap(item.w, item.h);
  }
  auto columns = transpose(bestStripPack(flipped, regions));
  return columns.area() < rows.area() ? columns : rows;
}
} // namespace detail

// Throws InvalidLayout unless placements tile the composite exactly.
inline void validatePlan(const PlacementPlan &plan) {
  const auto bad = [](const std::string &what) { fail(Errc::InvalidLayout, what); };
  if (plan.ctu_size == 0 || !std::has_single_bit(plan.ctu_size)) {
    bad("CTU size must be a power of two");
  }
  if (plan.composite_w == 0 || plan.composite_h == 0 || plan.composite_w % plan.ctu_size != 0 ||
      plan.composite_h % plan.ctu_size != 0) {
    bad("composite dimensions must be positive CTU multiples");
  }
  if (plan.placements.empty()) {
    bad("plan has no placements");
  }
  const auto gw = plan.gridWidth();
  const auto gh = plan.gridHeight();
  std::vector<std::uint8_t> claimed(static_cast<std::size_t>(gw) * gh, 0);
  for (std::size_t k = 0; k < plan.placements.size(); ++k) {
    const auto &p = plan.placements[k];
    for (std::size_t j = 0; j < k; ++j) {
      if (plan.placements[j].region_id == p.region_id) {
        bad("duplicate region_id " + std::to_string(p.region_id));
      }
      if (plan.placements[j].subpic_id == p.subpic_id) {
        bad("duplicate subpic_id " + std::to_string(p.subpic_id));
      }
    }
    if (p.ctu_w == 0 || p.ctu_h == 0 || p.ctu_x >= gw || p.ctu_y >= gh || p.ctu_w > gw - p.ctu_x ||
        p.ctu_h > gh - p.ctu_y) {
      bad("region " + std::to_string(p.region_id) + " lies outside the composite");
    }
    for (auto y = p.ctu_y; y < p.ctu_y + p.ctu_h; ++y) {
      for (auto x = p.ctu_x; x < p.ctu_x + p.ctu_w; ++x) {
        auto &cell = claimed[static_cast<std::size_t>(y) * gw + x];
        if (cell != 0) {
          bad("region " + std::to_string(p.region_id) + " overlaps another region");
        }
        cell = 1;
      }
    }
  }
  if (std::find(claimed.begin(), claimed.end(), std::uint8_t{0}) != claimed.end()) {
    bad("regions do not cover the composite");
  }
}

// Region counts up to this try all orientation combinations.
inline constexpr std::size_t exhaustiveRotationLimit = 10;

inline auto planPacking(std::span<const RegionSpec> regions, std::uint32_t ctu, bool allowRotation)
    -> PlacementPlan {
  if (regions.empty()) {
    fail(Errc::EmptyInput, "nothing to pack");
  }
  std::vector<detail::ShelfItem> items;
  std::uint32_t nextRegionId = 0;
  for (std::uint32_t i = 0; i < regions.size(); ++i) {
    const auto &r = regions[i];
    if (r.kind == RegionKind::Filler) {
      fail(Errc::InvalidLayout, "filler regions are created by the planner, not supplied");
    }
    const auto padded = padToGrid(r.width, r.height, ctu);
    auto item = detail::ShelfItem{i, padded.width / ctu, padded.height / ctu};
    if (!allowRotation && r.rotation == Rotation::R90) {
      std::swap(item.w, item.h);
    }
    items.push_back(item);
    nextRegionId = std::max(nextRegionId, r.region_id + 1);
  }

  std::vector<Rotation> orientation(regions.size(), Rotation::R0);
  if (!allowRotation) {
    for (std::size_t i = 0; i < regions.size(); ++i) {
      orientation[i] = regions[i].rotation;
    }
  }
  auto best = detail::bestShelfPack(items, regions);
  if (allowRotation && items.size() <= exhaustiveRotationLimit) {
    // Every orientation combination; ties keep fewer quarter turns, then the
    // lower mask (earlier regions stay upright).
    std::uint32_t bestMask = 0;
    for (std::uint32_t mask = 1; mask < (1U << items.size()); ++mask) {
      auto trial = items;
      bool redundant = false;
      for (std::size_t i = 0; i < items.size(); ++i) {
        if ((mask >> i) & 1U) {
          redundant = redundant || items[i].w == items[i].h;
          std::swap(trial[i].w, trial[i].h);
        }
      }
      if (redundant) {
        continue;
      }
      auto candidate = detail::bestShelfPack(trial, regions);
      const auto turns = std::popcount(mask);
      if (candidate.area() < best.area() ||
          (candidate.area() == best.area() && turns < std::popcount(bestMask))) {
        best = std::move(candidate);
        bestMask = mask;
      }
    }
    for (std::size_t i = 0; i < items.size(); ++i) {
      orientation[i] = ((bestMask >> i) & 1U) != 0 ? Rotation::R90 : Rotation::R0;
    }
  } else if (allowRotation) {
    // One pass in input order; a quarter turn is kept only if it strictly helps.
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i].w == items[i].h) {
        continue;
      }
      auto trial = items;
      std::swap(trial[i].w, trial[i].h);
      auto candidate = detail::bestShelfPack(trial, regions);
      if (candidate.area() < best.area()) {
        items = std::move(trial);
        best = std::move(candidate);
        orientation[i] = Rotation::R90;
      }
    }
  }

  PlacementPlan plan;
  plan.ctu_size = ctu;
  plan.composite_w = best.width * ctu;
  plan.composite_h = best.height * ctu;
  std::uint32_t subpicId = 0;
  for (const auto &[item, rect] : best.placed) {
    const auto &r = regions[item.index];
    plan.placements.push_back(
        {r.region_id, r.kind, rect.x, rect.y, rect.w, rect.h, orientation[item.index], subpicId++});
  }
  for (const auto &gap : best.gaps) {
    plan.placements.push_back({nextRegionId++, RegionKind::Filler, gap.x, gap.y, gap.w, gap.h,
                               Rotation::R0, subpicId++});
  }
  return plan;
}

inline auto planPacking(std::initializer_list<RegionSpec> regions, std::uint32_t ctu,
                        bool allowRotation) -> PlacementPlan {
  return planPacking(std::span<const RegionSpec>{regions.begin(), regions.size()}, ctu,
                     allowRotation);
}

inline auto fillerArea(const PlacementPlan &plan) -> std::uint64_t {
  std::uint64_t area = 0;
  for (const auto &p : plan.placements) {
    if (p.kind == RegionKind::Filler) {
      area += std::uint64_t{p.ctu_w} * p.ctu_h * plan.ctu_size * plan.ctu_size;
    }
  }
  return area;
}

// Text form, one placement per line after the ctu and composite lines:
//   <region_id> <kind> <ctu_x> <ctu_y> <ctu_w> <ctu_h> <rotation 0|90> <subpic_id>
inline auto formatPlan(const PlacementPlan &plan) -> std::string {
  std::ostringstream out;
  out << "ctu " << plan.ctu_size << '\n';
  out << "composite " << plan.composite_w << ' ' << plan.composite_h << '\n';
  for (const auto &p : plan.placements) {
    out << p.region_id << ' ' << name(p.kind) << ' ' << p.ctu_x << ' ' << p.ctu_y << ' ' << p.ctu_w
        << ' ' << p.ctu_h << ' ' << degrees(p.rotation) << ' ' << p.subpic_id << '\n';
  }
  return out.str();
}

inline auto parsePlan(const std::string &text) -> PlacementPlan {
  PlacementPlan plan;
  bool haveCtu = false;
  bool haveComposite = false;
  std::istringstream in{text};
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    const auto bad = [&](const std::string &what) {
      fail(Errc::Malformed, "plan line " + std::to_string(lineNo) + ": " + what);
    };
    if (line.empty() || line.front() == '#') {
      continue;
    }
    std::istringstream fields{line};
    std::string head;
    fields >> head;
    if (head == "ctu") {
      if (!(fields >> plan.ctu_size)) {
        bad("expected 'ctu <size>'");
      }
      haveCtu = true;
    } else if (head == "composite") {
      if (!(fields >> plan.composite_w >> plan.composite_h)) {
        bad("expected 'composite <width> <height>'");
      }
      haveComposite = true;
    } else {
      Placement p;
      std::string kind;
      unsigned rot = 0;
      try {
        p.region_id = static_cast<std::uint32_t>(std::stoul(head));
      } catch (const std::exception &) {
        bad("expected a region id, got '" + head + "'");
      }
      if (!(fields >> kind >> p.ctu_x >> p.ctu_y >> p.ctu_w >> p.ctu_h >> rot >> p.subpic_id)) {
        bad("expected '<id> <kind> <x> <y> <w> <h> <rot> <subpic_id>'");
      }
      p.kind = parseRegionKind(kind);
      if (rot != 0 && rot != 90) {
        bad("rotation must be 0 or 90");
      }
      p.rotation = rot == 90 ? Rotation::R90 : Rotation::R0;
      plan.placements.push_back(p);
    }
    std::string extra;
    if (fields >> extra) {
      bad("unexpected trailing field '" + extra + "'");
    }
  }
  if (!haveCtu || !haveComposite) {
    fail(Errc::Malformed, "plan lacks its ctu or composite line");
  }
  try {
    validatePlan(plan);
  } catch (const Error &e) {
    fail(Errc::Malformed, std::string{"invalid plan: "} + e.what());
  }
  return plan;
}

// Region list text form: <region_id> <kind> <width> <height>, one per line.
inline auto parseRegions(const std::string &text) -> std::vector<RegionSpec> {
  std::vector<RegionSpec> regions;
  std::istringstream in{text};
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.empty() || line.front() == '#') {
      continue;
    }
    std::istringstream fields{line};
    RegionSpec r;
    std::string kind;
    std::string extra;
    if (!(fields >> r.region_id >> kind >> r.width >> r.height) || (fields >> extra) ||
        r.width == 0 || r.height == 0) {
      fail(Errc::Malformed, "regions line " + std::to_string(lineNo) +
                                ": expected '<id> <texture|geometry> <width> <height>'");
    }
    r.kind = parseRegionKind(kind);
    if (r.kind == RegionKind::Filler) {
      fail(Errc::Malformed, "regions line " + std::to_string(lineNo) + ": filler is planner-made");
    }
    regions.push_back(r);
  }
  if (regions.empty()) {
    fail(Errc::EmptyInput, "region list is empty");
  }
  return regions;
}

} // namespace subpack
