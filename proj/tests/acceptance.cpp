// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure.

#include "subpack/subpack.hpp"

#include "support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace subpack;

namespace {

struct Outcome {
  bool pass{};
  std::string detail;
};

using Clock = std::chrono::steady_clock;

auto seconds(Clock::time_point since) -> double {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

auto collectPayloads(const VideoBitstream &vb) -> std::vector<Bytes> {
  std::vector<Bytes> out;
  for (const auto &au : vb.access_units) {
    for (const auto &nal : au.slices) {
      out.push_back(decodeSlice(nal, vb.sps).payload);
    }
  }
  return out;
}

// Shared fuzz corpus: the serialization check reuses every stream the
// losslessness check emits.
struct Corpus {
  std::vector<Bytes> streams;
};

auto mergeSplitLossless(Corpus &corpus) -> Outcome {
  const auto start = Clock::now();
  std::mt19937_64 rng{20240611};
  int cases = 0;
  int passed = 0;
  int adversarial = 0;
  for (; cases < 1000; ++cases) {
    const auto c = oracle::randomMergeCase(rng);
    const auto merged = merge(c.inputs, c.plan);
    const auto bytes = writeAnnexB(merged);
    corpus.streams.push_back(bytes);
    const auto received = readAnnexB(bytes);
    bool ok = true;
    for (std::size_t k = 0; k < c.inputs.size(); ++k) {
      corpus.streams.push_back(writeAnnexB(c.inputs[k]));
      const auto part = split(received, c.plan.placements[k].subpic_id);
      corpus.streams.push_back(writeAnnexB(part));
      ok = ok && collectPayloads(part) == c.payloads[k];
      for (const auto &p : c.payloads[k]) {
        for (std::size_t i = 0; i + 2 < p.size(); ++i) {
          if (p[i] == 0 && p[i + 1] == 0 && p[i + 2] <= 3) {
            ++adversarial;
            break;
          }
        }
      }
    }
    passed += ok ? 1 : 0;
  }
  const auto elapsed = seconds(start);
  std::ostringstream d;
  d << passed << "/" << cases << " cases byte-identical, " << adversarial
    << " payloads with 00 00 0x runs, " << elapsed << " s (limit 60 s)";
  return {passed == cases && adversarial > 0 && elapsed < 60.0, d.str()};
}

auto bitExactSerialization(const Corpus &corpus) -> Outcome {
  std::size_t identical = 0;
  for (const auto &stream : corpus.streams) {
    const auto units = parseBitstream(stream);
    identical += frameBitstream(units) == stream && writeAnnexB(readAnnexB(stream)) == stream ? 1 : 0;
  }
  const auto start = Clock::now();
  std::uint64_t strings = 0;
  std::uint64_t roundTrips = 0;
  Bytes b;
  Bytes escaped;
  Bytes back;
  for (std::size_t len = 0; len <= 4; ++len) {
    const std::uint64_t count = 1ULL << (8 * len);
    b.resize(len);
    for (std::uint64_t v = 0; v < count; ++v) {
      for (std::size_t i = 0; i < len; ++i) {
        b[i] = static_cast<std::uint8_t>(v >> (8 * i));
      }
      escaped.clear();
      escapeRbspInto(b, escaped);
      back.clear();
      unescapeRbspInto(escaped, back);
      roundTrips += back == b ? 1 : 0;
      ++strings;
    }
  }
  std::ostringstream d;
  d << identical << "/" << corpus.streams.size() << " corpus streams re-serialize identically; "
    << roundTrips << "/" << strings << " byte strings of length <= 4 round-trip (" << seconds(start)
    << " s)";
  return {!corpus.streams.empty() && identical == corpus.streams.size() && roundTrips == strings &&
              strings == 1ULL + 256 + 65536 + 16777216 + 4294967296ULL,
          d.str()};
}

auto overheadBand() -> Outcome {
  AtlasPair pair;
  pair.texture = {{RegionKind::Texture, 2048, 1280, Rotation::R0, 0}, syntheticAtlas(2048, 1280, 1)};
  pair.geometry = {{RegionKind::Geometry, 1024, 640, Rotation::R0, 1}, syntheticAtlas(1024, 640, 2)};
  pair.frame_count = 17;
  PipelineConfig cfg;
  cfg.codec = {0, 236, 14, 17};
  cfg.content_rate = RateTarget{5.0e6, 30.0};
  const std::vector pairs{pair};
  const auto anchor = runAnchor(pairs, cfg);
  const auto packed = runPacked(pairs, cfg, 128, false);
  const auto plan = planPacking({pair.texture.spec, pair.geometry.spec}, 128, false);
  std::size_t fillers = 0;
  for (const auto &p : plan.placements) {
    fillers += p.kind == RegionKind::Filler ? 1 : 0;
  }
  const auto fraction = packed.overhead_fraction;
  std::ostringstream d;
  d << "content " << packed.total_vcl_bytes << " B, filler " << packed.filler_vcl_bytes
    << " B, parameter-set delta " << packed.parameter_set_delta << " B, overhead_fraction "
    << fraction * 100 << "% (reference 460/354167 = " << 460.0 / 354167.0 * 100
    << "%), band [0.05%, 0.5%]";
  return {fillers == 1 && anchor.total_vcl_bytes == 354167 && packed.total_vcl_bytes == 354167 &&
              packed.filler_vcl_bytes == 460 && fraction >= 0.0005 && fraction <= 0.005,
          d.str()};
}

auto decoderHalving() -> Outcome {
  std::vector<AtlasPair> pairs;
  bool ok = true;
  std::ostringstream d;
  for (std::uint32_t n = 1; n <= 8; ++n) {
    const auto tw = 256 + 128 * (n % 3);
    const auto gw = 128 + 64 * (n % 2);
    AtlasPair p;
    p.texture = {{RegionKind::Texture, tw, 256, Rotation::R0, 0}, syntheticAtlas(tw, 256, n)};
    p.geometry = {{RegionKind::Geometry, gw, 128, Rotation::R0, 1}, syntheticAtlas(gw, 128, n + 9)};
    p.frame_count = 4;
    pairs.push_back(std::move(p));
    const auto anchor = runAnchor(pairs, PipelineConfig{}, 64);
    const auto packed = runPacked(pairs, PipelineConfig{}, 64, n % 2 == 0);
    ok = ok && packed.decoder_instances == n && anchor.decoder_instances == 2 * n;
    d << (n > 1 ? ", " : "") << "N=" << n << ": " << anchor.decoder_instances << "->"
      << packed.decoder_instances;
  }
  return {ok, d.str()};
}

auto qpLadder() -> Outcome {
  int matched = 0;
  int total = 0;
  for (const auto s : allCtcSequences) {
    const auto ladder = ctcLadder(s);
    for (std::size_t i = 0; i < 5; ++i) {
      const auto q = ladder.texture_qps[i];
      const auto reference = static_cast<int>(std::lround(std::max(1.0, -14.2 + 0.8 * q)));
      matched += ladder.geometry_qps[i] == reference && deriveGeometryQp(q) == reference ? 1 : 0;
      ++total;
    }
  }
  const bool spots = deriveGeometryQp(25) == 6 && deriveGeometryQp(51) == 27 && deriveGeometryQp(11) == 1;
  const auto chess = ctcLadder(CtcSequence::Chess).geometry_qps;
  std::ostringstream d;
  d << matched << "/" << total << " ladder QPs match the closed form; 25->" << deriveGeometryQp(25)
    << ", 51->" << deriveGeometryQp(51) << ", 11->" << deriveGeometryQp(11) << "; Chess geometry ("
    << chess[0] << "," << chess[1] << "," << chess[2] << "," << chess[3] << "," << chess[4] << ")";
  return {matched == 15 && total == 15 && spots && chess == std::array{1, 1, 6, 11, 16}, d.str()};
}

auto bdRateSanity() -> Outcome {
  const RdCurve base{{{1.0e6, 30.0}, {2.2e6, 33.0}, {4.1e6, 35.5}, {8.3e6, 37.5}}};
  RdCurve doubled = base;
  for (auto &p : doubled.points) {
    p.bitrate *= 2;
  }
  const auto same = bdRate(base, base);
  const auto twice = bdRate(base, doubled);

  std::mt19937_64 rng{555};
  std::uniform_real_distribution<double> rateStep{0.15, 1.0};
  std::uniform_real_distribution<double> qStep{0.5, 4.0};
  double worst = 0.0;
  for (int n = 0; n < 100; ++n) {
    RdCurve c;
    double logRate = 5.0 + rateStep(rng);
    double q = 25.0 + 10 * rateStep(rng);
    const auto points = 4 + rng() % 3;
    for (std::size_t i = 0; i < points; ++i) {
      c.points.push_back({std::pow(10.0, logRate), q});
      logRate += rateStep(rng);
      q += qStep(rng);
    }
    const auto fit = fitLogRate(c);
    const auto lo = c.points.front().quality;
    const auto hi = c.points.back().quality;
    const int steps = 200000;
    const double h = (hi - lo) / steps;
    double trap = 0.5 * (fit(lo) + fit(hi));
    for (int i = 1; i < steps; ++i) {
      trap += fit(lo + i * h);
    }
    trap *= h;
    worst = std::max(worst, std::abs(fit.integral(lo, hi) - trap));
  }
  std::ostringstream d;
  d << "identical " << same << "% (tol 1e-9), doubled " << twice
    << "% (tol 1e-6), worst closed-form vs dense integral gap " << worst << " over 100 curves (tol 1e-6)";
  return {std::abs(same) <= 1e-9 && std::abs(twice - 100.0) <= 1e-6 && worst <= 1e-6, d.str()};
}

auto packingOracle() -> Outcome {
  const auto start = Clock::now();
  std::vector<std::pair<std::uint32_t, std::uint32_t>> shapes;
  for (std::uint32_t w = 1; w <= 8; ++w) {
    for (std::uint32_t h = 1; h <= 8; ++h) {
      shapes.emplace_back(w, h);
    }
  }
  std::uint64_t sets = 0;
  std::uint64_t failures = 0;
  double worstPlain = 0.0;
  double worstTurned = 0.0;
  std::vector<std::size_t> pick;
  const std::uint32_t ctu = 32;
  const auto visit = [&] {
    std::vector<RegionSpec> regions;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> rects;
    for (std::size_t i = 0; i < pick.size(); ++i) {
      const auto [w, h] = shapes[pick[i]];
      regions.push_back({i % 2 ? RegionKind::Geometry : RegionKind::Texture, w * ctu, h * ctu,
                         Rotation::R0, static_cast<std::uint32_t>(i)});
      rects.emplace_back(w, h);
    }
    const auto plain = planPacking(regions, ctu, false);
    const auto turned = planPacking(regions, ctu, true);
    const auto cell = std::uint64_t{ctu} * ctu;
    const auto plainArea = plain.compositeArea() / cell;
    const auto turnedArea = turned.compositeArea() / cell;
    const auto optPlain = oracle::PackingOracle{rects, false}.optimumArea(plainArea + 1);
    const auto optTurned = oracle::PackingOracle{rects, true}.optimumArea(turnedArea + 1);
    worstPlain = std::max(worstPlain, static_cast<double>(plainArea) / optPlain);
    worstTurned = std::max(worstTurned, static_cast<double>(turnedArea) / optTurned);
    const bool ok = oracle::coversExactly(plain) && oracle::coversExactly(turned) &&
                    2 * plainArea <= 3 * optPlain && 2 * turnedArea <= 3 * optTurned &&
                    turnedArea <= plainArea;
    failures += ok ? 0 : 1;
    ++sets;
  };
  // Every multiset of one to four shapes.
  std::function<void(std::size_t)> recurse = [&](std::size_t from) {
    if (!pick.empty()) {
      visit();
    }
    if (pick.size() == 4) {
      return;
    }
    for (auto s = from; s < shapes.size(); ++s) {
      pick.push_back(s);
      recurse(s);
      pick.pop_back();
    }
  };
  recurse(0);
  std::ostringstream d;
  d << sets << " region sets (1-4 regions, sides 1-8 CTUs): " << failures
    << " failures; worst ratio to optimum " << worstPlain << " upright, " << worstTurned
    << " with rotation (limit 1.5); " << seconds(start) << " s";
  return {failures == 0 && sets == 814384, d.str()};
}

auto v3cOrdering() -> Outcome {
  std::mt19937_64 rng{31337};
  const auto randomPayload = [&](std::size_t n) {
    Bytes b(n);
    for (auto &x : b) {
      x = static_cast<std::uint8_t>(rng());
    }
    return b;
  };

  // Streams whose first unit is anything but a VPS.
  int rejected = 0;
  for (int n = 0; n < 1000; ++n) {
    std::vector<V3cUnit> units{{static_cast<V3cUnitType>(1 + rng() % 5), 0, 0, randomPayload(1 + rng() % 40)},
                               {V3cUnitType::VPS, 0, 0, encodeVps({})}};
    try {
      demux(writeSampleStream(units));
    } catch (const Error &e) {
      rejected += e.code() == Errc::MissingVps ? 1 : 0;
    }
  }

  int bijective = 0;
  for (int n = 0; n < 10000; ++n) {
    V3cParameterSet vps{static_cast<std::uint8_t>(rng() % 16), std::nullopt};
    if (rng() % 2) {
      PackingInformation pi;
      const auto count = rng() % 6;
      for (std::uint32_t i = 0; i < count; ++i) {
        pi.regions.push_back({i, static_cast<PackedRegionKind>(rng() % 4),
                              static_cast<std::uint32_t>(rng() % 8192),
                              static_cast<std::uint32_t>(rng() % 8192),
                              static_cast<std::uint32_t>(1 + rng() % 8192),
                              static_cast<std::uint32_t>(1 + rng() % 8192),
                              static_cast<Rotation>(rng() % 2)});
      }
      vps.packing = pi;
    }
    std::vector<V3cUnit> units{{V3cUnitType::VPS, 0, 0, encodeVps(vps)}};
    const auto extra = rng() % 7;
    for (std::size_t k = 0; k < extra; ++k) {
      units.push_back({static_cast<V3cUnitType>(1 + rng() % 5), static_cast<std::uint8_t>(rng() % 16),
                       static_cast<std::uint8_t>(rng() % 64), randomPayload(1 + rng() % 700)});
    }
    // Automatic precision or a forced wider one.
    const auto stream = writeSampleStream(units, static_cast<unsigned>(rng() % 2 == 0 ? 0 : 2 + rng() % 7));
    const auto d = demux(stream);
    bijective += d.units == units && d.vps == vps &&
                         writeSampleStream(d.units, (stream[0] >> 5) + 1U) == stream
                     ? 1
                     : 0;
  }

  // Region-id mutations between the VPS and the SEI over random plans.
  int caught = 0;
  int mutations = 0;
  std::uniform_int_distribution<std::uint32_t> dim{1, 1024};
  while (mutations < 2000) {
    std::vector<RegionSpec> regions;
    const auto count = 1 + rng() % 4;
    for (std::uint32_t i = 0; i < count; ++i) {
      regions.push_back({i % 2 ? RegionKind::Geometry : RegionKind::Texture, dim(rng), dim(rng),
                         Rotation::R0, i});
    }
    const auto plan = planPacking(regions, 64, rng() % 2 == 0);
    if (plan.placements.size() < 2 && rng() % 2 == 0) {
      continue;
    }
    SequenceParams sps;
    sps.ctu_size_log2 = 6;
    sps.pic_width_luma = plan.composite_w;
    sps.pic_height_luma = plan.composite_h;
    sps.subpic_id_len = 4;
    for (const auto &p : plan.placements) {
      sps.subpics.push_back({p.ctu_x, p.ctu_y, p.ctu_w, p.ctu_h, true, p.subpic_id});
    }
    auto [pi, sei] = bindPlan(plan);
    if (!validatePackedRegions(pi, sei, sps)) {
      return {false, "unmutated signalling rejected"};
    }
    const auto n = pi.regions.size();
    const auto i = rng() % n;
    const auto fresh = 1000 + static_cast<std::uint32_t>(rng() % 1000);
    switch (n < 2 ? rng() % 2 : rng() % 4) {
    case 0:
      pi.regions[i].region_id = fresh;
      break;
    case 1:
      sei.entries[i].region_id = fresh;
      break;
    case 2:
      std::swap(pi.regions[i].region_id, pi.regions[(i + 1 + rng() % (n - 1)) % n].region_id);
      break;
    default:
      std::swap(sei.entries[i].region_id, sei.entries[(i + 1 + rng() % (n - 1)) % n].region_id);
      break;
    }
    const auto wireVps = decodeVps(encodeVps({0, pi}));
    const auto wireSei = decodePackedRegionsSei(decodeSei(encodeSei(encodePackedRegionsSei(sei))));
    caught += validatePackedRegions(*wireVps.packing, wireSei, sps) ? 0 : 1;
    ++mutations;
  }

  std::ostringstream d;
  d << rejected << "/1000 non-VPS-first streams rejected, " << bijective
    << "/10000 random unit sequences round-trip, " << caught << "/" << mutations
    << " region-id mutations caught";
  return {rejected == 1000 && bijective == 10000 && caught == mutations, d.str()};
}

} // namespace

// An optional argument restricts the run to criteria whose name contains it.
int main(int argc, char **argv) {
  const std::string filter = argc > 1 ? argv[1] : "";
  Corpus corpus;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"merge-split-lossless", [&] { return mergeSplitLossless(corpus); }},
      {"bit-exact-serialization",
       [&] {
         if (corpus.streams.empty()) {
           mergeSplitLossless(corpus);
         }
         return bitExactSerialization(corpus);
       }},
      {"overhead-band", overheadBand},
      {"decoder-halving", decoderHalving},
      {"qp-ladder", qpLadder},
      {"bd-rate-sanity", bdRateSanity},
      {"packing-oracle", packingOracle},
      {"v3c-ordering", v3cOrdering},
  };
  int failed = 0;
  int ran = 0;
  for (const auto &[label, run] : criteria) {
    if (label.find(filter) == std::string::npos) {
      continue;
    }
    ++ran;
    Outcome outcome;
    try {
      outcome = run();
    } catch (const std::exception &e) {
      outcome = {false, std::string{"exception: "} + e.what()};
    }
    std::printf("%s %-24s %s\n", outcome.pass ? "PASS" : "FAIL", label.c_str(), outcome.detail.c_str());
    std::fflush(stdout);
    failed += outcome.pass ? 0 : 1;
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 && ran > 0 ? 0 : 1;
}
