// subpack: command-line front end for planning, merging, splitting, muxing and
// inspecting packed subpicture bitstreams.

#include "subpack/subpack.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace subpack;

namespace {

auto readFile(const std::string &path) -> Bytes {
  std::ifstream in{path, std::ios::binary};
  if (!in) {
    fail(Errc::Io, "cannot open " + path);
  }
  return {std::istreambuf_iterator<char>{in}, std::istreambuf_iterator<char>{}};
}

auto readText(const std::string &path) -> std::string {
  const auto bytes = readFile(path);
  return {bytes.begin(), bytes.end()};
}

void writeFile(const std::string &path, ByteSpan data) {
  std::ofstream out{path, std::ios::binary};
  if (!out) {
    fail(Errc::Io, "cannot open " + path + " for writing");
  }
  out.write(reinterpret_cast<const char *>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) {
    fail(Errc::Io, "write to " + path + " failed");
  }
  spdlog::info("wrote {} bytes to {}", data.size(), path);
}

// Text goes to --out when given, else stdout.
void emitText(const std::string &out, const std::string &text) {
  if (out.empty()) {
    std::cout << text;
    return;
  }
  writeFile(out, ByteSpan{reinterpret_cast<const std::uint8_t *>(text.data()), text.size()});
}

// SUBPIC_PACK_LOG takes a spdlog level name or 0..3 (warn, info, debug, trace).
void configureLogging() {
  auto logger = spdlog::stderr_logger_st("subpack");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  const char *env = std::getenv("SUBPIC_PACK_LOG");
  if (env == nullptr || *env == '\0') {
    return;
  }
  const std::string value{env};
  if (value.size() == 1 && value[0] >= '0' && value[0] <= '3') {
    static constexpr spdlog::level::level_enum levels[] = {
        spdlog::level::warn, spdlog::level::info, spdlog::level::debug, spdlog::level::trace};
    spdlog::set_level(levels[value[0] - '0']);
    return;
  }
  spdlog::set_level(spdlog::level::from_str(value));
}

struct Options {
  std::uint32_t ctu{128};
  bool rotate{false};
  std::uint64_t seed{0};
  std::uint32_t irap_bytes{236};
  std::uint32_t inter_bytes{14};
  std::uint32_t frames{17};
  std::string sequence;
  std::string out;
};

auto codecConfig(const Options &o) -> MockCodecConfig {
  return {o.seed, o.irap_bytes, o.inter_bytes, o.frames};
}

auto isAnnexB(ByteSpan data) -> bool {
  return (data.size() >= 3 && data[0] == 0 && data[1] == 0 && data[2] == 1) ||
         (data.size() >= 4 && data[0] == 0 && data[1] == 0 && data[2] == 0 && data[3] == 1);
}

// ---- inspect

void dumpTrace(std::ostream &os, const SyntaxTrace &trace, const std::string &indent) {
  for (const auto &e : trace) {
    os << indent << "@" << std::setw(5) << e.bit_offset << "  " << std::left << std::setw(28)
       << e.name << std::right << std::setw(3) << e.bit_length << " bits = " << e.value << '\n';
  }
}

void inspectAnnexB(std::ostream &os, ByteSpan data, const std::string &indent) {
  const auto units = parseBitstream(data);
  std::optional<SequenceParams> sps;
  std::size_t offset = 0;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto &nal = units[i];
    os << indent << "NAL " << i << " at byte " << offset << ": " << name(nal.nal_type)
       << " layer_id=" << unsigned{nal.layer_id} << " temporal_id=" << unsigned{nal.temporal_id}
       << " rbsp_bytes=" << nal.rbsp.size() << '\n';
    offset += framedSize(nal, i == 0);
    SyntaxTrace trace;
    const auto sub = indent + "  ";
    switch (nal.nal_type) {
    case NalType::SPS:
      sps = decodeSps(nal, &trace);
      dumpTrace(os, trace, sub);
      break;
    case NalType::PPS:
      decodePps(nal, &trace);
      dumpTrace(os, trace, sub);
      break;
    case NalType::PREFIX_SEI: {
      const auto sei = decodeSei(nal, &trace);
      dumpTrace(os, trace, sub);
      if (sei.payload_type == packedRegionsSeiType) {
        SyntaxTrace inner;
        decodePackedRegionsSei(sei, &inner);
        os << sub << "packed-regions payload (bit offsets within the payload):\n";
        dumpTrace(os, inner, sub + "  ");
      }
      break;
    }
    default:
      if (!sps) {
        os << sub << "(slice before any SPS; header not decoded)\n";
        break;
      }
      {
        const auto slice = decodeSlice(nal, sps->subpic_id_len, &trace);
        dumpTrace(os, trace, sub);
        os << sub << "payload " << slice.payload.size() << " bytes\n";
      }
      break;
    }
  }
}

void inspectV3c(std::ostream &os, ByteSpan data) {
  const auto units = readSampleStream(data);
  os << "V3C sample stream: size precision " << ((data[0] >> 5) + 1) << " bytes, " << units.size()
     << " units\n";
  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto &u = units[i];
    os << "unit " << i << ": " << name(u.unit_type) << " parameter_set_id="
       << unsigned{u.parameter_set_id} << " atlas_id=" << unsigned{u.atlas_id}
       << " payload_bytes=" << u.payload.size() << '\n';
    if (u.unit_type == V3cUnitType::VPS) {
      SyntaxTrace trace;
      decodeVps(u.payload, &trace);
      dumpTrace(os, trace, "  ");
    } else if (isAnnexB(u.payload)) {
      inspectAnnexB(os, u.payload, "  ");
    }
  }
}

auto inspect(const std::string &path) -> std::string {
  const auto data = readFile(path);
  if (data.empty()) {
    fail(Errc::Malformed, path + " is empty");
  }
  std::ostringstream os;
  if (isAnnexB(data)) {
    os << "Annex-B bitstream, " << data.size() << " bytes\n";
    inspectAnnexB(os, data, "");
  } else {
    inspectV3c(os, data);
  }
  return os.str();
}

// ---- simulate

auto jsonUint(const nlohmann::json &j, const char *key, std::uint32_t fallback) -> std::uint32_t {
  if (!j.contains(key)) {
    return fallback;
  }
  const auto v = j.at(key).get<std::int64_t>();
  if (v < 0 || v > std::numeric_limits<std::uint32_t>::max()) {
    fail(Errc::ValueOutOfRange, std::string{"config field '"} + key + "' out of range");
  }
  return static_cast<std::uint32_t>(v);
}

// A source reads a raw file when "file" is set, else generates a test pattern.
auto atlasSource(const nlohmann::json &j, RegionKind kind, std::uint32_t regionId,
                 std::uint32_t salt, const fs::path &base) -> AtlasSource {
  const auto w = jsonUint(j, "width", 0);
  const auto h = jsonUint(j, "height", 0);
  AtlasSource src{{kind, w, h, Rotation::R0, regionId}, {}};
  if (j.contains("file")) {
    auto path = fs::path{j.at("file").get<std::string>()};
    if (path.is_relative()) {
      path = base / path;
    }
    auto frames = std::make_shared<std::vector<YuvFrame>>(readRawFrames(path.string(), w, h));
    src.frames = [frames, path](std::uint32_t f) {
      if (f >= frames->size()) {
        fail(Errc::MissingReference, path.string() + " has no frame " + std::to_string(f));
      }
      return (*frames)[f];
    };
  } else {
    src.frames = syntheticAtlas(w, h, salt);
  }
  return src;
}

struct SimulateArgs {
  std::string config;
  bool csv{false};
  bool sequential{false};
};

auto simulate(const SimulateArgs &args, Options o, const std::vector<std::string> &explicitFlags)
    -> std::string {
  const auto j = nlohmann::json::parse(readText(args.config), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    fail(Errc::Malformed, args.config + " is not a JSON object");
  }
  const auto isSet = [&](const std::string &flag) {
    return std::find(explicitFlags.begin(), explicitFlags.end(), flag) != explicitFlags.end();
  };
  // Command-line flags override the config file.
  if (!isSet("--frames")) {
    o.frames = jsonUint(j, "frames", o.frames);
  }
  if (!isSet("--ctu")) {
    o.ctu = jsonUint(j, "ctu", o.ctu);
  }
  if (!isSet("--rotate") && j.contains("rotate")) {
    o.rotate = j.at("rotate").get<bool>();
  }
  if (!isSet("--seed") && j.contains("seed")) {
    o.seed = j.at("seed").get<std::uint64_t>();
  }
  if (!isSet("--irap-bytes")) {
    o.irap_bytes = jsonUint(j, "irap_bytes", o.irap_bytes);
  }
  if (!isSet("--inter-bytes")) {
    o.inter_bytes = jsonUint(j, "inter_bytes", o.inter_bytes);
  }

  PipelineConfig cfg;
  cfg.codec = codecConfig(o);
  cfg.codec.intra_period = jsonUint(j, "intra_period", o.frames);
  cfg.parallel = !args.sequential;
  if (j.contains("bitrate_bps")) {
    cfg.content_rate = RateTarget{j.at("bitrate_bps").get<double>(), j.value("fps", 30.0)};
  }

  const fs::path base = fs::path{args.config}.parent_path();
  std::vector<AtlasPair> pairs;
  if (!j.contains("pairs") || !j.at("pairs").is_array() || j.at("pairs").empty()) {
    fail(Errc::EmptyInput, "config needs a non-empty 'pairs' array");
  }
  std::uint32_t salt = 0;
  for (const auto &pj : j.at("pairs")) {
    AtlasPair pair;
    pair.texture = atlasSource(pj.at("texture"), RegionKind::Texture, 0, salt++, base);
    pair.geometry = atlasSource(pj.at("geometry"), RegionKind::Geometry, 1, salt++, base);
    pair.frame_count = jsonUint(pj, "frames", o.frames);
    pairs.push_back(std::move(pair));
  }
  spdlog::info("simulating {} pair(s), CTU {}, rotation {}", pairs.size(), o.ctu,
               o.rotate ? "on" : "off");
  const auto anchor = runAnchor(pairs, cfg, o.ctu, o.rotate);
  const auto packed = runPacked(pairs, cfg, o.ctu, o.rotate);
  const auto label = j.value("label", o.sequence.empty() ? std::string{"simulation"} : o.sequence);
  const auto c = compare(anchor, packed);
  return args.csv ? comparisonCsvHeader() + formatComparisonCsv(label, c) : formatComparison(label, c);
}

auto formatBdRate(double percent) -> std::string {
  if (std::abs(percent) < 5e-5) {
    percent = 0.0; // no "-0.0000%"
  }
  std::ostringstream os;
  os << "BD-rate: " << std::fixed << std::setprecision(4) << percent << "%\n";
  return os.str();
}

} // namespace

int main(int argc, char **argv) {
  configureLogging();

  CLI::App app{"Pack texture and geometry atlases into one subpicture bitstream, and take it apart again."};
  app.require_subcommand(1);
  Options o;

  const auto addCtu = [&](CLI::App *cmd) {
    cmd->add_option("--ctu", o.ctu, "CTU size in luma samples: 32, 64 or 128")
        ->capture_default_str()
        ->check(CLI::IsMember({32, 64, 128}));
  };
  const auto addCodec = [&](CLI::App *cmd) {
    cmd->add_option("--seed", o.seed, "Mock codec payload seed")->capture_default_str();
    cmd->add_option("--irap-bytes", o.irap_bytes, "Slice payload bytes of an IRAP frame")
        ->capture_default_str()
        ->check(CLI::Range(1U, 1U << 24));
    cmd->add_option("--inter-bytes", o.inter_bytes, "Slice payload bytes of an inter frame")
        ->capture_default_str()
        ->check(CLI::Range(1U, 1U << 24));
    cmd->add_option("--frames", o.frames, "Frames per sequence; also the intra period")
        ->capture_default_str()
        ->check(CLI::Range(1U, 1U << 20));
  };
  const auto addOut = [&](CLI::App *cmd, bool required, const std::string &what) {
    auto *opt = cmd->add_option("--out,-o", o.out, what);
    if (required) {
      opt->required();
    }
  };

  std::string regionsPath;
  auto *plan = app.add_subcommand("plan", "Place regions on a CTU-aligned composite picture");
  plan->add_option("regions", regionsPath, "Region list: '<id> <kind> <width> <height>' per line")
      ->required()
      ->check(CLI::ExistingFile);
  addCtu(plan);
  plan->add_flag("--rotate", o.rotate, "Let regions turn by 90 degrees");
  addOut(plan, false, "Plan file (default: stdout)");

  std::string planPath;
  std::vector<std::string> inputs;
  auto *mergeCmd = app.add_subcommand("merge", "Merge one single-subpicture bitstream per placement");
  mergeCmd->add_option("plan", planPath, "Plan file")->required()->check(CLI::ExistingFile);
  mergeCmd->add_option("inputs", inputs, "Sub-bitstreams, one per placement, any order")
      ->required()
      ->check(CLI::ExistingFile);
  bool noSei = false;
  mergeCmd->add_flag("--no-sei", noSei, "Omit the packed-regions SEI");
  addOut(mergeCmd, true, "Merged bitstream");

  std::string mergedPath;
  std::uint32_t subpicId = 0;
  auto *splitCmd = app.add_subcommand("split", "Extract one subpicture as a standalone bitstream");
  splitCmd->add_option("merged", mergedPath, "Merged bitstream")->required()->check(CLI::ExistingFile);
  splitCmd->add_option("--subpic-id", subpicId, "Subpicture to extract")->required();
  addOut(splitCmd, true, "Sub-bitstream");

  std::string videoPath;
  std::string atlasPath;
  std::string muxPlanPath;
  unsigned precision = 0;
  auto *muxCmd = app.add_subcommand("mux", "Wrap a packed bitstream in a V3C sample stream");
  muxCmd->add_option("video", videoPath, "Packed video bitstream")->required()->check(CLI::ExistingFile);
  muxCmd->add_option("--plan", muxPlanPath, "Plan whose regions go into the VPS")->check(CLI::ExistingFile);
  muxCmd->add_option("--atlas", atlasPath, "Atlas data payload")->required()->check(CLI::ExistingFile);
  muxCmd->add_option("--precision", precision, "Unit size field bytes, 0 picks the smallest")
      ->capture_default_str()
      ->check(CLI::Range(0U, 8U));
  addOut(muxCmd, true, "V3C sample stream");

  std::string streamPath;
  auto *demuxCmd = app.add_subcommand("demux", "Write each V3C unit payload to a directory");
  demuxCmd->add_option("stream", streamPath, "V3C sample stream")->required()->check(CLI::ExistingFile);
  addOut(demuxCmd, true, "Output directory");

  std::string inspectPath;
  auto *inspectCmd = app.add_subcommand("inspect", "Print every parsed field with its bit offset");
  inspectCmd->add_option("file", inspectPath, "Annex-B bitstream or V3C sample stream")
      ->required()
      ->check(CLI::ExistingFile);
  addOut(inspectCmd, false, "Report file (default: stdout)");

  auto *ladderCmd = app.add_subcommand("qp-ladder", "Texture and derived geometry QPs of a test sequence");
  ladderCmd->add_option("--sequence", o.sequence, "ClassroomVideo, Frog or Chess (default: all)")
      ->check(CLI::IsMember({"ClassroomVideo", "Frog", "Chess"}));
  addOut(ladderCmd, false, "Table file (default: stdout)");

  std::string anchorCsv;
  std::string testCsv;
  auto *bdCmd = app.add_subcommand("bdrate", "Bjontegaard delta rate of test over anchor");
  bdCmd->add_option("anchor", anchorCsv, "Anchor 'rate_bps,quality' file")->required()->check(CLI::ExistingFile);
  bdCmd->add_option("test", testCsv, "Test 'rate_bps,quality' file")->required()->check(CLI::ExistingFile);
  addOut(bdCmd, false, "Result file (default: stdout)");

  SimulateArgs sim;
  auto *simCmd = app.add_subcommand("simulate", "Run anchor and packed pipelines and compare them");
  simCmd->add_option("config", sim.config, "JSON pair configuration")->required()->check(CLI::ExistingFile);
  addCtu(simCmd);
  simCmd->add_flag("--rotate", o.rotate, "Let regions turn by 90 degrees");
  addCodec(simCmd);
  simCmd->add_option("--sequence", o.sequence, "Report label when the config has none");
  simCmd->add_flag("--csv", sim.csv, "Comma-separated output");
  simCmd->add_flag("--sequential", sim.sequential, "Process pairs one at a time");
  addOut(simCmd, false, "Report file (default: stdout)");

  std::string encodePlanPath;
  auto *encodeCmd = app.add_subcommand("encode", "Mock-encode one sub-bitstream per placement of a plan");
  encodeCmd->add_option("plan", encodePlanPath, "Plan file")->required()->check(CLI::ExistingFile);
  addCodec(encodeCmd);
  addOut(encodeCmd, true, "Output directory; files are named subpic_<id>.bit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    std::cerr << "error: Usage: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*plan) {
      const auto regions = parseRegions(readText(regionsPath));
      const auto p = planPacking(regions, o.ctu, o.rotate);
      spdlog::info("composite {}x{}, {} placements, filler area {}", p.composite_w, p.composite_h,
                   p.placements.size(), fillerArea(p));
      emitText(o.out, formatPlan(p));
    } else if (*mergeCmd) {
      const auto p = parsePlan(readText(planPath));
      std::vector<SubBitstream> subs;
      for (const auto &path : inputs) {
        subs.push_back(readAnnexB(readFile(path)));
      }
      auto merged = merge(subs, p);
      if (!noSei) {
        merged.sei = {encodePackedRegionsSei(bindPlan(p).second)};
      }
      writeFile(o.out, writeAnnexB(merged));
    } else if (*splitCmd) {
      writeFile(o.out, writeAnnexB(split(readAnnexB(readFile(mergedPath)), subpicId)));
    } else if (*muxCmd) {
      V3cParameterSet vps;
      if (!muxPlanPath.empty()) {
        vps.packing = bindPlan(parsePlan(readText(muxPlanPath))).first;
      }
      const auto video = readFile(videoPath);
      readAnnexB(video); // refuse to wrap something that does not parse
      writeFile(o.out, mux(vps, readFile(atlasPath), video, precision));
    } else if (*demuxCmd) {
      const auto d = demux(readFile(streamPath));
      fs::create_directories(o.out);
      std::ostringstream listing;
      for (std::size_t i = 0; i < d.units.size(); ++i) {
        const auto &u = d.units[i];
        std::ostringstream file;
        file << std::setw(3) << std::setfill('0') << i << '_' << name(u.unit_type) << ".bin";
        writeFile((fs::path{o.out} / file.str()).string(), u.payload);
        listing << file.str() << ' ' << u.payload.size() << '\n';
      }
      std::cout << listing.str();
    } else if (*inspectCmd) {
      emitText(o.out, inspect(inspectPath));
    } else if (*ladderCmd) {
      std::string text;
      for (const auto s : allCtcSequences) {
        if (o.sequence.empty() || o.sequence == name(s)) {
          text += formatLadder(ctcLadder(s));
        }
      }
      emitText(o.out, text);
    } else if (*bdCmd) {
      const auto anchor = parseRdCsv(readText(anchorCsv));
      const auto test = parseRdCsv(readText(testCsv));
      emitText(o.out, formatBdRate(bdRate(anchor, test)));
    } else if (*simCmd) {
      std::vector<std::string> explicitFlags;
      for (const auto *opt : simCmd->get_options()) {
        if (opt->count() > 0) {
          explicitFlags.push_back(opt->get_name());
        }
      }
      emitText(o.out, simulate(sim, o, explicitFlags));
    } else if (*encodeCmd) {
      const auto p = parsePlan(readText(encodePlanPath));
      fs::create_directories(o.out);
      const auto idLen = std::max<std::uint32_t>(
          1, static_cast<std::uint32_t>(std::bit_width(p.placements.size() - 1)));
      const auto cfg = codecConfig(o);
      for (const auto &pl : p.placements) {
        const EncodeParams params{pl.ctu_w * p.ctu_size, pl.ctu_h * p.ctu_size,
                                  static_cast<std::uint32_t>(std::countr_zero(p.ctu_size)), idLen};
        const auto sub = mockEncode(o.frames, pl.subpic_id, cfg, params);
        writeFile((fs::path{o.out} / ("subpic_" + std::to_string(pl.subpic_id) + ".bit")).string(),
                  writeAnnexB(sub));
      }
    }
  } catch (const Error &e) {
    std::cerr << "error: " << name(e.code()) << ": " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception &e) {
    std::cerr << "error: Malformed: " << e.what() << '\n';
    return 1;
  } catch (const std::exception &e) {
    std::cerr << "error: Io: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
