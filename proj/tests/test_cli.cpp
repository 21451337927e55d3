#include "subpack/subpack.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

namespace fs = std::filesystem;
using namespace subpack;

namespace {

struct Run {
  int status{};
  std::string out; // stdout and stderr together
};

auto run(const std::string &args, const std::string &env = "") -> Run {
  const auto command = env + " " + std::string{SUBPACK_CLI} + " " + args + " 2>&1";
  std::unique_ptr<FILE, decltype(&pclose)> pipe{popen(command.c_str(), "r"), pclose};
  Run r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe.get())) > 0) {
    r.out.append(buf.data(), n);
  }
  const auto status = pclose(pipe.release());
  r.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

auto data(const std::string &name) -> std::string { return std::string{SUBPACK_TEST_DATA} + "/" + name; }

auto slurp(const fs::path &p) -> Bytes {
  std::ifstream in{p, std::ios::binary};
  return {std::istreambuf_iterator<char>{in}, std::istreambuf_iterator<char>{}};
}

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    const auto *info = ::testing::UnitTest::GetInstance()->current_test_info();
    m_dir = fs::temp_directory_path() / ("subpack_cli_" + std::string{info->name()});
    fs::remove_all(m_dir);
    fs::create_directories(m_dir);
  }
  void TearDown() override { fs::remove_all(m_dir); }

  auto path(const std::string &name) const -> std::string { return (m_dir / name).string(); }

  // plan -> encode -> merge, leaving plan.txt, enc/ and merged.bit behind.
  void buildMerged(const std::string &extra = "") {
    ASSERT_EQ(run("plan " + data("regions.txt") + " --ctu 64 " + extra + " -o " + path("plan.txt")).status, 0);
    ASSERT_EQ(run("encode " + path("plan.txt") + " --seed 11 --frames 5 -o " + path("enc")).status, 0);
    std::string inputs;
    for (const auto &e : fs::directory_iterator{m_dir / "enc"}) {
      inputs += " " + e.path().string();
    }
    ASSERT_EQ(run("merge " + path("plan.txt") + inputs + " -o " + path("merged.bit")).status, 0);
  }

  fs::path m_dir;
};

} // namespace

TEST_F(Cli, QpLadderChessGeometryRow) {
  const auto r = run("qp-ladder --sequence Chess");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("Chess geometry               1     1     6    11    16"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("Chess texture               11    18    25    31    38"), std::string::npos);
  EXPECT_EQ(r.out.find("Frog"), std::string::npos);
}

TEST_F(Cli, QpLadderAllSequences) {
  const auto r = run("qp-ladder");
  ASSERT_EQ(r.status, 0);
  for (const auto s : allCtcSequences) {
    EXPECT_NE(r.out.find(formatLadder(ctcLadder(s))), std::string::npos);
  }
}

TEST_F(Cli, PlanMatchesLibrary) {
  const auto r = run("plan " + data("regions.txt") + " --rotate");
  ASSERT_EQ(r.status, 0) << r.out;
  const std::vector<RegionSpec> regions{{RegionKind::Texture, 2048, 1280, Rotation::R0, 0},
                                        {RegionKind::Geometry, 1024, 640, Rotation::R0, 1}};
  EXPECT_EQ(r.out, formatPlan(planPacking(regions, 128, true)));
  EXPECT_EQ(parsePlan(r.out), planPacking(regions, 128, true));
}

TEST_F(Cli, SplitReproducesEveryInput) {
  buildMerged();
  const auto planBytes = slurp(path("plan.txt"));
  const auto plan = parsePlan({planBytes.begin(), planBytes.end()});
  for (const auto &p : plan.placements) {
    const auto id = std::to_string(p.subpic_id);
    const auto out = path("split_" + id + ".bit");
    ASSERT_EQ(run("split " + path("merged.bit") + " --subpic-id " + id + " -o " + out).status, 0);
    const auto original = slurp(m_dir / "enc" / ("subpic_" + id + ".bit"));
    EXPECT_EQ(slurp(out), original) << "subpic " << id;
    EXPECT_EQ(vclPayloadBytes(readAnnexB(slurp(out))), vclPayloadBytes(readAnnexB(original)));
  }
}

TEST_F(Cli, BdRateIdenticalFilesIsZero) {
  const auto r = run("bdrate " + data("rd_anchor.csv") + " " + data("rd_anchor.csv"));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(r.out, "BD-rate: 0.0000%\n");
}

TEST_F(Cli, BdRateMatchesLibrary) {
  const auto r = run("bdrate " + data("rd_anchor.csv") + " " + data("rd_test.csv"));
  ASSERT_EQ(r.status, 0) << r.out;
  const auto read = [](const std::string &p) {
    const auto b = slurp(p);
    return parseRdCsv({b.begin(), b.end()});
  };
  std::ostringstream expected;
  expected << "BD-rate: " << std::fixed << std::setprecision(4)
           << bdRate(read(data("rd_anchor.csv")), read(data("rd_test.csv"))) << "%\n";
  EXPECT_EQ(r.out, expected.str());
  EXPECT_LT(bdRate(read(data("rd_anchor.csv")), read(data("rd_test.csv"))), 0.0);
}

TEST_F(Cli, MuxDemuxInspect) {
  buildMerged("--rotate");
  std::ofstream{path("atlas.bin"), std::ios::binary} << "atlas data";
  ASSERT_EQ(run("mux " + path("merged.bit") + " --plan " + path("plan.txt") + " --atlas " +
                path("atlas.bin") + " -o " + path("v3c.bin"))
                .status,
            0);
  const auto d = run("demux " + path("v3c.bin") + " -o " + path("units"));
  ASSERT_EQ(d.status, 0) << d.out;
  EXPECT_EQ(slurp(m_dir / "units" / "002_V3C_PVD.bin"), slurp(path("merged.bit")));
  EXPECT_EQ(slurp(m_dir / "units" / "001_V3C_AD.bin"), slurp(path("atlas.bin")));

  const auto before = slurp(path("v3c.bin"));
  const auto report = run("inspect " + path("v3c.bin"));
  ASSERT_EQ(report.status, 0) << report.out;
  EXPECT_EQ(slurp(path("v3c.bin")), before);
  for (const auto *field : {"packing_present_flag", "region_rotation", "pic_width_luma",
                            "subpic_ctu_w_minus1", "payload_type", "num_entries", "slice_subpic_id"}) {
    EXPECT_NE(report.out.find(field), std::string::npos) << field;
  }
  EXPECT_NE(report.out.find("@    0  vps_id"), std::string::npos);
}

TEST_F(Cli, InspectEverySubBitstream) {
  buildMerged();
  for (const auto &e : fs::directory_iterator{m_dir / "enc"}) {
    const auto r = run("inspect " + e.path().string());
    EXPECT_EQ(r.status, 0) << r.out;
    EXPECT_NE(r.out.find("NAL 0 at byte 0: SPS"), std::string::npos);
  }
}

TEST_F(Cli, Idempotent) {
  const std::vector<std::string> commands{
      "plan " + data("regions.txt") + " --rotate --ctu 64",
      "qp-ladder",
      "bdrate " + data("rd_anchor.csv") + " " + data("rd_test.csv"),
      "simulate " + data("pair.json") + " --csv",
  };
  for (const auto &c : commands) {
    const auto a = run(c);
    const auto b = run(c);
    EXPECT_EQ(a.status, 0) << c << "\n" << a.out;
    EXPECT_EQ(a.out, b.out) << c;
  }
  buildMerged();
  const auto first = slurp(path("merged.bit"));
  buildMerged();
  EXPECT_EQ(slurp(path("merged.bit")), first);
}

TEST_F(Cli, SimulateReport) {
  const auto r = run("simulate " + data("pair.json") + " --csv");
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(r.out.substr(0, r.out.find('\n') + 1), comparisonCsvHeader());
  EXPECT_NE(r.out.find("ClassroomVideo,2,1,2,460,"), std::string::npos) << r.out;

  const auto text = run("simulate " + data("pair.json") + " --sequential");
  ASSERT_EQ(text.status, 0);
  EXPECT_NE(text.out.find("byte proxy"), std::string::npos);
}

TEST_F(Cli, ErrorsCarryCode) {
  const auto missing = run("split " + data("regions.txt") + " --subpic-id 0 -o " + path("x.bit"));
  EXPECT_NE(missing.status, 0);
  EXPECT_EQ(missing.out.rfind("error: Malformed: ", 0), 0U) << missing.out;

  buildMerged();
  const auto unknown = run("split " + path("merged.bit") + " --subpic-id 9 -o " + path("x.bit"));
  EXPECT_NE(unknown.status, 0);
  EXPECT_EQ(unknown.out.rfind("error: UnknownSubpicId: ", 0), 0U) << unknown.out;
  EXPECT_FALSE(fs::exists(path("x.bit")));

  const auto usage = run("plan --ctu 48 " + data("regions.txt"));
  EXPECT_NE(usage.status, 0);
  EXPECT_EQ(usage.out.rfind("error: Usage: ", 0), 0U) << usage.out;

  const auto absent = run("inspect " + path("does_not_exist.bit"));
  EXPECT_NE(absent.status, 0);
  EXPECT_EQ(absent.out.rfind("error: ", 0), 0U);
}

TEST_F(Cli, LogLevelFromEnvironment) {
  EXPECT_EQ(run("plan " + data("regions.txt")).out.find("[info]"), std::string::npos);
  EXPECT_NE(run("plan " + data("regions.txt"), "SUBPIC_PACK_LOG=info").out.find("[info] composite"),
            std::string::npos);
  EXPECT_NE(run("plan " + data("regions.txt"), "SUBPIC_PACK_LOG=1").out.find("[info] composite"),
            std::string::npos);
}
