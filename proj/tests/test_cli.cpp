#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "dmaccel/csv.hpp"
#include "dmaccel/funcsim.hpp"
#include "dmaccel/netir.hpp"
#include "support.hpp"

using namespace dmaccel;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string cfg(const std::string& name) { return support::config_path(name); }

std::string temp(const std::string& name, const std::string& content = "") {
  const auto p = std::filesystem::temp_directory_path() / ("dmaccel_cli_" + name);
  if (!content.empty()) std::ofstream(p) << content;
  return p.string();
}

const char* kOneLayer = R"({"name": "one", "input_shape": {"c": 32, "h": 16, "w": 16},
  "layers": [{"type": "conv", "ic": 32, "oc": 64, "kx": 3, "ky": 3, "pad": 1}]})";

}  // namespace

TEST(Cli, ReportCostOneLayer) {
  const auto r = run({"report-cost", temp("one.json", kOneLayer)});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = parse_csv(r.out);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.at(0, "macs_per_input_pixel"), "18432");
  EXPECT_EQ(t.at(0, "weight_bytes"), "18432");
  EXPECT_EQ(t.at(1, "layer"), "total");
}

TEST(Cli, ReportCostContextModule) {
  for (const auto& [file, macs, bytes] :
       {std::tuple{"context_module.json", "708.75", "103680"},
        std::tuple{"context_module_ddc.json", "119.4375", "17472"}}) {
    const auto r = run({"report-cost", cfg(file)});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto t = parse_csv(r.out);
    const auto last = t.rows.size() - 1;
    EXPECT_EQ(t.at(last, "macs_per_input_pixel"), macs);
    EXPECT_EQ(t.at(last, "weight_bytes"), bytes);
  }
}

TEST(Cli, ReportTimeExample) {
  HardwareConfig hw = proposed_profile();
  hw.in_h = hw.in_w = 18;
  const auto hw_path = temp("hw.json", serialize_hardware(hw));
  const auto r = run({"--hw", hw_path, "report-time", temp("one.json", kOneLayer)});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = parse_csv(r.out);
  EXPECT_EQ(t.at(0, "t_mem"), "5376");
  EXPECT_EQ(t.at(0, "t_comp"), "9216");
  EXPECT_EQ(t.at(0, "bound"), "compute");
  EXPECT_EQ(t.at(1, "total"), "9216");
  const auto four = run({"--hw", hw_path, "report-time", temp("one.json", kOneLayer), "--frame", "32x32"});
  EXPECT_EQ(parse_csv(four.out).at(1, "total"), "36864");
  EXPECT_NE(r.out.find("post-processing"), std::string::npos);
}

TEST(Cli, ReportTimeEmptyNetwork) {
  const auto r = run({"report-time", temp("empty.json", R"({"input_shape": {"c": 3, "h": 8, "w": 8}, "layers": []})")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(parse_csv(r.out).at(0, "total"), "0");
}

TEST(Cli, ReportTimeDdcRatio) {
  const auto r = run({"report-time", cfg("retinaface_mnet025.json"), "--ddc", "--rules", "1,2,3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = parse_csv(r.out);
  EXPECT_LT(std::stoll(t.at(1, "total_cycles")), std::stoll(t.at(0, "total_cycles")));
  EXPECT_EQ(t.at(2, "network"), "ratio");
  EXPECT_LT(std::stod(t.at(2, "total_cycles")), 1.0);
  EXPECT_EQ(t.at(2, "fps"), "0.83");
}

TEST(Cli, CompareDefaultsAndEmptyRange) {
  const auto r = run({"compare", "--channels", "64,128"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = parse_csv(r.out);
  EXPECT_EQ(t.rows.size(), 8u);
  EXPECT_NE(r.out.find("approximate"), std::string::npos);
  const auto empty = run({"compare", "--channels", "64:32:16"});
  EXPECT_EQ(empty.code, 1);
  EXPECT_FALSE(empty.err.empty());
}

TEST(Cli, SimulateInlineLayer) {
  const auto r = run({"simulate", "--spec", "depthwise:16:16:3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = parse_csv(r.out);
  EXPECT_EQ(t.rows.size(), 8u);
  EXPECT_NE(r.out.find("total_cycles=840"), std::string::npos);
  EXPECT_NE(r.out.find("# verdict consistent"), std::string::npos);
}

TEST(Cli, SimulateNetworkLayer) {
  const auto r = run({"simulate", cfg("fig1_block.json"), "--layer", "2", "--blocks", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto bad = run({"simulate", cfg("fig1_block.json"), "--layer", "1"});
  EXPECT_EQ(bad.code, 1);
  const auto model = run({"simulate", cfg("context_module.json"), "--path", "l16_ctx7", "--layer", "4"});
  EXPECT_EQ(model.code, 0) << model.err;
}

TEST(Cli, RewriteWritesDocumentAndDeltas) {
  const auto out = temp("rewritten.json");
  const auto r = run({"--out", out, "rewrite", cfg("context_module.json"), "--rules", "1,2,3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = parse_csv(r.out);
  EXPECT_EQ(t.at(0, "metric"), "macs_per_input_pixel");
  EXPECT_EQ(t.at(0, "after"), "119.4375");
  EXPECT_EQ(t.at(1, "after"), "17472");
  for (std::size_t i = 2; i < t.rows.size(); ++i) EXPECT_EQ(t.at(i, "change"), "same");
  EXPECT_EQ(load_workload(out), load_workload(cfg("context_module_ddc.json")));
  std::filesystem::remove(out);
}

TEST(Cli, RewriteRejectsOverlappingRules) {
  const auto r = run({"rewrite", cfg("context_module.json"), "--rules", "2,2:2"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("both match"), std::string::npos);
}

TEST(Cli, CheckPassesAndCatchesFault) {
  const auto ok = run({"check", cfg("fig1_block.json"), "--seed", "1"});
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_EQ(ok.out.rfind("pass", 0), 0u);
  const auto bad = run({"check", cfg("fig1_block.json"), "--inject-fault", "2,5,3,4"});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.out.find("layer 2 channel 5 y 3 x 4"), std::string::npos);
}

TEST(Cli, CheckIsDeterministic) {
  const auto a = temp("a.qt8"), b = temp("b.qt8");
  ASSERT_EQ(run({"--seed", "7", "--out", a, "check", cfg("fig1_block.json")}).code, 0);
  ASSERT_EQ(run({"--seed", "7", "--out", b, "check", cfg("fig1_block.json")}).code, 0);
  EXPECT_EQ(read_tensor(a), read_tensor(b));
  std::filesystem::remove(a);
  std::filesystem::remove(b);
}

TEST(Cli, ReportsAreDeterministic) {
  const std::vector<std::string> args{"--format", "text", "report-time", cfg("mobilenet_v1_025.json")};
  EXPECT_EQ(run(args).out, run(args).out);
}

TEST(Cli, ErrorsAndUsage) {
  const auto parse = run({"report-cost", temp("bad.json", "{\n  \"layers\": [,]\n}")});
  EXPECT_EQ(parse.code, 1);
  EXPECT_NE(parse.err.find("line 2"), std::string::npos);
  EXPECT_EQ(run({"report-cost", "/nonexistent.json"}).code, 1);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"--format", "xml", "compare"}).code, 1);
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({"simulate", "--spec", "depthwise:8:16:3"}).code, 1);
}
