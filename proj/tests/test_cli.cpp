#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <unistd.h>
#include <sys/wait.h>

#include <groupact/model_bank.hpp>

#include "bank_fixtures.hpp"

namespace fs = std::filesystem;
using namespace groupact;

namespace {

class Cli : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("groupact_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Exit status of the CLI; its stdout and stderr land in out_.
  int run(const std::string& args) {
    const std::string cmd = std::string("\"") + GROUPACT_CLI + "\" " + args + " > \"" + path("out.txt") + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    out_ = read(path("out.txt"));
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  }

  static std::string read(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  void random_model(const std::string& name) const {
    std::mt19937_64 rng(6);
    std::ofstream out(path(name));
    save_model(fixtures::random_bank(rng, 6, 2), out);
  }

  fs::path dir_;
  std::string out_;
};

const char* kTracks = "0,1,0,0,20,50\n1,1,1,0,20,50\n2,1,2,0,20,50\n3,1,3,0,20,50\n"
                      "0,2,30,0,20,50\n1,2,31,0,20,50\n2,2,32,0,20,50\n3,2,33,0,20,50\n";

} // namespace

TEST_F(Cli, HelpDescribesFormats) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_NE(out_.find("frame,person,x,y,w,h"), std::string::npos);
  EXPECT_NE(out_.find("Exit codes"), std::string::npos);
  EXPECT_EQ(run("detect --help"), 0);
  EXPECT_NE(out_.find("--gr"), std::string::npos);
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  random_model("m.json");
  write("t.csv", kTracks);
  EXPECT_EQ(run("detect --tracks " + path("t.csv") + " --model " + path("m.json") + " --out " + path("d") + " --gr q"), 1);
  EXPECT_EQ(run("detect --tracks " + path("t.csv") + " --model " + path("m.json") + " --out " + path("d") + " --tc 2"), 1);
  EXPECT_EQ(run("detect --tracks " + path("t.csv") + " --model " + path("m.json") + " --out " + path("d") + " --dt 9"), 1);
  EXPECT_EQ(run("detect --tracks " + path("t.csv") + " --model " + path("m.json") + " --out " + path("d") +
                " --strict --lenient"),
            1);
  EXPECT_FALSE(fs::exists(path("d")));
}

TEST_F(Cli, DataAndModelErrors) {
  random_model("m.json");
  write("t.csv", kTracks);
  EXPECT_EQ(run("detect --tracks " + path("missing.csv") + " --model " + path("m.json") + " --out " + path("d")), 2);
  write("bad.csv", std::string(kTracks) + "4,1,oops,0,20,50\n");
  EXPECT_EQ(run("detect --tracks " + path("bad.csv") + " --model " + path("m.json") + " --out " + path("d")), 2);
  EXPECT_NE(out_.find("line 9"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("d")));
  EXPECT_EQ(run("detect --lenient --tracks " + path("bad.csv") + " --model " + path("m.json") + " --out " + path("d")), 0);
  EXPECT_NE(out_.find("skipped line 9"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("d")));

  const auto model = read(path("m.json"));
  write("trunc.json", model.substr(0, model.size() / 3));
  EXPECT_EQ(run("detect --tracks " + path("t.csv") + " --model " + path("trunc.json") + " --out " + path("e")), 3);
  auto j = nlohmann::json::parse(model);
  j["format_version"] = "99";
  write("v99.json", j.dump());
  EXPECT_EQ(run("detect --tracks " + path("t.csv") + " --model " + path("v99.json") + " --out " + path("e")), 3);
  EXPECT_NE(out_.find("version"), std::string::npos);
  EXPECT_EQ(run("detect --tracks " + path("t.csv") + " --model " + path("nope.json") + " --out " + path("e")), 3);
}

TEST_F(Cli, DetectWritesOneRecordPerFrame) {
  random_model("m.json");
  write("t.csv", kTracks);
  ASSERT_EQ(run("detect --tracks " + path("t.csv") + " --model " + path("m.json") + " --out " + path("d") +
                " --gr p --variant 2 --debug"),
            0)
      << out_;
  EXPECT_NE(out_.find("frames=4 skipped=2"), std::string::npos);
  std::istringstream in(read(path("d")));
  const auto dets = parse_detections(in);
  ASSERT_EQ(dets.size(), 4u);
  EXPECT_EQ(dets[1].skipped, "no_features");
  for (std::size_t f = 2; f < 4; ++f)
    for (const auto& g : dets[f].groups) {
      ASSERT_TRUE(g.gr);
      EXPECT_EQ(g.gr->kind, "p");
    }
  EXPECT_EQ(run("detect --tracks " + path("t.csv") + " --model " + path("m.json") + " --out " + path("mv") +
                " --baseline mv --smooth --window 3 --dt 1"),
            0)
      << out_;
}

TEST_F(Cli, SimulateExportEvaluate) {
  const std::string spec = std::string(GROUPACT_SCENARIOS) + "/fight_approach.json";
  ASSERT_EQ(run("simulate --spec " + spec + " --out " + path("sc")), 0) << out_;
  EXPECT_NE(out_.find("persons=4 samples=1200"), std::string::npos);
  ASSERT_EQ(run("export-truth --truth " + path("sc.annotations.jsonl") + " --out " + path("truth.jsonl")), 0);
  ASSERT_EQ(run("evaluate --detections " + path("truth.jsonl") + " --truth " + path("sc.annotations.jsonl") +
                " --csv " + path("rates.csv") + " --warmup 25"),
            0);
  EXPECT_NE(out_.find("frames: 275"), std::string::npos);
  EXPECT_NE(out_.find("eder: 0.000000 (0/275)"), std::string::npos);
  EXPECT_NE(read(path("rates.csv")).find("Approach,0.000000,0,275"), std::string::npos);

  // A reseeded run differs; the same seed does not.
  ASSERT_EQ(run("simulate --spec " + spec + " --out " + path("again")), 0);
  EXPECT_EQ(read(path("again.tracks.csv")), read(path("sc.tracks.csv")));
  ASSERT_EQ(run("simulate --spec " + spec + " --seed 5 --out " + path("other")), 0);
  EXPECT_NE(read(path("other.tracks.csv")), read(path("sc.tracks.csv")));

  write("bad.json", "{\"agents\": [");
  EXPECT_EQ(run("simulate --spec " + path("bad.json") + " --out " + path("x")), 2);
  EXPECT_EQ(run("evaluate --detections " + path("nothing") + " --truth " + path("sc.annotations.jsonl")), 2);
}

TEST_F(Cli, TrainNeedsEveryActivity) {
  const std::string spec = std::string(GROUPACT_SCENARIOS) + "/fight.json";
  ASSERT_EQ(run("simulate --spec " + spec + " --out " + path("sc")), 0);
  EXPECT_EQ(run("train --tracks " + path("sc.tracks.csv") + " --annotations " + path("sc.annotations.jsonl") +
                " --out " + path("m.json")),
            2);
  EXPECT_NE(out_.find("no training data"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("m.json")));
  EXPECT_EQ(run("train --tracks " + path("sc.tracks.csv") + " --tracks " + path("sc.tracks.csv") + " --annotations " +
                path("sc.annotations.jsonl") + " --out " + path("m.json")),
            1);
}
