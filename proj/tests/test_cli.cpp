#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "golden_pipeline.hpp"
#include "pprm/cli.hpp"
#include "pprm/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = pprm::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("pprm_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name), std::ios::binary) << text;
  }

  fs::path dir_;
};

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

TEST_F(CliTest, SimulateIsDeterministicAndShaped) {
  const auto a = cli({"simulate", "--horizon", "100", "--seed", "5"});
  const auto b = cli({"simulate", "--horizon", "100", "--seed", "5"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  const auto lines = lines_of(a.out);
  ASSERT_EQ(lines.size(), 100u);
  for (const auto& line : lines) {
    const auto batch = pprm::parse_stream_record(line);
    EXPECT_EQ(batch.labeled.size(), 1u);
    EXPECT_EQ(batch.unlabeled_synth.size(), 15u);
  }
  EXPECT_NE(cli({"simulate", "--horizon", "100", "--seed", "6"}).out, a.out);
}

TEST_F(CliTest, SimulatePerfectAgreement) {
  write("c.json", R"({"scenario":{"agreement":1.0,"horizon":200}})");
  const auto r = cli({"simulate", "--config", path("c.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const auto& line : lines_of(r.out)) {
    for (const auto& p : pprm::parse_stream_record(line).labeled) {
      EXPECT_EQ(p.true_loss, p.synth_loss);
    }
  }
}

TEST_F(CliTest, CalibrateConstantLosses) {
  std::string text;
  for (int t = 1; t <= 100; ++t) {
    text += "{\"t\":" + std::to_string(t) +
            ",\"labeled\":[{\"true\":0.1,\"synth\":0.1}],\"unlabeled\":[]}\n";
  }
  write("src.jsonl", text);
  const auto h = cli({"calibrate", path("src.jsonl"), "--bound", "hoeffding_labeled_only"});
  ASSERT_EQ(h.code, 0) << h.err;
  const auto hc = std::get<pprm::SourceCalibration>(pprm::calibration_from_json(h.out));
  EXPECT_NEAR(hc.upper_bound, 0.22238734153404083, 1e-12);
  EXPECT_EQ(hc.n0, 100u);
  EXPECT_EQ(cli({"calibrate", path("src.jsonl"), "--method", "SRM"}).out, h.out);

  const auto b = cli({"calibrate", path("src.jsonl"), "--bound", "betting_ppi"});
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_GE(std::get<pprm::SourceCalibration>(pprm::calibration_from_json(b.out)).upper_bound,
            0.1);
  EXPECT_EQ(cli({"calibrate", path("src.jsonl"), "--bound", "betting_ppi"}).out, b.out);
}

TEST_F(CliTest, CalibrateRejectsBadFiles) {
  write("bad.jsonl",
        "{\"t\":1,\"labeled\":[{\"true\":0.1,\"synth\":0.1}],\"unlabeled\":[]}\n"
        "{\"t\":2,\"labeled\":[{\"true\":1.5,\"synth\":0.1}],\"unlabeled\":[]}\n");
  const auto r = cli({"calibrate", path("bad.jsonl")});
  EXPECT_EQ(r.code, pprm::cli::kExitError);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;

  write("empty.jsonl", "");
  const auto e = cli({"calibrate", path("empty.jsonl")});
  EXPECT_EQ(e.code, pprm::cli::kExitError);
  EXPECT_NE(e.err.find("no labeled"), std::string::npos) << e.err;
}

TEST_F(CliTest, MonitorEmptyStreamIsCensored) {
  write("empty.jsonl", "");
  write("cal.json", R"({"method":"hoeffding_labeled_only","n0":10,"N0":0,"eta0":0,"estimate":0.1,"upper_bound":0.3})");
  const auto r = cli({"monitor", path("empty.jsonl"), "--calibration", path("cal.json"),
                      "--summary", path("s.json")});
  EXPECT_EQ(r.code, pprm::cli::kExitOk);
  EXPECT_EQ(r.out, std::string(pprm::kTraceHeader) + "\n");
  EXPECT_EQ(golden::read_file(path("s.json")),
            "{\"steps\":0,\"alarm\":false,\"alarm_time\":null,\"censored\":true}\n");
}

TEST_F(CliTest, MonitorExitStatusSignalsAlarm) {
  ASSERT_EQ(cli({"simulate", "--horizon", "300", "-o", path("s.jsonl")}).code, 0);
  write("low.json", R"({"method":"hoeffding_labeled_only","n0":10,"N0":0,"eta0":0,"estimate":0.0,"upper_bound":0.0})");
  write("high.json", R"({"method":"hoeffding_labeled_only","n0":10,"N0":0,"eta0":0,"estimate":0.9,"upper_bound":0.95})");
  const auto alarm = cli({"monitor", path("s.jsonl"), "--calibration", path("low.json")});
  EXPECT_EQ(alarm.code, pprm::cli::kExitAlarm);
  EXPECT_NE(alarm.err.find("\"alarm\":true"), std::string::npos);
  const auto lines = lines_of(alarm.out);
  ASSERT_EQ(lines.size(), 301u);
  bool latched = false;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const bool on = lines[i].back() == '1';
    if (latched) {
      EXPECT_TRUE(on) << lines[i];
    }
    latched = latched || on;
  }
  const auto quiet = cli({"monitor", path("s.jsonl"), "--calibration", path("high.json"),
                          "--method", "SRM"});
  EXPECT_EQ(quiet.code, pprm::cli::kExitOk);
}

TEST_F(CliTest, MonitorRejectsRegressionAndSchemaErrors) {
  write("cal.json", R"({"method":"hoeffding_labeled_only","n0":10,"N0":0,"eta0":0,"estimate":0.1,"upper_bound":0.3})");
  write("regress.jsonl",
        "{\"t\":1,\"labeled\":[{\"true\":0.1,\"synth\":0.1}],\"unlabeled\":[]}\n"
        "{\"t\":1,\"labeled\":[{\"true\":0.1,\"synth\":0.1}],\"unlabeled\":[]}\n");
  const auto r = cli({"monitor", path("regress.jsonl"), "--calibration", path("cal.json")});
  EXPECT_EQ(r.code, pprm::cli::kExitError);
  EXPECT_NE(r.err.find("increase"), std::string::npos) << r.err;

  write("gap.jsonl", "{\"t\":2,\"labeled\":[{\"true\":0.1,\"synth\":0.1}],\"unlabeled\":[]}\n");
  const auto g = cli({"monitor", path("gap.jsonl"), "--calibration", path("cal.json")});
  EXPECT_EQ(g.code, pprm::cli::kExitError);

  write("schema.jsonl", "{\"t\":1,\"labeled\":[{\"truth\":0.1}],\"unlabeled\":[]}\n");
  const auto s = cli({"monitor", path("schema.jsonl"), "--calibration", path("cal.json")});
  EXPECT_EQ(s.code, pprm::cli::kExitError);
  EXPECT_NE(s.err.find("line 1"), std::string::npos) << s.err;
}

TEST_F(CliTest, UrmRoundTrip) {
  ASSERT_EQ(cli({"simulate", "--horizon", "200", "-o", path("s.jsonl"), "--source-output",
                 path("src.jsonl")})
                .code,
            0);
  const auto c = cli({"calibrate", path("src.jsonl"), "--method", "URM", "-o", path("u.json")});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_TRUE(std::holds_alternative<pprm::UrmCalibration>(
      pprm::calibration_from_json(golden::read_file(path("u.json")))));
  const auto m = cli({"monitor", path("s.jsonl"), "--calibration", path("u.json")});
  EXPECT_EQ(m.code, pprm::cli::kExitOk) << m.err;
  EXPECT_EQ(cli({"monitor", path("s.jsonl"), "--calibration", path("u.json"), "--method", "SRM"})
                .code,
            pprm::cli::kExitError);
}

TEST_F(CliTest, ExperimentRejectsUnknownKey) {
  write("c.json", R"({"experiment":{"replicatons":5}})");
  const auto r = cli({"experiment", "--config", path("c.json")});
  EXPECT_EQ(r.code, pprm::cli::kExitError);
  EXPECT_NE(r.err.find("experiment.replicatons"), std::string::npos) << r.err;
}

TEST_F(CliTest, ExperimentReproducibleWithTraces) {
  write("c.json", R"({"scenario":{"horizon":150},"experiment":{"replications":2,"base_seed":3}})");
  const std::vector<std::string> args{"experiment", "--config", path("c.json"),
                                      "--output-dir", path("traces"), "--method", "SRM",
                                      "--method", "PPRM_adaptive"};
  const auto a = cli(args);
  const auto b = cli(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out.find("\"replications\":2"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "traces" / "rep0000_SRM.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "traces" / "rep0001_PPRM_adaptive.csv"));
  EXPECT_EQ(lines_of(golden::read_file(dir_ / "traces" / "rep0001_SRM.csv")).size(), 151u);
}

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(cli({}).code, pprm::cli::kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, pprm::cli::kExitUsage);
  EXPECT_EQ(cli({"monitor"}).code, pprm::cli::kExitUsage);
  EXPECT_EQ(cli({"simulate", "--horizon", "abc"}).code, pprm::cli::kExitUsage);
  EXPECT_EQ(cli({"--help"}).code, pprm::cli::kExitOk);
}

TEST_F(CliTest, DefaultsParseBack) {
  const auto r = cli({"defaults"});
  ASSERT_EQ(r.code, 0);
  write("d.json", r.out);
  EXPECT_EQ(cli({"simulate", "--config", path("d.json"), "--horizon", "5"}).code, 0);
}

TEST_F(CliTest, GoldenPipelineMatchesCommittedFiles) {
  const fs::path golden_dir = PPRM_GOLDEN_DIR;
  const int code = golden::run_pipeline(golden_dir / "config.json", dir_);
  EXPECT_EQ(code, pprm::cli::kExitAlarm);
  for (const auto& name : golden::kFiles) {
    EXPECT_EQ(golden::read_file(dir_ / name), golden::read_file(golden_dir / name)) << name;
  }
}

}  // namespace
