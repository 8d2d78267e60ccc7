#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "contracate/io/csv.hpp"
#include "contracate/io/snapshot.hpp"
#include "contracate/model/linear_model.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           ("contracate_cli_" + std::to_string(::getpid()) + "_" + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  /// Runs the tool and returns its exit status; stdout and stderr go to last_output_.
  int run(const std::string& args) {
    const fs::path log = dir_ / "last_output.txt";
    const std::string cmd = std::string(CONTRACATE_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    last_output_ = read(log);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  std::string out(const std::string& sub) const { return "--out " + (dir_ / sub).string(); }

  static std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static json read_json(const fs::path& p) { return json::parse(read(p)); }

  static std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += c == '\n';
    return n;
  }

  fs::path dir_;
  std::string last_output_;
};

const std::string kFast = " --epochs 3 --n 200";

}  // namespace

TEST_F(Cli, GenerateDefaultWritesThousandRowsAndTenTreatments) {
  ASSERT_EQ(run("generate " + out("g")), 0) << last_output_;
  const std::string csv = read(path("g/data.csv"));
  EXPECT_EQ(count_lines(csv), 1001u);
  const auto schema = contracate::io::TabularSchema::infer(
      contracate::io::detail::split_line(csv.substr(0, csv.find('\n'))));
  EXPECT_EQ(schema.treatments.size(), 10u);
  EXPECT_EQ(schema.covariates.size(), 10u);

  const json m = read_json(path("g/manifest.json"));
  EXPECT_EQ(m["command"], "generate");
  EXPECT_EQ(m["derived"]["rows"], 1000);
  EXPECT_TRUE(m.contains("created_at"));
  EXPECT_EQ(m["outputs"], json::array({"data.csv"}));
}

TEST_F(Cli, GenerateIsByteIdenticalForSameSeed) {
  ASSERT_EQ(run("generate --seed 7 " + out("a")), 0);
  ASSERT_EQ(run("generate --seed 7 " + out("b")), 0);
  EXPECT_EQ(read(path("a/data.csv")), read(path("b/data.csv")));
  ASSERT_EQ(run("generate --seed 8 " + out("c")), 0);
  EXPECT_NE(read(path("a/data.csv")), read(path("c/data.csv")));
}

TEST_F(Cli, GenerateRefusesDegenerateSplit) {
  EXPECT_EQ(run("generate --n 5 " + out("g")), 2);
  EXPECT_NE(last_output_.find("n must be"), std::string::npos) << last_output_;
  EXPECT_FALSE(fs::exists(path("g/data.csv")));
}

TEST_F(Cli, GenerateLinearScm) {
  ASSERT_EQ(run("generate --generator linear --n 50 " + out("g")), 0) << last_output_;
  const json m = read_json(path("g/manifest.json"));
  EXPECT_EQ(m["derived"]["dim_t"], 2);
  EXPECT_EQ(m["derived"]["dim_x"], 1);
}

TEST_F(Cli, UnknownConfigKeyIsRejectedByName) {
  std::ofstream(path("cfg.json")) << R"({"train": {"epoch": 3}})";
  EXPECT_EQ(run("generate --config " + path("cfg.json").string() + " " + out("g")), 2);
  EXPECT_NE(last_output_.find("train.epoch"), std::string::npos) << last_output_;
}

TEST_F(Cli, ConfigTypeErrorNamesField) {
  std::ofstream(path("cfg.json")) << R"({"data": {"n": -4}})";
  EXPECT_EQ(run("generate --config " + path("cfg.json").string() + " " + out("g")), 2);
  EXPECT_NE(last_output_.find("data.n"), std::string::npos) << last_output_;
}

TEST_F(Cli, InvalidValueIsConfigError) {
  EXPECT_EQ(run("train --mode sideways" + kFast + " " + out("t")), 2);
  EXPECT_EQ(run("train --lr -1" + kFast + " " + out("t")), 2);
  EXPECT_EQ(run("train --epochs notanumber " + out("t")), 2);
  EXPECT_EQ(run("frobnicate"), 2);
}

TEST_F(Cli, FlagsOverrideConfigAndMergedConfigIsArchived) {
  std::ofstream(path("cfg.json")) << R"({"seed": 3, "data": {"n": 40, "y_noise_std": 0.25}})";
  ASSERT_EQ(run("generate --config " + path("cfg.json").string() + " --seed 4 " + out("g")), 0) << last_output_;
  const json m = read_json(path("g/manifest.json"));
  EXPECT_EQ(m["config"]["seed"], 4);
  EXPECT_EQ(m["config"]["data"]["n"], 40);
  EXPECT_EQ(m["config"]["data"]["y_noise_std"], 0.25);
  EXPECT_EQ(m["seeds"], json::array({4}));
}

TEST_F(Cli, ContrastiveWithZeroWeightMatchesPlain) {
  ASSERT_EQ(run("train --mode plain --epochs 15 --n 200 " + out("p")), 0) << last_output_;
  ASSERT_EQ(run("train --mode contrastive --weight 0 --epochs 15 --n 200 " + out("c")), 0) << last_output_;
  EXPECT_EQ(read(path("p/metrics.json")), read(path("c/metrics.json")));
  EXPECT_EQ(read(path("p/model.bin")), read(path("c/model.bin")));
}

TEST_F(Cli, ContrastivePresetsFollowTheDataKind) {
  ASSERT_EQ(run("train --mode contrastive" + kFast + " " + out("s")), 0) << last_output_;
  const json s = read_json(path("s/manifest.json"));
  EXPECT_EQ(s["derived"]["contrastive_weight"], 0.1);
  EXPECT_EQ(s["derived"]["margin"], 30.0);

  ASSERT_EQ(run("train --mode contrastive --generator semi-synthetic" + kFast + " " + out("m")), 0) << last_output_;
  const json m = read_json(path("m/manifest.json"));
  EXPECT_EQ(m["derived"]["contrastive_weight"], 1.0);
  EXPECT_EQ(m["derived"]["margin"], 100.0);
}

TEST_F(Cli, TrainingLogHasBothLossesEveryEpoch) {
  ASSERT_EQ(run("train --mode contrastive --epochs 7 --n 200 " + out("t")), 0) << last_output_;
  std::istringstream log(read(path("t/train_log.csv")));
  std::string line;
  std::getline(log, line);
  EXPECT_EQ(line, "epoch,huber_loss,triplet_loss,n_triples");
  std::size_t epoch = 0;
  while (std::getline(log, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    ASSERT_EQ(cells.size(), 4u) << line;
    EXPECT_EQ(cells[0], std::to_string(epoch));
    EXPECT_FALSE(cells[1].empty());
    EXPECT_FALSE(cells[2].empty());
    ++epoch;
  }
  EXPECT_EQ(epoch, 7u);
}

TEST_F(Cli, TrainIsDeterministic) {
  ASSERT_EQ(run("train --seed 5" + kFast + " " + out("a")), 0);
  ASSERT_EQ(run("train --seed 5" + kFast + " " + out("b")), 0);
  for (const char* f : {"model.bin", "train_log.csv", "metrics.json"}) {
    EXPECT_EQ(read(path(std::string("a/") + f)), read(path(std::string("b/") + f))) << f;
  }
  json ma = read_json(path("a/manifest.json")), mb = read_json(path("b/manifest.json"));
  ma.erase("created_at");
  mb.erase("created_at");
  ma["config"].erase("out");
  mb["config"].erase("out");
  EXPECT_EQ(ma, mb);
}

TEST_F(Cli, EvalOfOracleModelIsZero) {
  ASSERT_EQ(run("generate --y-noise 0 --n 300 " + out("g")), 0) << last_output_;
  const std::string csv = path("g/data.csv").string();
  const auto ds = contracate::io::load_csv(csv);
  Eigen::VectorXd w_t = Eigen::VectorXd::Zero(10);
  w_t.head(5).setOnes();
  const contracate::model::LinearCateModel oracle(w_t, Eigen::VectorXd::Ones(10), 0.0);
  contracate::io::save_model(contracate::model::AnyModel(oracle), path("oracle.bin").string());

  ASSERT_EQ(run("eval --data " + csv + " --model " + path("oracle.bin").string() + " " + out("e")), 0)
      << last_output_;
  const json m = read_json(path("e/metrics.json"));
  EXPECT_LT(m["mae"].get<double>(), 1e-12);
  EXPECT_LT(m["rmse"].get<double>(), 1e-12);
  EXPECT_EQ(m["pehe"].get<double>(), 0.0);
}

TEST_F(Cli, EvalMissingSnapshotIsDataError) {
  const int code = run("eval --model " + path("absent.bin").string() + " " + out("e"));
  EXPECT_EQ(code, 3);
  EXPECT_NE(code, 2);
}

TEST_F(Cli, EvalMissingDataFileIsDataError) {
  EXPECT_EQ(run("eval --data " + path("absent.csv").string() + " " + out("e")), 3);
}

TEST_F(Cli, EvalTenSeedsEmitsMeanAndStderrRows) {
  ASSERT_EQ(run("eval --seeds 10 --epochs 2 --n 100 " + out("e")), 0) << last_output_;
  const std::string csv = read(path("e/metrics.csv"));
  EXPECT_EQ(count_lines(csv), 1u + 30u + 3u + 3u);
  for (const char* metric : {"mae", "rmse", "pehe"}) {
    EXPECT_NE(csv.find(std::string(",mean,") + metric + ","), std::string::npos);
    EXPECT_NE(csv.find(std::string(",stderr,") + metric + ","), std::string::npos);
  }
  const json m = read_json(path("e/metrics.json"));
  EXPECT_EQ(m["per_seed"].size(), 10u);
  EXPECT_TRUE(m.contains("pehe_stderr"));
}

TEST_F(Cli, EvalSnapshotReproducesTrainMetrics) {
  ASSERT_EQ(run("train" + kFast + " " + out("t")), 0);
  ASSERT_EQ(run("eval --n 200 --model " + path("t/model.bin").string() + " " + out("e")), 0) << last_output_;
  const json t = read_json(path("t/metrics.json"));
  const json e = read_json(path("e/metrics.json"));
  EXPECT_EQ(t["mae"], e["mae"]);
  EXPECT_EQ(t["pehe"], e["pehe"]);
}

TEST_F(Cli, SweepDefaultGridHasElevenPoints) {
  ASSERT_EQ(run("sweep --seeds 1 --epochs 1 --n 100 " + out("s")), 0) << last_output_;
  const json s = read_json(path("s/sweep.json"));
  EXPECT_EQ(s["axis"], "outcome_noise_std");
  EXPECT_EQ(s["axis_values"].size(), 11u);
  EXPECT_FALSE(fs::exists(path("s/sweep.svg")));
}

TEST_F(Cli, SweepNoncausalAxisDispatches) {
  ASSERT_EQ(run("sweep --axis noncausal-noise --seeds 1 --epochs 1 --n 100 " + out("s")), 0) << last_output_;
  const json s = read_json(path("s/sweep.json"));
  EXPECT_EQ(s["axis"], "noncausal_noise_scale");
  EXPECT_EQ(s["axis_values"].size(), 5u);
}

TEST_F(Cli, SweepSvgHasOnePolylinePerVariant) {
  ASSERT_EQ(run("sweep --svg --grid 0,0.5 --seeds 1 --epochs 1 --n 100 " + out("s")), 0) << last_output_;
  const std::string svg = read(path("s/sweep.svg"));
  std::size_t lines = 0;
  for (auto p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++lines;
  EXPECT_EQ(lines, 2u);
}

TEST_F(Cli, SweepOutputDoesNotDependOnJobs) {
  const std::string args = " --axis noncausal-noise --grid 0.5,1 --seeds 3 --epochs 2 --n 100 ";
  ASSERT_EQ(run("sweep --jobs 1" + args + out("a")), 0) << last_output_;
  ASSERT_EQ(run("sweep --jobs 3" + args + out("b")), 0) << last_output_;
  EXPECT_EQ(read(path("a/sweep.csv")), read(path("b/sweep.csv")));
  EXPECT_EQ(read(path("a/sweep.json")), read(path("b/sweep.json")));
}

TEST_F(Cli, SweepRejectsBadGrid) {
  EXPECT_EQ(run("sweep --grid 1,0.5 --seeds 1 --epochs 1 --n 100 " + out("s")), 2);
  EXPECT_EQ(run("sweep --axis sideways " + out("s")), 2);
}

TEST_F(Cli, TheoremOneLambdaZeroHasNoGap) {
  ASSERT_EQ(run("theorem1 --lambda 0 --draws 20000 " + out("t")), 0) << last_output_;
  const json j = read_json(path("t/theorem1.json"));
  EXPECT_EQ(j["analytic"]["intervention_gap"], 0.0);
  EXPECT_EQ(j["analytic"]["conditional_mean_gap"], 0.0);
  EXPECT_EQ(j["monte_carlo"]["conditional_mean_gap"], 0.0);
  EXPECT_TRUE(j["within_3se"].get<bool>());
}

TEST_F(Cli, TheoremOneUnitExample) {
  ASSERT_EQ(run("theorem1 --lambda 1 --delta-tnc 2 " + out("t")), 0) << last_output_;
  const json j = read_json(path("t/theorem1.json"));
  EXPECT_EQ(j["analytic"]["intervention_gap"], 2.0);
  EXPECT_EQ(j["monte_carlo"]["draws"], 100000);
  const double mc = j["monte_carlo"]["intervention_gap"], se = j["monte_carlo"]["intervention_se"];
  EXPECT_LE(std::abs(mc - 2.0), 3.0 * se);
  EXPECT_TRUE(j["within_3se"].get<bool>());
}

TEST_F(Cli, TheoremOneRejectsLambdaOutOfRange) { EXPECT_EQ(run("theorem1 --lambda 1.5 " + out("t")), 2); }

TEST_F(Cli, ProbeReportsBoundedScores) {
  ASSERT_EQ(run("probe" + kFast + " " + out("p")), 0) << last_output_;
  const json j = read_json(path("p/probe.json"));
  for (const char* k : {"r2_causal", "r2_noncausal"}) {
    EXPECT_GE(j[k].get<double>(), 0.0) << k;
    EXPECT_LE(j[k].get<double>(), 1.0) << k;
  }
  EXPECT_GE(j["invariance_ratio"].get<double>(), 0.0);
}

TEST_F(Cli, ProbeNeedsLatents) {
  std::ofstream(path("plain.csv")) << "x0,t0,y\n1,2,3\n2,3,4\n3,4,5\n4,5,6\n5,6,7\n";
  EXPECT_EQ(run("probe --data " + path("plain.csv").string() + " " + out("p")), 3);
}
