#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "test_util.hpp"

namespace dpcdvae {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "dpcv");
  std::vector<const char*> argv;
  for (const auto& a : args)
    argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / ("dpcv_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    SyntheticConfig sc;
    sc.count = 6;
    std::vector<DatasetRecord> recs;
    for (auto& s : make_synthetic_dataset(sc))
      recs.push_back({s, -1.0, std::nullopt});
    write_jsonl((dir_ / "data.jsonl").string(), recs);

    RunConfig cfg;
    cfg.model.hidden = 16;
    cfg.model.latent_dim = 8;
    cfg.model.layers = 1;
    cfg.model.encoder_layers = 1;
    cfg.model.length_scale = 0;
    cfg.schedule_steps = 20;
    cfg.train.epochs = 2;
    cfg.train.batch_size = 4;
    cfg.save_every = 1;
    std::ofstream(dir_ / "config.json") << config_to_json(cfg).dump(2);
  }
  static void TearDownTestSuite() { fs::remove_all(dir_); }

  static std::string p(const std::string& name) { return (dir_ / name).string(); }

  static void train_once() {
    if (fs::exists(dir_ / "run" / "model.dpcv"))
      return;
    Result r = run({"train", "--config", p("config.json"), "--data", p("data.jsonl"), "--out",
                    p("run"), "--seed", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
  }

  static fs::path dir_;
};

fs::path CliTest::dir_;

TEST_F(CliTest, ScheduleDumpRows) {
  Result r = run({"schedule-dump", "--T", "10"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,alpha,alpha_bar,sigma,sigma_prime");
  int rows = 0;
  while (std::getline(in, line))
    ++rows;
  EXPECT_EQ(rows, 10);
}

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(run({}).code, cli::kUsage);
  EXPECT_EQ(run({"bogus"}).code, cli::kUsage);
  EXPECT_EQ(run({"generate", "--count", "2"}).code, cli::kUsage);
  EXPECT_EQ(run({"reconstruct", "--ckpt", "a", "--data", "b", "--out", "c", "--variant", "x"}).code,
            cli::kUsage);
  Result help = run({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("schedule-dump"), std::string::npos);
}

TEST_F(CliTest, DataErrorsExitTwo) {
  Result r = run({"evaluate", "--generated", p("missing.jsonl"), "--reference", p("data.jsonl")});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("missing.jsonl"), std::string::npos);
  std::ofstream(dir_ / "bad.jsonl") << "{}\n";
  EXPECT_EQ(run({"evaluate", "--generated", p("bad.jsonl"), "--reference", p("data.jsonl")}).code,
            cli::kDataError);
  EXPECT_EQ(run({"schedule-dump", "--T", "0"}).code, cli::kDataError);
}

TEST_F(CliTest, EvaluateReconOnIdenticalSets) {
  Result r = run({"evaluate", "--mode", "recon", "--generated", p("data.jsonl"), "--reference",
                  p("data.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["match_rate"], 100.0);
  EXPECT_EQ(j["mean_delta_rms"], 0.0);
}

TEST_F(CliTest, EvaluateGenAndGroundState) {
  Result g = run({"evaluate", "--mode", "gen", "--generated", p("data.jsonl"), "--reference",
                  p("data.jsonl")});
  ASSERT_EQ(g.code, 0) << g.err;
  auto j = nlohmann::json::parse(g.out);
  EXPECT_EQ(j["validity_struct"], 100.0);
  EXPECT_EQ(j["validity_comp"], 100.0);
  EXPECT_EQ(j["cov_r"], 100.0);
  EXPECT_EQ(j["wasserstein_rho"], 0.0);
  EXPECT_FALSE(j.contains("match_rate"));

  Result s = run({"evaluate", "--mode", "ground-state", "--generated", p("data.jsonl"),
                  "--reference", p("data.jsonl"), "--out", p("gs.json")});
  ASSERT_EQ(s.code, 0) << s.err;
  auto k = nlohmann::json::parse(slurp(dir_ / "gs.json"));
  EXPECT_EQ(k["delta_e_rms"], 0.0);
  EXPECT_EQ(k["delta_v_rms"], 0.0);
}

TEST_F(CliTest, TrainWritesCheckpointsAndLoss) {
  train_once();
  EXPECT_TRUE(fs::exists(dir_ / "run" / "checkpoint_epoch0001.dpcv"));
  EXPECT_TRUE(fs::exists(dir_ / "run" / "checkpoint_epoch0002.dpcv"));
  std::istringstream csv(slurp(dir_ / "run" / "loss.csv"));
  std::string line;
  int rows = 0;
  std::getline(csv, line);
  EXPECT_EQ(line, "epoch,L_total,L_simple,CE,KLD,latt,comp,N_a");
  while (std::getline(csv, line))
    ++rows;
  EXPECT_EQ(rows, 2);
}

TEST_F(CliTest, TrainingIsDeterministic) {
  train_once();
  Result r = run({"train", "--config", p("config.json"), "--data", p("data.jsonl"), "--out",
                  p("run2"), "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir_ / "run" / "model.dpcv"), slurp(dir_ / "run2" / "model.dpcv"));
  EXPECT_EQ(slurp(dir_ / "run" / "loss.csv"), slurp(dir_ / "run2" / "loss.csv"));
}

TEST_F(CliTest, GenerateIsDeterministic) {
  train_once();
  std::string ck = p("run/model.dpcv");
  ASSERT_EQ(run({"generate", "--ckpt", ck, "--count", "3", "--out", p("g1.jsonl"), "--seed", "8"}).code, 0);
  ASSERT_EQ(run({"generate", "--ckpt", ck, "--count", "3", "--out", p("g2.jsonl"), "--seed", "8"}).code, 0);
  ASSERT_EQ(run({"generate", "--ckpt", ck, "--count", "3", "--out", p("g3.jsonl"), "--seed", "9"}).code, 0);
  std::string a = slurp(dir_ / "g1.jsonl");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, slurp(dir_ / "g2.jsonl"));
  EXPECT_NE(a, slurp(dir_ / "g3.jsonl"));
  EXPECT_EQ(read_jsonl(p("g1.jsonl")).size(), 3u);
}

TEST_F(CliTest, ReconstructIsDeterministic) {
  train_once();
  std::string ck = p("run/model.dpcv");
  for (const char* out : {"r1.jsonl", "r2.jsonl"}) {
    Result r = run({"reconstruct", "--ckpt", ck, "--data", p("data.jsonl"), "--out", p(out),
                    "--variant", "standard", "--seed", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  EXPECT_EQ(slurp(dir_ / "r1.jsonl"), slurp(dir_ / "r2.jsonl"));
  EXPECT_EQ(read_jsonl(p("r1.jsonl")).size(), 6u);
}

TEST_F(CliTest, DivergenceExitsThree) {
  RunConfig cfg = config_from_json(nlohmann::json::parse(slurp(dir_ / "config.json")));
  cfg.train.learning_rate = 1e300;
  cfg.train.epochs = 3;
  std::ofstream(dir_ / "diverge.json") << config_to_json(cfg).dump();
  Result r = run({"train", "--config", p("diverge.json"), "--data", p("data.jsonl"), "--out",
                  p("run_div")});
  EXPECT_EQ(r.code, cli::kDivergence) << r.err;
}

}  // namespace
}  // namespace dpcdvae
