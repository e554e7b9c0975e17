#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>

#include "eegsr/config.hpp"
#include "eegsr/report.hpp"

using namespace eegsr;

namespace {

const char* kTinyConfig = R"([run]
precision = f64
seed = 11

[synth]
n_subjects = 1
n_samples = 4096
class_block_len = 512

[model]
width_divisor = 32

[train]
pretrain_epochs = 1
gan_epochs = 1

[classifier]
epochs = 2
)";

void copy_prepared(const fs::path& from_out, const fs::path& to_out) {
  fs::create_directories(to_out / "scale2");
  fs::copy(from_out / "scale2" / "data", to_out / "scale2" / "data", fs::copy_options::recursive);
}

fs::path temp_root() {
  static fs::path root = fs::temp_directory_path() / ("eegsr_cli_" + std::to_string(::getpid()));
  return root;
}

/// Runs the CLI and returns its exit status.
int cli(const std::string& args, const std::string& env = "") {
  std::string cmd = env + (env.empty() ? "" : " ") + EEGSR_CLI_PATH + std::string(" ") + args + " > /dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string common(const fs::path& out) {
  return "--config " + (temp_root() / "tiny.ini").string() + " --out-dir " + out.string();
}

class CliPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::create_directories(temp_root());
    io::write_text(temp_root() / "tiny.ini", kTinyConfig);
    out_ = temp_root() / "run";
    ASSERT_EQ(cli("synth " + common(out_)), 0);
    ASSERT_EQ(cli("preprocess --scale 2 " + common(out_)), 0);
  }
  static void TearDownTestSuite() { fs::remove_all(temp_root()); }

  static inline fs::path out_;
};

}  // namespace

// ------------------------------------------------------------------ config

TEST(RunConfig, DefaultsMatchModuleDefaults) {
  RunConfig c;
  auto t = c.train();
  EXPECT_EQ(t.pretrain_epochs, 50u);
  EXPECT_EQ(t.batch_size, 64u);
  EXPECT_EQ(t.adam.lr, 1e-4);
  EXPECT_EQ(t.adam.beta1, 0.5);
  EXPECT_EQ(t.adam.beta2, 0.9);
  EXPECT_EQ(t.gp_weight, 10.0);
  EXPECT_EQ(t.training_ratio, 3u);
  EXPECT_EQ(t.adv_weight, 1e-2);
  auto k = c.classifier();
  EXPECT_EQ(k.adam.lr, 1e-3);
  EXPECT_EQ(k.adam.beta2, 0.99);
  EXPECT_EQ(c.scale(), 2);
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfig, UnknownKeysAndSectionsRejected) {
  RunConfig c;
  EXPECT_THROW(c.load_text("[train]\nlearning_rate = 1\n"), ConfigError);
  EXPECT_THROW(c.load_text("[nope]\n"), ConfigError);
  EXPECT_THROW(c.load_text("seed = 1\n"), ConfigError);
  EXPECT_THROW(c.set("train.nope", "1"), ConfigError);
  try {
    c.load_text("[run]\n\nseed = 1\nbogus = 2\n", "x.ini");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("x.ini line 4"), std::string::npos);
  }
}

TEST(RunConfig, InvalidValuesFailValidation) {
  RunConfig c;
  c.set("train.batch_size", "0");
  EXPECT_THROW(c.validate(), ConfigError);
  RunConfig d;
  d.set("run.scale", "3");
  EXPECT_THROW(d.validate(), ConfigError);
  RunConfig e;
  e.set("train.lr", "abc");
  EXPECT_THROW(e.validate(), ConfigError);
  RunConfig f;
  f.set("train.loss_mode", "hinge");
  EXPECT_THROW(f.validate(), ConfigError);
}

TEST(RunConfig, IniRoundTrip) {
  RunConfig c;
  c.load_text(kTinyConfig);
  c.set("train.adv_weight", "0.125");
  RunConfig d;
  d.load_text(c.to_ini());
  EXPECT_EQ(d.to_ini(), c.to_ini());
  EXPECT_EQ(d.train().adv_weight, 0.125);
  EXPECT_EQ(d.synthetic().class_ids, (std::vector<int>{2, 3, 7}));
}

// --------------------------------------------------------------- commands

TEST_F(CliPipeline, PreprocessWritesPairedArchives) {
  json meta;
  auto lr = load_epoch_set(out_ / "scale2" / "data" / "train_lr");
  auto hr = load_epoch_set(out_ / "scale2" / "data" / "train_hr");
  EXPECT_EQ(lr.channels(), 16u);
  EXPECT_EQ(hr.channels(), 16u);
  EXPECT_EQ(lr.samples(), 64u);
  EXPECT_EQ(lr.size(), hr.size());
  for (auto split : {"val", "test"}) {
    EXPECT_TRUE(fs::exists(out_ / "scale2" / "data" / (std::string(split) + "_lr") / "manifest.json"));
    EXPECT_TRUE(fs::exists(out_ / "scale2" / "data" / (std::string(split) + "_hr") / "manifest.json"));
  }
  EXPECT_TRUE(fs::exists(out_ / "scale2" / "data" / "resolved_config.ini"));
}

TEST_F(CliPipeline, ScaleFourKeepsEightChannels) {
  ASSERT_EQ(cli("preprocess --scale 4 " + common(out_)), 0);
  EXPECT_EQ(load_epoch_set(out_ / "scale4" / "data" / "test_lr").channels(), 8u);
  EXPECT_EQ(load_epoch_set(out_ / "scale4" / "data" / "test_hr").channels(), 24u);
}

TEST_F(CliPipeline, PretrainWritesCheckpointAndLossCsv) {
  ASSERT_EQ(cli("pretrain --epochs 1 --batch 64 " + common(out_)), 0);
  auto dir = out_ / "scale2" / "pretrain";
  EXPECT_TRUE(fs::exists(dir / "checkpoint" / "checkpoint.json"));
  auto hist = LossHistory::from_csv(io::read_text(dir / "loss_history.csv"));
  auto n = load_epoch_set(out_ / "scale2" / "data" / "train_lr").size();
  EXPECT_EQ(hist.records.size(), (n + 63) / 64);
  EXPECT_TRUE(fs::exists(dir / "best" / "generator.json"));
  EXPECT_EQ(io::read_json(dir / "best" / "best.json").at("epoch").get<std::size_t>(), 1u);
  RunConfig resolved;
  resolved.load_text(io::read_text(dir / "resolved_config.ini"));
  EXPECT_EQ(resolved.get("run.seed"), "11");
  EXPECT_EQ(resolved.get("train.pretrain_epochs"), "1");
}

TEST_F(CliPipeline, FlagsOverrideConfigFile) {
  auto other = temp_root() / "flags";
  ASSERT_EQ(cli("synth --seed 99 --set synth.n_samples=1024 " + common(other)), 0);
  RunConfig resolved;
  resolved.load_text(io::read_text(other / "raw" / "resolved_config.ini"));
  EXPECT_EQ(resolved.get("run.seed"), "99");
  EXPECT_EQ(resolved.get("synth.n_samples"), "1024");
  EXPECT_EQ(load_recording(other / "raw" / "S01.csv").length(), 1024u);
}

TEST_F(CliPipeline, ResumeMatchesUninterruptedRun) {
  auto a = temp_root() / "resume_a", b = temp_root() / "resume_b";
  copy_prepared(out_, a);
  copy_prepared(out_, b);
  ASSERT_EQ(cli("pretrain --epochs 2 " + common(a)), 0);
  ASSERT_EQ(cli("pretrain --epochs 1 " + common(b)), 0);
  ASSERT_EQ(cli("pretrain --epochs 2 --resume " + common(b)), 0);
  for (auto f : {"generator.bin", "generator_adam.bin", "history.csv", "checkpoint.json"})
    EXPECT_EQ(io::read_text(a / "scale2" / "pretrain" / "checkpoint" / f),
              io::read_text(b / "scale2" / "pretrain" / "checkpoint" / f))
        << f;
}

TEST_F(CliPipeline, FullPipelineAndReport) {
  auto base = common(out_);
  for (auto c : {"baseline", "pretrain", "gan-train", "sr-infer", "features", "train-clf", "evaluate", "report"})
    ASSERT_EQ(cli(std::string(c) + " " + base), 0) << c;
  auto md = io::read_text(out_ / "report" / "report.md");
  EXPECT_NE(md.find("| Dataset | Scale | Bicubic MSE | Bicubic MAE | WGAN MSE | WGAN MAE |"), std::string::npos);
  EXPECT_NE(md.find("| Scale | Metric | Class | HR | WGAN |"), std::string::npos);
  auto recs = parse_metrics_csv(io::read_text(out_ / "scale2" / "eval" / "sr_metrics.csv"));
  EXPECT_EQ(recs.size(), 4u);
  auto feats = read_feature_csv(out_ / "scale2" / "features" / "test_wgan.csv");
  EXPECT_EQ(feats.X.cols(), 96);
  auto gan = read_checkpoint_manifest(out_ / "scale2" / "gan" / "checkpoint");
  EXPECT_EQ(gan.at("discriminator_steps").get<std::size_t>(), gan.at("generator_steps").get<std::size_t>() / 3);
}

// -------------------------------------------------------------- exit codes

TEST_F(CliPipeline, MissingInputExitsTwo) {
  auto empty = temp_root() / "empty";
  fs::create_directories(empty);
  EXPECT_EQ(cli("preprocess --data-dir " + empty.string() + " " + common(empty)), 2);
  EXPECT_EQ(cli("gan-train " + common(empty)), 2);
  EXPECT_EQ(cli("report " + common(empty)), 2);
  EXPECT_EQ(cli("synth --config /nonexistent.ini --out-dir " + empty.string()), 2);
}

TEST_F(CliPipeline, ConfigErrorsExitThree) {
  auto bad = temp_root() / "bad.ini";
  io::write_text(bad, "[train]\nwhatever = 1\n");
  EXPECT_EQ(cli("synth --config " + bad.string() + " --out-dir " + (temp_root() / "x").string()), 3);
  EXPECT_EQ(cli("pretrain --set train.batch_size=0 " + common(out_)), 3);
  EXPECT_EQ(cli("synth " + common(temp_root() / "x"), "EEGSR_THREADS=zero"), 3);
  EXPECT_EQ(cli("frobnicate " + common(out_)), 3);
}

TEST_F(CliPipeline, DivergenceExitsFour) {
  auto d = temp_root() / "nan";
  copy_prepared(out_, d);
  EXPECT_EQ(cli("pretrain --epochs 3 --set train.lr=1e300 " + common(d)), 4);
}

TEST_F(CliPipeline, ThreadCapIsAccepted) {
  EXPECT_EQ(cli("baseline " + common(out_), "EEGSR_THREADS=1"), 0);
}
