#include "ddgan/config.hpp"
#include "ddgan/errors.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace ddgan;
namespace fs = std::filesystem;

namespace {

ConfigFile parse(const std::string& text) {
  ConfigFile f;
  std::istringstream is(text);
  f.merge(is, "<test>");
  return f;
}

std::string config_error_key(const std::string& text) {
  try {
    parse(text).resolve();
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<no error>";
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("ddgan_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(DDGAN_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// A model small enough to train for a few steps in well under a second.
constexpr const char* kTinyConfig = R"(
[model]
base_resolution = 4
levels = 2
z_dim = 8
residual_depth = 1
g_channels = 8
d_channels = 4
d_max_channels = 8
level_channels = 4
[train]
steps = 4
batch_size = 4
log_every = 2
eval_samples = 8
[data]
counts = 8,0,0
resolution = 8
)";

}  // namespace

TEST(Config, DefaultsResolve) {
  const auto cfg = ConfigFile().resolve();
  EXPECT_EQ(cfg.model, "ddgan-up");
  EXPECT_EQ(cfg.spec.top_resolution(), 64);
  EXPECT_EQ(cfg.data.counts, (ClassCounts{500, 150, 100}));
  EXPECT_EQ(cfg.eval.n_samples, 2000);
  EXPECT_EQ(cfg.eval.bins, 256);
  EXPECT_EQ(cfg.usecase.classifier_train.epochs, 30);
  EXPECT_DOUBLE_EQ(cfg.usecase.reduce_fraction, 0.12);
}

TEST(Config, ParsesSectionsAndComments) {
  const auto f = parse("# header\n[train]\nbatch_size = 32 ; trailing\n\n[model]\n  kind=lapgan  \nlevels = 4\nlevel_channels = 16\n");
  EXPECT_EQ(f.get("train", "batch_size"), "32");
  const auto cfg = f.resolve();
  EXPECT_EQ(cfg.train.batch_size, 32);
  EXPECT_EQ(cfg.model, "lapgan");
  EXPECT_EQ(cfg.spec.levels, 4);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(parse("[train]\nbatchsize = 3\n"), ConfigError);
  EXPECT_THROW(parse("[optimizer]\nlr = 3\n"), ConfigError);
  EXPECT_THROW(parse("steps = 3\n"), ConfigError);  // key outside a section
  EXPECT_THROW(parse("[train]\nsteps 3\n"), ConfigError);
  ConfigFile f;
  EXPECT_THROW(f.set("model", "depth", "2"), ConfigError);
}

TEST(Config, InvalidValuesNameTheKey) {
  EXPECT_EQ(config_error_key("[train]\nbatch_size = 0\n"), "train.batch_size");
  EXPECT_EQ(config_error_key("[train]\nlr_g = fast\n"), "train.lr_g");
  EXPECT_EQ(config_error_key("[model]\nkind = biggan\n"), "model.kind");
  EXPECT_EQ(config_error_key("[data]\ncounts = 1,2\n"), "data.counts");
  EXPECT_EQ(config_error_key("[train]\nloss = hinge\n"), "train.loss");
  EXPECT_EQ(config_error_key("[model]\nlevels = 4\n"), "model.level_channels");
  EXPECT_EQ(config_error_key("[model]\nbase_resolution = 12\n"), "model.base_resolution");
}

TEST(Config, DeconvOnlyForDdgan) {
  EXPECT_THROW(parse("[model]\nkind = lapgan\nupsample_mode = deconv\n").resolve(), ConfigError);
  EXPECT_NO_THROW(parse("[model]\nkind = ddgan-deconv\n").resolve());
  EXPECT_EQ(parse("[model]\nkind = ddgan-deconv\n").resolve().spec.upsample_mode, UpsampleMode::deconv);
}

TEST(Config, DumpMergeRoundTrip) {
  const auto f = parse("[model]\nkind = lapgan\n[usecase]\narms = B_full,lapgan\n[data]\nclass = melanoma\n");
  const auto dumped = f.dump();
  const auto g = parse(dumped);
  EXPECT_EQ(g.dump(), dumped);
  EXPECT_EQ(g.get("usecase", "arms"), "B_full,lapgan");
  EXPECT_EQ(g.get("data", "class"), "melanoma");
}

TEST(Config, MissingFile) {
  try {
    ConfigFile::load("/nonexistent/run.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "config");
  }
}

TEST(Cli, MissingConfigExitsTwo) {
  const auto dir = scratch("missing");
  EXPECT_EQ(run_cli("train --model ddgan-up --config /nonexistent/x.cfg --out " + (dir / "run").string(), dir / "log"), 2);
}

TEST(Cli, UsageErrorsExitTwo) {
  const auto dir = scratch("usage");
  EXPECT_EQ(run_cli("", dir / "log"), 2);
  EXPECT_EQ(run_cli("train --model stylegan --out " + dir.string(), dir / "log"), 2);
  EXPECT_EQ(run_cli("sample --count 1", dir / "log"), 2);
  fs::remove_all(dir);
}

TEST(Cli, BadConfigValueNamesKey) {
  const auto dir = scratch("badkey");
  std::ofstream(dir / "bad.cfg") << "[train]\nbatch_size = -4\n";
  EXPECT_EQ(run_cli("train --model dcgan --config " + (dir / "bad.cfg").string() + " --out " + (dir / "run").string(),
                    dir / "log"),
            2);
  EXPECT_NE(slurp(dir / "log").find("train.batch_size"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, GradcheckPasses) {
  const auto dir = scratch("grad");
  EXPECT_EQ(run_cli("gradcheck", dir / "log"), 0);
  EXPECT_NE(slurp(dir / "log").find(" 0 failed"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, TrainSampleEval) {
  const auto dir = scratch("pipeline");
  std::ofstream(dir / "tiny.cfg") << kTinyConfig;
  const auto cfg = (dir / "tiny.cfg").string();
  for (const char* run : {"run1", "run2"}) {
    ASSERT_EQ(run_cli("train --model ddgan-up --config " + cfg + " --seed 7 --out " + (dir / run).string(),
                      dir / "log"),
              0)
        << slurp(dir / "log");
  }
  EXPECT_EQ(slurp(dir / "run1" / "metrics.csv"), slurp(dir / "run2" / "metrics.csv"));
  EXPECT_TRUE(fs::exists(dir / "run1" / "final.cgan"));
  EXPECT_TRUE(fs::exists(dir / "run1" / "samples_step4.ppm"));
  // The echoed config re-runs the same experiment.
  const auto echoed = dir / "run1" / "config.cfg";
  ASSERT_TRUE(fs::exists(echoed));
  ASSERT_EQ(run_cli("train --model ddgan-up --config " + echoed.string() + " --out " + (dir / "run3").string(),
                    dir / "log"),
            0);
  EXPECT_EQ(slurp(dir / "run1" / "metrics.csv"), slurp(dir / "run3" / "metrics.csv"));

  const auto ckpt = (dir / "run1" / "final.cgan").string();
  ASSERT_EQ(run_cli("sample --checkpoint " + ckpt + " --count 1 --out " + (dir / "one").string(), dir / "log"), 0);
  int ppms = 0;
  for (const auto& e : fs::directory_iterator(dir / "one")) ppms += e.path().extension() == ".ppm";
  EXPECT_EQ(ppms, 1);

  ASSERT_EQ(run_cli("eval --checkpoint " + ckpt + " --procedural --config " + cfg + " --n 16 --out " +
                        (dir / "eval" / "report.json").string(),
                    dir / "log"),
            0)
      << slurp(dir / "log");
  const auto report = slurp(dir / "eval" / "report.json");
  EXPECT_NE(report.find("\"js\""), std::string::npos);
  EXPECT_NE(report.find("\"emd\""), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "eval" / "report_generated_hist.csv"));

  EXPECT_EQ(run_cli("eval --checkpoint " + ckpt + " --real " + (dir / "nothing").string() + " --out " +
                        (dir / "r.json").string(),
                    dir / "log"),
            4);
  EXPECT_EQ(run_cli("sample --checkpoint " + (dir / "absent.cgan").string() + " --out " + (dir / "s").string(),
                    dir / "log"),
            4);
  fs::remove_all(dir);
}

TEST(Cli, DivergenceExitsThreeKeepingCheckpoint) {
  const auto dir = scratch("diverge");
  std::ofstream(dir / "boom.cfg") << kTinyConfig << "[train]\nsteps = 40\nlr_d = 1e5\ncheckpoint_every = 1\n";
  // A second [train] block overrides the first. With this rate step 1 completes
  // and is checkpointed; the discriminator loss goes non-finite at step 2.
  EXPECT_EQ(run_cli("train --model ddgan-up --config " + (dir / "boom.cfg").string() + " --out " + (dir / "run").string(),
                    dir / "log"),
            3)
      << slurp(dir / "log");
  EXPECT_TRUE(fs::exists(dir / "run" / "ckpt_step1.cgan"));
  EXPECT_FALSE(fs::exists(dir / "run" / "final.cgan"));
  EXPECT_TRUE(fs::exists(dir / "run" / "metrics.csv"));
  fs::remove_all(dir);
}

TEST(Cli, GenDataLayout) {
  const auto dir = scratch("gendata");
  std::ofstream(dir / "d.cfg") << "[data]\ncounts = 3,2,1\nresolution = 8\n";
  ASSERT_EQ(run_cli("gen-data --config " + (dir / "d.cfg").string() + " --out " + (dir / "ds").string(), dir / "log"), 0);
  EXPECT_TRUE(fs::exists(dir / "ds" / "manifest.csv"));
  EXPECT_TRUE(fs::exists(dir / "ds" / "keratosis"));
  EXPECT_EQ(load_dataset(dir / "ds").counts(), (ClassCounts{3, 2, 1}));
  fs::remove_all(dir);
}
