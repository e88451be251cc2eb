#include "ddgan/adam.hpp"
#include "ddgan/dataset.hpp"
#include "ddgan/errors.hpp"
#include "ddgan/losses.hpp"
#include "ddgan/metrics.hpp"
#include "ddgan/ops.hpp"
#include "ddgan/trainer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

using namespace ddgan;

namespace {

PyramidSpec tiny_spec(int base = 8, int levels = 3) {
  PyramidSpec s;
  s.base_resolution = base;
  s.levels = levels;
  s.z_dim = 16;
  s.residual_depth = 2;
  s.g_channels = 16;
  s.d_channels = 8;
  s.d_max_channels = 16;
  s.channels_per_level = {8};
  return s;
}

GanModel make(const std::string& name, PyramidSpec s, std::uint64_t seed = 1) {
  const auto choice = parse_model_name(name);
  if (choice.upsample) s.upsample_mode = *choice.upsample;
  if (choice.kind == ModelKind::dcgan) {
    s.base_resolution = s.top_resolution();
    s.levels = 1;
  }
  return GanModel(choice.kind, s, LossKind::least_squares, seed);
}

Tensorf lesion_batch(int n, int resolution, std::uint64_t seed = 0) {
  return build_dataset(Rng(seed), {n, 0, 0}, resolution).images();
}

std::map<std::string, Buffer<float>> snapshot(const GanModel& m, const std::string& prefix) {
  std::map<std::string, Buffer<float>> out;
  for (const auto& [name, t] : m.params().trainable(prefix)) out[name] = t.data();
  return out;
}

bool unchanged(const GanModel& m, const std::map<std::string, Buffer<float>>& before, const std::string& prefix) {
  for (const auto& [name, t] : m.params().trainable(prefix)) {
    if (!(t.data() == before.at(name)).all()) return false;
  }
  return true;
}

// Scalar reimplementations looping over the batch.
double brute_vanilla(const std::vector<double>& real, const std::vector<double>& fake) {
  const auto clip = [](double p) { return std::min(std::max(p, kProbabilityClamp), 1.0 - kProbabilityClamp); };
  double a = 0, b = 0;
  for (double p : real) a += std::log(clip(p));
  for (double p : fake) b += std::log(1.0 - clip(p));
  return a / static_cast<double>(real.size()) + b / static_cast<double>(fake.size());
}

double brute_lsgan_d(const std::vector<double>& real, const std::vector<double>& fake) {
  double a = 0, b = 0;
  for (double s : real) a += (s - 1) * (s - 1);
  for (double s : fake) b += s * s;
  return 0.5 * a / static_cast<double>(real.size()) + 0.5 * b / static_cast<double>(fake.size());
}

double brute_lsgan_g(const std::vector<double>& fake) {
  double a = 0;
  for (double s : fake) a += (s - 1) * (s - 1);
  return 0.5 * a / static_cast<double>(fake.size());
}

Tensord column(const std::vector<double>& v) {
  Buffer<double> b(static_cast<Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) b[static_cast<Index>(i)] = v[i];
  return Tensord({static_cast<Index>(v.size()), 1}, b);
}

}  // namespace

TEST(VanillaLoss, CoinFlipDiscriminator) {
  const auto half = Tensord::full({4, 1}, 0.5);
  EXPECT_NEAR(vanilla_value(half, half).item(), 2.0 * std::log(0.5), 1e-12);
}

TEST(VanillaLoss, PerfectDiscriminationLimit) {
  const double eps = 1e-9;
  const auto v = vanilla_value(Tensord::full({3, 1}, 1.0 - eps), Tensord::full({3, 1}, eps)).item();
  EXPECT_LE(v, 0.0);
  EXPECT_GT(v, -1e-6);
}

TEST(VanillaLoss, SymmetricBatch) {
  const auto b = column({0.3, 0.7});
  const double expected = 0.5 * (std::log(0.3) + std::log(0.7)) + 0.5 * (std::log(0.7) + std::log(0.3));
  EXPECT_NEAR(vanilla_value(b, b).item(), expected, 1e-12);
  EXPECT_NEAR(vanilla_d_loss(b, b).item(), -expected, 1e-12);
}

TEST(LsganLoss, HandValues) {
  auto ones = Tensord::full({5, 1}, 1.0), zeros = Tensord::zeros({5, 1});
  auto l = lsgan_losses(ones, zeros);
  EXPECT_EQ(l.d_loss.item(), 0.0);
  EXPECT_EQ(l.g_loss.item(), 0.5);
  l = lsgan_losses(zeros, zeros);
  EXPECT_EQ(l.d_loss.item(), 0.5);
  EXPECT_EQ(l.g_loss.item(), 0.5);
  EXPECT_EQ(lsgan_g_loss(ones).item(), 0.0);
}

TEST(Losses, AgreeWithScalarLoops) {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = static_cast<std::size_t>(1 + rng.below(9));
    std::vector<double> pr(n), pf(n), sr(n), sf(n);
    for (std::size_t i = 0; i < n; ++i) {
      pr[i] = rng.uniform();
      pf[i] = rng.uniform();
      sr[i] = rng.uniform(-3, 3);
      sf[i] = rng.uniform(-3, 3);
    }
    EXPECT_NEAR(vanilla_value(column(pr), column(pf)).item(), brute_vanilla(pr, pf), 1e-6);
    EXPECT_NEAR(lsgan_d_loss(column(sr), column(sf)).item(), brute_lsgan_d(sr, sf), 1e-6);
    EXPECT_NEAR(lsgan_g_loss(column(sf)).item(), brute_lsgan_g(sf), 1e-6);
    EXPECT_NEAR(vanilla_value(cast<float>(column(pr)), cast<float>(column(pf))).item(), brute_vanilla(pr, pf), 1e-5);
  }
}

TEST(Losses, EmptyBatchThrows) {
  EXPECT_THROW(lsgan_g_loss(Tensorf()), DimensionError);
  EXPECT_THROW(vanilla_value(Tensorf(), Tensorf::full({1, 1}, 0.5f)), DimensionError);
}

TEST(AdamTest, FirstStepFromZero) {
  auto theta = Tensorf::zeros({1}, true);
  Adam adam({{"theta", theta}}, AdamOptions{1e-3, 0.5, 0.999, 1e-8});
  sum(theta).backward();  // g = 1
  adam.step();
  // Bias-corrected moments are exactly g and g^2 after one step.
  EXPECT_NEAR(theta[0], -1e-3 / (1.0 + 1e-8), 1e-8);  // float moments
  EXPECT_EQ(theta.grad()[0], 1.0f);
  EXPECT_EQ(adam.step_count(), 1);
}

TEST(AdamTest, ZeroGradientLeavesParameter) {
  auto theta = Tensorf::full({3}, 0.25f, true);
  Adam adam({{"theta", theta}}, AdamOptions{});
  sum(scale(theta, 0.0f)).backward();
  adam.step();
  EXPECT_TRUE((theta.data() == 0.25f).all());
}

TEST(AdamTest, MissingGradientNamesParameter) {
  auto a = Tensorf::zeros({1}, true), b = Tensorf::zeros({1}, true);
  Adam adam({{"a", a}, {"b", b}}, AdamOptions{});
  sum(a).backward();
  try {
    adam.step();
    FAIL() << "expected logic_error";
  } catch (const std::logic_error& e) {
    EXPECT_NE(std::string(e.what()).find("b"), std::string::npos);
  }
}

TEST(AdamTest, Deterministic) {
  const auto run = [] {
    Rng rng(3);
    auto w = sample_normal<float>(rng, {4, 4});
    w.set_requires_grad(true);
    Adam adam({{"w", w}}, AdamOptions{});
    for (int i = 0; i < 20; ++i) {
      w.zero_grad();
      sum(square(tanh(w))).backward();
      adam.step();
    }
    return Buffer<float>(w.data());
  };
  EXPECT_TRUE((run() == run()).all());
}

TEST(TrainStep, UpdateCountsAndOrder) {
  TrainConfig cfg;
  Rng rng(0);
  auto dc = make("dcgan", tiny_spec());
  GanTrainer t1(dc, cfg);
  const auto r1 = t1.step(lesion_batch(4, 32), rng);
  EXPECT_EQ(r1.order, (std::vector<std::string>{"D0", "G"}));
  EXPECT_EQ(t1.generator_optimizer().step_count(), 1);
  EXPECT_EQ(t1.discriminator_optimizer(0).step_count(), 1);

  auto dd = make("ddgan-up", tiny_spec());
  GanTrainer t3(dd, cfg);
  const auto r3 = t3.step(lesion_batch(4, 32), rng);
  EXPECT_EQ(r3.order, (std::vector<std::string>{"D0", "D1", "D2", "G"}));
  EXPECT_EQ(r3.d_loss.size(), 3u);
  EXPECT_EQ(r3.g_loss.size(), 3u);
  EXPECT_EQ(t3.generator_optimizer().step_count(), 1);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(t3.discriminator_optimizer(k).step_count(), 1);
}

TEST(TrainStep, ResolutionMismatchThrows) {
  auto m = make("ddgan-up", tiny_spec());
  GanTrainer t(m, TrainConfig{});
  Rng rng(0);
  EXPECT_THROW(t.step(lesion_batch(2, 16), rng), DimensionError);
}

TEST(TrainStep, RealTargetsPerArchitecture) {
  const auto batch = lesion_batch(2, 32);
  const auto pyr = real_pyramid(batch, 3);
  auto lap = make("lapgan", tiny_spec());
  const auto lt = GanTrainer(lap, TrainConfig{}).real_targets(batch);
  auto dd = make("ddgan-up", tiny_spec());
  const auto dt = GanTrainer(dd, TrainConfig{}).real_targets(batch);
  ASSERT_EQ(lt.size(), 3u);
  EXPECT_TRUE((lt[0].data() == pyr.images[0].data().cast<float>()).all());
  for (std::size_t k = 1; k < 3; ++k) {
    EXPECT_TRUE((lt[k].data() == pyr.residuals[k].data().cast<float>()).all());
    EXPECT_TRUE((dt[k].data() == pyr.images[k].data().cast<float>()).all());
  }
  EXPECT_TRUE((dt[2].data() == batch.data()).all());
}

TEST(TrainStep, DiscriminatorUpdateLeavesGeneratorUntouched) {
  auto m = make("lapgan", tiny_spec());
  GanTrainer t(m, TrainConfig{});
  Rng rng(2);
  const auto targets = t.real_targets(lesion_batch(4, 32));
  const auto out = m.generator()(m.generator().sample_noise(rng, 4), Mode::train);
  const auto g_before = snapshot(m, "g.");
  const auto d_before = snapshot(m, "d.1.");
  t.discriminator_step(1, targets[1], out.residuals[1]);
  EXPECT_TRUE(unchanged(m, g_before, "g."));
  EXPECT_FALSE(unchanged(m, d_before, "d.1."));
}

TEST(TrainStep, GeneratorUpdateLeavesDiscriminatorsUntouched) {
  auto m = make("ddgan-deconv", tiny_spec());
  GanTrainer t(m, TrainConfig{});
  Rng rng(2);
  const auto out = m.generator()(m.generator().sample_noise(rng, 4), Mode::train);
  const auto d_before = snapshot(m, "d.");
  const auto g_before = snapshot(m, "g.");
  t.generator_step(out);
  EXPECT_TRUE(unchanged(m, d_before, "d."));
  EXPECT_FALSE(unchanged(m, g_before, "g."));
}

TEST(TrainStep, GradientReachesEveryLevel) {
  for (const auto* name : {"lapgan", "ddgan-up", "ddgan-deconv"}) {
    auto m = make(name, tiny_spec());
    GanTrainer t(m, TrainConfig{});
    Rng rng(4);
    const auto batch = lesion_batch(4, 32);
    for (int step = 0; step < 3; ++step) {
      t.step(batch, rng);
      for (int k = 0; k < m.levels(); ++k) {
        double norm = 0;
        for (const auto& [pname, p] : m.params().trainable(GanModel::level_prefix(true, k))) {
          ASSERT_TRUE(p.has_grad()) << pname;
          norm += p.grad().square().sum();
        }
        EXPECT_GT(norm, 0.0) << name << " level " << k << " step " << step;
      }
    }
    // Once the zero-initialized output layers have moved, every tensor sees gradient.
    for (const auto& [pname, p] : m.params().trainable("g.")) {
      EXPECT_GT(p.grad().abs().maxCoeff(), 0.0f) << name << " " << pname;
    }
  }
}

TEST(TrainStep, DiscriminatorOverfitsFrozenBatch) {
  auto m = make("ddgan-up", tiny_spec());
  TrainConfig cfg;
  cfg.lr_d = 2e-5;  // slow enough that 50 steps stay above float noise
  GanTrainer t(m, cfg);
  Rng rng(6);
  const auto targets = t.real_targets(lesion_batch(8, 32));
  const auto fake = m.sample(m.generator().sample_noise(rng, 8));
  double previous = t.discriminator_loss_value(2, targets[2], fake);
  const double initial = previous;
  for (int i = 0; i < 50; ++i) {
    t.discriminator_step(2, targets[2], fake);
    const double now = t.discriminator_loss_value(2, targets[2], fake);
    EXPECT_LT(now, previous) << "step " << i;
    previous = now;
  }
  EXPECT_LT(previous, initial);
}

TEST(TrainLoop, DeterministicAndLogged) {
  const auto images = lesion_batch(16, 16);
  TrainConfig cfg;
  cfg.steps = 6;
  cfg.batch_size = 4;
  cfg.log_every = 3;
  cfg.eval_samples = 8;
  cfg.seed = 5;
  auto a = make("lapgan", tiny_spec(4, 3));
  auto b = make("lapgan", tiny_spec(4, 3));
  const auto ra = train_gan(a, images, cfg), rb = train_gan(b, images, cfg);
  ASSERT_EQ(ra.rows.size(), 6u);  // 2 logging points x 3 levels
  for (std::size_t i = 0; i < ra.rows.size(); ++i) {
    EXPECT_EQ(ra.rows[i].step, rb.rows[i].step);
    EXPECT_EQ(ra.rows[i].d_loss, rb.rows[i].d_loss);
    EXPECT_EQ(ra.rows[i].g_loss, rb.rows[i].g_loss);
    EXPECT_EQ(ra.rows[i].js, rb.rows[i].js);
  }
  std::ostringstream ca, cb;
  write_metrics_csv(ca, ra.rows);
  write_metrics_csv(cb, rb.rows);
  EXPECT_EQ(ca.str(), cb.str());
  EXPECT_EQ(ca.str().substr(0, 33), "step,level,d_loss,g_loss,js,emd\n3");
}

TEST(TrainLoop, EpochsDetermineStepCount) {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.log_every = 1000;
  cfg.eval_samples = 4;
  auto m = make("ddgan-up", tiny_spec(4, 2));
  EXPECT_EQ(train_gan(m, lesion_batch(10, 8), cfg).steps, 4);  // 2 full batches per epoch
}

TEST(TrainLoop, DatasetSmallerThanBatchThrows) {
  TrainConfig cfg;
  cfg.batch_size = 8;
  auto m = make("ddgan-up", tiny_spec(4, 2));
  EXPECT_THROW(train_gan(m, lesion_batch(4, 8), cfg), ConfigError);
}

TEST(TrainLoop, DivergenceRaisesNumericalError) {
  TrainConfig cfg;
  cfg.steps = 20;
  cfg.batch_size = 4;
  cfg.lr_g = cfg.lr_d = 1e30;
  auto m = make("ddgan-up", tiny_spec(4, 2));
  EXPECT_THROW(train_gan(m, lesion_batch(8, 8), cfg), NumericalError);
}

TEST(TrainLoop, OverfitFourImages) {
  const auto images = lesion_batch(4, 32, 21);
  for (const auto* name : {"dcgan", "lapgan", "ddgan-up", "ddgan-deconv"}) {
    auto m = make(name, tiny_spec());
    TrainConfig cfg;
    cfg.steps = 500;
    cfg.batch_size = 4;
    cfg.log_every = 500;
    cfg.eval_samples = 32;
    cfg.seed = 1;
    const auto real = histogram(images, 256);
    const double before = compare(sample_histogram(m, 64, 256, 99), real).js;
    train_gan(m, images, cfg);
    const double after = compare(sample_histogram(m, 64, 256, 99), real).js;
    EXPECT_LT(after, before) << name;
  }
}
