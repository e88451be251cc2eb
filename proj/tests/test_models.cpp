#include "ddgan/errors.hpp"
#include "ddgan/models.hpp"
#include "ddgan/ops.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace ddgan;

namespace {

PyramidSpec small_spec() {
  PyramidSpec s;
  s.g_channels = 16;
  s.d_channels = 8;
  s.d_max_channels = 32;
  s.channels_per_level = {8};
  return s;
}

void zero_generator_levels(GanModel& m) {
  for (auto& [name, entry] : m.params().entries()) {
    if (name.starts_with("g.") && !name.starts_with("g.0.") && entry.trainable) {
      auto t = entry.tensor;
      t.mutable_data().setZero();
    }
  }
}

std::string checkpoint_bytes(const GanModel& m) {
  std::ostringstream os;
  write_checkpoint(os, m.header(), m.params());
  return os.str();
}

bool in_unit_range(const Tensorf& t) { return (t.data() >= -1.0f).all() && (t.data() <= 1.0f).all(); }

}  // namespace

TEST(ParamCount, SingleLayers) {
  Rng rng(0);
  ParameterSet p;
  Conv2d(p, "c", 1, 1, 3, 1, 1, rng);
  EXPECT_EQ(p.count(), 10);
  ParameterSet q;
  Dense(q, "d", 64, 128, rng);
  EXPECT_EQ(q.count(), 64 * 128 + 128);
}

TEST(ParamCount, GroupsAddUp) {
  auto m = build_ddgan(small_spec());
  EXPECT_EQ(param_count(m), param_count(m, ParamGroup::generator) + param_count(m, ParamGroup::discriminators));
}

TEST(Dcgan, ShapeAndRangeAtSixtyFour) {
  PyramidSpec s;
  s.base_resolution = 64;
  s.levels = 1;
  auto m = build_dcgan(s, LossKind::least_squares, 1);
  EXPECT_EQ(s.z_dim, 64);
  Rng rng(5);
  const auto noise = m.generator().sample_noise(rng, 8);
  ASSERT_EQ(noise.size(), 1u);
  EXPECT_EQ(noise[0].shape(), (Shape{8, 64}));
  const auto out = m.generator()(noise, Mode::train);
  ASSERT_EQ(out.images.size(), 1u);
  EXPECT_EQ(out.images[0].shape(), (Shape{8, 3, 64, 64}));
  EXPECT_TRUE(in_unit_range(out.images[0]));
  EXPECT_EQ(m.discriminator(0)(out.images[0]).shape(), (Shape{8, 1}));
}

TEST(Dcgan, SameSeedSameCheckpoint) {
  EXPECT_EQ(checkpoint_bytes(build_dcgan(small_spec(), LossKind::least_squares, 9)),
            checkpoint_bytes(build_dcgan(small_spec(), LossKind::least_squares, 9)));
  EXPECT_NE(checkpoint_bytes(build_dcgan(small_spec(), LossKind::least_squares, 9)),
            checkpoint_bytes(build_dcgan(small_spec(), LossKind::least_squares, 10)));
}

TEST(Spec, RejectsBadResolutions) {
  auto s = small_spec();
  for (int r : {0, 2, 12, 24}) {
    s.base_resolution = r;
    EXPECT_THROW(build_dcgan(s), ConfigError) << r;
  }
  s = small_spec();
  s.levels = 1;
  EXPECT_THROW(build_lapgan(s), ConfigError);
  EXPECT_THROW(build_ddgan(s), ConfigError);
  s = small_spec();
  s.upsample_mode = UpsampleMode::deconv;
  EXPECT_THROW(build_lapgan(s), ConfigError);
}

TEST(ShapeLadder, EveryArchitectureEveryLevel) {
  for (const auto* name : {"lapgan", "ddgan-up", "ddgan-deconv"}) {
    const auto choice = parse_model_name(name);
    auto s = small_spec();
    if (choice.upsample) s.upsample_mode = *choice.upsample;
    GanModel m(choice.kind, s, LossKind::least_squares, 2);
    Rng rng(1);
    const auto out = m.generator()(m.generator().sample_noise(rng, 2), Mode::train);
    ASSERT_EQ(out.images.size(), 3u);
    for (int k = 0; k < 3; ++k) {
      const Index r = 16 << k;
      EXPECT_EQ(out.images[static_cast<std::size_t>(k)].shape(), (Shape{2, 3, r, r})) << name << " level " << k;
      EXPECT_TRUE(in_unit_range(out.images[static_cast<std::size_t>(k)]));
      EXPECT_EQ(m.resolution(k), r);
    }
  }
}

TEST(Lapgan, ConsumesOneNoisePerLevel) {
  auto m = build_lapgan(small_spec());
  Rng rng(0);
  const auto noise = m.generator().sample_noise(rng, 3);
  ASSERT_EQ(noise.size(), 3u);
  EXPECT_EQ(noise[0].shape(), (Shape{3, 64}));
  EXPECT_EQ(noise[1].shape(), (Shape{3, 1, 32, 32}));
  EXPECT_EQ(noise[2].shape(), (Shape{3, 1, 64, 64}));
  EXPECT_THROW(m.generator()({noise[0]}, Mode::eval), std::invalid_argument);
}

TEST(Lapgan, ZeroedLevelsRepeatNearestUpsampling) {
  auto m = build_lapgan(small_spec(), LossKind::least_squares, 4);
  zero_generator_levels(m);
  Rng rng(2);
  const auto out = m.generator()(m.generator().sample_noise(rng, 2), Mode::eval);
  const auto expected = upsample_nearest(upsample_nearest(out.images[0], 2), 2);
  EXPECT_TRUE((out.images[2].data() == expected.data()).all());
  for (int k = 1; k < 3; ++k) EXPECT_TRUE((out.residuals[static_cast<std::size_t>(k)].data() == 0.0f).all());
}

TEST(Lapgan, ResidualDecompositionIsExact) {
  auto m = build_lapgan(small_spec(), LossKind::least_squares, 6);
  Rng rng(3);
  const auto out = m.generator()(m.generator().sample_noise(rng, 2), Mode::train);
  for (std::size_t k = 1; k < 3; ++k) {
    const auto diff = sub(out.images[k], upsample_nearest(out.images[k - 1], 2));
    EXPECT_TRUE((diff.data() == out.residuals[k].data()).all()) << "level " << k;
    EXPECT_GT(out.residuals[k].data().abs().maxCoeff(), 0.0f);
  }
  EXPECT_EQ(m.input_kind(0), InputKind::image);
  EXPECT_EQ(m.input_kind(1), InputKind::residual);
}

TEST(Ddgan, ConsumesSingleNoise) {
  for (int levels : {2, 3, 4}) {
    auto s = small_spec();
    s.base_resolution = 8;
    s.levels = levels;
    auto m = build_ddgan(s);
    Rng rng(0);
    EXPECT_EQ(m.generator().sample_noise(rng, 2).size(), 1u);
    EXPECT_EQ(m.generator().noise_arity(), 1);
    for (int k = 0; k < levels; ++k) EXPECT_EQ(m.input_kind(k), InputKind::image);
  }
}

TEST(Ddgan, IdentityAtInitialization) {
  auto m = build_ddgan(small_spec(), LossKind::least_squares, 8);
  Rng rng(1);
  const auto out = m.generator()(m.generator().sample_noise(rng, 2), Mode::eval);
  for (std::size_t k = 1; k < 3; ++k) {
    EXPECT_TRUE((out.images[k].data() == upsample_nearest(out.images[k - 1], 2).data()).all()) << k;
  }
}

TEST(Ddgan, DeconvVariantLearnsTheUpsampler) {
  auto s = small_spec();
  s.upsample_mode = UpsampleMode::deconv;
  auto m = build_ddgan(s);
  EXPECT_TRUE(m.params().contains("g.1.upsample.weight"));
  EXPECT_EQ(m.params().at("g.1.upsample.weight").shape(), (Shape{3, 3, 4, 4}));
  EXPECT_EQ(m.name(), "ddgan-deconv");
  EXPECT_FALSE(build_ddgan(small_spec()).params().contains("g.1.upsample.weight"));
}

TEST(Discriminator, OutputKindFollowsLoss) {
  auto vanilla = build_ddgan(small_spec(), LossKind::vanilla, 1);
  auto lsgan = build_ddgan(small_spec(), LossKind::least_squares, 1);
  Rng rng(0);
  auto x = sample_uniform<float>(rng, {4, 3, 64, 64}, -1, 1);
  const auto p = vanilla.discriminator(2)(x);
  EXPECT_TRUE((p.data() > 0.0f).all() && (p.data() < 1.0f).all());
  EXPECT_EQ(lsgan.discriminator(2)(x).op(), "dense");
  EXPECT_THROW(lsgan.discriminator(1)(x), DimensionError);
}

TEST(Parity, DefaultLapganAndDdganWithinTwoPercent) {
  const PyramidSpec s;
  const auto lap = build_lapgan(s), dd = build_ddgan(s);
  for (auto group : {ParamGroup::all, ParamGroup::generator}) {
    const double a = static_cast<double>(param_count(lap, group)), b = static_cast<double>(param_count(dd, group));
    EXPECT_LE(std::abs(a - b) / std::max(a, b), 0.02);
  }
  auto sd = s;
  sd.upsample_mode = UpsampleMode::deconv;
  const double c = static_cast<double>(param_count(build_ddgan(sd))), a = static_cast<double>(param_count(lap));
  EXPECT_LE(std::abs(a - c) / std::max(a, c), 0.02);
}

TEST(ModelNames, ParseAndPrint) {
  EXPECT_EQ(parse_model_name("ddgan-deconv").upsample, UpsampleMode::deconv);
  EXPECT_EQ(parse_model_name("lapgan").kind, ModelKind::lapgan);
  EXPECT_THROW(parse_model_name("progan"), ConfigError);
}
