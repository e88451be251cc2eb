#include "ddgan/trainer.hpp"

#include "ddgan/errors.hpp"
#include "ddgan/image_io.hpp"
#include "ddgan/losses.hpp"
#include "ddgan/ops.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace ddgan {

namespace {

// Streams derived from the training seed.
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kEvalStream = 3;

constexpr int kGridColumns = 4;
constexpr long kGridSamples = 16;

AdamOptions adam_options(double lr, const TrainConfig& c) { return AdamOptions{lr, c.beta1, c.beta2, 1e-8}; }

Tensorf level_input(const GanModel& model, const GeneratorOutput& out, int level) {
  const auto k = static_cast<std::size_t>(level);
  return model.input_kind(level) == InputKind::residual ? out.residuals[k] : out.images[k];
}

double checked(double v, const std::string& what) {
  if (!std::isfinite(v)) throw NumericalError("non-finite " + what);
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

GanTrainer::GanTrainer(GanModel& model, const TrainConfig& config) : model_(model), config_(config) {
  if (!config_.level_weights.empty() && static_cast<int>(config_.level_weights.size()) != model.levels()) {
    throw ConfigError("level_weights needs one entry per level (" + std::to_string(model.levels()) + ")",
                      "level_weights");
  }
  adam_g_ = Adam(model.params().trainable("g."), adam_options(config.lr_g, config));
  for (int k = 0; k < model.levels(); ++k) {
    adam_d_.emplace_back(model.params().trainable(GanModel::level_prefix(false, k)), adam_options(config.lr_d, config));
  }
}

std::vector<Tensorf> GanTrainer::real_targets(const Tensorf& batch) const {
  if (batch.ndim() != 4 || batch.dim(2) != model_.top_resolution() || batch.dim(3) != model_.top_resolution()) {
    throw DimensionError("train_step", 2,
                         "batch " + shape_string(batch.shape()) + " does not match resolution " +
                             std::to_string(model_.top_resolution()));
  }
  const int levels = model_.levels();
  // A learned upsampler has no real counterpart; residual targets only exist
  // for LAPGAN, which never uses one.
  const auto mode = model_.kind() == ModelKind::lapgan ? model_.spec().upsample_mode : UpsampleMode::nearest;
  const auto pyramid = real_pyramid_f(batch, levels, mode);
  std::vector<Tensorf> targets;
  for (int k = 0; k < levels; ++k) {
    const auto i = static_cast<std::size_t>(k);
    targets.push_back(model_.input_kind(k) == InputKind::residual ? pyramid.residuals[i] : pyramid.images[i]);
  }
  return targets;
}

double GanTrainer::discriminator_loss_value(int level, const Tensorf& real, const Tensorf& fake) const {
  NoGradGuard guard;
  const auto& d = model_.discriminator(level);
  return discriminator_loss(model_.loss(), d(real), d(fake)).item();
}

double GanTrainer::discriminator_step(int level, const Tensorf& real, const Tensorf& fake) {
  const auto& d = model_.discriminator(level);
  model_.params().zero_grad(GanModel::level_prefix(false, level));
  const auto loss = discriminator_loss(model_.loss(), d(real), d(fake.detach()));
  const double value = checked(loss.item(), "discriminator loss at level " + std::to_string(level));
  loss.backward();
  adam_d_[static_cast<std::size_t>(level)].step();
  return value;
}

StepReport GanTrainer::step(const Tensorf& batch, Rng& noise_rng) {
  const auto targets = real_targets(batch);
  const int levels = model_.levels();
  StepReport report;

  const auto noise = model_.generator().sample_noise(noise_rng, batch.dim(0));
  const auto out = model_.generator()(noise, Mode::train);

  for (int k = 0; k < levels; ++k) {
    report.d_loss.push_back(discriminator_step(k, targets[static_cast<std::size_t>(k)], level_input(model_, out, k)));
    report.order.push_back("D" + std::to_string(k));
  }

  report.g_loss = generator_step(out);
  report.order.push_back("G");
  // The generator pass also left gradients on the discriminators; they are
  // cleared before each discriminator update, so nothing leaks across steps.
  return report;
}

std::vector<double> GanTrainer::generator_step(const GeneratorOutput& out) {
  model_.params().zero_grad("g.");
  std::vector<double> losses;
  Tensorf total;
  for (int k = 0; k < model_.levels(); ++k) {
    const auto g_loss = generator_loss(model_.loss(), model_.discriminator(k)(level_input(model_, out, k)));
    losses.push_back(checked(g_loss.item(), "generator loss at level " + std::to_string(k)));
    const auto weighted =
        config_.level_weights.empty()
            ? g_loss
            : scale(g_loss, static_cast<float>(config_.level_weights[static_cast<std::size_t>(k)]));
    total = total.defined() ? add(total, weighted) : weighted;
  }
  total.backward();
  adam_g_.step();
  return losses;
}

std::vector<MetricsReport> level_metrics(const GanModel& model, const std::vector<ColorHistogram>& real_levels,
                                         long n_samples, int bins, std::uint64_t seed) {
  NoGradGuard guard;
  Rng rng(seed);
  std::vector<HistogramAccumulator> acc(static_cast<std::size_t>(model.levels()), HistogramAccumulator(bins));
  constexpr long kChunk = 64;
  for (long done = 0; done < n_samples; done += kChunk) {
    const long n = std::min(kChunk, n_samples - done);
    const auto out = model.generator()(model.generator().sample_noise(rng, n), Mode::eval);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k].add(out.images[k]);
  }
  std::vector<MetricsReport> reports;
  for (std::size_t k = 0; k < acc.size(); ++k) {
    reports.push_back(compare(acc[k].normalized(), real_levels.at(k)));
    reports.back().n_samples = n_samples;
  }
  return reports;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
  os << "step,level,d_loss,g_loss,js,emd\n";
  for (const auto& r : rows) {
    os << r.step << ',' << r.level << ',' << format_double(r.d_loss) << ',' << format_double(r.g_loss) << ','
       << format_double(r.js) << ',' << format_double(r.emd) << '\n';
  }
}

TrainResult train_gan(GanModel& model, const Tensorf& images, const TrainConfig& config,
                      const std::function<void(const MetricsRow&)>& on_row) {
  if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1", "batch_size");
  if (config.steps <= 0 && config.epochs < 1) throw ConfigError("epochs must be >= 1", "epochs");
  if (images.ndim() != 4 || images.dim(0) == 0) throw ConfigError("training dataset is empty", "data");
  const Index n = images.dim(0);
  if (n < config.batch_size) {
    throw ConfigError("dataset of " + std::to_string(n) + " images is smaller than batch_size " +
                          std::to_string(config.batch_size),
                      "batch_size");
  }
  const Index per_epoch = n / config.batch_size;
  const long total = config.steps > 0 ? config.steps : static_cast<long>(config.epochs) * per_epoch;

  GanTrainer trainer(model, config);
  const Rng root(config.seed);
  Rng data_rng = root.split(kDataStream);
  Rng noise_rng = root.split(kNoiseStream);
  const std::uint64_t eval_seed = root.split(kEvalStream).next_u64();

  // Real histograms per level, from the whole training set.
  std::vector<ColorHistogram> real_levels;
  {
    const auto pyramid = real_pyramid_f(images, model.levels());
    for (const auto& level : pyramid.images) real_levels.push_back(histogram(level, config.bins));
  }

  const bool writing = !config.out_dir.empty();
  if (writing) std::filesystem::create_directories(config.out_dir);
  const auto flush_csv = [&](const std::vector<MetricsRow>& rows) {
    if (!writing) return;
    std::ofstream csv(config.out_dir / "metrics.csv");
    if (!csv) throw IoError((config.out_dir / "metrics.csv").string(), "cannot open for writing");
    write_metrics_csv(csv, rows);
  };
  const auto save = [&](const std::filesystem::path& path, long step) {
    auto header = model.header();
    header.emplace_back("step", std::to_string(step));
    save_checkpoint(path, header, model.params());
  };

  TrainResult result;
  result.steps = total;
  result.initial = level_metrics(model, real_levels, config.eval_samples, config.bins, eval_seed).back();

  std::vector<std::size_t> order;
  Index cursor = per_epoch;  // forces a shuffle before the first batch
  for (long s = 1; s <= total; ++s) {
    if (cursor == per_epoch) {
      order = permutation(data_rng, static_cast<std::size_t>(n));
      cursor = 0;
    }
    const auto first = order.begin() + cursor * config.batch_size;
    const std::vector<std::size_t> idx(first, first + config.batch_size);
    ++cursor;

    StepReport report;
    try {
      report = trainer.step(gather(images, idx), noise_rng);
    } catch (const NumericalError&) {
      flush_csv(result.rows);
      throw;
    }

    if (s % config.log_every == 0 || s == total) {
      const auto metrics = level_metrics(model, real_levels, config.eval_samples, config.bins, eval_seed);
      for (int k = 0; k < model.levels(); ++k) {
        const auto i = static_cast<std::size_t>(k);
        result.rows.push_back(MetricsRow{s, k, report.d_loss[i], report.g_loss[i], metrics[i].js, metrics[i].emd});
        if (on_row) on_row(result.rows.back());
      }
      if (writing) {
        Rng grid_rng(eval_seed);
        const auto grid = model.sample(model.generator().sample_noise(grid_rng, kGridSamples));
        save_ppm(tile_grid(grid, kGridColumns), config.out_dir / ("samples_step" + std::to_string(s) + ".ppm"));
      }
      if (s == total) result.final = metrics.back();
    }
    if (writing && config.checkpoint_every > 0 && s % config.checkpoint_every == 0) {
      const auto path = config.out_dir / ("ckpt_step" + std::to_string(s) + ".cgan");
      save(path, s);
      result.checkpoints.push_back(path);
    }
  }
  if (total == 0) result.final = result.initial;
  flush_csv(result.rows);
  if (writing) {
    const auto path = config.out_dir / "final.cgan";
    save(path, total);
    result.checkpoints.push_back(path);
  }
  return result;
}

}  // namespace ddgan
