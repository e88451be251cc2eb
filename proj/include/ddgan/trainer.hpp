#ifndef DDGAN_TRAINER_HPP_
#define DDGAN_TRAINER_HPP_

#include "ddgan/adam.hpp"
#include "ddgan/dataset.hpp"
#include "ddgan/metrics.hpp"
#include "ddgan/models.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace ddgan {

struct TrainConfig {
  /// Total optimizer steps; 0 means epochs * (dataset size / batch_size).
  long steps = 0;
  int epochs = 200;
  int batch_size = 8;
  double lr_g = 2e-4;
  double lr_d = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  std::uint64_t seed = 0;
  /// Per-level weights of the joint generator loss; empty means all ones.
  std::vector<double> level_weights;
  /// Metric rows every log_every steps (and after the last step).
  long log_every = 50;
  /// Checkpoints every checkpoint_every steps; 0 keeps only the final one.
  long checkpoint_every = 0;
  /// Generated samples per metric evaluation.
  long eval_samples = 64;
  int bins = 256;
  /// Where checkpoints, metrics.csv and sample grids go; empty writes nothing.
  std::filesystem::path out_dir;
};

struct StepReport {
  std::vector<double> d_loss;  // per level, before the update
  std::vector<double> g_loss;  // per level, unweighted
  /// Update order within the step: "D0", "D1", ..., "G".
  std::vector<std::string> order;
};

/// One optimizer per discriminator plus one for the whole generator stack.
class GanTrainer {
 public:
  GanTrainer(GanModel& model, const TrainConfig& config);

  /// Per-level real targets of a top-resolution batch: residuals for LAPGAN
  /// levels k > 0, downsampled images otherwise.
  std::vector<Tensorf> real_targets(const Tensorf& batch) const;

  /// One D update per level on detached fakes, then one joint G update.
  StepReport step(const Tensorf& batch, Rng& noise_rng);

  /// Joint generator update from a train-mode forward pass; returns the
  /// unweighted per-level losses.
  std::vector<double> generator_step(const GeneratorOutput& out);

  /// A single update of D_level only; returns the loss before the update.
  double discriminator_step(int level, const Tensorf& real, const Tensorf& fake);
  /// D_level loss without updating anything.
  double discriminator_loss_value(int level, const Tensorf& real, const Tensorf& fake) const;

  const Adam& generator_optimizer() const { return adam_g_; }
  const Adam& discriminator_optimizer(int level) const { return adam_d_.at(static_cast<std::size_t>(level)); }

 private:
  GanModel& model_;
  TrainConfig config_;
  Adam adam_g_;
  std::vector<Adam> adam_d_;
};

struct MetricsRow {
  long step = 0;
  int level = 0;
  double d_loss = 0, g_loss = 0, js = 0, emd = 0;
};

struct TrainResult {
  std::vector<MetricsRow> rows;
  long steps = 0;
  /// Top-level js/emd of eval samples before the first and after the last step.
  MetricsReport initial;
  MetricsReport final;
  std::vector<std::filesystem::path> checkpoints;
};

/// Per-level histogram comparison of eval-mode samples against the real
/// pyramid; the noise is drawn from Rng(seed).
std::vector<MetricsReport> level_metrics(const GanModel& model, const std::vector<ColorHistogram>& real_levels,
                                         long n_samples, int bins, std::uint64_t seed);

/// Shuffled-minibatch training on `images` (Nx3xRxR at the top resolution).
/// Deterministic given config.seed. Throws NumericalError on a non-finite
/// loss after flushing metrics.csv; the last checkpoint is left in place.
TrainResult train_gan(GanModel& model, const Tensorf& images, const TrainConfig& config,
                      const std::function<void(const MetricsRow&)>& on_row = {});

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows);

}  // namespace ddgan

#endif  // DDGAN_TRAINER_HPP_
