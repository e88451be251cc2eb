#ifndef DDGAN_USECASE_HPP_
#define DDGAN_USECASE_HPP_

#include "ddgan/classifier.hpp"
#include "ddgan/dataset.hpp"
#include "ddgan/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace ddgan {

inline constexpr const char* kFullArm = "B_full";
inline constexpr const char* kImbalancedArm = "B_imb";

struct UseCaseConfig {
  ClassCounts counts = {500, 150, 100};  // benign, melanoma, keratosis
  int resolution = 64;
  Label minority = Label::melanoma;
  double train_fraction = 0.6;
  /// The minority class keeps llround(reduce_fraction * n) of its n training samples.
  double reduce_fraction = 0.12;
  /// Absolute minority target after reduction; overrides reduce_fraction when > 0.
  int reduce_to = 0;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  /// B_full, B_imb, and any generator model names (dcgan, lapgan, ddgan-up,
  /// ddgan-deconv); each generator arm restores the minority class with samples
  /// from <checkpoint_dir>/<name>.cgan.
  std::vector<std::string> arms = {kFullArm, kImbalancedArm, "ddgan-up"};
  std::filesystem::path checkpoint_dir;
  /// Train missing generator checkpoints on minority-class images instead of
  /// skipping the arm.
  bool train_generators = false;
  PyramidSpec gan_spec;
  TrainConfig gan_train;

  ClassifierSpec classifier;
  ClassifierTrainOptions classifier_train;
};

struct ArmResult {
  std::string arm;
  std::uint64_t seed = 0;
  bool skipped = false;
  std::string skip_reason;
  double train_acc = 0.0;
  double val_acc = 0.0;
  ClassCounts train_counts{};
  int synthetic_added = 0;
  std::size_t val_size = 0;
  std::string val_hash;
};

struct UseCaseReport {
  std::string minority;
  int minority_full = 0;     // per seed, identical across seeds
  int minority_reduced = 0;
  std::vector<ArmResult> arms;

  const ArmResult* find(const std::string& arm, std::uint64_t seed) const;
  std::string to_json() const;
  void write_csv(std::ostream& os) const;
};

/// Runs every arm for every seed. Within a seed all arms share the split,
/// the validation set and the classifier initialization seed.
UseCaseReport run_use_case(const UseCaseConfig& config,
                           const std::function<void(const std::string&)>& log = {});

/// Minority-class images used to fit the generator arms: a fresh procedural
/// draw, disjoint from every experiment split.
ExperimentDataset generator_training_set(const UseCaseConfig& config);

}  // namespace ddgan

#endif  // DDGAN_USECASE_HPP_
