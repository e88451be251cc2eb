#include "ddgan/usecase.hpp"

#include "ddgan/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <ostream>

namespace ddgan {

namespace {

// Streams of the per-seed generator.
constexpr std::uint64_t kDatasetStream = 0;
constexpr std::uint64_t kSplitStream = 1;
constexpr std::uint64_t kReduceStream = 2;
constexpr std::uint64_t kRestoreStream = 3;
constexpr std::uint64_t kClassifierStream = 4;
// Generator training data comes from its own root seed.
constexpr std::uint64_t kGeneratorDataSeed = 0x6d656c616e6f6d61ull;

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

bool is_generator_arm(const std::string& arm) { return arm != kFullArm && arm != kImbalancedArm; }

void emit(const std::function<void(const std::string&)>& log, const std::string& msg) {
  if (log) log(msg);
}

}  // namespace

ExperimentDataset generator_training_set(const UseCaseConfig& config) {
  ClassCounts counts{};
  counts[static_cast<std::size_t>(config.minority)] = config.counts[static_cast<std::size_t>(config.minority)];
  return build_dataset(Rng(kGeneratorDataSeed), counts, config.resolution);
}

const ArmResult* UseCaseReport::find(const std::string& arm, std::uint64_t seed) const {
  for (const auto& a : arms) {
    if (a.arm == arm && a.seed == seed) return &a;
  }
  return nullptr;
}

std::string UseCaseReport::to_json() const {
  nlohmann::ordered_json j;
  j["minority"] = minority;
  j["minority_full"] = minority_full;
  j["minority_reduced"] = minority_reduced;
  j["arms"] = nlohmann::ordered_json::array();
  for (const auto& a : arms) {
    nlohmann::ordered_json o;
    o["arm"] = a.arm;
    o["seed"] = a.seed;
    if (a.skipped) {
      o["skipped"] = true;
      o["skip_reason"] = a.skip_reason;
    } else {
      o["train_acc"] = a.train_acc;
      o["val_acc"] = a.val_acc;
      for (int c = 0; c < kNumClasses; ++c) {
        o["train_counts"][to_string(static_cast<Label>(c))] = a.train_counts[static_cast<std::size_t>(c)];
      }
      o["synthetic_added"] = a.synthetic_added;
      o["val_size"] = a.val_size;
      o["val_hash"] = a.val_hash;
    }
    j["arms"].push_back(std::move(o));
  }
  return j.dump(2);
}

void UseCaseReport::write_csv(std::ostream& os) const {
  os << "arm,seed,skipped,train_acc,val_acc,train_benign,train_melanoma,train_keratosis,synthetic_added,val_hash\n";
  char buf[64];
  for (const auto& a : arms) {
    os << a.arm << ',' << a.seed << ',' << (a.skipped ? 1 : 0) << ',';
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", a.train_acc, a.val_acc);
    os << buf << ',' << a.train_counts[0] << ',' << a.train_counts[1] << ',' << a.train_counts[2] << ','
       << a.synthetic_added << ',' << a.val_hash << '\n';
  }
}

UseCaseReport run_use_case(const UseCaseConfig& config, const std::function<void(const std::string&)>& log) {
  if (config.seeds.empty()) throw ConfigError("no use-case seeds", "seeds");
  if (!(config.reduce_fraction > 0.0 && config.reduce_fraction <= 1.0)) {
    throw ConfigError("reduce_fraction must lie in (0, 1]", "reduce_fraction");
  }
  UseCaseReport report;
  report.minority = to_string(config.minority);
  const auto m = static_cast<std::size_t>(config.minority);

  // Generator arms: load, or train once on minority-class images, or skip.
  std::map<std::string, std::unique_ptr<GanModel>> generators;
  std::map<std::string, std::string> skipped;
  for (const auto& arm : config.arms) {
    if (!is_generator_arm(arm)) continue;
    const auto choice = parse_model_name(arm);
    const auto path = config.checkpoint_dir / (arm + ".cgan");
    if (!config.checkpoint_dir.empty() && std::filesystem::exists(path)) {
      generators[arm] = std::make_unique<GanModel>(load_model(path));
      emit(log, "loaded generator " + path.string());
    } else if (config.train_generators) {
      auto spec = config.gan_spec;
      if (choice.upsample) spec.upsample_mode = *choice.upsample;
      spec.base_resolution = config.resolution >> (spec.levels - 1);
      if (choice.kind == ModelKind::dcgan) spec.base_resolution = config.resolution;
      if (choice.kind == ModelKind::dcgan) spec.levels = 1;
      auto model = std::make_unique<GanModel>(choice.kind, spec, LossKind::least_squares, config.gan_train.seed);
      emit(log, "training generator " + arm + " on " +
                    std::to_string(config.counts[m]) + " " + report.minority + " images");
      TrainConfig tc = config.gan_train;
      tc.out_dir.clear();
      train_gan(*model, generator_training_set(config).images(), tc);
      if (!config.checkpoint_dir.empty()) {
        std::filesystem::create_directories(config.checkpoint_dir);
        save_model(*model, path);
      }
      generators[arm] = std::move(model);
    } else {
      skipped[arm] = "missing checkpoint " + path.string();
    }
    if (generators.count(arm) && generators[arm]->top_resolution() != config.resolution) {
      throw DimensionError("run_use_case", 2, arm + " generator resolution does not match the dataset");
    }
  }

  for (const auto seed : config.seeds) {
    const Rng root(seed);
    const auto ds = build_dataset(root.split(kDatasetStream), config.counts, config.resolution);
    Rng split_rng = root.split(kSplitStream);
    const auto [full, val] = split_dataset(ds, config.train_fraction, split_rng);
    const int n_minority = full.counts()[m];
    const int reduced = config.reduce_to > 0 ? config.reduce_to
                                             : static_cast<int>(std::lround(config.reduce_fraction * n_minority));
    Rng reduce_rng = root.split(kReduceStream);
    const auto imbalanced = reduce_class(full, config.minority, reduced, reduce_rng);
    report.minority_full = n_minority;
    report.minority_reduced = reduced;
    const auto val_hash = hex(dataset_hash(val));

    ClassifierTrainOptions options = config.classifier_train;
    options.seed = root.split(kClassifierStream).next_u64();
    auto classifier_spec = config.classifier;
    classifier_spec.resolution = config.resolution;

    for (const auto& arm : config.arms) {
      ArmResult result;
      result.arm = arm;
      result.seed = seed;
      if (skipped.count(arm)) {
        result.skipped = true;
        result.skip_reason = skipped[arm];
        emit(log, "seed " + std::to_string(seed) + " " + arm + ": skipped (" + result.skip_reason + ")");
        report.arms.push_back(std::move(result));
        continue;
      }
      ExperimentDataset train;
      if (arm == kFullArm) {
        train = full;
      } else if (arm == kImbalancedArm) {
        train = imbalanced;
      } else {
        Rng restore_rng = root.split(kRestoreStream);
        train = restore_with_synthetic(imbalanced, config.minority, *generators.at(arm), n_minority, restore_rng);
      }
      const auto classifier = train_classifier(train, classifier_spec, options);
      result.train_acc = accuracy(classifier, train);
      result.val_acc = accuracy(classifier, val);
      result.train_counts = train.counts();
      result.synthetic_added = train.synthetic_count();
      result.val_size = val.size();
      result.val_hash = val_hash;
      char buf[96];
      std::snprintf(buf, sizeof buf, "train_acc %.4f val_acc %.4f", result.train_acc, result.val_acc);
      emit(log, "seed " + std::to_string(seed) + " " + arm + ": " + buf);
      report.arms.push_back(std::move(result));
    }
  }
  return report;
}

}  // namespace ddgan
