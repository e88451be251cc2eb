#ifndef DDGAN_DATASET_HPP_
#define DDGAN_DATASET_HPP_

#include "ddgan/lesion.hpp"
#include "ddgan/models.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace ddgan {

enum class Provenance { real, synthetic };
enum class Split { train, val };

std::string to_string(Provenance p);
std::string to_string(Split s);

struct Sample {
  Tensorf image;  // 3xRxR
  Label label = Label::benign;
  Provenance provenance = Provenance::real;
  Split split = Split::train;
};

using ClassCounts = std::array<int, kNumClasses>;  // indexed by Label

struct ExperimentDataset {
  int resolution = 0;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  ClassCounts counts() const;
  int synthetic_count() const;
  /// All images as an Nx3xRxR batch, in sample order.
  Tensorf images() const;
  std::vector<int> labels() const;
  ExperimentDataset only(Label label) const;
};

/// Exactly counts[c] procedural images of each class, all real. Sample i
/// (class-major order) is drawn from rng.split(i).
ExperimentDataset build_dataset(const Rng& rng, const ClassCounts& counts, int resolution,
                                const LesionParams& params = LesionParams::defaults());

template <typename S>
struct Pyramid {
  std::vector<Tensor<S>> images;     // coarsest first; images.back() is the input
  std::vector<Tensor<S>> residuals;  // residuals[0] undefined
};

/// I_{k-1} = downsample_avg(I_k, 2), R_k = I_k - up(I_{k-1}). Computed in
/// double so that up(I_{k-1}) + R_k reproduces I_k exactly.
Pyramid<double> real_pyramid(const Tensorf& batch, int levels, UpsampleMode mode = UpsampleMode::nearest);
/// The double pyramid rounded to float for use as training targets.
Pyramid<float> real_pyramid_f(const Tensorf& batch, int levels, UpsampleMode mode = UpsampleMode::nearest);
Tensord upsample_for_pyramid(const Tensord& x, UpsampleMode mode);

/// Stratified split: per class, llround(train_fraction * n) samples to train.
/// Throws ConfigError if some non-empty class cannot appear in both parts.
std::pair<ExperimentDataset, ExperimentDataset> split_dataset(const ExperimentDataset& ds, double train_fraction,
                                                              Rng& rng);
/// Keeps a uniformly random subset of `target_count` samples of `label`.
ExperimentDataset reduce_class(const ExperimentDataset& ds, Label label, int target_count, Rng& rng);
/// Appends generator samples of `label` until the class holds `target_count`
/// samples; added samples are flagged synthetic and tagged train.
ExperimentDataset restore_with_synthetic(const ExperimentDataset& ds, Label label, const GanModel& generator,
                                         int target_count, Rng& rng);

/// <root>/<class>/<index>.ppm plus manifest.csv (path,label,provenance,split).
void save_dataset(const ExperimentDataset& ds, const std::filesystem::path& root);
ExperimentDataset load_dataset(const std::filesystem::path& root);

/// FNV-1a over labels, provenance and pixel values; identical datasets hash equal.
std::uint64_t dataset_hash(const ExperimentDataset& ds);

}  // namespace ddgan

#endif  // DDGAN_DATASET_HPP_
