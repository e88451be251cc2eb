#ifndef DDGAN_CLASSIFIER_HPP_
#define DDGAN_CLASSIFIER_HPP_

#include "ddgan/dataset.hpp"
#include "ddgan/layers.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ddgan {

/// Stride-2 conv blocks, global average pooling, dense head to the logits.
struct ClassifierSpec {
  int resolution = 64;
  std::vector<int> widths = {8, 16, 32};
  int classes = kNumClasses;
};

struct ClassifierTrainOptions {
  int epochs = 30;
  int batch_size = 16;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

class Classifier {
 public:
  Classifier(const ClassifierSpec& spec, std::uint64_t seed);
  Classifier(const Classifier&) = delete;
  Classifier& operator=(const Classifier&) = delete;
  Classifier(Classifier&&) = default;
  Classifier& operator=(Classifier&&) = default;

  /// Nx3xRxR -> NxK.
  Tensorf logits(const Tensorf& images) const;
  std::vector<int> predict(const Tensorf& images) const;
  const ClassifierSpec& spec() const { return spec_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

 private:
  ClassifierSpec spec_;
  ParameterSet params_;
  std::vector<Conv2d> convs_;
  Dense head_;
};

/// Index of the largest entry; ties go to the lowest index.
int argmax(std::span<const float> values);

/// Mini-batch Adam on softmax cross-entropy. Initialization comes from
/// options.seed, batch order from a separate stream of it.
/// Throws ConfigError when a class has no training sample.
Classifier train_classifier(const ExperimentDataset& train, const ClassifierSpec& spec,
                            const ClassifierTrainOptions& options);

double accuracy(std::span<const int> predictions, std::span<const int> labels);
double accuracy(const Classifier& classifier, const ExperimentDataset& ds);

void save_classifier(const Classifier& classifier, const std::filesystem::path& path);

}  // namespace ddgan

#endif  // DDGAN_CLASSIFIER_HPP_
