#include "ddgan/classifier.hpp"

#include "ddgan/adam.hpp"
#include "ddgan/checkpoint.hpp"
#include "ddgan/errors.hpp"
#include "ddgan/image_io.hpp"
#include "ddgan/ops.hpp"

#include <algorithm>
#include <cmath>

namespace ddgan {

namespace {

constexpr float kSlope = 0.2f;
constexpr Index kEvalChunk = 128;

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

Classifier::Classifier(const ClassifierSpec& spec, std::uint64_t seed) : spec_(spec) {
  if (spec.widths.empty()) throw ConfigError("classifier needs at least one conv block", "classifier_widths");
  if (spec.classes < 2) throw ConfigError("classifier needs at least two classes", "classes");
  Rng rng(seed);
  Index in = 3;
  for (std::size_t i = 0; i < spec.widths.size(); ++i) {
    convs_.emplace_back(params_, "c.conv" + std::to_string(i), in, spec.widths[i], 3, 2, 1, rng);
    in = spec.widths[i];
  }
  head_ = Dense(params_, "c.head", in, spec.classes, rng);
}

Tensorf Classifier::logits(const Tensorf& images) const {
  if (images.ndim() != 4 || images.dim(2) != spec_.resolution) {
    throw DimensionError("classifier", 2, "expected " + std::to_string(spec_.resolution) + "px inputs, got " +
                                              shape_string(images.shape()));
  }
  Tensorf h = images;
  for (const auto& conv : convs_) h = leaky_relu(conv(h), kSlope);
  return head_(global_avg_pool(h));
}

int argmax(std::span<const float> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

std::vector<int> Classifier::predict(const Tensorf& images) const {
  NoGradGuard guard;
  std::vector<int> out;
  const Index n = images.dim(0);
  for (Index start = 0; start < n; start += kEvalChunk) {
    const Index m = std::min(kEvalChunk, n - start);
    std::vector<std::size_t> idx(static_cast<std::size_t>(m));
    for (Index i = 0; i < m; ++i) idx[static_cast<std::size_t>(i)] = static_cast<std::size_t>(start + i);
    const auto z = logits(gather(images, idx));
    const Index k = z.dim(1);
    for (Index i = 0; i < m; ++i) {
      out.push_back(argmax(std::span<const float>(z.data().data() + i * k, static_cast<std::size_t>(k))));
    }
  }
  return out;
}

Classifier train_classifier(const ExperimentDataset& train, const ClassifierSpec& spec,
                            const ClassifierTrainOptions& options) {
  if (train.empty()) throw ConfigError("empty classifier training set", "data");
  const auto counts = train.counts();
  for (int c = 0; c < spec.classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      throw ConfigError("no training sample of class " + to_string(static_cast<Label>(c)), "data");
    }
  }
  if (options.batch_size < 1) throw ConfigError("batch_size must be >= 1", "batch_size");
  Classifier model(spec, options.seed);
  Adam adam(model.params().trainable(), AdamOptions{options.learning_rate, 0.9, 0.999, 1e-8});
  Rng order_rng = Rng(options.seed).split(1);

  const auto images = train.images();
  const auto labels = train.labels();
  const std::size_t n = labels.size();
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const auto order = permutation(order_rng, n);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(options.batch_size));
      const std::vector<std::size_t> idx(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(end));
      std::vector<int> batch_labels;
      for (auto i : idx) batch_labels.push_back(labels[i]);
      model.params().zero_grad();
      const auto loss = softmax_cross_entropy(model.logits(gather(images, idx)), std::span<const int>(batch_labels));
      if (!std::isfinite(loss.item())) throw NumericalError("non-finite classifier loss");
      loss.backward();
      adam.step();
    }
  }
  return model;
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw DimensionError("accuracy", 0, "prediction/label count mismatch");
  if (labels.empty()) throw DimensionError("accuracy", 0, "empty dataset");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double accuracy(const Classifier& classifier, const ExperimentDataset& ds) {
  const auto labels = ds.labels();
  return accuracy(classifier.predict(ds.images()), labels);
}

void save_classifier(const Classifier& classifier, const std::filesystem::path& path) {
  const auto& spec = classifier.spec();
  save_checkpoint(path,
                  {{"kind", "classifier"},
                   {"resolution", std::to_string(spec.resolution)},
                   {"widths", join(spec.widths)},
                   {"classes", std::to_string(spec.classes)}},
                  classifier.params());
}

}  // namespace ddgan
