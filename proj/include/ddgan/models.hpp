#ifndef DDGAN_MODELS_HPP_
#define DDGAN_MODELS_HPP_

#include "ddgan/checkpoint.hpp"
#include "ddgan/layers.hpp"
#include "ddgan/losses.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace ddgan {

enum class ModelKind { dcgan, lapgan, ddgan };
enum class UpsampleMode { nearest, bilinear, deconv };
enum class InputKind { image, residual };

std::string to_string(UpsampleMode mode);
UpsampleMode parse_upsample_mode(const std::string& text);

/// Declarative description of a generator pyramid. Level k has resolution
/// base_resolution * 2^k; level 0 is produced by the base generator.
struct PyramidSpec {
  int base_resolution = 16;
  int levels = 3;
  int z_dim = 64;
  /// Conv layers per residual block.
  int residual_depth = 3;
  UpsampleMode upsample_mode = UpsampleMode::nearest;
  /// Width of the dense projection in the base generator; halves per deconv.
  int g_channels = 64;
  /// Width of the first discriminator conv; doubles per stride-2 conv up to d_max_channels.
  int d_channels = 16;
  int d_max_channels = 128;
  /// Residual-block widths for levels 1..L-1 (one entry broadcasts).
  std::vector<int> channels_per_level = {32, 16};

  int top_resolution() const { return base_resolution << (levels - 1); }
  int level_width(int level) const;
  /// Throws ConfigError naming the offending field.
  void validate(ModelKind kind) const;
};

/// The four compared configurations by their command-line names:
/// dcgan, lapgan, ddgan-up, ddgan-deconv.
struct ModelChoice {
  ModelKind kind;
  std::optional<UpsampleMode> upsample;  // forced by ddgan-deconv
};
ModelChoice parse_model_name(const std::string& name);
std::string model_name(ModelKind kind, const PyramidSpec& spec);

/// Images (and, for LAPGAN, residuals) per level, coarsest first.
struct GeneratorOutput {
  std::vector<Tensorf> images;
  std::vector<Tensorf> residuals;  // undefined tensors where not applicable
};

/// Base generator G_0: dense projection to 4x4 followed by stride-2
/// deconvolutions, tanh output.
class BaseGenerator {
 public:
  BaseGenerator() = default;
  BaseGenerator(ParameterSet& params, const std::string& prefix, int z_dim, int resolution, int channels, Rng& rng);
  Tensorf operator()(const Tensorf& z, Mode mode) const;

 private:
  int channels_ = 0;
  Dense project_;
  BatchNorm project_bn_;
  std::vector<Deconv2d> ups_;
  std::vector<BatchNorm> up_bns_;
  Conv2d out_conv_;  // only when the base resolution is 4
};

/// [conv3x3 -> batch norm -> leaky relu(0.2)] x (depth - 1), then a 3x3 conv
/// to three channels.
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(ParameterSet& params, const std::string& prefix, Index in_channels, int width, int depth,
            bool zero_init_output, Rng& rng);
  Tensorf operator()(const Tensorf& x, Mode mode) const;

 private:
  std::vector<Conv2d> convs_;
  std::vector<BatchNorm> bns_;
  Conv2d out_;
};

/// Generator pyramid for any of the three architectures.
class GeneratorStack {
 public:
  GeneratorStack() = default;
  GeneratorStack(ParameterSet& params, ModelKind kind, const PyramidSpec& spec, Rng& rng);

  int levels() const;
  int resolution(int level) const;
  /// Noise tensors consumed per generated batch: one for DCGAN and DDGAN, one
  /// per level for LAPGAN (z_0 vector plus one spatial map per upper level).
  int noise_arity() const;
  std::vector<Tensorf> sample_noise(Rng& rng, Index batch) const;
  /// Throws std::invalid_argument unless exactly noise_arity() tensors are given.
  GeneratorOutput operator()(const std::vector<Tensorf>& noise, Mode mode) const;
  /// The level-k upsampler applied to a level k-1 image (nearest, bilinear or
  /// the learned deconvolution).
  Tensorf upsample(int level, const Tensorf& x) const;

 private:

  ModelKind kind_ = ModelKind::ddgan;
  PyramidSpec spec_;
  BaseGenerator base_;
  std::vector<ConvBlock> blocks_;  // levels 1..L-1
  std::vector<Deconv2d> learned_ups_;
};

/// Stride-2 conv tower ending in one score per image.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(ParameterSet& params, const std::string& prefix, int resolution, int channels, int max_channels,
                bool sigmoid_output, Rng& rng);
  /// N x 1 scores (probabilities when sigmoid_output).
  Tensorf operator()(const Tensorf& x) const;
  int resolution() const { return resolution_; }

 private:
  int resolution_ = 0;
  bool sigmoid_ = false;
  std::vector<Conv2d> convs_;
  std::vector<BatchNorm> bns_;  // bns_[i] follows convs_[i + 1]
  Dense head_;
};

struct DiscriminatorSet {
  std::vector<Discriminator> discriminators;
  std::vector<InputKind> input_kinds;
};

enum class ParamGroup { all, generator, discriminators };

/// A generator pyramid plus its per-level discriminators, all parameters held
/// in one named set (generator under "g.", discriminator k under "d.k.").
class GanModel {
 public:
  GanModel(ModelKind kind, PyramidSpec spec, LossKind loss, std::uint64_t seed);
  GanModel(const GanModel&) = delete;
  GanModel& operator=(const GanModel&) = delete;
  GanModel(GanModel&&) = default;
  GanModel& operator=(GanModel&&) = default;

  ModelKind kind() const { return kind_; }
  const PyramidSpec& spec() const { return spec_; }
  LossKind loss() const { return loss_; }
  std::string name() const { return model_name(kind_, spec_); }

  int levels() const { return generator_.levels(); }
  int resolution(int level) const { return generator_.resolution(level); }
  int top_resolution() const { return resolution(levels() - 1); }

  const GeneratorStack& generator() const { return generator_; }
  const DiscriminatorSet& discriminators() const { return discriminators_; }
  const Discriminator& discriminator(int level) const { return discriminators_.discriminators.at(level); }
  InputKind input_kind(int level) const { return discriminators_.input_kinds.at(level); }

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  static std::string level_prefix(bool generator, int level);

  /// Eval-mode top-level samples for the given noise (no graph recorded).
  Tensorf sample(const std::vector<Tensorf>& noise) const;

  std::vector<std::pair<std::string, std::string>> header() const;

 private:
  ModelKind kind_;
  PyramidSpec spec_;
  LossKind loss_;
  ParameterSet params_;
  GeneratorStack generator_;
  DiscriminatorSet discriminators_;
};

GanModel build_dcgan(const PyramidSpec& spec, LossKind loss = LossKind::least_squares, std::uint64_t seed = 0);
GanModel build_lapgan(const PyramidSpec& spec, LossKind loss = LossKind::least_squares, std::uint64_t seed = 0);
GanModel build_ddgan(const PyramidSpec& spec, LossKind loss = LossKind::least_squares, std::uint64_t seed = 0);

/// Trainable element count of one group.
Index param_count(const GanModel& model, ParamGroup group = ParamGroup::all);

void save_model(const GanModel& model, const std::filesystem::path& path);
GanModel model_from_checkpoint(const Checkpoint& checkpoint);
GanModel load_model(const std::filesystem::path& path);

/// Header keys echoing a PyramidSpec, in a fixed order.
std::vector<std::pair<std::string, std::string>> spec_header(const PyramidSpec& spec);
PyramidSpec spec_from_header(const Checkpoint& checkpoint);

}  // namespace ddgan

#endif  // DDGAN_MODELS_HPP_
