#include "ddgan/models.hpp"

#include "ddgan/errors.hpp"

#include <algorithm>
#include <sstream>

namespace ddgan {

namespace {

constexpr float kGeneratorSlope = 0.2f;
constexpr float kDiscriminatorSlope = 0.2f;

bool is_pow2(int v) { return v > 0 && (v & (v - 1)) == 0; }

int log2_int(int v) {
  int k = 0;
  while ((1 << k) < v) ++k;
  return k;
}

std::string join(const std::vector<int>& values) {
  std::ostringstream os;
  for (std::size_t i = 0; i < values.size(); ++i) os << (i ? "," : "") << values[i];
  return os.str();
}

std::vector<int> parse_int_list(const std::string& text, const std::string& key) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("invalid integer list '" + text + "'", key);
    }
  }
  return out;
}

int header_int(const Checkpoint& ckpt, const std::string& key) {
  const auto& v = ckpt.header_value(key);
  try {
    return std::stoi(v);
  } catch (const std::exception&) {
    throw IoError("<checkpoint>", "header key " + key + " is not an integer: " + v);
  }
}

}  // namespace

std::string to_string(UpsampleMode mode) {
  switch (mode) {
    case UpsampleMode::nearest: return "nearest";
    case UpsampleMode::bilinear: return "bilinear";
    case UpsampleMode::deconv: return "deconv";
  }
  return "nearest";
}

UpsampleMode parse_upsample_mode(const std::string& text) {
  if (text == "nearest") return UpsampleMode::nearest;
  if (text == "bilinear") return UpsampleMode::bilinear;
  if (text == "deconv") return UpsampleMode::deconv;
  throw ConfigError("unknown upsample mode '" + text + "'", "upsample_mode");
}

int PyramidSpec::level_width(int level) const {
  if (channels_per_level.size() == 1) return channels_per_level.front();
  return channels_per_level.at(static_cast<std::size_t>(level - 1));
}

void PyramidSpec::validate(ModelKind kind) const {
  if (base_resolution < 4 || base_resolution % 4 != 0 || !is_pow2(base_resolution / 4)) {
    throw ConfigError("base_resolution " + std::to_string(base_resolution) + " is not a power-of-two multiple of 4",
                      "base_resolution");
  }
  if (levels < 1) throw ConfigError("levels must be >= 1", "levels");
  if (kind != ModelKind::dcgan && levels < 2) throw ConfigError("multi-level models need levels >= 2", "levels");
  if (levels > 8) throw ConfigError("levels must be <= 8", "levels");
  if (z_dim < 1) throw ConfigError("z_dim must be positive", "z_dim");
  if (residual_depth < 1) throw ConfigError("residual_depth must be >= 1", "residual_depth");
  if (g_channels < 1) throw ConfigError("g_channels must be positive", "g_channels");
  if (d_channels < 1 || d_max_channels < d_channels) {
    throw ConfigError("need 1 <= d_channels <= d_max_channels", "d_channels");
  }
  if (kind != ModelKind::dcgan) {
    const auto n = channels_per_level.size();
    if (n != 1 && n != static_cast<std::size_t>(levels - 1)) {
      throw ConfigError("level_channels needs 1 or levels-1 entries", "level_channels");
    }
    if (std::any_of(channels_per_level.begin(), channels_per_level.end(), [](int c) { return c < 1; })) {
      throw ConfigError("level_channels entries must be positive", "level_channels");
    }
  }
  if (kind == ModelKind::lapgan && upsample_mode == UpsampleMode::deconv) {
    throw ConfigError("lapgan supports nearest or bilinear upsampling only", "upsample_mode");
  }
}

ModelChoice parse_model_name(const std::string& name) {
  if (name == "dcgan") return {ModelKind::dcgan, std::nullopt};
  if (name == "lapgan") return {ModelKind::lapgan, std::nullopt};
  if (name == "ddgan-up") return {ModelKind::ddgan, std::nullopt};
  if (name == "ddgan-deconv") return {ModelKind::ddgan, UpsampleMode::deconv};
  throw ConfigError("unknown model '" + name + "' (expected dcgan, lapgan, ddgan-up or ddgan-deconv)", "model");
}

std::string model_name(ModelKind kind, const PyramidSpec& spec) {
  switch (kind) {
    case ModelKind::dcgan: return "dcgan";
    case ModelKind::lapgan: return "lapgan";
    case ModelKind::ddgan: return spec.upsample_mode == UpsampleMode::deconv ? "ddgan-deconv" : "ddgan-up";
  }
  return "ddgan-up";
}

BaseGenerator::BaseGenerator(ParameterSet& params, const std::string& prefix, int z_dim, int resolution, int channels,
                             Rng& rng)
    : channels_(channels) {
  project_ = Dense(params, prefix + ".proj", z_dim, static_cast<Index>(channels) * 16, rng);
  project_bn_ = BatchNorm(params, prefix + ".proj_bn", channels, rng);
  const int steps = log2_int(resolution / 4);
  int width = channels;
  for (int i = 0; i < steps; ++i) {
    const bool last = i + 1 == steps;
    const int next = last ? 3 : std::max(channels >> (i + 1), 4);
    ups_.emplace_back(params, prefix + ".up" + std::to_string(i), width, next, 4, 2, 1, rng);
    if (!last) up_bns_.emplace_back(params, prefix + ".up" + std::to_string(i) + "_bn", next, rng);
    width = next;
  }
  if (steps == 0) out_conv_ = Conv2d(params, prefix + ".out", channels, 3, 3, 1, 1, rng);
}

Tensorf BaseGenerator::operator()(const Tensorf& z, Mode mode) const {
  auto h = reshape(project_(z), {z.dim(0), channels_, 4, 4});
  h = relu(project_bn_(h, mode));
  if (ups_.empty()) return tanh(out_conv_(h));
  for (std::size_t i = 0; i < ups_.size(); ++i) {
    h = ups_[i](h);
    if (i + 1 < ups_.size()) h = relu(up_bns_[i](h, mode));
  }
  return tanh(h);
}

ConvBlock::ConvBlock(ParameterSet& params, const std::string& prefix, Index in_channels, int width, int depth,
                     bool zero_init_output, Rng& rng) {
  Index channels = in_channels;
  for (int j = 0; j + 1 < depth; ++j) {
    convs_.emplace_back(params, prefix + ".conv" + std::to_string(j), channels, width, 3, 1, 1, rng);
    bns_.emplace_back(params, prefix + ".bn" + std::to_string(j), width, rng);
    channels = width;
  }
  out_ = Conv2d(params, prefix + ".out", channels, 3, 3, 1, 1, rng, zero_init_output);
}

Tensorf ConvBlock::operator()(const Tensorf& x, Mode mode) const {
  Tensorf h = x;
  for (std::size_t j = 0; j < convs_.size(); ++j) h = leaky_relu(bns_[j](convs_[j](h), mode), kGeneratorSlope);
  return out_(h);
}

GeneratorStack::GeneratorStack(ParameterSet& params, ModelKind kind, const PyramidSpec& spec, Rng& rng)
    : kind_(kind), spec_(spec) {
  spec.validate(kind);
  const int base = kind == ModelKind::dcgan ? spec.top_resolution() : spec.base_resolution;
  base_ = BaseGenerator(params, "g.0", spec.z_dim, base, spec.g_channels, rng);
  if (kind == ModelKind::dcgan) return;
  for (int k = 1; k < spec.levels; ++k) {
    const std::string prefix = "g." + std::to_string(k);
    if (kind == ModelKind::ddgan && spec.upsample_mode == UpsampleMode::deconv) {
      learned_ups_.emplace_back(params, prefix + ".upsample", 3, 3, 4, 2, 1, rng);
    }
    const Index in_channels = kind == ModelKind::lapgan ? 4 : 3;
    // DDGAN blocks start as the identity on the upsampled image.
    blocks_.emplace_back(params, prefix + ".block", in_channels, spec.level_width(k), spec.residual_depth,
                         kind == ModelKind::ddgan, rng);
  }
}

int GeneratorStack::levels() const { return kind_ == ModelKind::dcgan ? 1 : spec_.levels; }

int GeneratorStack::resolution(int level) const {
  if (kind_ == ModelKind::dcgan) return spec_.top_resolution();
  return spec_.base_resolution << level;
}

int GeneratorStack::noise_arity() const { return kind_ == ModelKind::lapgan ? spec_.levels : 1; }

std::vector<Tensorf> GeneratorStack::sample_noise(Rng& rng, Index batch) const {
  std::vector<Tensorf> noise;
  noise.push_back(sample_normal<float>(rng, {batch, spec_.z_dim}));
  if (kind_ == ModelKind::lapgan) {
    for (int k = 1; k < spec_.levels; ++k) {
      const Index r = resolution(k);
      noise.push_back(sample_normal<float>(rng, {batch, 1, r, r}));
    }
  }
  return noise;
}

Tensorf GeneratorStack::upsample(int level, const Tensorf& x) const {
  switch (spec_.upsample_mode) {
    case UpsampleMode::nearest: return upsample_nearest(x, 2);
    case UpsampleMode::bilinear: return upsample_bilinear(x);
    case UpsampleMode::deconv: return learned_ups_.at(static_cast<std::size_t>(level - 1))(x);
  }
  return upsample_nearest(x, 2);
}

GeneratorOutput GeneratorStack::operator()(const std::vector<Tensorf>& noise, Mode mode) const {
  if (static_cast<int>(noise.size()) != noise_arity()) {
    throw std::invalid_argument(model_name(kind_, spec_) + " consumes " + std::to_string(noise_arity()) +
                                " noise tensors per sample, got " + std::to_string(noise.size()));
  }
  GeneratorOutput out;
  out.images.push_back(base_(noise[0], mode));
  out.residuals.emplace_back();
  for (int k = 1; k < levels(); ++k) {
    const auto up = upsample(k, out.images.back());
    const auto& block = blocks_[static_cast<std::size_t>(k - 1)];
    if (kind_ == ModelKind::lapgan) {
      const auto r = block(concat_channels(up, noise[static_cast<std::size_t>(k)]), mode);
      const auto image = clamp(add(up, r), -1.0f, 1.0f);
      // The emitted residual is what actually separates the level image from
      // its upsampled parent, including the effect of the range clamp.
      out.residuals.push_back(sub(image, up));
      out.images.push_back(image);
    } else {
      out.images.push_back(clamp(add(up, block(up, mode)), -1.0f, 1.0f));
      out.residuals.emplace_back();
    }
  }
  return out;
}

Discriminator::Discriminator(ParameterSet& params, const std::string& prefix, int resolution, int channels,
                             int max_channels, bool sigmoid_output, Rng& rng)
    : resolution_(resolution), sigmoid_(sigmoid_output) {
  int res = resolution;
  int width = channels;
  if (res >= 8) {
    convs_.emplace_back(params, prefix + ".conv0", 3, width, 4, 2, 1, rng);
    res /= 2;
  } else {
    convs_.emplace_back(params, prefix + ".conv0", 3, width, 3, 1, 1, rng);
  }
  for (int j = 1; res > 4; ++j) {
    const int next = std::min(width * 2, max_channels);
    convs_.emplace_back(params, prefix + ".conv" + std::to_string(j), width, next, 4, 2, 1, rng);
    bns_.emplace_back(params, prefix + ".bn" + std::to_string(j), next, rng);
    width = next;
    res /= 2;
  }
  head_ = Dense(params, prefix + ".head", static_cast<Index>(width) * res * res, 1, rng);
}

Tensorf Discriminator::operator()(const Tensorf& x) const {
  if (x.ndim() != 4 || x.dim(1) != 3) throw DimensionError("discriminator", 1, "expected Nx3xHxW input");
  if (x.dim(2) != resolution_) {
    throw DimensionError("discriminator", 2,
                         "expected resolution " + std::to_string(resolution_) + ", got " + std::to_string(x.dim(2)));
  }
  if (x.dim(3) != resolution_) throw DimensionError("discriminator", 3, "expected square input");
  auto h = leaky_relu(convs_[0](x), kDiscriminatorSlope);
  for (std::size_t j = 1; j < convs_.size(); ++j) {
    // Discriminators always normalize with the statistics of the batch they see.
    h = leaky_relu(bns_[j - 1](convs_[j](h), Mode::train), kDiscriminatorSlope);
  }
  auto score = head_(reshape(h, {h.dim(0), h.size() / h.dim(0)}));
  return sigmoid_ ? sigmoid(score) : score;
}

GanModel::GanModel(ModelKind kind, PyramidSpec spec, LossKind loss, std::uint64_t seed)
    : kind_(kind), spec_(std::move(spec)), loss_(loss) {
  spec_.validate(kind_);
  Rng rng(seed);
  generator_ = GeneratorStack(params_, kind_, spec_, rng);
  for (int k = 0; k < generator_.levels(); ++k) {
    discriminators_.discriminators.emplace_back(params_, "d." + std::to_string(k), generator_.resolution(k),
                                                spec_.d_channels, spec_.d_max_channels, loss_ == LossKind::vanilla,
                                                rng);
    discriminators_.input_kinds.push_back(kind_ == ModelKind::lapgan && k > 0 ? InputKind::residual
                                                                               : InputKind::image);
  }
}

std::string GanModel::level_prefix(bool generator, int level) {
  return (generator ? "g." : "d.") + std::to_string(level) + ".";
}

Tensorf GanModel::sample(const std::vector<Tensorf>& noise) const {
  NoGradGuard guard;
  return generator_(noise, Mode::eval).images.back();
}

std::vector<std::pair<std::string, std::string>> GanModel::header() const {
  std::vector<std::pair<std::string, std::string>> h{{"kind", name()}, {"loss", to_string(loss_)}};
  for (auto& kv : spec_header(spec_)) h.push_back(std::move(kv));
  return h;
}

GanModel build_dcgan(const PyramidSpec& spec, LossKind loss, std::uint64_t seed) {
  return GanModel(ModelKind::dcgan, spec, loss, seed);
}

GanModel build_lapgan(const PyramidSpec& spec, LossKind loss, std::uint64_t seed) {
  return GanModel(ModelKind::lapgan, spec, loss, seed);
}

GanModel build_ddgan(const PyramidSpec& spec, LossKind loss, std::uint64_t seed) {
  return GanModel(ModelKind::ddgan, spec, loss, seed);
}

Index param_count(const GanModel& model, ParamGroup group) {
  switch (group) {
    case ParamGroup::generator: return model.params().count("g.");
    case ParamGroup::discriminators: return model.params().count("d.");
    case ParamGroup::all: break;
  }
  return model.params().count();
}

std::vector<std::pair<std::string, std::string>> spec_header(const PyramidSpec& spec) {
  return {
      {"base_resolution", std::to_string(spec.base_resolution)},
      {"levels", std::to_string(spec.levels)},
      {"z_dim", std::to_string(spec.z_dim)},
      {"residual_depth", std::to_string(spec.residual_depth)},
      {"upsample_mode", to_string(spec.upsample_mode)},
      {"g_channels", std::to_string(spec.g_channels)},
      {"d_channels", std::to_string(spec.d_channels)},
      {"d_max_channels", std::to_string(spec.d_max_channels)},
      {"level_channels", join(spec.channels_per_level)},
  };
}

PyramidSpec spec_from_header(const Checkpoint& ckpt) {
  PyramidSpec spec;
  spec.base_resolution = header_int(ckpt, "base_resolution");
  spec.levels = header_int(ckpt, "levels");
  spec.z_dim = header_int(ckpt, "z_dim");
  spec.residual_depth = header_int(ckpt, "residual_depth");
  spec.upsample_mode = parse_upsample_mode(ckpt.header_value("upsample_mode"));
  spec.g_channels = header_int(ckpt, "g_channels");
  spec.d_channels = header_int(ckpt, "d_channels");
  spec.d_max_channels = header_int(ckpt, "d_max_channels");
  spec.channels_per_level = parse_int_list(ckpt.header_value("level_channels"), "level_channels");
  return spec;
}

void save_model(const GanModel& model, const std::filesystem::path& path) {
  save_checkpoint(path, model.header(), model.params());
}

GanModel model_from_checkpoint(const Checkpoint& checkpoint) {
  const auto choice = parse_model_name(checkpoint.header_value("kind"));
  auto spec = spec_from_header(checkpoint);
  if (choice.upsample) spec.upsample_mode = *choice.upsample;
  GanModel model(choice.kind, spec, parse_loss_kind(checkpoint.header_value("loss")), 0);
  apply_checkpoint(checkpoint, model.params());
  return model;
}

GanModel load_model(const std::filesystem::path& path) { return model_from_checkpoint(load_checkpoint(path)); }

}  // namespace ddgan
