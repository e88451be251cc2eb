#include "ddgan/layers.hpp"

#include <stdexcept>

namespace ddgan {

namespace {

constexpr double kInitStd = 0.02;

Tensorf normal_init(Rng& rng, Shape shape, double mean, double std) {
  Buffer<float> data(shape_size(shape));
  for (Index i = 0; i < data.size(); ++i) data[i] = static_cast<float>(mean + std * rng.normal());
  return Tensorf(std::move(shape), std::move(data), true);
}

}  // namespace

Tensorf ParameterSet::add(const std::string& name, Tensorf value, bool trainable) {
  if (contains(name)) throw std::logic_error("duplicate parameter name: " + name);
  value.set_requires_grad(trainable);
  entries_.emplace(name, Entry{value, trainable});
  return value;
}

Tensorf ParameterSet::at(const std::string& name) const {
  const auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("no parameter named " + name);
  return it->second.tensor;
}

std::vector<std::pair<std::string, Tensorf>> ParameterSet::trainable(std::string_view prefix) const {
  std::vector<std::pair<std::string, Tensorf>> out;
  for (const auto& [name, entry] : entries_) {
    if (entry.trainable && name.starts_with(prefix)) out.emplace_back(name, entry.tensor);
  }
  return out;
}

Index ParameterSet::count(std::string_view prefix) const {
  Index n = 0;
  for (const auto& [name, tensor] : trainable(prefix)) n += tensor.size();
  return n;
}

void ParameterSet::zero_grad(std::string_view prefix) {
  for (auto& [name, entry] : entries_) {
    if (name.starts_with(prefix)) entry.tensor.zero_grad();
  }
}

Conv2d::Conv2d(ParameterSet& params, const std::string& name, Index in, Index out, int kernel, int stride_,
               int padding_, Rng& rng, bool zero_init)
    : stride(stride_), padding(padding_) {
  Shape shape{out, in, kernel, kernel};
  weight = params.add(name + ".weight", zero_init ? Tensorf::zeros(shape) : normal_init(rng, shape, 0.0, kInitStd));
  bias = params.add(name + ".bias", Tensorf::zeros({out}));
}

Deconv2d::Deconv2d(ParameterSet& params, const std::string& name, Index in, Index out, int kernel, int stride_,
                   int padding_, Rng& rng)
    : stride(stride_), padding(padding_) {
  weight = params.add(name + ".weight", normal_init(rng, {in, out, kernel, kernel}, 0.0, kInitStd));
  bias = params.add(name + ".bias", Tensorf::zeros({out}));
}

Dense::Dense(ParameterSet& params, const std::string& name, Index in, Index out, Rng& rng) {
  weight = params.add(name + ".weight", normal_init(rng, {in, out}, 0.0, kInitStd));
  bias = params.add(name + ".bias", Tensorf::zeros({out}));
}

BatchNorm::BatchNorm(ParameterSet& params, const std::string& name, Index channels, Rng& rng) {
  gamma = params.add(name + ".gamma", normal_init(rng, {channels}, 1.0, kInitStd));
  beta = params.add(name + ".beta", Tensorf::zeros({channels}));
  running_mean = params.add(name + ".running_mean", Tensorf::zeros({channels}), false);
  running_var = params.add(name + ".running_var", Tensorf::full({channels}, 1.0f), false);
}

Tensorf BatchNorm::operator()(const Tensorf& x, Mode mode) const {
  BatchNormOptions options;
  options.training = mode == Mode::train;
  // Handles alias the stored buffers, so running statistics update in place.
  Tensorf mean_buf = running_mean;
  Tensorf var_buf = running_var;
  return batch_norm(x, gamma, beta, options, &mean_buf.mutable_data(), &var_buf.mutable_data());
}

}  // namespace ddgan
