#include "ddgan/gradcheck.hpp"

#include "ddgan/ops.hpp"
#include "ddgan/rng.hpp"

#include <algorithm>
#include <cmath>

namespace ddgan {

GradCheckResult check_gradients(const std::string& name, const ScalarFunction& f, std::vector<Tensord> inputs,
                                const GradCheckOptions& options) {
  GradCheckResult result{name, 0.0, 0, true};
  for (auto& in : inputs) in.zero_grad();
  f(inputs).backward();

  for (auto& in : inputs) {
    if (!in.requires_grad()) continue;
    const Buffer<double> analytic = in.grad();
    auto& data = in.mutable_data();
    for (Index j = 0; j < data.size(); ++j) {
      const double saved = data[j];
      double plus = 0.0, minus = 0.0;
      {
        NoGradGuard guard;
        data[j] = saved + options.step;
        plus = f(inputs).item();
        data[j] = saved - options.step;
        minus = f(inputs).item();
      }
      data[j] = saved;
      const double numeric = (plus - minus) / (2.0 * options.step);
      const double denom = std::max({std::abs(analytic[j]), std::abs(numeric), options.floor});
      const double rel = std::abs(analytic[j] - numeric) / denom;
      result.max_rel_error = std::max(result.max_rel_error, rel);
      ++result.entries_checked;
    }
  }
  result.passed = result.max_rel_error <= options.tolerance;
  return result;
}

namespace {

Tensord random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  auto t = sample_uniform<double>(rng, std::move(shape), lo, hi);
  t.set_requires_grad(true);
  return t;
}

// Values at least `margin` away from every kink, so central differences never
// straddle a non-differentiable point.
Tensord away_from(Rng& rng, Shape shape, std::vector<double> kinks, double margin = 0.05) {
  Buffer<double> data(shape_size(shape));
  for (Index i = 0; i < data.size(); ++i) {
    double v;
    bool close;
    do {
      v = rng.uniform(-1.5, 1.5);
      close = std::any_of(kinks.begin(), kinks.end(), [&](double k) { return std::abs(v - k) < margin; });
    } while (close);
    data[i] = v;
  }
  return Tensord(std::move(shape), std::move(data), true);
}

// Weighted sum with fixed random weights, so every output entry matters.
Tensord weighted_sum(const Tensord& y, std::uint64_t seed) {
  Rng wrng(seed);
  auto weights = sample_uniform<double>(wrng, y.shape(), -1.0, 1.0);
  return sum(mul(y, weights));
}

struct Case {
  std::string name;
  std::function<std::pair<ScalarFunction, std::vector<Tensord>>(Rng&, std::uint64_t)> make;
};

std::vector<Case> gradient_cases() {
  using Fn = ScalarFunction;
  using Inputs = std::vector<Tensord>;
  std::vector<Case> cases;
  const auto unary_case = [&cases](std::string name, std::function<Tensord(const Tensord&)> op,
                                   std::vector<double> kinks, double lo = -1.0, double hi = 1.0) {
    cases.push_back({name, [op, kinks, lo, hi](Rng& rng, std::uint64_t seed) {
                       const Tensord x = kinks.empty() ? random_tensor(rng, {2, 3, 4}, lo, hi)
                                                       : away_from(rng, {2, 3, 4}, kinks);
                       Fn f = [op, seed](const Inputs& in) { return weighted_sum(op(in[0]), seed); };
                       return std::make_pair(f, Inputs{x});
                     }});
  };

  cases.push_back({"add", [](Rng& rng, std::uint64_t seed) {
                     Fn f = [seed](const Inputs& in) { return weighted_sum(add(in[0], in[1]), seed); };
                     return std::make_pair(f, Inputs{random_tensor(rng, {3, 5}), random_tensor(rng, {3, 5})});
                   }});
  cases.push_back({"sub", [](Rng& rng, std::uint64_t seed) {
                     Fn f = [seed](const Inputs& in) { return weighted_sum(sub(in[0], in[1]), seed); };
                     return std::make_pair(f, Inputs{random_tensor(rng, {3, 5}), random_tensor(rng, {3, 5})});
                   }});
  cases.push_back({"mul", [](Rng& rng, std::uint64_t seed) {
                     Fn f = [seed](const Inputs& in) { return weighted_sum(mul(in[0], in[1]), seed); };
                     return std::make_pair(f, Inputs{random_tensor(rng, {3, 5}), random_tensor(rng, {3, 5})});
                   }});
  unary_case("scale", [](const Tensord& x) { return scale(x, -1.7); }, {});
  unary_case("add_scalar", [](const Tensord& x) { return add_scalar(x, 0.3); }, {});
  unary_case("square", [](const Tensord& x) { return square(x); }, {});
  unary_case("log", [](const Tensord& x) { return log(x); }, {}, 0.2, 2.0);
  unary_case("tanh", [](const Tensord& x) { return tanh(x); }, {});
  unary_case("sigmoid", [](const Tensord& x) { return sigmoid(x); }, {});
  unary_case("leaky_relu", [](const Tensord& x) { return leaky_relu(x, 0.2); }, {0.0});
  unary_case("clamp", [](const Tensord& x) { return clamp(x, -1.0, 1.0); }, {-1.0, 1.0});
  unary_case("mean", [](const Tensord& x) { return scale(mean(x), 3.0); }, {});
  unary_case("sum", [](const Tensord& x) { return sum(square(x)); }, {});
  unary_case("reshape", [](const Tensord& x) { return reshape(x, {6, 4}); }, {});

  cases.push_back({"concat_channels", [](Rng& rng, std::uint64_t seed) {
                     Fn f = [seed](const Inputs& in) { return weighted_sum(concat_channels(in[0], in[1]), seed); };
                     return std::make_pair(f, Inputs{random_tensor(rng, {2, 3, 4, 4}), random_tensor(rng, {2, 1, 4, 4})});
                   }});

  struct ConvConfig {
    Shape input;
    Shape kernel;
    int stride;
    int padding;
  };
  const std::vector<ConvConfig> conv_configs = {
      {{2, 3, 8, 8}, {4, 3, 3, 3}, 2, 1},
      {{1, 2, 5, 5}, {3, 2, 3, 3}, 1, 0},
      {{2, 2, 6, 6}, {2, 2, 4, 4}, 2, 1},
  };
  for (const auto& cfg : conv_configs) {
    const std::string suffix = " " + shape_string(cfg.input) + " k" + shape_string(cfg.kernel) + " s" +
                               std::to_string(cfg.stride) + " p" + std::to_string(cfg.padding);
    cases.push_back({"conv2d" + suffix, [cfg](Rng& rng, std::uint64_t seed) {
                       Fn f = [seed, cfg](const Inputs& in) {
                         return weighted_sum(conv2d(in[0], in[1], in[2], cfg.stride, cfg.padding), seed);
                       };
                       return std::make_pair(f, Inputs{random_tensor(rng, cfg.input), random_tensor(rng, cfg.kernel),
                                                       random_tensor(rng, {cfg.kernel[0]})});
                     }});
    // Deconv maps kernel[0] channels back to kernel[1].
    cases.push_back({"deconv2d" + suffix, [cfg](Rng& rng, std::uint64_t seed) {
                       Fn f = [seed, cfg](const Inputs& in) {
                         return weighted_sum(deconv2d(in[0], in[1], in[2], cfg.stride, cfg.padding), seed);
                       };
                       Shape in_shape{cfg.input[0], cfg.kernel[0], 3, 3};
                       return std::make_pair(f, Inputs{random_tensor(rng, in_shape), random_tensor(rng, cfg.kernel),
                                                       random_tensor(rng, {cfg.kernel[1]})});
                     }});
  }
  // The exact configuration exercised by the unit tests: plain sum of outputs.
  cases.push_back({"conv2d sum-of-output", [](Rng& rng, std::uint64_t) {
                     Fn f = [](const Inputs& in) { return sum(conv2d(in[0], in[1], in[2], 2, 1)); };
                     return std::make_pair(f, Inputs{random_tensor(rng, {2, 3, 8, 8}), random_tensor(rng, {4, 3, 3, 3}),
                                                     random_tensor(rng, {4})});
                   }});

  const auto spatial_case = [&cases](std::string name, std::function<Tensord(const Tensord&)> op, Shape shape) {
    cases.push_back({name, [op, shape](Rng& rng, std::uint64_t seed) {
                       Fn f = [op, seed](const Inputs& in) { return weighted_sum(op(in[0]), seed); };
                       return std::make_pair(f, Inputs{random_tensor(rng, shape)});
                     }});
  };
  spatial_case("upsample_nearest", [](const Tensord& x) { return upsample_nearest(x, 2); }, {2, 2, 3, 3});
  spatial_case("upsample_nearest x3", [](const Tensord& x) { return upsample_nearest(x, 3); }, {1, 2, 2, 2});
  spatial_case("upsample_bilinear", [](const Tensord& x) { return upsample_bilinear(x); }, {2, 2, 3, 4});
  spatial_case("downsample_avg", [](const Tensord& x) { return downsample_avg(x, 2); }, {2, 2, 4, 4});
  spatial_case("global_avg_pool", [](const Tensord& x) { return global_avg_pool(x); }, {2, 3, 3, 3});

  cases.push_back({"dense", [](Rng& rng, std::uint64_t seed) {
                     Fn f = [seed](const Inputs& in) { return weighted_sum(dense(in[0], in[1], in[2]), seed); };
                     return std::make_pair(f, Inputs{random_tensor(rng, {4, 5}), random_tensor(rng, {5, 3}),
                                                     random_tensor(rng, {3})});
                   }});
  for (const bool training : {true, false}) {
    for (const bool spatial : {true, false}) {
      const std::string name = std::string("batch_norm ") + (training ? "train" : "inference") +
                               (spatial ? " NCHW" : " NF");
      cases.push_back({name, [training, spatial](Rng& rng, std::uint64_t seed) {
                         const Shape shape = spatial ? Shape{3, 2, 3, 3} : Shape{6, 4};
                         const Index c = shape[1];
                         auto rm = std::make_shared<Buffer<double>>(c);
                         auto rv = std::make_shared<Buffer<double>>(c);
                         for (Index i = 0; i < c; ++i) {
                           (*rm)[i] = rng.uniform(-0.2, 0.2);
                           (*rv)[i] = rng.uniform(0.5, 1.5);
                         }
                         Fn f = [seed, training, rm, rv](const Inputs& in) {
                           // Copies keep the running statistics fixed across evaluations.
                           Buffer<double> m = *rm, v = *rv;
                           BatchNormOptions opt;
                           opt.training = training;
                           return weighted_sum(batch_norm(in[0], in[1], in[2], opt, &m, &v), seed);
                         };
                         return std::make_pair(f, Inputs{random_tensor(rng, shape), random_tensor(rng, {c}, 0.5, 1.5),
                                                         random_tensor(rng, {c})});
                       }});
    }
  }
  cases.push_back({"softmax_cross_entropy", [](Rng& rng, std::uint64_t) {
                     std::vector<int> labels(5);
                     for (auto& l : labels) l = static_cast<int>(rng.below(3));
                     Fn f = [labels](const Inputs& in) { return softmax_cross_entropy(in[0], std::span<const int>(labels)); };
                     return std::make_pair(f, Inputs{random_tensor(rng, {5, 3}, -2.0, 2.0)});
                   }});

  // Composites: a residual block with skip and output clamp, and an
  // LSGAN-style loss over a conv discriminator head.
  cases.push_back({"residual block", [](Rng& rng, std::uint64_t seed) {
                     Fn f = [seed](const Inputs& in) {
                       BatchNormOptions opt;
                       auto h = conv2d(in[0], in[1], in[2], 1, 1);
                       h = leaky_relu(batch_norm(h, in[3], in[4], opt), 0.2);
                       h = conv2d(h, in[5], in[6], 1, 1);
                       return weighted_sum(tanh(add(in[0], h)), seed);
                     };
                     return std::make_pair(f, Inputs{random_tensor(rng, {2, 3, 4, 4}), random_tensor(rng, {4, 3, 3, 3}),
                                                     random_tensor(rng, {4}), random_tensor(rng, {4}, 0.5, 1.5),
                                                     random_tensor(rng, {4}), random_tensor(rng, {3, 4, 3, 3}),
                                                     random_tensor(rng, {3})});
                   }});
  cases.push_back({"least-squares head", [](Rng& rng, std::uint64_t) {
                     Fn f = [](const Inputs& in) {
                       auto h = leaky_relu(conv2d(in[0], in[1], in[2], 2, 1), 0.2);
                       auto score = dense(reshape(h, {h.dim(0), h.size() / h.dim(0)}), in[3], in[4]);
                       return scale(mean(square(add_scalar(score, -1.0))), 0.5);
                     };
                     return std::make_pair(f, Inputs{random_tensor(rng, {3, 3, 4, 4}), random_tensor(rng, {2, 3, 4, 4}),
                                                     random_tensor(rng, {2}), random_tensor(rng, {8, 1}),
                                                     random_tensor(rng, {1})});
                   }});
  return cases;
}

}  // namespace

std::vector<GradCheckResult> run_gradient_suite(int seeds, std::uint64_t base_seed, const GradCheckOptions& options) {
  std::vector<GradCheckResult> results;
  const Rng root(base_seed);
  std::uint64_t stream = 0;
  for (const auto& c : gradient_cases()) {
    GradCheckResult merged{c.name, 0.0, 0, true};
    for (int s = 0; s < seeds; ++s) {
      Rng rng = root.split(stream++);
      auto [f, inputs] = c.make(rng, rng.next_u64());
      const auto r = check_gradients(c.name, f, std::move(inputs), options);
      merged.max_rel_error = std::max(merged.max_rel_error, r.max_rel_error);
      merged.entries_checked += r.entries_checked;
      merged.passed = merged.passed && r.passed;
    }
    results.push_back(merged);
  }
  return results;
}

}  // namespace ddgan
