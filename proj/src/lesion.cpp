#include "ddgan/lesion.hpp"

#include "ddgan/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ddgan {

namespace {

// Border harmonics: a few lobes rather than high-frequency fringe.
constexpr std::array<int, 3> kHarmonics = {3, 5, 7};
constexpr std::array<double, 3> kHarmonicWeights = {1.0, 0.6, 0.35};

}  // namespace

std::string to_string(Label label) {
  switch (label) {
    case Label::benign: return "benign";
    case Label::melanoma: return "melanoma";
    case Label::keratosis: return "keratosis";
  }
  return "benign";
}

Label parse_label(const std::string& text) {
  if (text == "benign") return Label::benign;
  if (text == "melanoma") return Label::melanoma;
  if (text == "keratosis") return Label::keratosis;
  throw ConfigError("unknown class '" + text + "'", "class");
}

LesionParams LesionParams::defaults() {
  LesionParams p;
  p.skin = {Range{0.72, 0.92}, Range{0.55, 0.75}, Range{0.45, 0.65}};
  // Colour ranges overlap between classes on purpose; shape and texture
  // carry the rest of the signal.
  p.classes[0] = ClassAppearance{{Range{0.45, 0.70}, Range{0.28, 0.48}, Range{0.18, 0.36}},
                                 Range{0.18, 0.30},
                                 Range{0.0, 0.30},
                                 Range{0.0, 0.06},
                                 Range{0.01, 0.04}};
  p.classes[1] = ClassAppearance{{Range{0.20, 0.50}, Range{0.10, 0.32}, Range{0.08, 0.28}},
                                 Range{0.22, 0.36},
                                 Range{0.10, 0.45},
                                 Range{0.06, 0.20},
                                 Range{0.02, 0.06}};
  p.classes[2] = ClassAppearance{{Range{0.38, 0.62}, Range{0.30, 0.48}, Range{0.22, 0.40}},
                                 Range{0.16, 0.30},
                                 Range{0.0, 0.35},
                                 Range{0.02, 0.10},
                                 Range{0.05, 0.10}};
  return p;
}

bool LesionShape::contains(double px, double py) const {
  const double dx = px - cx, dy = py - cy;
  const double c = std::cos(angle), s = std::sin(angle);
  const double u = (c * dx + s * dy) / a, v = (-s * dx + c * dy) / b;
  const double rho = std::sqrt(u * u + v * v);
  double border = 1.0;
  if (irregularity != 0.0) {
    const double phi = std::atan2(v, u);
    double wobble = 0.0;
    for (std::size_t m = 0; m < kHarmonics.size(); ++m) {
      wobble += kHarmonicWeights[m] * std::sin(kHarmonics[m] * phi + phases[m]);
    }
    border += irregularity * wobble;
  }
  return rho <= border;
}

Tensorf generate_lesion(Rng& rng, Label label, int resolution, const LesionParams& params, LesionShape* out_shape) {
  if (resolution < 8) throw ConfigError("lesion resolution must be >= 8", "resolution");
  const auto& look = params.of(label);
  const double r = resolution;

  std::array<double, 3> skin{}, blob{};
  for (int c = 0; c < 3; ++c) skin[c] = params.skin[c].sample(rng);
  for (int c = 0; c < 3; ++c) blob[c] = look.color[c].sample(rng);

  LesionShape shape;
  shape.cx = r * (0.5 + rng.uniform(-0.08, 0.08));
  shape.cy = r * (0.5 + rng.uniform(-0.08, 0.08));
  shape.a = r * look.radius.sample(rng);
  shape.b = shape.a * (1.0 - look.eccentricity.sample(rng));
  shape.angle = rng.uniform(0.0, std::numbers::pi);
  shape.irregularity = look.irregularity.sample(rng);
  for (auto& ph : shape.phases) ph = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double speckle = look.speckle.sample(rng);

  const Index n = resolution;
  Buffer<float> data(3 * n * n);
  const double cos_a = std::cos(shape.angle), sin_a = std::sin(shape.angle);
  for (Index y = 0; y < n; ++y) {
    for (Index x = 0; x < n; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      std::array<double, 3> rgb = skin;
      if (shape.contains(px, py)) {
        const double dx = px - shape.cx, dy = py - shape.cy;
        const double u = (cos_a * dx + sin_a * dy) / shape.a, v = (-sin_a * dx + cos_a * dy) / shape.b;
        const double rim = std::min(1.0, std::sqrt(u * u + v * v));
        const double shade = 1.0 - params.shading * (1.0 - rim);
        for (int c = 0; c < 3; ++c) rgb[c] = blob[c] * shade;
      }
      for (int c = 0; c < 3; ++c) {
        double value = rgb[c];
        if (speckle > 0.0) value += speckle * rng.normal();
        data[(c * n + y) * n + x] = static_cast<float>(2.0 * std::clamp(value, 0.0, 1.0) - 1.0);
      }
    }
  }
  if (out_shape) *out_shape = shape;
  return Tensorf({3, n, n}, std::move(data));
}

}  // namespace ddgan
