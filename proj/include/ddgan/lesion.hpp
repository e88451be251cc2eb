#ifndef DDGAN_LESION_HPP_
#define DDGAN_LESION_HPP_

#include "ddgan/rng.hpp"
#include "ddgan/tensor.hpp"

#include <array>
#include <string>

namespace ddgan {

enum class Label { benign = 0, melanoma = 1, keratosis = 2 };
inline constexpr int kNumClasses = 3;

std::string to_string(Label label);
Label parse_label(const std::string& text);

struct Range {
  double lo = 0.0, hi = 0.0;
  double sample(Rng& rng) const { return lo == hi ? lo : rng.uniform(lo, hi); }
};

/// Appearance distribution of one lesion class. Colors are RGB in [0, 1].
struct ClassAppearance {
  std::array<Range, 3> color;
  /// Semi-major axis as a fraction of the image side.
  Range radius;
  /// 1 - minor/major.
  Range eccentricity;
  /// Relative amplitude of the sinusoidal border perturbation.
  Range irregularity;
  /// Std of the additive per-pixel speckle, in [0, 1] intensity units.
  Range speckle;
};

struct LesionParams {
  std::array<Range, 3> skin;
  std::array<ClassAppearance, kNumClasses> classes;
  /// Fraction of the lesion color lost from centre to rim.
  double shading = 0.15;

  static LesionParams defaults();
  const ClassAppearance& of(Label label) const { return classes[static_cast<std::size_t>(label)]; }
};

/// Geometry actually drawn, returned for tests.
struct LesionShape {
  double cx = 0, cy = 0;  // pixel coordinates of the centre
  double a = 0, b = 0;    // semi-axes in pixels
  double angle = 0;
  double irregularity = 0;
  std::array<double, 3> phases{};
  /// Inside test for the pixel centre (x + 0.5, y + 0.5).
  bool contains(double px, double py) const;
};

/// Skin-tone background plus one perturbed ellipse, as a 3xRxR image in
/// [-1, 1]. Consumes draws from `rng` only; callers derive per-sample
/// generators with rng.split(index).
Tensorf generate_lesion(Rng& rng, Label label, int resolution, const LesionParams& params,
                        LesionShape* shape = nullptr);

}  // namespace ddgan

#endif  // DDGAN_LESION_HPP_
