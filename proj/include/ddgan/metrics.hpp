#ifndef DDGAN_METRICS_HPP_
#define DDGAN_METRICS_HPP_

#include "ddgan/models.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace ddgan {

/// Per-channel pixel-intensity histogram. Pixel v in [-1, 1] maps to
/// u = (v + 1) / 2 and falls in bin min(floor(u * B), B - 1).
struct ColorHistogram {
  int bins = 0;
  std::array<std::vector<double>, 3> channels;  // each sums to 1
};

/// Raw counts, accumulated over any number of batches before normalizing.
class HistogramAccumulator {
 public:
  explicit HistogramAccumulator(int bins);
  /// images: Nx3xHxW; values are clamped to [-1, 1], NaN is an error.
  void add(const Tensorf& images);
  const std::array<std::vector<std::uint64_t>, 3>& counts() const { return counts_; }
  std::uint64_t pixels_per_channel() const { return pixels_; }
  ColorHistogram normalized() const;

 private:
  int bins_;
  std::array<std::vector<std::uint64_t>, 3> counts_;
  std::uint64_t pixels_ = 0;
};

int histogram_bin(float value, int bins);
ColorHistogram histogram(const Tensorf& images, int bins = 256);
ColorHistogram histogram(std::span<const Tensorf> batches, int bins = 256);

/// JSD with natural log and 0 log 0 := 0, for one pair of distributions.
double js_divergence(std::span<const double> p, std::span<const double> q);
/// 1-D Wasserstein-1 on bin positions i / (B - 1).
double emd(std::span<const double> p, std::span<const double> q);
/// Channel averages.
double js_divergence(const ColorHistogram& p, const ColorHistogram& q);
double emd(const ColorHistogram& p, const ColorHistogram& q);

struct ChannelMetrics {
  double emd = 0.0;
  double js = 0.0;
};

struct MetricsReport {
  double emd = 0.0;
  double js = 0.0;
  std::array<ChannelMetrics, 3> channels{};
  long n_samples = 0;
  int bins = 0;

  std::string to_json() const;
};

MetricsReport compare(const ColorHistogram& generated, const ColorHistogram& real);

/// Top-level eval-mode samples of `model`, drawn from Rng(seed) in chunks,
/// compared with the histogram of `real` (Nx3xRxR).
ColorHistogram sample_histogram(const GanModel& model, long n_samples, int bins, std::uint64_t seed);
MetricsReport evaluate_model(const GanModel& model, const Tensorf& real, long n_samples, int bins, std::uint64_t seed);

/// CSV with header `bin,r,g,b`.
void write_histogram_csv(std::ostream& os, const ColorHistogram& h);

}  // namespace ddgan

#endif  // DDGAN_METRICS_HPP_
