#include "ddgan/metrics.hpp"

#include "ddgan/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

namespace ddgan {

namespace {

void require_compatible(const char* op, std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) {
    throw DimensionError(op, 0, "bin count mismatch: " + std::to_string(p.size()) + " vs " + std::to_string(q.size()));
  }
  if (p.empty()) throw DimensionError(op, 0, "empty histogram");
}

double kl_to_mixture(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) kl += p[i] * std::log(p[i] / (0.5 * (p[i] + q[i])));
  }
  return kl;
}

constexpr long kSampleChunk = 64;

}  // namespace

HistogramAccumulator::HistogramAccumulator(int bins) : bins_(bins) {
  if (bins < 2) throw ConfigError("histogram needs at least 2 bins", "bins");
  for (auto& c : counts_) c.assign(static_cast<std::size_t>(bins), 0);
}

int histogram_bin(float value, int bins) {
  const double u = (std::clamp(static_cast<double>(value), -1.0, 1.0) + 1.0) / 2.0;
  return std::min(static_cast<int>(std::floor(u * bins)), bins - 1);
}

void HistogramAccumulator::add(const Tensorf& images) {
  if (images.ndim() != 4 || images.dim(1) != 3) throw DimensionError("histogram", 1, "expected Nx3xHxW images");
  const Index n = images.dim(0), plane = images.dim(2) * images.dim(3);
  const auto& d = images.data();
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < 3; ++c) {
      auto& counts = counts_[static_cast<std::size_t>(c)];
      const Index base = (i * 3 + c) * plane;
      for (Index p = 0; p < plane; ++p) {
        const float v = d[base + p];
        if (std::isnan(v)) throw NumericalError("histogram: NaN pixel value");
        ++counts[static_cast<std::size_t>(histogram_bin(v, bins_))];
      }
    }
  }
  pixels_ += static_cast<std::uint64_t>(n * plane);
}

ColorHistogram HistogramAccumulator::normalized() const {
  if (pixels_ == 0) throw DimensionError("histogram", 0, "empty image collection");
  ColorHistogram h;
  h.bins = bins_;
  for (std::size_t c = 0; c < 3; ++c) {
    h.channels[c].resize(static_cast<std::size_t>(bins_));
    for (std::size_t b = 0; b < h.channels[c].size(); ++b) {
      h.channels[c][b] = static_cast<double>(counts_[c][b]) / static_cast<double>(pixels_);
    }
  }
  return h;
}

ColorHistogram histogram(const Tensorf& images, int bins) {
  HistogramAccumulator acc(bins);
  acc.add(images);
  return acc.normalized();
}

ColorHistogram histogram(std::span<const Tensorf> batches, int bins) {
  HistogramAccumulator acc(bins);
  for (const auto& b : batches) acc.add(b);
  return acc.normalized();
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  require_compatible("js_divergence", p, q);
  const double jsd = 0.5 * (kl_to_mixture(p, q) + kl_to_mixture(q, p));
  // Rounding can push the endpoints a few ulps outside [0, ln 2].
  return std::clamp(jsd, 0.0, std::numbers::ln2);
}

double emd(std::span<const double> p, std::span<const double> q) {
  require_compatible("emd", p, q);
  if (p.size() == 1) return 0.0;
  double fp = 0.0, fq = 0.0, total = 0.0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    fp += p[i];
    fq += q[i];
    total += std::abs(fp - fq);
  }
  return total / static_cast<double>(p.size() - 1);
}

double js_divergence(const ColorHistogram& p, const ColorHistogram& q) { return compare(p, q).js; }
double emd(const ColorHistogram& p, const ColorHistogram& q) { return compare(p, q).emd; }

MetricsReport compare(const ColorHistogram& generated, const ColorHistogram& real) {
  if (generated.bins != real.bins) {
    throw DimensionError("compare", 0,
                         "bin count mismatch: " + std::to_string(generated.bins) + " vs " + std::to_string(real.bins));
  }
  MetricsReport r;
  r.bins = generated.bins;
  for (std::size_t c = 0; c < 3; ++c) {
    r.channels[c].js = js_divergence(generated.channels[c], real.channels[c]);
    r.channels[c].emd = emd(generated.channels[c], real.channels[c]);
    r.js += r.channels[c].js;
    r.emd += r.channels[c].emd;
  }
  r.js /= 3.0;
  r.emd /= 3.0;
  return r;
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["emd"] = emd;
  j["js"] = js;
  const char* names[3] = {"r", "g", "b"};
  for (std::size_t c = 0; c < 3; ++c) j["channels"][names[c]] = {{"emd", channels[c].emd}, {"js", channels[c].js}};
  j["n_samples"] = n_samples;
  j["bins"] = bins;
  return j.dump(2);
}

ColorHistogram sample_histogram(const GanModel& model, long n_samples, int bins, std::uint64_t seed) {
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1", "n_samples");
  Rng rng(seed);
  HistogramAccumulator acc(bins);
  for (long done = 0; done < n_samples; done += kSampleChunk) {
    const long n = std::min(kSampleChunk, n_samples - done);
    acc.add(model.sample(model.generator().sample_noise(rng, n)));
  }
  return acc.normalized();
}

MetricsReport evaluate_model(const GanModel& model, const Tensorf& real, long n_samples, int bins, std::uint64_t seed) {
  if (real.ndim() != 4 || real.dim(2) != model.top_resolution()) {
    throw DimensionError("evaluate_model", 2,
                         "model resolution " + std::to_string(model.top_resolution()) +
                             " does not match the real images (" + shape_string(real.shape()) + ")");
  }
  auto report = compare(sample_histogram(model, n_samples, bins, seed), histogram(real, bins));
  report.n_samples = n_samples;
  return report;
}

void write_histogram_csv(std::ostream& os, const ColorHistogram& h) {
  os << "bin,r,g,b\n" << std::setprecision(17);
  for (std::size_t b = 0; b < static_cast<std::size_t>(h.bins); ++b) {
    os << b << ',' << h.channels[0][b] << ',' << h.channels[1][b] << ',' << h.channels[2][b] << '\n';
  }
}

}  // namespace ddgan
