// Brute-force reference implementations shared by the unit and acceptance
// tests. Deliberately naive: plain loops, double precision, no library code.
#ifndef DDGAN_TESTS_ORACLES_HPP_
#define DDGAN_TESTS_ORACLES_HPP_

#include "ddgan/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace oracle {

using ddgan::Index;

// out[n,o,y,x] = b[o] + sum_{c,i,j} in[n,c,y*s-p+i, x*s-p+j] * k[o,c,i,j]
inline std::vector<double> conv2d(const std::vector<double>& in, Index n, Index c, Index h, Index w,
                                  const std::vector<double>& k, Index o, Index ks, const std::vector<double>& b,
                                  int s, int p, Index& ho, Index& wo) {
  ho = (h + 2 * p - ks) / s + 1;
  wo = (w + 2 * p - ks) / s + 1;
  std::vector<double> out(static_cast<std::size_t>(n * o * ho * wo));
  for (Index b_ = 0; b_ < n; ++b_)
    for (Index oc = 0; oc < o; ++oc)
      for (Index y = 0; y < ho; ++y)
        for (Index x = 0; x < wo; ++x) {
          double acc = b.empty() ? 0.0 : b[static_cast<std::size_t>(oc)];
          for (Index ic = 0; ic < c; ++ic)
            for (Index i = 0; i < ks; ++i)
              for (Index j = 0; j < ks; ++j) {
                const Index yy = y * s - p + i, xx = x * s - p + j;
                if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                acc += in[static_cast<std::size_t>(((b_ * c + ic) * h + yy) * w + xx)] *
                       k[static_cast<std::size_t>(((oc * c + ic) * ks + i) * ks + j)];
              }
          out[static_cast<std::size_t>(((b_ * o + oc) * ho + y) * wo + x)] = acc;
        }
  return out;
}

// Transposed convolution by scattering every input pixel through the kernel.
// kernel layout IxOxKxK.
inline std::vector<double> deconv2d(const std::vector<double>& in, Index n, Index c, Index h, Index w,
                                    const std::vector<double>& k, Index o, Index ks, int s, int p, Index& ho,
                                    Index& wo) {
  ho = (h - 1) * s - 2 * p + ks;
  wo = (w - 1) * s - 2 * p + ks;
  std::vector<double> out(static_cast<std::size_t>(n * o * ho * wo), 0.0);
  for (Index b_ = 0; b_ < n; ++b_)
    for (Index ic = 0; ic < c; ++ic)
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) {
          const double v = in[static_cast<std::size_t>(((b_ * c + ic) * h + y) * w + x)];
          for (Index oc = 0; oc < o; ++oc)
            for (Index i = 0; i < ks; ++i)
              for (Index j = 0; j < ks; ++j) {
                const Index yy = y * s - p + i, xx = x * s - p + j;
                if (yy < 0 || yy >= ho || xx < 0 || xx >= wo) continue;
                out[static_cast<std::size_t>(((b_ * o + oc) * ho + yy) * wo + xx)] +=
                    v * k[static_cast<std::size_t>(((ic * o + oc) * ks + i) * ks + j)];
              }
        }
  return out;
}

// Bin by linear search for i with i/B <= u < (i+1)/B; u = 1 goes to the last bin.
inline int bin_of(double v, int bins) {
  const double u = (std::min(1.0, std::max(-1.0, v)) + 1.0) / 2.0;
  for (int i = 0; i < bins; ++i) {
    if (u < static_cast<double>(i + 1) / bins) return i;
  }
  return bins - 1;
}

// Per-channel pixel counts of an Nx3xHxW batch.
inline std::array<std::vector<long>, 3> count_pixels(const ddgan::Tensorf& images, int bins) {
  std::array<std::vector<long>, 3> counts;
  for (auto& c : counts) c.assign(static_cast<std::size_t>(bins), 0);
  const Index n = images.dim(0), h = images.dim(2), w = images.dim(3);
  for (Index i = 0; i < n; ++i)
    for (Index c = 0; c < 3; ++c)
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) {
          const double v = images.data()[((i * 3 + c) * h + y) * w + x];
          ++counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(bin_of(v, bins))];
        }
  return counts;
}

// Greedy 1-D transport: move mass left to right from p's bins into q's bins.
// On the line this monotone matching is optimal.
inline double transport_cost(const std::vector<double>& p, const std::vector<double>& q) {
  std::vector<double> supply = p, demand = q;
  const double step = 1.0 / static_cast<double>(p.size() - 1);
  std::size_t i = 0, j = 0;
  double cost = 0.0;
  while (i < supply.size() && j < demand.size()) {
    if (supply[i] <= 1e-15) {
      ++i;
      continue;
    }
    if (demand[j] <= 1e-15) {
      ++j;
      continue;
    }
    const double m = std::min(supply[i], demand[j]);
    cost += m * std::abs(static_cast<double>(i) - static_cast<double>(j)) * step;
    supply[i] -= m;
    demand[j] -= m;
  }
  return cost;
}

inline double jsd(const std::vector<double>& p, const std::vector<double>& q) {
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0) a += p[i] * std::log(p[i] / m);
    if (q[i] > 0) b += q[i] * std::log(q[i] / m);
  }
  return 0.5 * a + 0.5 * b;
}

}  // namespace oracle

#endif  // DDGAN_TESTS_ORACLES_HPP_
