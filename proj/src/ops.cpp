#include "ddgan/ops.hpp"

#include "ddgan/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ddgan {

namespace {

template <typename S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MapRM = Eigen::Map<MatRM<S>>;
template <typename S>
using ConstMapRM = Eigen::Map<const MatRM<S>>;

template <typename S>
using Node = detail::Node<S>;

void require_rank(const char* op, const Shape& shape, int rank) {
  if (static_cast<int>(shape.size()) != rank) {
    throw DimensionError(op, -1, "expected rank " + std::to_string(rank) + ", got " + shape_string(shape));
  }
}

void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  if (a.size() != b.size()) throw DimensionError(op, -1, "rank mismatch " + shape_string(a) + " vs " + shape_string(b));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) {
      throw DimensionError(op, static_cast<int>(i), "extent mismatch " + shape_string(a) + " vs " + shape_string(b));
    }
  }
}

void require_positive(const char* op, const char* what, int value) {
  if (value < 1) throw std::invalid_argument(std::string(op) + ": " + what + " must be >= 1");
}

// Patch matrix for one image. Rows index (c, ki, kj), columns the output grid.
template <typename S>
void im2col(const S* img, Index channels, Index height, Index width, Index k, Index stride, Index pad, Index out_h,
            Index out_w, S* col) {
  for (Index c = 0; c < channels; ++c) {
    for (Index ki = 0; ki < k; ++ki) {
      for (Index kj = 0; kj < k; ++kj) {
        S* row = col + ((c * k + ki) * k + kj) * out_h * out_w;
        for (Index oh = 0; oh < out_h; ++oh) {
          const Index ih = oh * stride - pad + ki;
          S* dst = row + oh * out_w;
          if (ih < 0 || ih >= height) {
            std::fill(dst, dst + out_w, S(0));
            continue;
          }
          const S* src = img + (c * height + ih) * width;
          for (Index ow = 0; ow < out_w; ++ow) {
            const Index iw = ow * stride - pad + kj;
            dst[ow] = (iw >= 0 && iw < width) ? src[iw] : S(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add patch columns back into the image.
template <typename S>
void col2im(const S* col, Index channels, Index height, Index width, Index k, Index stride, Index pad, Index out_h,
            Index out_w, S* img) {
  for (Index c = 0; c < channels; ++c) {
    for (Index ki = 0; ki < k; ++ki) {
      for (Index kj = 0; kj < k; ++kj) {
        const S* row = col + ((c * k + ki) * k + kj) * out_h * out_w;
        for (Index oh = 0; oh < out_h; ++oh) {
          const Index ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= height) continue;
          S* dst = img + (c * height + ih) * width;
          const S* src = row + oh * out_w;
          for (Index ow = 0; ow < out_w; ++ow) {
            const Index iw = ow * stride - pad + kj;
            if (iw >= 0 && iw < width) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

template <typename S, typename Forward, typename Derivative>
Tensor<S> unary(const char* op, const Tensor<S>& x, Forward forward, Derivative derivative) {
  Buffer<S> out = x.data().unaryExpr(forward);
  return detail::make_result<S>(op, x.shape(), out, {x}, [derivative](Node<S>& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    Buffer<S> g(in.data.size());
    for (Index i = 0; i < g.size(); ++i) g[i] = (*self.grad)[i] * derivative(in.data[i], self.data[i]);
    detail::accumulate(in, g);
  });
}

void check_conv_params(const char* op, const Shape& in, const Shape& kernel, const Shape& bias, Index in_channels_axis,
                       Index out_channels_axis, int stride, int padding) {
  require_rank(op, in, 4);
  require_rank(op, kernel, 4);
  require_rank(op, bias, 1);
  require_positive(op, "stride", stride);
  if (padding < 0) throw std::invalid_argument(std::string(op) + ": padding must be >= 0");
  if (kernel[2] != kernel[3]) throw DimensionError(op, 3, "kernel must be square, got " + shape_string(kernel));
  if (kernel[in_channels_axis] != in[1]) {
    throw DimensionError(op, 1,
                         "input has " + std::to_string(in[1]) + " channels, kernel " + shape_string(kernel) +
                             " expects " + std::to_string(kernel[in_channels_axis]));
  }
  if (bias[0] != kernel[out_channels_axis]) {
    throw DimensionError(op, 0, "bias length " + std::to_string(bias[0]) + " does not match output channels " +
                                    std::to_string(kernel[out_channels_axis]));
  }
}

}  // namespace

template <typename S>
Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape("add", a.shape(), b.shape());
  return detail::make_result<S>("add", a.shape(), a.data() + b.data(), {a, b}, [](Node<S>& self) {
    detail::accumulate(*self.inputs[0], *self.grad);
    detail::accumulate(*self.inputs[1], *self.grad);
  });
}

template <typename S>
Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape("sub", a.shape(), b.shape());
  return detail::make_result<S>("sub", a.shape(), a.data() - b.data(), {a, b}, [](Node<S>& self) {
    detail::accumulate(*self.inputs[0], *self.grad);
    if (self.inputs[1]->requires_grad) detail::accumulate<S>(*self.inputs[1], -*self.grad);
  });
}

template <typename S>
Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b) {
  require_same_shape("mul", a.shape(), b.shape());
  return detail::make_result<S>("mul", a.shape(), a.data() * b.data(), {a, b}, [](Node<S>& self) {
    auto& x = *self.inputs[0];
    auto& y = *self.inputs[1];
    if (x.requires_grad) detail::accumulate<S>(x, *self.grad * y.data);
    if (y.requires_grad) detail::accumulate<S>(y, *self.grad * x.data);
  });
}

template <typename S>
Tensor<S> scale(const Tensor<S>& x, S factor) {
  return detail::make_result<S>("scale", x.shape(), x.data() * factor, {x}, [factor](Node<S>& self) {
    if (self.inputs[0]->requires_grad) detail::accumulate<S>(*self.inputs[0], *self.grad * factor);
  });
}

template <typename S>
Tensor<S> add_scalar(const Tensor<S>& x, S value) {
  return detail::make_result<S>("add_scalar", x.shape(), x.data() + value, {x},
                                [](Node<S>& self) { detail::accumulate(*self.inputs[0], *self.grad); });
}

template <typename S>
Tensor<S> square(const Tensor<S>& x) {
  return unary<S>("square", x, [](S v) { return v * v; }, [](S in, S) { return S(2) * in; });
}

template <typename S>
Tensor<S> log(const Tensor<S>& x) {
  return unary<S>("log", x, [](S v) { return std::log(v); }, [](S in, S) { return S(1) / in; });
}

template <typename S>
Tensor<S> tanh(const Tensor<S>& x) {
  return unary<S>("tanh", x, [](S v) { return std::tanh(v); }, [](S, S out) { return S(1) - out * out; });
}

template <typename S>
Tensor<S> sigmoid(const Tensor<S>& x) {
  return unary<S>("sigmoid", x, [](S v) { return S(1) / (S(1) + std::exp(-v)); },
                  [](S, S out) { return out * (S(1) - out); });
}

template <typename S>
Tensor<S> leaky_relu(const Tensor<S>& x, S slope) {
  return unary<S>("leaky_relu", x, [slope](S v) { return v >= S(0) ? v : slope * v; },
                  [slope](S in, S) { return in >= S(0) ? S(1) : slope; });
}

template <typename S>
Tensor<S> clamp(const Tensor<S>& x, S lo, S hi) {
  return unary<S>("clamp", x, [lo, hi](S v) { return std::clamp(v, lo, hi); },
                  [lo, hi](S in, S) { return (in >= lo && in <= hi) ? S(1) : S(0); });
}

template <typename S>
Tensor<S> sum(const Tensor<S>& x) {
  Buffer<S> out(1);
  out[0] = x.data().sum();
  return detail::make_result<S>("sum", {}, out, {x}, [](Node<S>& self) {
    auto& in = *self.inputs[0];
    detail::accumulate<S>(in, Buffer<S>::Constant(in.data.size(), (*self.grad)[0]));
  });
}

template <typename S>
Tensor<S> mean(const Tensor<S>& x) {
  Buffer<S> out(1);
  out[0] = x.data().mean();
  return detail::make_result<S>("mean", {}, out, {x}, [](Node<S>& self) {
    auto& in = *self.inputs[0];
    const auto n = static_cast<S>(in.data.size());
    detail::accumulate<S>(in, Buffer<S>::Constant(in.data.size(), (*self.grad)[0] / n));
  });
}

template <typename S>
Tensor<S> reshape(const Tensor<S>& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw DimensionError("reshape", -1, "cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  return detail::make_result<S>("reshape", std::move(shape), x.data(), {x},
                                [](Node<S>& self) { detail::accumulate(*self.inputs[0], *self.grad); });
}

template <typename S>
Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b) {
  require_rank("concat_channels", a.shape(), 4);
  require_rank("concat_channels", b.shape(), 4);
  for (int axis : {0, 2, 3}) {
    if (a.dim(axis) != b.dim(axis)) {
      throw DimensionError("concat_channels", axis, shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    }
  }
  const Index n = a.dim(0);
  const Index plane = a.dim(2) * a.dim(3);
  const Index ca = a.dim(1) * plane;
  const Index cb = b.dim(1) * plane;
  Buffer<S> out(n * (ca + cb));
  for (Index i = 0; i < n; ++i) {
    out.segment(i * (ca + cb), ca) = a.data().segment(i * ca, ca);
    out.segment(i * (ca + cb) + ca, cb) = b.data().segment(i * cb, cb);
  }
  Shape shape{n, a.dim(1) + b.dim(1), a.dim(2), a.dim(3)};
  return detail::make_result<S>("concat_channels", shape, out, {a, b}, [n, ca, cb](Node<S>& self) {
    auto& x = *self.inputs[0];
    auto& y = *self.inputs[1];
    const auto& g = *self.grad;
    if (x.requires_grad) {
      Buffer<S> gx(n * ca);
      for (Index i = 0; i < n; ++i) gx.segment(i * ca, ca) = g.segment(i * (ca + cb), ca);
      detail::accumulate(x, gx);
    }
    if (y.requires_grad) {
      Buffer<S> gy(n * cb);
      for (Index i = 0; i < n; ++i) gy.segment(i * cb, cb) = g.segment(i * (ca + cb) + ca, cb);
      detail::accumulate(y, gy);
    }
  });
}

template <typename S>
Tensor<S> conv2d(const Tensor<S>& input, const Tensor<S>& kernel, const Tensor<S>& bias, int stride, int padding) {
  check_conv_params("conv2d", input.shape(), kernel.shape(), bias.shape(), 1, 0, stride, padding);
  const Index n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  const Index o = kernel.dim(0), k = kernel.dim(2);
  if (h + 2 * padding < k) throw DimensionError("conv2d", 2, "padded height smaller than kernel");
  if (w + 2 * padding < k) throw DimensionError("conv2d", 3, "padded width smaller than kernel");
  const Index oh = (h + 2 * padding - k) / stride + 1;
  const Index ow = (w + 2 * padding - k) / stride + 1;
  const Index patch = c * k * k;
  const Index grid = oh * ow;

  Buffer<S> out(n * o * grid);
  MatRM<S> col(patch, grid);
  ConstMapRM<S> wm(kernel.data().data(), o, patch);
  for (Index i = 0; i < n; ++i) {
    im2col(input.data().data() + i * c * h * w, c, h, w, k, stride, padding, oh, ow, col.data());
    MapRM<S> y(out.data() + i * o * grid, o, grid);
    y.noalias() = wm * col;
    y.colwise() += bias.data().matrix();
  }

  return detail::make_result<S>(
      "conv2d", {n, o, oh, ow}, std::move(out), {input, kernel, bias},
      [=](Node<S>& self) {
        auto& x = *self.inputs[0];
        auto& kern = *self.inputs[1];
        auto& b = *self.inputs[2];
        const auto& g = *self.grad;
        ConstMapRM<S> wmat(kern.data.data(), o, patch);
        MatRM<S> colbuf(patch, grid);
        MatRM<S> gw = MatRM<S>::Zero(o, patch);
        Buffer<S> gx;
        if (x.requires_grad) gx = Buffer<S>::Zero(x.data.size());
        for (Index i = 0; i < n; ++i) {
          ConstMapRM<S> gy(g.data() + i * o * grid, o, grid);
          if (kern.requires_grad) {
            im2col(x.data.data() + i * c * h * w, c, h, w, k, stride, padding, oh, ow, colbuf.data());
            gw.noalias() += gy * colbuf.transpose();
          }
          if (x.requires_grad) {
            colbuf.noalias() = wmat.transpose() * gy;
            col2im(colbuf.data(), c, h, w, k, stride, padding, oh, ow, gx.data() + i * c * h * w);
          }
        }
        if (x.requires_grad) detail::accumulate(x, gx);
        if (kern.requires_grad) detail::accumulate<S>(kern, Eigen::Map<const Buffer<S>>(gw.data(), gw.size()));
        if (b.requires_grad) {
          ConstMapRM<S> gall(g.data(), n * o, grid);
          Buffer<S> gb = Buffer<S>::Zero(o);
          const Eigen::Matrix<S, Eigen::Dynamic, 1> rows = gall.rowwise().sum();
          for (Index i = 0; i < n; ++i) gb += rows.segment(i * o, o).array();
          detail::accumulate(b, gb);
        }
      });
}

template <typename S>
Tensor<S> deconv2d(const Tensor<S>& input, const Tensor<S>& kernel, const Tensor<S>& bias, int stride, int padding) {
  check_conv_params("deconv2d", input.shape(), kernel.shape(), bias.shape(), 0, 1, stride, padding);
  const Index n = input.dim(0), ci = input.dim(1), h = input.dim(2), w = input.dim(3);
  const Index co = kernel.dim(1), k = kernel.dim(2);
  const Index oh = (h - 1) * stride - 2 * padding + k;
  const Index ow = (w - 1) * stride - 2 * padding + k;
  if (oh < 1) throw DimensionError("deconv2d", 2, "output height would be " + std::to_string(oh));
  if (ow < 1) throw DimensionError("deconv2d", 3, "output width would be " + std::to_string(ow));
  const Index patch = co * k * k;
  const Index grid = h * w;
  const Index out_plane = co * oh * ow;

  Buffer<S> out = Buffer<S>::Zero(n * out_plane);
  MatRM<S> col(patch, grid);
  ConstMapRM<S> wm(kernel.data().data(), ci, patch);
  for (Index i = 0; i < n; ++i) {
    ConstMapRM<S> x(input.data().data() + i * ci * grid, ci, grid);
    col.noalias() = wm.transpose() * x;
    S* y = out.data() + i * out_plane;
    col2im(col.data(), co, oh, ow, k, stride, padding, h, w, y);
    for (Index c = 0; c < co; ++c) {
      Eigen::Map<Buffer<S>>(y + c * oh * ow, oh * ow) += bias.data()[c];
    }
  }

  return detail::make_result<S>(
      "deconv2d", {n, co, oh, ow}, std::move(out), {input, kernel, bias},
      [=](Node<S>& self) {
        auto& x = *self.inputs[0];
        auto& kern = *self.inputs[1];
        auto& b = *self.inputs[2];
        const auto& g = *self.grad;
        ConstMapRM<S> wmat(kern.data.data(), ci, patch);
        MatRM<S> colbuf(patch, grid);
        MatRM<S> gw = MatRM<S>::Zero(ci, patch);
        Buffer<S> gx;
        if (x.requires_grad) gx = Buffer<S>::Zero(x.data.size());
        for (Index i = 0; i < n; ++i) {
          im2col(g.data() + i * out_plane, co, oh, ow, k, stride, padding, h, w, colbuf.data());
          if (x.requires_grad) {
            MapRM<S>(gx.data() + i * ci * grid, ci, grid).noalias() = wmat * colbuf;
          }
          if (kern.requires_grad) {
            ConstMapRM<S> xm(x.data.data() + i * ci * grid, ci, grid);
            gw.noalias() += xm * colbuf.transpose();
          }
        }
        if (x.requires_grad) detail::accumulate(x, gx);
        if (kern.requires_grad) detail::accumulate<S>(kern, Eigen::Map<const Buffer<S>>(gw.data(), gw.size()));
        if (b.requires_grad) {
          ConstMapRM<S> gall(g.data(), n * co, oh * ow);
          const Eigen::Matrix<S, Eigen::Dynamic, 1> rows = gall.rowwise().sum();
          Buffer<S> gb = Buffer<S>::Zero(co);
          for (Index i = 0; i < n; ++i) gb += rows.segment(i * co, co).array();
          detail::accumulate(b, gb);
        }
      });
}

template <typename S>
Tensor<S> upsample_nearest(const Tensor<S>& x, int factor) {
  require_rank("upsample_nearest", x.shape(), 4);
  require_positive("upsample_nearest", "factor", factor);
  const Index planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index oh = h * factor, ow = w * factor;
  Buffer<S> out(planes * oh * ow);
  for (Index p = 0; p < planes; ++p) {
    const S* src = x.data().data() + p * h * w;
    S* dst = out.data() + p * oh * ow;
    for (Index i = 0; i < oh; ++i) {
      for (Index j = 0; j < ow; ++j) dst[i * ow + j] = src[(i / factor) * w + j / factor];
    }
  }
  return detail::make_result<S>(
      "upsample_nearest", {x.dim(0), x.dim(1), oh, ow}, std::move(out), {x}, [=](Node<S>& self) {
        auto& in = *self.inputs[0];
        Buffer<S> g = Buffer<S>::Zero(in.data.size());
        for (Index p = 0; p < planes; ++p) {
          const S* src = self.grad->data() + p * oh * ow;
          S* dst = g.data() + p * h * w;
          for (Index i = 0; i < oh; ++i) {
            for (Index j = 0; j < ow; ++j) dst[(i / factor) * w + j / factor] += src[i * ow + j];
          }
        }
        detail::accumulate(in, g);
      });
}

namespace {

// Source taps for one axis of 2x half-pixel bilinear upsampling.
struct Taps {
  std::vector<Index> lo, hi;
  std::vector<double> w_lo, w_hi;
};

Taps bilinear_taps(Index in_extent) {
  Taps t;
  const Index out_extent = 2 * in_extent;
  for (Index o = 0; o < out_extent; ++o) {
    const double src = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
    const double f = std::floor(src);
    const double frac = src - f;
    const auto i0 = static_cast<Index>(f);
    t.lo.push_back(std::clamp<Index>(i0, 0, in_extent - 1));
    t.hi.push_back(std::clamp<Index>(i0 + 1, 0, in_extent - 1));
    t.w_lo.push_back(1.0 - frac);
    t.w_hi.push_back(frac);
  }
  return t;
}

}  // namespace

template <typename S>
Tensor<S> upsample_bilinear(const Tensor<S>& x) {
  require_rank("upsample_bilinear", x.shape(), 4);
  const Index planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index oh = 2 * h, ow = 2 * w;
  const Taps ty = bilinear_taps(h);
  const Taps tx = bilinear_taps(w);
  Buffer<S> out(planes * oh * ow);
  for (Index p = 0; p < planes; ++p) {
    const S* src = x.data().data() + p * h * w;
    S* dst = out.data() + p * oh * ow;
    for (Index i = 0; i < oh; ++i) {
      for (Index j = 0; j < ow; ++j) {
        const auto at = [&](Index r, Index c) { return static_cast<double>(src[r * w + c]); };
        const double v = ty.w_lo[i] * (tx.w_lo[j] * at(ty.lo[i], tx.lo[j]) + tx.w_hi[j] * at(ty.lo[i], tx.hi[j])) +
                         ty.w_hi[i] * (tx.w_lo[j] * at(ty.hi[i], tx.lo[j]) + tx.w_hi[j] * at(ty.hi[i], tx.hi[j]));
        dst[i * ow + j] = static_cast<S>(v);
      }
    }
  }
  return detail::make_result<S>(
      "upsample_bilinear", {x.dim(0), x.dim(1), oh, ow}, std::move(out), {x}, [=](Node<S>& self) {
        auto& in = *self.inputs[0];
        Buffer<S> g = Buffer<S>::Zero(in.data.size());
        for (Index p = 0; p < planes; ++p) {
          const S* src = self.grad->data() + p * oh * ow;
          S* dst = g.data() + p * h * w;
          for (Index i = 0; i < oh; ++i) {
            for (Index j = 0; j < ow; ++j) {
              const S gv = src[i * ow + j];
              dst[ty.lo[i] * w + tx.lo[j]] += static_cast<S>(ty.w_lo[i] * tx.w_lo[j]) * gv;
              dst[ty.lo[i] * w + tx.hi[j]] += static_cast<S>(ty.w_lo[i] * tx.w_hi[j]) * gv;
              dst[ty.hi[i] * w + tx.lo[j]] += static_cast<S>(ty.w_hi[i] * tx.w_lo[j]) * gv;
              dst[ty.hi[i] * w + tx.hi[j]] += static_cast<S>(ty.w_hi[i] * tx.w_hi[j]) * gv;
            }
          }
        }
        detail::accumulate(in, g);
      });
}

template <typename S>
Tensor<S> downsample_avg(const Tensor<S>& x, int factor) {
  require_rank("downsample_avg", x.shape(), 4);
  require_positive("downsample_avg", "factor", factor);
  const Index planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % factor != 0) throw DimensionError("downsample_avg", 2, "height not divisible by " + std::to_string(factor));
  if (w % factor != 0) throw DimensionError("downsample_avg", 3, "width not divisible by " + std::to_string(factor));
  const Index oh = h / factor, ow = w / factor;
  const S inv = S(1) / static_cast<S>(factor * factor);
  Buffer<S> out(planes * oh * ow);
  for (Index p = 0; p < planes; ++p) {
    const S* src = x.data().data() + p * h * w;
    S* dst = out.data() + p * oh * ow;
    for (Index i = 0; i < oh; ++i) {
      for (Index j = 0; j < ow; ++j) {
        S acc = 0;
        for (Index a = 0; a < factor; ++a) {
          for (Index b = 0; b < factor; ++b) acc += src[(i * factor + a) * w + j * factor + b];
        }
        dst[i * ow + j] = acc * inv;
      }
    }
  }
  return detail::make_result<S>(
      "downsample_avg", {x.dim(0), x.dim(1), oh, ow}, std::move(out), {x}, [=](Node<S>& self) {
        auto& in = *self.inputs[0];
        Buffer<S> g(in.data.size());
        for (Index p = 0; p < planes; ++p) {
          const S* src = self.grad->data() + p * oh * ow;
          S* dst = g.data() + p * h * w;
          for (Index i = 0; i < h; ++i) {
            for (Index j = 0; j < w; ++j) dst[i * w + j] = src[(i / factor) * ow + j / factor] * inv;
          }
        }
        detail::accumulate(in, g);
      });
}

template <typename S>
Tensor<S> global_avg_pool(const Tensor<S>& x) {
  require_rank("global_avg_pool", x.shape(), 4);
  const Index n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  ConstMapRM<S> xm(x.data().data(), n * c, plane);
  Buffer<S> out = xm.rowwise().mean().array();
  return detail::make_result<S>("global_avg_pool", {n, c}, std::move(out), {x}, [=](Node<S>& self) {
    auto& in = *self.inputs[0];
    Buffer<S> g(in.data.size());
    MapRM<S> gm(g.data(), n * c, plane);
    gm = (self.grad->matrix() / static_cast<S>(plane)).replicate(1, plane);
    detail::accumulate(in, g);
  });
}

template <typename S>
Tensor<S> dense(const Tensor<S>& input, const Tensor<S>& weight, const Tensor<S>& bias) {
  require_rank("dense", input.shape(), 2);
  require_rank("dense", weight.shape(), 2);
  require_rank("dense", bias.shape(), 1);
  const Index n = input.dim(0), f = input.dim(1), g = weight.dim(1);
  if (weight.dim(0) != f) {
    throw DimensionError("dense", 1,
                         "input has " + std::to_string(f) + " features, weight " + shape_string(weight.shape()));
  }
  if (bias.dim(0) != g) throw DimensionError("dense", 0, "bias length does not match output features");
  Buffer<S> out(n * g);
  MapRM<S> y(out.data(), n, g);
  y.noalias() = ConstMapRM<S>(input.data().data(), n, f) * ConstMapRM<S>(weight.data().data(), f, g);
  y.rowwise() += bias.data().matrix().transpose();
  return detail::make_result<S>("dense", {n, g}, std::move(out), {input, weight, bias}, [=](Node<S>& self) {
    auto& x = *self.inputs[0];
    auto& wt = *self.inputs[1];
    auto& b = *self.inputs[2];
    ConstMapRM<S> gy(self.grad->data(), n, g);
    if (x.requires_grad) {
      Buffer<S> gx(n * f);
      MapRM<S>(gx.data(), n, f).noalias() = gy * ConstMapRM<S>(wt.data.data(), f, g).transpose();
      detail::accumulate(x, gx);
    }
    if (wt.requires_grad) {
      Buffer<S> gw(f * g);
      MapRM<S>(gw.data(), f, g).noalias() = ConstMapRM<S>(x.data.data(), n, f).transpose() * gy;
      detail::accumulate(wt, gw);
    }
    if (b.requires_grad) detail::accumulate<S>(b, gy.colwise().sum().transpose().array());
  });
}

template <typename S>
Tensor<S> batch_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta, const BatchNormOptions& options,
                     Buffer<S>* running_mean, Buffer<S>* running_var) {
  if (x.ndim() != 2 && x.ndim() != 4) throw DimensionError("batch_norm", -1, "expected NxF or NxCxHxW input");
  require_rank("batch_norm", gamma.shape(), 1);
  require_rank("batch_norm", beta.shape(), 1);
  const Index n = x.dim(0), c = x.dim(1);
  const Index plane = x.ndim() == 4 ? x.dim(2) * x.dim(3) : 1;
  if (gamma.dim(0) != c) throw DimensionError("batch_norm", 1, "gamma length does not match channels");
  if (beta.dim(0) != c) throw DimensionError("batch_norm", 1, "beta length does not match channels");
  const Index m = n * plane;
  const auto eps = static_cast<S>(options.epsilon);

  // Per-channel statistics over batch and spatial positions.
  Buffer<S> mu(c), var(c);
  if (options.training) {
    for (Index ch = 0; ch < c; ++ch) {
      double acc = 0;
      for (Index i = 0; i < n; ++i) acc += x.data().segment((i * c + ch) * plane, plane).template cast<double>().sum();
      const double mean_v = acc / static_cast<double>(m);
      double sq = 0;
      for (Index i = 0; i < n; ++i) {
        sq += (x.data().segment((i * c + ch) * plane, plane).template cast<double>() - mean_v).square().sum();
      }
      mu[ch] = static_cast<S>(mean_v);
      var[ch] = static_cast<S>(sq / static_cast<double>(m));
    }
    if (running_mean != nullptr && running_var != nullptr) {
      const auto mom = static_cast<S>(options.momentum);
      const S unbias = m > 1 ? static_cast<S>(m) / static_cast<S>(m - 1) : S(1);
      *running_mean = mom * *running_mean + (S(1) - mom) * mu;
      *running_var = mom * *running_var + (S(1) - mom) * var * unbias;
    }
  } else {
    if (running_mean == nullptr || running_var == nullptr) {
      throw std::invalid_argument("batch_norm: inference mode needs running statistics");
    }
    mu = *running_mean;
    var = *running_var;
  }
  const Buffer<S> inv_std = (var + eps).rsqrt();

  Buffer<S> xhat(x.size());
  Buffer<S> out(x.size());
  for (Index i = 0; i < n; ++i) {
    for (Index ch = 0; ch < c; ++ch) {
      const Index off = (i * c + ch) * plane;
      xhat.segment(off, plane) = (x.data().segment(off, plane) - mu[ch]) * inv_std[ch];
      out.segment(off, plane) = xhat.segment(off, plane) * gamma.data()[ch] + beta.data()[ch];
    }
  }

  const bool training = options.training;
  return detail::make_result<S>(
      "batch_norm", x.shape(), std::move(out), {x, gamma, beta},
      [=, xhat = std::move(xhat)](Node<S>& self) {
        auto& in = *self.inputs[0];
        auto& gm = *self.inputs[1];
        auto& bt = *self.inputs[2];
        const auto& g = *self.grad;
        Buffer<S> sum_g = Buffer<S>::Zero(c), sum_gx = Buffer<S>::Zero(c);
        for (Index i = 0; i < n; ++i) {
          for (Index ch = 0; ch < c; ++ch) {
            const Index off = (i * c + ch) * plane;
            sum_g[ch] += g.segment(off, plane).sum();
            sum_gx[ch] += (g.segment(off, plane) * xhat.segment(off, plane)).sum();
          }
        }
        if (gm.requires_grad) detail::accumulate(gm, sum_gx);
        if (bt.requires_grad) detail::accumulate(bt, sum_g);
        if (!in.requires_grad) return;
        Buffer<S> gx(in.data.size());
        const S inv_m = S(1) / static_cast<S>(m);
        for (Index i = 0; i < n; ++i) {
          for (Index ch = 0; ch < c; ++ch) {
            const Index off = (i * c + ch) * plane;
            const S scale_c = gm.data[ch] * inv_std[ch];
            if (training) {
              gx.segment(off, plane) =
                  scale_c * (g.segment(off, plane) - inv_m * sum_g[ch] - xhat.segment(off, plane) * inv_m * sum_gx[ch]);
            } else {
              gx.segment(off, plane) = scale_c * g.segment(off, plane);
            }
          }
        }
        detail::accumulate(in, gx);
      });
}

template <typename S>
Tensor<S> softmax_cross_entropy(const Tensor<S>& logits, std::span<const int> labels) {
  require_rank("softmax_cross_entropy", logits.shape(), 2);
  const Index n = logits.dim(0), k = logits.dim(1);
  if (static_cast<Index>(labels.size()) != n) {
    throw DimensionError("softmax_cross_entropy", 0, "label count does not match batch size");
  }
  ConstMapRM<S> z(logits.data().data(), n, k);
  MatRM<S> prob(n, k);
  double loss = 0;
  std::vector<int> lab(labels.begin(), labels.end());
  for (Index i = 0; i < n; ++i) {
    if (lab[i] < 0 || lab[i] >= k) throw std::invalid_argument("softmax_cross_entropy: label out of range");
    const S zmax = z.row(i).maxCoeff();
    prob.row(i) = (z.row(i).array() - zmax).exp();
    const S denom = prob.row(i).sum();
    prob.row(i) /= denom;
    loss -= static_cast<double>(z(i, lab[i]) - zmax - std::log(denom));
  }
  Buffer<S> out(1);
  out[0] = static_cast<S>(loss / static_cast<double>(n));
  return detail::make_result<S>("softmax_cross_entropy", {}, std::move(out), {logits},
                                [=, prob = std::move(prob), lab = std::move(lab)](Node<S>& self) {
                                  MatRM<S> g = prob;
                                  for (Index i = 0; i < n; ++i) g(i, lab[i]) -= S(1);
                                  g *= (*self.grad)[0] / static_cast<S>(n);
                                  detail::accumulate<S>(*self.inputs[0], Eigen::Map<const Buffer<S>>(g.data(), g.size()));
                                });
}

template <typename S>
Tensor<S> sample_normal(Rng& rng, Shape shape) {
  Buffer<S> data(shape_size(shape));
  for (Index i = 0; i < data.size(); ++i) data[i] = static_cast<S>(rng.normal());
  return Tensor<S>(std::move(shape), std::move(data));
}

template <typename S>
Tensor<S> sample_uniform(Rng& rng, Shape shape, S lo, S hi) {
  Buffer<S> data(shape_size(shape));
  for (Index i = 0; i < data.size(); ++i) data[i] = static_cast<S>(rng.uniform(lo, hi));
  return Tensor<S>(std::move(shape), std::move(data));
}

#define DDGAN_INSTANTIATE_OPS(S)                                                                                      \
  template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);                                                         \
  template Tensor<S> sub(const Tensor<S>&, const Tensor<S>&);                                                         \
  template Tensor<S> mul(const Tensor<S>&, const Tensor<S>&);                                                         \
  template Tensor<S> scale(const Tensor<S>&, S);                                                                      \
  template Tensor<S> add_scalar(const Tensor<S>&, S);                                                                 \
  template Tensor<S> square(const Tensor<S>&);                                                                        \
  template Tensor<S> log(const Tensor<S>&);                                                                           \
  template Tensor<S> tanh(const Tensor<S>&);                                                                          \
  template Tensor<S> sigmoid(const Tensor<S>&);                                                                       \
  template Tensor<S> leaky_relu(const Tensor<S>&, S);                                                                 \
  template Tensor<S> clamp(const Tensor<S>&, S, S);                                                                   \
  template Tensor<S> sum(const Tensor<S>&);                                                                           \
  template Tensor<S> mean(const Tensor<S>&);                                                                          \
  template Tensor<S> reshape(const Tensor<S>&, Shape);                                                                \
  template Tensor<S> concat_channels(const Tensor<S>&, const Tensor<S>&);                                             \
  template Tensor<S> conv2d(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, int, int);                          \
  template Tensor<S> deconv2d(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, int, int);                        \
  template Tensor<S> upsample_nearest(const Tensor<S>&, int);                                                         \
  template Tensor<S> upsample_bilinear(const Tensor<S>&);                                                             \
  template Tensor<S> downsample_avg(const Tensor<S>&, int);                                                           \
  template Tensor<S> global_avg_pool(const Tensor<S>&);                                                               \
  template Tensor<S> dense(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&);                                     \
  template Tensor<S> batch_norm(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, const BatchNormOptions&,        \
                                Buffer<S>*, Buffer<S>*);                                                              \
  template Tensor<S> softmax_cross_entropy(const Tensor<S>&, std::span<const int>);                                   \
  template Tensor<S> sample_normal(Rng&, Shape);                                                                      \
  template Tensor<S> sample_uniform(Rng&, Shape, S, S);

DDGAN_INSTANTIATE_OPS(float)
DDGAN_INSTANTIATE_OPS(double)

#undef DDGAN_INSTANTIATE_OPS

}  // namespace ddgan
