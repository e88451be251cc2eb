#ifndef DDGAN_OPS_HPP_
#define DDGAN_OPS_HPP_

#include "ddgan/rng.hpp"
#include "ddgan/tensor.hpp"

#include <span>

namespace ddgan {

// Elementwise. Binary operations require identical shapes.
template <typename S> Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> scale(const Tensor<S>& x, S factor);
template <typename S> Tensor<S> add_scalar(const Tensor<S>& x, S value);
template <typename S> Tensor<S> square(const Tensor<S>& x);
template <typename S> Tensor<S> log(const Tensor<S>& x);
template <typename S> Tensor<S> tanh(const Tensor<S>& x);
template <typename S> Tensor<S> sigmoid(const Tensor<S>& x);
/// x for x >= 0, slope * x otherwise.
template <typename S> Tensor<S> leaky_relu(const Tensor<S>& x, S slope);
template <typename S> Tensor<S> relu(const Tensor<S>& x) { return leaky_relu(x, S(0)); }
/// Gradient passes only where lo <= x <= hi.
template <typename S> Tensor<S> clamp(const Tensor<S>& x, S lo, S hi);

// Reductions to a rank-0 scalar.
template <typename S> Tensor<S> sum(const Tensor<S>& x);
template <typename S> Tensor<S> mean(const Tensor<S>& x);

template <typename S> Tensor<S> reshape(const Tensor<S>& x, Shape shape);
/// NCHW concatenation along the channel axis.
template <typename S> Tensor<S> concat_channels(const Tensor<S>& a, const Tensor<S>& b);

/// Zero-padded cross-correlation. input NCHW, kernel OxIxKxK, bias O.
/// Output extent floor((H + 2p - K) / s) + 1.
template <typename S>
Tensor<S> conv2d(const Tensor<S>& input, const Tensor<S>& kernel, const Tensor<S>& bias, int stride, int padding);

/// Transposed convolution, the adjoint of conv2d for the same kernel.
/// input NxIxHxW, kernel IxOxKxK (same layout conv2d uses for an O->I map),
/// bias O. Output extent (H - 1) * s - 2p + K.
template <typename S>
Tensor<S> deconv2d(const Tensor<S>& input, const Tensor<S>& kernel, const Tensor<S>& bias, int stride, int padding);

template <typename S> Tensor<S> upsample_nearest(const Tensor<S>& x, int factor);
/// 2x bilinear upsampling, half-pixel centers, edge clamped.
template <typename S> Tensor<S> upsample_bilinear(const Tensor<S>& x);
/// Non-overlapping factor x factor mean pooling.
template <typename S> Tensor<S> downsample_avg(const Tensor<S>& x, int factor);
/// NCHW -> NC.
template <typename S> Tensor<S> global_avg_pool(const Tensor<S>& x);

/// input NxF, weight FxG, bias G.
template <typename S> Tensor<S> dense(const Tensor<S>& input, const Tensor<S>& weight, const Tensor<S>& bias);

struct BatchNormOptions {
  double epsilon = 1e-5;
  /// running = momentum * running + (1 - momentum) * batch statistic.
  double momentum = 0.9;
  bool training = true;
};

/// Per-channel normalization over axis 1 of an NxF or NxCxHxW input.
/// In training mode the batch statistics are used and, when running buffers
/// are supplied, folded into them; otherwise the running statistics are used.
template <typename S>
Tensor<S> batch_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta, const BatchNormOptions& options,
                     Buffer<S>* running_mean = nullptr, Buffer<S>* running_var = nullptr);

/// Mean softmax cross-entropy of NxK logits against integer labels.
template <typename S> Tensor<S> softmax_cross_entropy(const Tensor<S>& logits, std::span<const int> labels);

/// I.i.d. standard normal entries drawn in row-major order.
template <typename S> Tensor<S> sample_normal(Rng& rng, Shape shape);
template <typename S> Tensor<S> sample_uniform(Rng& rng, Shape shape, S lo, S hi);

template <typename S> Tensor<S> operator+(const Tensor<S>& a, const Tensor<S>& b) { return add(a, b); }
template <typename S> Tensor<S> operator-(const Tensor<S>& a, const Tensor<S>& b) { return sub(a, b); }
template <typename S> Tensor<S> operator*(const Tensor<S>& a, const Tensor<S>& b) { return mul(a, b); }

}  // namespace ddgan

#endif  // DDGAN_OPS_HPP_
