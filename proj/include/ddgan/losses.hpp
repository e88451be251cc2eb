#ifndef DDGAN_LOSSES_HPP_
#define DDGAN_LOSSES_HPP_

#include "ddgan/tensor.hpp"

#include <string>

namespace ddgan {

/// vanilla: discriminators emit sigmoid probabilities and the log-loss game
/// is played. least_squares: discriminators emit raw scores.
enum class LossKind { vanilla, least_squares };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

/// Probabilities are clamped to [eps, 1 - eps] before taking logs.
inline constexpr double kProbabilityClamp = 1e-7;

/// V(D, G) = E[log D(x)] + E[log(1 - D(G(z)))] over the two batches of
/// discriminator probabilities.
template <typename S>
Tensor<S> vanilla_value(const Tensor<S>& d_real_probs, const Tensor<S>& d_fake_probs);

/// Discriminator ascends V, so its loss is -V.
template <typename S>
Tensor<S> vanilla_d_loss(const Tensor<S>& d_real_probs, const Tensor<S>& d_fake_probs);

/// Non-saturating generator loss -E[log D(G(z))].
template <typename S>
Tensor<S> vanilla_g_loss(const Tensor<S>& d_fake_probs);

/// L_D = 1/2 E[(D(x) - 1)^2] + 1/2 E[D(G(z))^2].
template <typename S>
Tensor<S> lsgan_d_loss(const Tensor<S>& d_real_scores, const Tensor<S>& d_fake_scores);

/// L_G = 1/2 E[(D(G(z)) - 1)^2].
template <typename S>
Tensor<S> lsgan_g_loss(const Tensor<S>& d_fake_scores);

template <typename S>
struct AdversarialLosses {
  Tensor<S> d_loss;
  Tensor<S> g_loss;
};

template <typename S>
AdversarialLosses<S> lsgan_losses(const Tensor<S>& d_real_scores, const Tensor<S>& d_fake_scores) {
  return {lsgan_d_loss(d_real_scores, d_fake_scores), lsgan_g_loss(d_fake_scores)};
}

/// Dispatch on the loss kind.
template <typename S>
Tensor<S> discriminator_loss(LossKind kind, const Tensor<S>& d_real, const Tensor<S>& d_fake);
template <typename S>
Tensor<S> generator_loss(LossKind kind, const Tensor<S>& d_fake);

}  // namespace ddgan

#endif  // DDGAN_LOSSES_HPP_
