#include "ddgan/losses.hpp"

#include "ddgan/errors.hpp"
#include "ddgan/ops.hpp"

namespace ddgan {

namespace {

template <typename S>
void require_batch(const char* op, const Tensor<S>& t) {
  if (!t.defined() || t.size() == 0) throw DimensionError(op, 0, "empty batch");
}

template <typename S>
Tensor<S> clamped(const Tensor<S>& p) {
  return clamp(p, static_cast<S>(kProbabilityClamp), static_cast<S>(1.0 - kProbabilityClamp));
}

}  // namespace

std::string to_string(LossKind kind) { return kind == LossKind::vanilla ? "vanilla" : "least_squares"; }

LossKind parse_loss_kind(const std::string& text) {
  if (text == "vanilla") return LossKind::vanilla;
  if (text == "least_squares" || text == "lsgan") return LossKind::least_squares;
  throw ConfigError("unknown loss kind '" + text + "'", "loss");
}

template <typename S>
Tensor<S> vanilla_value(const Tensor<S>& d_real_probs, const Tensor<S>& d_fake_probs) {
  require_batch("vanilla_value", d_real_probs);
  require_batch("vanilla_value", d_fake_probs);
  const auto real_term = mean(log(clamped(d_real_probs)));
  const auto fake_term = mean(log(add_scalar(scale(clamped(d_fake_probs), S(-1)), S(1))));
  return add(real_term, fake_term);
}

template <typename S>
Tensor<S> vanilla_d_loss(const Tensor<S>& d_real_probs, const Tensor<S>& d_fake_probs) {
  return scale(vanilla_value(d_real_probs, d_fake_probs), S(-1));
}

template <typename S>
Tensor<S> vanilla_g_loss(const Tensor<S>& d_fake_probs) {
  require_batch("vanilla_g_loss", d_fake_probs);
  return scale(mean(log(clamped(d_fake_probs))), S(-1));
}

template <typename S>
Tensor<S> lsgan_d_loss(const Tensor<S>& d_real_scores, const Tensor<S>& d_fake_scores) {
  require_batch("lsgan_d_loss", d_real_scores);
  require_batch("lsgan_d_loss", d_fake_scores);
  const auto real_term = mean(square(add_scalar(d_real_scores, S(-1))));
  const auto fake_term = mean(square(d_fake_scores));
  return scale(add(real_term, fake_term), S(0.5));
}

template <typename S>
Tensor<S> lsgan_g_loss(const Tensor<S>& d_fake_scores) {
  require_batch("lsgan_g_loss", d_fake_scores);
  return scale(mean(square(add_scalar(d_fake_scores, S(-1)))), S(0.5));
}

template <typename S>
Tensor<S> discriminator_loss(LossKind kind, const Tensor<S>& d_real, const Tensor<S>& d_fake) {
  return kind == LossKind::vanilla ? vanilla_d_loss(d_real, d_fake) : lsgan_d_loss(d_real, d_fake);
}

template <typename S>
Tensor<S> generator_loss(LossKind kind, const Tensor<S>& d_fake) {
  return kind == LossKind::vanilla ? vanilla_g_loss(d_fake) : lsgan_g_loss(d_fake);
}

#define DDGAN_INSTANTIATE_LOSSES(S)                                                   \
  template Tensor<S> vanilla_value(const Tensor<S>&, const Tensor<S>&);               \
  template Tensor<S> vanilla_d_loss(const Tensor<S>&, const Tensor<S>&);              \
  template Tensor<S> vanilla_g_loss(const Tensor<S>&);                                \
  template Tensor<S> lsgan_d_loss(const Tensor<S>&, const Tensor<S>&);                \
  template Tensor<S> lsgan_g_loss(const Tensor<S>&);                                  \
  template Tensor<S> discriminator_loss(LossKind, const Tensor<S>&, const Tensor<S>&); \
  template Tensor<S> generator_loss(LossKind, const Tensor<S>&);

DDGAN_INSTANTIATE_LOSSES(float)
DDGAN_INSTANTIATE_LOSSES(double)

#undef DDGAN_INSTANTIATE_LOSSES

}  // namespace ddgan
