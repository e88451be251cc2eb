#include "ddgan/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace ddgan {

Adam::Adam(std::vector<std::pair<std::string, Tensorf>> params, AdamOptions options) : options_(options) {
  slots_.reserve(params.size());
  for (auto& [name, tensor] : params) {
    const Index n = tensor.size();
    slots_.push_back(Slot{std::move(name), tensor, Buffer<float>::Zero(n), Buffer<float>::Zero(n)});
  }
}

void Adam::step() {
  for (const auto& slot : slots_) {
    if (!slot.param.has_grad()) throw std::logic_error("adam_step: parameter " + slot.name + " has no gradient");
  }
  ++steps_;
  const auto b1 = static_cast<float>(options_.beta1);
  const auto b2 = static_cast<float>(options_.beta2);
  const auto step_size =
      static_cast<float>(options_.learning_rate / (1.0 - std::pow(options_.beta1, static_cast<double>(steps_))));
  const auto v_correction = static_cast<float>(1.0 / (1.0 - std::pow(options_.beta2, static_cast<double>(steps_))));
  const auto eps = static_cast<float>(options_.epsilon);
  for (auto& slot : slots_) {
    const auto& g = slot.param.grad();
    slot.m = b1 * slot.m + (1.0f - b1) * g;
    slot.v = b2 * slot.v + (1.0f - b2) * g.square();
    slot.param.mutable_data() -= step_size * slot.m / ((slot.v * v_correction).sqrt() + eps);
  }
}

void Adam::zero_grad() {
  for (auto& slot : slots_) slot.param.zero_grad();
}

}  // namespace ddgan
