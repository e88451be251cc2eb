#ifndef DDGAN_ADAM_HPP_
#define DDGAN_ADAM_HPP_

#include "ddgan/tensor.hpp"

#include <string>
#include <utility>
#include <vector>

namespace ddgan {

struct AdamOptions {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected adaptive-moment updates over a fixed list of parameters.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<std::pair<std::string, Tensorf>> params, AdamOptions options);

  /// Applies one update from the current gradients, which are left untouched.
  /// Throws std::logic_error naming the first parameter without a gradient.
  void step();
  void zero_grad();

  long step_count() const { return steps_; }
  const AdamOptions& options() const { return options_; }
  const Buffer<float>& first_moment(std::size_t i) const { return slots_.at(i).m; }
  const Buffer<float>& second_moment(std::size_t i) const { return slots_.at(i).v; }
  std::size_t size() const { return slots_.size(); }

 private:
  struct Slot {
    std::string name;
    Tensorf param;
    Buffer<float> m, v;
  };
  std::vector<Slot> slots_;
  AdamOptions options_;
  long steps_ = 0;
};

}  // namespace ddgan

#endif  // DDGAN_ADAM_HPP_
