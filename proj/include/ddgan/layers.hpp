#ifndef DDGAN_LAYERS_HPP_
#define DDGAN_LAYERS_HPP_

#include "ddgan/ops.hpp"
#include "ddgan/rng.hpp"
#include "ddgan/tensor.hpp"

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace ddgan {

/// Named model state, ordered lexicographically by name. Trainable entries
/// are parameters; the rest are buffers such as batch-norm running statistics.
class ParameterSet {
 public:
  struct Entry {
    Tensorf tensor;
    bool trainable = true;
  };

  Tensorf add(const std::string& name, Tensorf value, bool trainable = true);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  Tensorf at(const std::string& name) const;
  const std::map<std::string, Entry>& entries() const { return entries_; }

  /// Trainable (name, tensor) pairs whose name starts with `prefix`.
  std::vector<std::pair<std::string, Tensorf>> trainable(std::string_view prefix = "") const;
  /// Sum of element counts over trainable tensors under `prefix`.
  Index count(std::string_view prefix = "") const;

  void zero_grad(std::string_view prefix = "");

 private:
  std::map<std::string, Entry> entries_;
};

enum class Mode { train, eval };

/// Zero-mean normal weights with std 0.02, zero bias; `zero_init` zeroes both.
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParameterSet& params, const std::string& name, Index in, Index out, int kernel, int stride, int padding,
         Rng& rng, bool zero_init = false);
  Tensorf operator()(const Tensorf& x) const { return conv2d(x, weight, bias, stride, padding); }

  Tensorf weight, bias;
  int stride = 1, padding = 0;
};

class Deconv2d {
 public:
  Deconv2d() = default;
  Deconv2d(ParameterSet& params, const std::string& name, Index in, Index out, int kernel, int stride, int padding,
           Rng& rng);
  Tensorf operator()(const Tensorf& x) const { return deconv2d(x, weight, bias, stride, padding); }

  Tensorf weight, bias;
  int stride = 1, padding = 0;
};

class Dense {
 public:
  Dense() = default;
  Dense(ParameterSet& params, const std::string& name, Index in, Index out, Rng& rng);
  Tensorf operator()(const Tensorf& x) const { return dense(x, weight, bias); }

  Tensorf weight, bias;
};

/// gamma ~ N(1, 0.02), beta = 0; running mean 0 and variance 1.
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(ParameterSet& params, const std::string& name, Index channels, Rng& rng);
  /// Train mode normalizes with batch statistics and folds them into the
  /// running buffers; eval mode uses the running buffers.
  Tensorf operator()(const Tensorf& x, Mode mode) const;

  Tensorf gamma, beta, running_mean, running_var;
};

}  // namespace ddgan

#endif  // DDGAN_LAYERS_HPP_
