#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "nggan/ndiff/tensor.hpp"

namespace nggan::nd {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
  // L2 term: weight_decay * param is added to the gradient before the update.
  double weight_decay = 0.0;
  // When set, every parameter is clamped to [-clip, clip] after each step.
  std::optional<double> clip_value;

  void validate() const;
};

// Adaptive-moment optimizer with bias correction:
//   g' = g + weight_decay * p
//   m = b1 m + (1 - b1) g',  v = b2 v + (1 - b2) g'^2
//   p -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
template <typename T>
class Adam {
 public:
  Adam() = default;
  // Moments are sized from `params`; later calls must pass the same list in
  // the same order. The optimizer keeps no pointers, so owners stay copyable.
  Adam(AdamConfig cfg, const std::vector<Param<T>*>& params);

  // Applies one update from the gradients stored in the parameters.
  void step(const std::vector<Param<T>*>& params);
  void clip(const std::vector<Param<T>*>& params) const;

  const AdamConfig& config() const { return cfg_; }
  std::uint64_t steps() const { return steps_; }
  void set_steps(std::uint64_t s) { steps_ = s; }
  std::vector<std::vector<T>>& first_moments() { return m_; }
  std::vector<std::vector<T>>& second_moments() { return v_; }
  const std::vector<std::vector<T>>& first_moments() const { return m_; }
  const std::vector<std::vector<T>>& second_moments() const { return v_; }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<T>> m_;
  std::vector<std::vector<T>> v_;
  std::uint64_t steps_ = 0;

};

// Largest |value| over the given parameters.
template <typename T>
double max_abs_value(const std::vector<Param<T>*>& params);

}  // namespace nggan::nd
