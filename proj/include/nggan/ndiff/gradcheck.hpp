#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

namespace nggan::nd {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  // Components whose ReLU / leaky-ReLU sign pattern changed between the +h and
  // -h evaluations. The loss is not differentiable across such a kink.
  std::size_t skipped_kinks = 0;
};

// Central differences (f(c+h) - f(c-h)) / 2h for every coordinate, compared with
// `analytic`. Per component the error is
//   |a - n| / max(|a|, |n|, 1e-3 * max_k |a_k|)
// so that components many orders below the gradient scale are judged on an
// absolute footing. `signature`, when given, returns the activation sign
// pattern of the current evaluation.
GradCheckResult check_gradient(const std::vector<double*>& coords, const std::vector<double>& analytic,
                               const std::function<double()>& loss,
                               const std::function<std::vector<bool>()>& signature = {}, double h = 1e-4);

enum class LayerKind {
  Conv1d,
  Dense,
  BatchNorm,
  Relu,
  LeakyRelu,
  Tanh,
  UpsampleNearest,
  UpsampleLinear,
  UpsampleHybrid,
  Dropout,
  TanhChain,  // dense -> tanh -> dense
};

inline constexpr LayerKind kAllLayerKinds[] = {
    LayerKind::Conv1d,          LayerKind::Dense,          LayerKind::BatchNorm,      LayerKind::Relu,
    LayerKind::LeakyRelu,       LayerKind::Tanh,           LayerKind::UpsampleNearest, LayerKind::UpsampleLinear,
    LayerKind::UpsampleHybrid,  LayerKind::Dropout,        LayerKind::TanhChain,
};

std::string_view to_string(LayerKind kind);

// Builds a random small 64-bit case for `kind` from `seed` (shapes, weights,
// inputs and the upstream gradient), and checks every parameter and input
// component with loss = sum(upstream * output).
GradCheckResult grad_check(LayerKind kind, std::uint64_t seed, double h = 1e-4);

}  // namespace nggan::nd
