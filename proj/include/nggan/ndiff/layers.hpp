#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "nggan/ndiff/tensor.hpp"
#include "nggan/rng.hpp"

namespace nggan::nd {

// ---------------------------------------------------------------------------
// Conv1d
//
// Cross-correlation without kernel flip:
//   y[b, t, o] = bias[o] + sum_{k, i} x[b, t*stride + k - pad_left, i] * kernel[k, i, o]
// with zeros outside [0, length). Output length is
//   floor((length + pad_left + pad_right - k_len) / stride) + 1.
// ---------------------------------------------------------------------------
template <typename T>
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(const std::string& name, std::size_t k_len, std::size_t in_ch, std::size_t out_ch, std::size_t stride,
         std::size_t pad_left, std::size_t pad_right);

  std::size_t out_length(std::size_t in_length) const;
  Tensor3<T> forward(const Tensor3<T>& x) const;
  // Accumulates into kernel.grad / bias.grad and returns the input gradient.
  Tensor3<T> backward(const Tensor3<T>& x, const Tensor3<T>& grad_out);

  std::size_t k_len = 0;
  std::size_t in_ch = 0;
  std::size_t out_ch = 0;
  std::size_t stride = 1;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;
  Param<T> kernel;  // (k_len, in_ch, out_ch)
  Param<T> bias;    // (out_ch)
};

template <typename T>
struct ConvGrads {
  Tensor3<T> grad_x;
  std::vector<T> grad_kernel;
  std::vector<T> grad_bias;
};

// Gradients of sum(grad_out * conv.forward(x)); does not touch the layer.
template <typename T>
ConvGrads<T> conv1d_backward(const Conv1d<T>& conv, const Tensor3<T>& x, const Tensor3<T>& grad_out);

// ---------------------------------------------------------------------------
// Dense: y = x W + b over the flattened (length * channels) features of each
// batch element. Output shape is (batch, 1, out_dim).
// ---------------------------------------------------------------------------
template <typename T>
class Dense {
 public:
  Dense() = default;
  Dense(const std::string& name, std::size_t in_dim, std::size_t out_dim);

  Tensor3<T> forward(const Tensor3<T>& x) const;
  Tensor3<T> backward(const Tensor3<T>& x, const Tensor3<T>& grad_out);

  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Param<T> weights;  // (in_dim, out_dim)
  Param<T> bias;     // (out_dim)
};

// ---------------------------------------------------------------------------
// Batch normalisation over (batch, length) per channel.
// ---------------------------------------------------------------------------
template <typename T>
struct BatchNormCache {
  Tensor3<T> x_hat;
  std::vector<T> inv_std;
  bool training = false;
};

template <typename T>
class BatchNorm {
 public:
  BatchNorm() = default;
  BatchNorm(const std::string& name, std::size_t channels, T eps = T(1e-5), T momentum = T(0.1));

  // Training mode normalises by the biased batch variance and folds the batch
  // statistics into the running estimates (unbiased variance). Throws
  // DegenerateInput if batch < 2 in training mode.
  Tensor3<T> forward(const Tensor3<T>& x, bool training, BatchNormCache<T>* cache = nullptr);
  Tensor3<T> backward(const BatchNormCache<T>& cache, const Tensor3<T>& grad_out);

  std::size_t channels = 0;
  T eps = T(1e-5);
  T momentum = T(0.1);
  Param<T> gamma;
  Param<T> beta;
  Param<T> running_mean;  // buffer, never optimised
  Param<T> running_var;   // buffer, never optimised
};

// ---------------------------------------------------------------------------
// Elementwise activations. The derivative at exactly 0 takes the negative-side
// slope (0 for ReLU, `slope` for leaky ReLU).
// ---------------------------------------------------------------------------
enum class Activation { Relu, LeakyRelu, Tanh };

template <typename T>
Tensor3<T> activation_forward(Activation kind, const Tensor3<T>& x, T slope = T(0.2));
// `x` is the forward input and `y` the forward output; tanh uses y, the others x.
template <typename T>
Tensor3<T> activation_backward(Activation kind, const Tensor3<T>& x, const Tensor3<T>& y,
                               const Tensor3<T>& grad_out, T slope = T(0.2));

// ---------------------------------------------------------------------------
// Upsampling along length by an integer factor F.
//   nearest: out[F i + j] = x[i]
//   linear:  out[F i + j] = x[i] + (j / F) (x[i+1] - x[i]),  x[len] := x[len-1]
//   hybrid:  mean of nearest and linear
// All three are linear maps; the backward pass applies the exact transpose.
// ---------------------------------------------------------------------------
enum class UpsampleMode { Nearest, Linear, Hybrid };

UpsampleMode parse_upsample_mode(std::string_view name);  // throws InvalidArgument
std::string_view to_string(UpsampleMode mode);

template <typename T>
Tensor3<T> upsample(const Tensor3<T>& x, std::size_t factor, UpsampleMode mode);
template <typename T>
Tensor3<T> upsample_backward(const Tensor3<T>& grad_out, std::size_t factor, UpsampleMode mode);

// ---------------------------------------------------------------------------
// Inverted dropout: kept units are scaled by 1 / (1 - rate). `mask` receives the
// per-element multiplier for the backward pass.
// ---------------------------------------------------------------------------
template <typename T>
Tensor3<T> dropout_forward(const Tensor3<T>& x, double rate, Rng& rng, std::vector<T>& mask);
template <typename T>
Tensor3<T> dropout_backward(const Tensor3<T>& grad_out, const std::vector<T>& mask);

// Glorot-uniform fill: U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
template <typename T>
void glorot_uniform(Param<T>& p, std::size_t fan_in, std::size_t fan_out, Rng& rng);

}  // namespace nggan::nd
