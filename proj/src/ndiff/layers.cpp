#include "nggan/ndiff/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace nggan::nd {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// Bound on im2col scratch (elements) per GEMM call.
constexpr std::size_t kColsBudget = std::size_t{1} << 22;

template <typename T>
void im2col(const Conv1d<T>& conv, const Tensor3<T>& x, std::size_t b0, std::size_t b1, std::size_t out_len,
            std::vector<T>& cols) {
  const std::size_t cin = conv.in_ch;
  const std::size_t kc = conv.k_len * cin;
  const auto len = static_cast<long>(x.length());
  cols.assign((b1 - b0) * out_len * kc, T(0));
  for (std::size_t b = b0; b < b1; ++b) {
    for (std::size_t t = 0; t < out_len; ++t) {
      T* row = cols.data() + ((b - b0) * out_len + t) * kc;
      const long base = static_cast<long>(t * conv.stride) - static_cast<long>(conv.pad_left);
      for (std::size_t k = 0; k < conv.k_len; ++k) {
        const long src = base + static_cast<long>(k);
        if (src < 0 || src >= len) continue;
        const T* from = &x(b, static_cast<std::size_t>(src), 0);
        std::copy(from, from + cin, row + k * cin);
      }
    }
  }
}

template <typename T>
void col2im_add(const Conv1d<T>& conv, const std::vector<T>& gcols, std::size_t b0, std::size_t b1,
                std::size_t out_len, Tensor3<T>& grad_x) {
  const std::size_t cin = conv.in_ch;
  const std::size_t kc = conv.k_len * cin;
  const auto len = static_cast<long>(grad_x.length());
  for (std::size_t b = b0; b < b1; ++b) {
    for (std::size_t t = 0; t < out_len; ++t) {
      const T* row = gcols.data() + ((b - b0) * out_len + t) * kc;
      const long base = static_cast<long>(t * conv.stride) - static_cast<long>(conv.pad_left);
      for (std::size_t k = 0; k < conv.k_len; ++k) {
        const long src = base + static_cast<long>(k);
        if (src < 0 || src >= len) continue;
        T* to = &grad_x(b, static_cast<std::size_t>(src), 0);
        const T* from = row + k * cin;
        for (std::size_t i = 0; i < cin; ++i) to[i] += from[i];
      }
    }
  }
}

std::size_t chunk_batches(std::size_t out_len, std::size_t kc) {
  const std::size_t per_item = std::max<std::size_t>(out_len * kc, 1);
  return std::max<std::size_t>(1, kColsBudget / per_item);
}

template <typename T>
void check_same_shape(const Tensor3<T>& a, const Tensor3<T>& b, const char* who) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(who) + ": shape " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

}  // namespace

// ----------------------------------------------------------------- Conv1d ---

template <typename T>
Conv1d<T>::Conv1d(const std::string& name, std::size_t k, std::size_t in, std::size_t out, std::size_t s,
                  std::size_t pl, std::size_t pr)
    : k_len(k),
      in_ch(in),
      out_ch(out),
      stride(s),
      pad_left(pl),
      pad_right(pr),
      kernel(name + ".kernel", {k, in, out}),
      bias(name + ".bias", {out}) {
  if (k == 0 || in == 0 || out == 0) throw ShapeError("Conv1d " + name + ": zero-sized dimension");
  if (s != 1 && s != 4) throw ShapeError("Conv1d " + name + ": stride must be 1 or 4");
}

template <typename T>
std::size_t Conv1d<T>::out_length(std::size_t in_length) const {
  const std::size_t padded = in_length + pad_left + pad_right;
  if (padded < k_len) {
    throw ShapeError("Conv1d: padded length " + std::to_string(padded) + " is shorter than the kernel " +
                     std::to_string(k_len));
  }
  return (padded - k_len) / stride + 1;
}

template <typename T>
Tensor3<T> Conv1d<T>::forward(const Tensor3<T>& x) const {
  if (x.channels() != in_ch) {
    throw ShapeError("Conv1d: input has " + std::to_string(x.channels()) + " channels, expected " +
                     std::to_string(in_ch));
  }
  const std::size_t out_len = out_length(x.length());
  const std::size_t kc = k_len * in_ch;
  Tensor3<T> y(x.batch(), out_len, out_ch);
  Eigen::Map<const RowMat<T>> w(kernel.value.data(), static_cast<Eigen::Index>(kc), static_cast<Eigen::Index>(out_ch));
  Eigen::Map<const RowVec<T>> bvec(bias.value.data(), static_cast<Eigen::Index>(out_ch));
  std::vector<T> cols;
  const std::size_t step = chunk_batches(out_len, kc);
  for (std::size_t b0 = 0; b0 < x.batch(); b0 += step) {
    const std::size_t b1 = std::min(x.batch(), b0 + step);
    im2col(*this, x, b0, b1, out_len, cols);
    const auto rows = static_cast<Eigen::Index>((b1 - b0) * out_len);
    Eigen::Map<const RowMat<T>> c(cols.data(), rows, static_cast<Eigen::Index>(kc));
    Eigen::Map<RowMat<T>> out(y.data() + b0 * out_len * out_ch, rows, static_cast<Eigen::Index>(out_ch));
    out.noalias() = c * w;
    out.rowwise() += bvec;
  }
  return y;
}

template <typename T>
ConvGrads<T> conv1d_backward(const Conv1d<T>& conv, const Tensor3<T>& x, const Tensor3<T>& grad_out) {
  const std::size_t out_len = conv.out_length(x.length());
  if (x.channels() != conv.in_ch || grad_out.batch() != x.batch() || grad_out.length() != out_len ||
      grad_out.channels() != conv.out_ch) {
    throw ShapeError("conv1d_backward: grad_out " + shape_string(grad_out.shape()) +
                     " inconsistent with input " + shape_string(x.shape()));
  }
  const std::size_t kc = conv.k_len * conv.in_ch;
  ConvGrads<T> g{Tensor3<T>(x.batch(), x.length(), x.channels()), std::vector<T>(kc * conv.out_ch, T(0)),
                 std::vector<T>(conv.out_ch, T(0))};
  const auto kci = static_cast<Eigen::Index>(kc);
  const auto oc = static_cast<Eigen::Index>(conv.out_ch);
  Eigen::Map<const RowMat<T>> w(conv.kernel.value.data(), kci, oc);
  Eigen::Map<RowMat<T>> gw(g.grad_kernel.data(), kci, oc);
  Eigen::Map<RowVec<T>> gb(g.grad_bias.data(), oc);
  std::vector<T> cols;
  std::vector<T> gcols;
  const std::size_t step = chunk_batches(out_len, kc);
  for (std::size_t b0 = 0; b0 < x.batch(); b0 += step) {
    const std::size_t b1 = std::min(x.batch(), b0 + step);
    im2col(conv, x, b0, b1, out_len, cols);
    const auto rows = static_cast<Eigen::Index>((b1 - b0) * out_len);
    Eigen::Map<const RowMat<T>> c(cols.data(), rows, kci);
    Eigen::Map<const RowMat<T>> go(grad_out.data() + b0 * out_len * conv.out_ch, rows, oc);
    gw.noalias() += c.transpose() * go;
    gb += go.colwise().sum();
    gcols.resize(static_cast<std::size_t>(rows) * kc);
    Eigen::Map<RowMat<T>> gc(gcols.data(), rows, kci);
    gc.noalias() = go * w.transpose();
    col2im_add(conv, gcols, b0, b1, out_len, g.grad_x);
  }
  return g;
}

template <typename T>
Tensor3<T> Conv1d<T>::backward(const Tensor3<T>& x, const Tensor3<T>& grad_out) {
  auto g = conv1d_backward(*this, x, grad_out);
  for (std::size_t i = 0; i < g.grad_kernel.size(); ++i) kernel.grad[i] += g.grad_kernel[i];
  for (std::size_t i = 0; i < g.grad_bias.size(); ++i) bias.grad[i] += g.grad_bias[i];
  return std::move(g.grad_x);
}

// ------------------------------------------------------------------ Dense ---

template <typename T>
Dense<T>::Dense(const std::string& name, std::size_t in, std::size_t out)
    : in_dim(in), out_dim(out), weights(name + ".weight", {in, out}), bias(name + ".bias", {out}) {
  if (in == 0 || out == 0) throw ShapeError("Dense " + name + ": zero-sized dimension");
}

template <typename T>
Tensor3<T> Dense<T>::forward(const Tensor3<T>& x) const {
  if (x.length() * x.channels() != in_dim) {
    throw ShapeError("Dense: input " + shape_string(x.shape()) + " does not flatten to " + std::to_string(in_dim));
  }
  Tensor3<T> y(x.batch(), 1, out_dim);
  const auto b = static_cast<Eigen::Index>(x.batch());
  Eigen::Map<const RowMat<T>> xm(x.data(), b, static_cast<Eigen::Index>(in_dim));
  Eigen::Map<const RowMat<T>> w(weights.value.data(), static_cast<Eigen::Index>(in_dim),
                                static_cast<Eigen::Index>(out_dim));
  Eigen::Map<const RowVec<T>> bvec(bias.value.data(), static_cast<Eigen::Index>(out_dim));
  Eigen::Map<RowMat<T>> ym(y.data(), b, static_cast<Eigen::Index>(out_dim));
  ym.noalias() = xm * w;
  ym.rowwise() += bvec;
  return y;
}

template <typename T>
Tensor3<T> Dense<T>::backward(const Tensor3<T>& x, const Tensor3<T>& grad_out) {
  if (grad_out.batch() != x.batch() || grad_out.length() * grad_out.channels() != out_dim ||
      x.length() * x.channels() != in_dim) {
    throw ShapeError("Dense::backward: inconsistent shapes");
  }
  const auto b = static_cast<Eigen::Index>(x.batch());
  const auto in = static_cast<Eigen::Index>(in_dim);
  const auto out = static_cast<Eigen::Index>(out_dim);
  Eigen::Map<const RowMat<T>> xm(x.data(), b, in);
  Eigen::Map<const RowMat<T>> go(grad_out.data(), b, out);
  Eigen::Map<const RowMat<T>> w(weights.value.data(), in, out);
  Eigen::Map<RowMat<T>> gw(weights.grad.data(), in, out);
  Eigen::Map<RowVec<T>> gb(bias.grad.data(), out);
  gw.noalias() += xm.transpose() * go;
  gb += go.colwise().sum();
  Tensor3<T> gx(x.batch(), x.length(), x.channels());
  Eigen::Map<RowMat<T>> gxm(gx.data(), b, in);
  gxm.noalias() = go * w.transpose();
  return gx;
}

// -------------------------------------------------------------- BatchNorm ---

template <typename T>
BatchNorm<T>::BatchNorm(const std::string& name, std::size_t ch, T e, T m)
    : channels(ch),
      eps(e),
      momentum(m),
      gamma(name + ".gamma", {ch}),
      beta(name + ".beta", {ch}),
      running_mean(name + ".running_mean", {ch}),
      running_var(name + ".running_var", {ch}) {
  if (!(e > T(0))) throw InvalidArgument("BatchNorm: eps must be > 0");
  if (!(m > T(0) && m < T(1))) throw InvalidArgument("BatchNorm: momentum must lie in (0, 1)");
  std::fill(gamma.value.begin(), gamma.value.end(), T(1));
  std::fill(running_var.value.begin(), running_var.value.end(), T(1));
}

template <typename T>
Tensor3<T> BatchNorm<T>::forward(const Tensor3<T>& x, bool training, BatchNormCache<T>* cache) {
  if (x.channels() != channels) throw ShapeError("BatchNorm: channel mismatch");
  if (training && x.batch() < 2) throw DegenerateInput("BatchNorm: training mode needs batch >= 2");
  const std::size_t rows = x.batch() * x.length();
  const std::size_t ch = channels;
  std::vector<T> inv_std(ch);
  std::vector<T> mean(ch);
  if (training) {
    std::vector<double> sum(ch, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < ch; ++c) sum[c] += static_cast<double>(x.data()[r * ch + c]);
    std::vector<double> mu(ch);
    for (std::size_t c = 0; c < ch; ++c) mu[c] = sum[c] / static_cast<double>(rows);
    std::vector<double> sq(ch, 0.0);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < ch; ++c) {
        const double d = static_cast<double>(x.data()[r * ch + c]) - mu[c];
        sq[c] += d * d;
      }
    for (std::size_t c = 0; c < ch; ++c) {
      const double var = sq[c] / static_cast<double>(rows);
      mean[c] = static_cast<T>(mu[c]);
      inv_std[c] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      const double unbiased = rows > 1 ? var * static_cast<double>(rows) / static_cast<double>(rows - 1) : var;
      running_mean.value[c] = (T(1) - momentum) * running_mean.value[c] + momentum * static_cast<T>(mu[c]);
      running_var.value[c] = (T(1) - momentum) * running_var.value[c] + momentum * static_cast<T>(unbiased);
    }
  } else {
    for (std::size_t c = 0; c < ch; ++c) {
      mean[c] = running_mean.value[c];
      inv_std[c] = T(1) / std::sqrt(running_var.value[c] + eps);
    }
  }
  Tensor3<T> y(x.batch(), x.length(), ch);
  Tensor3<T> x_hat(x.batch(), x.length(), ch);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < ch; ++c) {
      const T h = (x.data()[r * ch + c] - mean[c]) * inv_std[c];
      x_hat.data()[r * ch + c] = h;
      y.data()[r * ch + c] = gamma.value[c] * h + beta.value[c];
    }
  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
    cache->training = training;
  }
  return y;
}

template <typename T>
Tensor3<T> BatchNorm<T>::backward(const BatchNormCache<T>& cache, const Tensor3<T>& grad_out) {
  check_same_shape(cache.x_hat, grad_out, "BatchNorm::backward");
  const std::size_t rows = grad_out.batch() * grad_out.length();
  const std::size_t ch = channels;
  std::vector<double> sum_g(ch, 0.0);
  std::vector<double> sum_gx(ch, 0.0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < ch; ++c) {
      const double g = static_cast<double>(grad_out.data()[r * ch + c]);
      sum_g[c] += g;
      sum_gx[c] += g * static_cast<double>(cache.x_hat.data()[r * ch + c]);
    }
  for (std::size_t c = 0; c < ch; ++c) {
    gamma.grad[c] += static_cast<T>(sum_gx[c]);
    beta.grad[c] += static_cast<T>(sum_g[c]);
  }
  Tensor3<T> gx(grad_out.batch(), grad_out.length(), ch);
  const double m = static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < ch; ++c) {
      const double g = static_cast<double>(grad_out.data()[r * ch + c]);
      const double scale = static_cast<double>(gamma.value[c]) * static_cast<double>(cache.inv_std[c]);
      double v = g;
      if (cache.training) {
        const double h = static_cast<double>(cache.x_hat.data()[r * ch + c]);
        v = g - sum_g[c] / m - h * sum_gx[c] / m;
      }
      gx.data()[r * ch + c] = static_cast<T>(scale * v);
    }
  return gx;
}

// ------------------------------------------------------------ Activations ---

template <typename T>
Tensor3<T> activation_forward(Activation kind, const Tensor3<T>& x, T slope) {
  Tensor3<T> y = x;
  for (auto& v : y.values()) {
    switch (kind) {
      case Activation::Relu: v = v > T(0) ? v : T(0); break;
      case Activation::LeakyRelu: v = v > T(0) ? v : slope * v; break;
      case Activation::Tanh: v = std::tanh(v); break;
    }
  }
  return y;
}

template <typename T>
Tensor3<T> activation_backward(Activation kind, const Tensor3<T>& x, const Tensor3<T>& y,
                               const Tensor3<T>& grad_out, T slope) {
  Tensor3<T> g = grad_out;
  auto& gv = g.values();
  for (std::size_t i = 0; i < gv.size(); ++i) {
    switch (kind) {
      case Activation::Relu: gv[i] = x.values()[i] > T(0) ? gv[i] : T(0); break;
      case Activation::LeakyRelu: gv[i] = x.values()[i] > T(0) ? gv[i] : slope * gv[i]; break;
      case Activation::Tanh: {
        const T yi = y.values()[i];
        gv[i] *= T(1) - yi * yi;
        break;
      }
    }
  }
  return g;
}

// --------------------------------------------------------------- Upsample ---

UpsampleMode parse_upsample_mode(std::string_view name) {
  if (name == "nearest") return UpsampleMode::Nearest;
  if (name == "linear") return UpsampleMode::Linear;
  if (name == "hybrid") return UpsampleMode::Hybrid;
  throw InvalidArgument("unknown upsample mode '" + std::string(name) + "' (expected nearest, linear or hybrid)");
}

std::string_view to_string(UpsampleMode mode) {
  switch (mode) {
    case UpsampleMode::Nearest: return "nearest";
    case UpsampleMode::Linear: return "linear";
    case UpsampleMode::Hybrid: return "hybrid";
  }
  return "hybrid";
}

namespace {

// Weight given to x[i+1] for output phase j.
double upsample_frac(UpsampleMode mode, std::size_t j, std::size_t factor) {
  const double f = static_cast<double>(j) / static_cast<double>(factor);
  switch (mode) {
    case UpsampleMode::Nearest: return 0.0;
    case UpsampleMode::Linear: return f;
    case UpsampleMode::Hybrid: return 0.5 * f;
  }
  return 0.0;
}

void check_upsample(std::size_t length, std::size_t factor, UpsampleMode mode) {
  if (factor == 0) throw ShapeError("upsample: factor must be >= 1");
  if (mode != UpsampleMode::Nearest && length < 2) {
    throw ShapeError("upsample: linear and hybrid modes need length >= 2");
  }
}

}  // namespace

template <typename T>
Tensor3<T> upsample(const Tensor3<T>& x, std::size_t factor, UpsampleMode mode) {
  check_upsample(x.length(), factor, mode);
  const std::size_t len = x.length();
  const std::size_t ch = x.channels();
  Tensor3<T> y(x.batch(), len * factor, ch);
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t next = std::min(i + 1, len - 1);
      for (std::size_t j = 0; j < factor; ++j) {
        const T a = static_cast<T>(upsample_frac(mode, j, factor));
        for (std::size_t c = 0; c < ch; ++c) y(b, i * factor + j, c) = x(b, i, c) + a * (x(b, next, c) - x(b, i, c));
      }
    }
  return y;
}

template <typename T>
Tensor3<T> upsample_backward(const Tensor3<T>& grad_out, std::size_t factor, UpsampleMode mode) {
  if (factor == 0 || grad_out.length() % factor != 0) {
    throw ShapeError("upsample_backward: length is not a multiple of the factor");
  }
  const std::size_t len = grad_out.length() / factor;
  check_upsample(len, factor, mode);
  const std::size_t ch = grad_out.channels();
  Tensor3<T> gx(grad_out.batch(), len, ch);
  for (std::size_t b = 0; b < grad_out.batch(); ++b)
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t next = std::min(i + 1, len - 1);
      for (std::size_t j = 0; j < factor; ++j) {
        const T a = static_cast<T>(upsample_frac(mode, j, factor));
        for (std::size_t c = 0; c < ch; ++c) {
          const T g = grad_out(b, i * factor + j, c);
          gx(b, i, c) += (T(1) - a) * g;
          gx(b, next, c) += a * g;
        }
      }
    }
  return gx;
}

// ---------------------------------------------------------------- Dropout ---

template <typename T>
Tensor3<T> dropout_forward(const Tensor3<T>& x, double rate, Rng& rng, std::vector<T>& mask) {
  if (!(rate >= 0.0 && rate < 1.0)) throw InvalidArgument("dropout rate must lie in [0, 1)");
  mask.assign(x.size(), T(1));
  if (rate == 0.0) return x;
  const T keep = static_cast<T>(1.0 / (1.0 - rate));
  for (auto& m : mask) m = rng.uniform01() >= rate ? keep : T(0);
  Tensor3<T> y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y.values()[i] *= mask[i];
  return y;
}

template <typename T>
Tensor3<T> dropout_backward(const Tensor3<T>& grad_out, const std::vector<T>& mask) {
  if (mask.size() != grad_out.size()) throw ShapeError("dropout_backward: mask size mismatch");
  Tensor3<T> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] *= mask[i];
  return g;
}

template <typename T>
void glorot_uniform(Param<T>& p, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& v : p.value) v = static_cast<T>((2.0 * rng.uniform01() - 1.0) * a);
}

#define NGGAN_INSTANTIATE_LAYERS(T)                                                                        \
  template class Conv1d<T>;                                                                                \
  template ConvGrads<T> conv1d_backward(const Conv1d<T>&, const Tensor3<T>&, const Tensor3<T>&);           \
  template class Dense<T>;                                                                                 \
  template class BatchNorm<T>;                                                                             \
  template Tensor3<T> activation_forward(Activation, const Tensor3<T>&, T);                                \
  template Tensor3<T> activation_backward(Activation, const Tensor3<T>&, const Tensor3<T>&,                \
                                          const Tensor3<T>&, T);                                           \
  template Tensor3<T> upsample(const Tensor3<T>&, std::size_t, UpsampleMode);                              \
  template Tensor3<T> upsample_backward(const Tensor3<T>&, std::size_t, UpsampleMode);                     \
  template Tensor3<T> dropout_forward(const Tensor3<T>&, double, Rng&, std::vector<T>&);                   \
  template Tensor3<T> dropout_backward(const Tensor3<T>&, const std::vector<T>&);                          \
  template void glorot_uniform(Param<T>&, std::size_t, std::size_t, Rng&);

NGGAN_INSTANTIATE_LAYERS(float)
NGGAN_INSTANTIATE_LAYERS(double)

#undef NGGAN_INSTANTIATE_LAYERS

}  // namespace nggan::nd
