#include "nggan/ndiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "nggan/ndiff/layers.hpp"
#include "nggan/rng.hpp"

namespace nggan::nd {

GradCheckResult check_gradient(const std::vector<double*>& coords, const std::vector<double>& analytic,
                               const std::function<double()>& loss,
                               const std::function<std::vector<bool>()>& signature, double h) {
  if (coords.size() != analytic.size()) throw ShapeError("check_gradient: coordinate/gradient count mismatch");
  double scale = 0.0;
  for (double a : analytic) scale = std::max(scale, std::abs(a));
  const double floor = std::max(1e-3 * scale, 1e-300);

  std::vector<bool> base;
  if (signature) {
    loss();
    base = signature();
  }
  GradCheckResult result;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    double& c = *coords[i];
    const double saved = c;
    c = saved + h;
    const double fp = loss();
    const bool kink_p = signature && signature() != base;
    c = saved - h;
    const double fm = loss();
    const bool kink_m = signature && signature() != base;
    c = saved;
    if (kink_p || kink_m) {
      ++result.skipped_kinks;
      continue;
    }
    const double numeric = (fp - fm) / (2.0 * h);
    const double a = analytic[i];
    const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
    result.max_rel_error = std::max(result.max_rel_error, err);
    ++result.checked;
  }
  return result;
}

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv1d: return "conv1d";
    case LayerKind::Dense: return "dense";
    case LayerKind::BatchNorm: return "batchnorm";
    case LayerKind::Relu: return "relu";
    case LayerKind::LeakyRelu: return "leaky_relu";
    case LayerKind::Tanh: return "tanh";
    case LayerKind::UpsampleNearest: return "upsample_nearest";
    case LayerKind::UpsampleLinear: return "upsample_linear";
    case LayerKind::UpsampleHybrid: return "upsample_hybrid";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::TanhChain: return "tanh_chain";
  }
  return "?";
}

namespace {

using Tensor = Tensor3<double>;

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

void fill_normal(std::vector<double>& v, Rng& rng, double std = 1.0) {
  for (auto& x : v) x = std * rng.gaussian01();
}

Tensor random_tensor(Rng& rng, std::size_t b, std::size_t l, std::size_t c) {
  Tensor t(b, l, c);
  fill_normal(t.values(), rng);
  return t;
}

// Values with |x| in [0.1, 2] so no component sits on an activation kink.
Tensor away_from_zero(Rng& rng, std::size_t b, std::size_t l, std::size_t c) {
  Tensor t(b, l, c);
  for (auto& x : t.values()) {
    const double mag = 0.1 + 1.9 * rng.uniform01();
    x = rng.uniform01() < 0.5 ? -mag : mag;
  }
  return t;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct Case {
  std::vector<double*> coords;
  std::vector<double> analytic;

  void add(std::vector<double>& values, const std::vector<double>& grads) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      coords.push_back(&values[i]);
      analytic.push_back(grads[i]);
    }
  }
};

GradCheckResult check_conv(Rng& rng, double h) {
  const std::size_t k = pick(rng, 1, 7);
  const std::size_t stride = rng.uniform01() < 0.5 ? 1 : 4;
  const std::size_t pl = pick(rng, 0, k - 1);
  const std::size_t pr = pick(rng, 0, k - 1);
  Conv1d<double> conv("c", k, pick(rng, 1, 3), pick(rng, 1, 3), stride, pl, pr);
  fill_normal(conv.kernel.value, rng);
  fill_normal(conv.bias.value, rng);
  const std::size_t len = std::max<std::size_t>(k, 1) + pick(rng, 0, 12);
  Tensor x = random_tensor(rng, pick(rng, 1, 3), len, conv.in_ch);
  Tensor g = random_tensor(rng, x.batch(), conv.out_length(len), conv.out_ch);
  const Tensor gx = conv.backward(x, g);
  Case c;
  c.add(conv.kernel.value, conv.kernel.grad);
  c.add(conv.bias.value, conv.bias.grad);
  c.add(x.values(), gx.values());
  return check_gradient(c.coords, c.analytic, [&] { return dot(conv.forward(x).values(), g.values()); }, {}, h);
}

GradCheckResult check_dense(Rng& rng, double h) {
  const std::size_t len = pick(rng, 1, 3);
  const std::size_t ch = pick(rng, 1, 3);
  Dense<double> dense("d", len * ch, pick(rng, 1, 4));
  fill_normal(dense.weights.value, rng);
  fill_normal(dense.bias.value, rng);
  Tensor x = random_tensor(rng, pick(rng, 1, 4), len, ch);
  Tensor g = random_tensor(rng, x.batch(), 1, dense.out_dim);
  const Tensor gx = dense.backward(x, g);
  Case c;
  c.add(dense.weights.value, dense.weights.grad);
  c.add(dense.bias.value, dense.bias.grad);
  c.add(x.values(), gx.values());
  return check_gradient(c.coords, c.analytic, [&] { return dot(dense.forward(x).values(), g.values()); }, {}, h);
}

GradCheckResult check_batchnorm(Rng& rng, double h) {
  BatchNorm<double> bn("bn", pick(rng, 1, 3));
  for (auto& v : bn.gamma.value) v = 0.5 + rng.uniform01();
  fill_normal(bn.beta.value, rng);
  Tensor x = random_tensor(rng, pick(rng, 2, 4), pick(rng, 2, 6), bn.channels);
  Tensor g = random_tensor(rng, x.batch(), x.length(), x.channels());
  BatchNormCache<double> cache;
  BatchNorm<double> work = bn;
  work.forward(x, true, &cache);
  const Tensor gx = work.backward(cache, g);
  Case c;
  c.add(work.gamma.value, work.gamma.grad);
  c.add(work.beta.value, work.beta.grad);
  c.add(x.values(), gx.values());
  return check_gradient(
      c.coords, c.analytic,
      [&] {
        BatchNorm<double> probe = work;
        return dot(probe.forward(x, true).values(), g.values());
      },
      {}, h);
}

GradCheckResult check_activation(Activation kind, Rng& rng, double h) {
  Tensor x = away_from_zero(rng, pick(rng, 1, 3), pick(rng, 1, 8), pick(rng, 1, 3));
  Tensor g = random_tensor(rng, x.batch(), x.length(), x.channels());
  const Tensor y = activation_forward(kind, x, 0.2);
  const Tensor gx = activation_backward(kind, x, y, g, 0.2);
  Case c;
  c.add(x.values(), gx.values());
  return check_gradient(c.coords, c.analytic,
                        [&] { return dot(activation_forward(kind, x, 0.2).values(), g.values()); }, {}, h);
}

GradCheckResult check_upsample(UpsampleMode mode, Rng& rng, double h) {
  const std::size_t factor = pick(rng, 2, 4);
  Tensor x = random_tensor(rng, pick(rng, 1, 3), pick(rng, 2, 6), pick(rng, 1, 3));
  Tensor g = random_tensor(rng, x.batch(), x.length() * factor, x.channels());
  const Tensor gx = upsample_backward(g, factor, mode);
  Case c;
  c.add(x.values(), gx.values());
  return check_gradient(c.coords, c.analytic,
                        [&] { return dot(upsample(x, factor, mode).values(), g.values()); }, {}, h);
}

GradCheckResult check_dropout(Rng& rng, double h) {
  const double rate = 0.1 + 0.5 * rng.uniform01();
  Tensor x = random_tensor(rng, pick(rng, 1, 3), pick(rng, 2, 8), pick(rng, 1, 3));
  Tensor g = random_tensor(rng, x.batch(), x.length(), x.channels());
  const Rng mask_rng = rng.substream(1);
  std::vector<double> mask;
  Rng r0 = mask_rng;
  dropout_forward(x, rate, r0, mask);
  const Tensor gx = dropout_backward(g, mask);
  Case c;
  c.add(x.values(), gx.values());
  return check_gradient(
      c.coords, c.analytic,
      [&] {
        Rng r = mask_rng;
        std::vector<double> m;
        return dot(dropout_forward(x, rate, r, m).values(), g.values());
      },
      {}, h);
}

GradCheckResult check_tanh_chain(Rng& rng, double h) {
  const std::size_t in = pick(rng, 1, 5);
  const std::size_t hidden = pick(rng, 1, 5);
  Dense<double> d1("d1", in, hidden);
  Dense<double> d2("d2", hidden, pick(rng, 1, 3));
  fill_normal(d1.weights.value, rng, 0.7);
  fill_normal(d1.bias.value, rng, 0.3);
  fill_normal(d2.weights.value, rng);
  fill_normal(d2.bias.value, rng);
  Tensor x = random_tensor(rng, pick(rng, 1, 4), 1, in);
  Tensor g = random_tensor(rng, x.batch(), 1, d2.out_dim);
  const Tensor a = d1.forward(x);
  const Tensor t = activation_forward(Activation::Tanh, a);
  const Tensor gt = d2.backward(t, g);
  const Tensor ga = activation_backward(Activation::Tanh, a, t, gt);
  const Tensor gx = d1.backward(x, ga);
  Case c;
  c.add(d1.weights.value, d1.weights.grad);
  c.add(d1.bias.value, d1.bias.grad);
  c.add(d2.weights.value, d2.weights.grad);
  c.add(d2.bias.value, d2.bias.grad);
  c.add(x.values(), gx.values());
  return check_gradient(
      c.coords, c.analytic,
      [&] { return dot(d2.forward(activation_forward(Activation::Tanh, d1.forward(x))).values(), g.values()); }, {},
      h);
}

}  // namespace

GradCheckResult grad_check(LayerKind kind, std::uint64_t seed, double h) {
  Rng rng(seed);
  switch (kind) {
    case LayerKind::Conv1d: return check_conv(rng, h);
    case LayerKind::Dense: return check_dense(rng, h);
    case LayerKind::BatchNorm: return check_batchnorm(rng, h);
    case LayerKind::Relu: return check_activation(Activation::Relu, rng, h);
    case LayerKind::LeakyRelu: return check_activation(Activation::LeakyRelu, rng, h);
    case LayerKind::Tanh: return check_activation(Activation::Tanh, rng, h);
    case LayerKind::UpsampleNearest: return check_upsample(UpsampleMode::Nearest, rng, h);
    case LayerKind::UpsampleLinear: return check_upsample(UpsampleMode::Linear, rng, h);
    case LayerKind::UpsampleHybrid: return check_upsample(UpsampleMode::Hybrid, rng, h);
    case LayerKind::Dropout: return check_dropout(rng, h);
    case LayerKind::TanhChain: return check_tanh_chain(rng, h);
  }
  throw InvalidArgument("grad_check: unknown layer kind");
}

}  // namespace nggan::nd
