#include <doctest.h>

#include <cmath>
#include <numeric>

#include "nggan/error.hpp"
#include "nggan/ndiff/checkpoint.hpp"
#include "nggan/ndiff/gradcheck.hpp"
#include "nggan/ndiff/layers.hpp"
#include "nggan/ndiff/optimizer.hpp"

using namespace nggan;
using namespace nggan::nd;

namespace {

Tensor3<double> random_tensor(std::size_t b, std::size_t l, std::size_t c, Rng& rng) {
  Tensor3<double> t(b, l, c);
  for (auto& v : t.values()) v = rng.gaussian01();
  return t;
}

Tensor3<double> row(std::vector<double> v) {
  const auto n = v.size();
  return Tensor3<double>(1, n, 1, std::move(v));
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

}  // namespace

TEST_SUITE("ndiff") {
  TEST_CASE("conv1d identity kernel reproduces the input") {
    Conv1d<double> conv("c", 3, 1, 1, 1, 1, 1);
    conv.kernel.value = {0, 1, 0};
    Rng rng(1);
    const auto x = random_tensor(2, 9, 1, rng);
    CHECK(conv.forward(x) == x);
  }

  TEST_CASE("conv1d all-ones input and kernel: interior 3, edges 2") {
    Conv1d<double> conv("c", 3, 1, 1, 1, 1, 1);
    conv.kernel.value = {1, 1, 1};
    const auto y = conv.forward(Tensor3<double>(1, 8, 1, 1.0));
    REQUIRE(y.length() == 8);
    CHECK(y(0, 0, 0) == 2.0);
    CHECK(y(0, 7, 0) == 2.0);
    for (std::size_t t = 1; t < 7; ++t) CHECK(y(0, t, 0) == 3.0);
  }

  TEST_CASE("conv1d stride 4 with padding (10, 11) maps 16384 to 4096") {
    Conv1d<float> conv("c", 25, 1, 2, 4, 10, 11);
    CHECK(conv.out_length(16384) == 4096);
    CHECK(conv.forward(Tensor3<float>(1, 16384, 1)).length() == 4096);
  }

  TEST_CASE("conv1d rejects bad strides and channel mismatches") {
    CHECK_THROWS_AS(Conv1d<double>("c", 3, 1, 1, 2, 1, 1), ShapeError);
    Conv1d<double> conv("c", 3, 2, 1, 1, 1, 1);
    CHECK_THROWS_AS(conv.forward(Tensor3<double>(1, 8, 3)), ShapeError);
    Conv1d<double> wide("w", 25, 1, 1, 1, 0, 0);
    CHECK_THROWS_AS(wide.forward(Tensor3<double>(1, 8, 1)), ShapeError);
  }

  TEST_CASE("conv1d backward: zero upstream, bias sums, finite differences") {
    Rng rng(3);
    Conv1d<double> conv("c", 3, 2, 3, 1, 1, 1);
    glorot_uniform(conv.kernel, 6, 9, rng);
    for (auto& b : conv.bias.value) b = rng.gaussian01();
    const auto x = random_tensor(2, 12, 2, rng);

    const auto zero = conv1d_backward(conv, x, Tensor3<double>(2, 12, 3));
    for (double v : zero.grad_x.values()) CHECK(v == 0.0);
    for (double v : zero.grad_kernel) CHECK(v == 0.0);
    for (double v : zero.grad_bias) CHECK(v == 0.0);

    const auto g = random_tensor(2, 12, 3, rng);
    const auto grads = conv1d_backward(conv, x, g);
    for (std::size_t o = 0; o < 3; ++o) {
      double s = 0.0;
      for (std::size_t b = 0; b < 2; ++b) {
        for (std::size_t t = 0; t < 12; ++t) s += g(b, t, o);
      }
      CHECK(grads.grad_bias[o] == doctest::Approx(s).epsilon(1e-12));
    }

    // Independent central-difference oracle over kernel and input.
    auto xm = x;
    auto loss = [&] { return dot(conv.forward(xm).values(), g.values()); };
    std::vector<double*> coords;
    std::vector<double> analytic;
    for (std::size_t i = 0; i < conv.kernel.size(); ++i) {
      coords.push_back(&conv.kernel.value[i]);
      analytic.push_back(grads.grad_kernel[i]);
    }
    for (std::size_t i = 0; i < xm.size(); ++i) {
      coords.push_back(&xm.values()[i]);
      analytic.push_back(grads.grad_x.values()[i]);
    }
    CHECK(check_gradient(coords, analytic, loss).max_rel_error <= 1e-5);

    // The accumulating member form agrees with the free function.
    conv.kernel.zero_grad();
    conv.bias.zero_grad();
    const auto gx = conv.backward(x, g);
    CHECK(gx == grads.grad_x);
    CHECK(conv.kernel.grad == grads.grad_kernel);
  }

  TEST_CASE("conv1d with stride 1, same padding and a delta kernel is the identity for any input") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t k = 2 * (1 + rng.below(4)) + 1;
      const std::size_t ch = 1 + rng.below(3);
      Conv1d<double> conv("c", k, ch, ch, 1, k / 2, k / 2);
      for (std::size_t i = 0; i < ch; ++i) conv.kernel.value[((k / 2) * ch + i) * ch + i] = 1.0;
      const auto x = random_tensor(1 + rng.below(3), k + rng.below(20), ch, rng);
      CHECK(conv.forward(x) == x);
    }
  }

  TEST_CASE("upsample by 4 on [1, 2]") {
    const auto x = row({1, 2});
    CHECK(upsample(x, 4, UpsampleMode::Nearest).values() == std::vector<double>{1, 1, 1, 1, 2, 2, 2, 2});
    CHECK(upsample(x, 4, UpsampleMode::Linear).values() == std::vector<double>{1, 1.25, 1.5, 1.75, 2, 2, 2, 2});
    CHECK(upsample(x, 4, UpsampleMode::Hybrid).values() ==
          std::vector<double>{1, 1.125, 1.25, 1.375, 2, 2, 2, 2});
    CHECK_THROWS_AS(upsample(row({1}), 4, UpsampleMode::Linear), ShapeError);
    CHECK_THROWS_AS(parse_upsample_mode("cubic"), InvalidArgument);
    CHECK(parse_upsample_mode("hybrid") == UpsampleMode::Hybrid);
  }

  TEST_CASE("upsample backward is the exact adjoint") {
    Rng rng(8);
    for (auto mode : {UpsampleMode::Nearest, UpsampleMode::Linear, UpsampleMode::Hybrid}) {
      for (int trial = 0; trial < 20; ++trial) {
        const auto x = random_tensor(1 + rng.below(3), 2 + rng.below(10), 1 + rng.below(3), rng);
        const auto g = random_tensor(x.batch(), 4 * x.length(), x.channels(), rng);
        const double lhs = dot(upsample(x, 4, mode).values(), g.values());
        const double rhs = dot(x.values(), upsample_backward(g, 4, mode).values());
        CHECK(std::fabs(lhs - rhs) <= 1e-10);
      }
    }
  }

  TEST_CASE("dense identity and zero input") {
    Dense<double> d("d", 3, 3);
    d.weights.value = {1, 0, 0, 0, 1, 0, 0, 0, 1};
    const auto x = Tensor3<double>(2, 1, 3, std::vector<double>{1, 2, 3, -4, 5, -6});
    CHECK(d.forward(x).values() == x.values());
    d.bias.value = {0.5, -1, 2};
    CHECK(d.forward(Tensor3<double>(1, 1, 3)).values() == d.bias.value);
    CHECK_THROWS_AS(d.forward(Tensor3<double>(1, 2, 3)), ShapeError);
  }

  TEST_CASE("activations") {
    const auto x = row({-1, 0, 2});
    CHECK(activation_forward(Activation::LeakyRelu, x, 0.2).values() == std::vector<double>{-0.2, 0, 2});
    CHECK(activation_forward(Activation::Tanh, row({0})).values()[0] == 0.0);
    const auto t = activation_forward(Activation::Tanh, row({-30, -1, 1, 30}));
    for (double v : t.values()) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
    const auto rx = row({-1, 1});
    const auto ry = activation_forward(Activation::Relu, rx);
    CHECK(activation_backward(Activation::Relu, rx, ry, row({1, 1})).values() == std::vector<double>{0, 1});
    // Subgradient at 0 takes the negative-side slope.
    const auto z = row({0});
    CHECK(activation_backward(Activation::Relu, z, z, row({1})).values()[0] == 0.0);
    CHECK(activation_backward(Activation::LeakyRelu, z, z, row({1}), 0.2).values()[0] == 0.2);
  }

  TEST_CASE("batchnorm training output is standardized per channel") {
    Rng rng(4);
    BatchNorm<double> bn("bn", 3);
    auto x = random_tensor(5, 7, 3, rng);
    for (std::size_t i = 0; i < x.size(); ++i) x.values()[i] = 3.0 * x.values()[i] + static_cast<double>(i % 3);
    const auto y = bn.forward(x, true);
    for (std::size_t c = 0; c < 3; ++c) {
      double m = 0.0, v = 0.0;
      const double n = 5 * 7;
      for (std::size_t b = 0; b < 5; ++b) {
        for (std::size_t t = 0; t < 7; ++t) m += y(b, t, c);
      }
      m /= n;
      for (std::size_t b = 0; b < 5; ++b) {
        for (std::size_t t = 0; t < 7; ++t) v += (y(b, t, c) - m) * (y(b, t, c) - m);
      }
      v /= n;
      CHECK(std::fabs(m) <= 1e-6);
      CHECK(std::fabs(v - 1.0) <= 1e-5);
    }
  }

  TEST_CASE("batchnorm affine parameters set mean and std") {
    Rng rng(5);
    BatchNorm<double> bn("bn", 1);
    bn.gamma.value = {2.0};
    bn.beta.value = {3.0};
    auto x = random_tensor(8, 16, 1, rng);
    for (auto& v : x.values()) v *= 4.0;
    const auto y = bn.forward(x, true);
    const double n = static_cast<double>(y.size());
    const double m = std::accumulate(y.values().begin(), y.values().end(), 0.0) / n;
    double v = 0.0;
    for (double e : y.values()) v += (e - m) * (e - m);
    CHECK(m == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(std::sqrt(v / n) == doctest::Approx(2.0).epsilon(1e-5));
  }

  TEST_CASE("batchnorm running statistics and inference mode") {
    BatchNorm<double> bn("bn", 1, 1e-5, 0.1);
    const auto x = Tensor3<double>(2, 2, 1, std::vector<double>{1, 2, 3, 4});
    bn.forward(x, true);
    // Running mean 0.9 * 0 + 0.1 * 2.5; running var 0.9 * 1 + 0.1 * (5/3) (unbiased).
    CHECK(bn.running_mean.value[0] == doctest::Approx(0.25));
    CHECK(bn.running_var.value[0] == doctest::Approx(0.9 + 0.1 * 5.0 / 3.0));
    const auto y = bn.forward(row({0.25}), false);
    CHECK(y.values()[0] == doctest::Approx(0.0));
    CHECK_THROWS_AS(bn.forward(Tensor3<double>(1, 4, 1, 1.0), true), DegenerateInput);
  }

  TEST_CASE("dropout") {
    Rng rng(6);
    std::vector<double> mask;
    const auto x = random_tensor(4, 50, 2, rng);
    CHECK(dropout_forward(x, 0.0, rng, mask) == x);
    const auto y = dropout_forward(x, 0.3, rng, mask);
    std::size_t kept = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      const bool zero = mask[i] == 0.0;
      CHECK((zero || std::fabs(mask[i] - 1.0 / 0.7) < 1e-12));
      kept += zero ? 0 : 1;
      CHECK(y.values()[i] == x.values()[i] * mask[i]);
    }
    CHECK(kept > 0);
    CHECK(kept < mask.size());
    CHECK(dropout_backward(x, mask).values() == y.values());
  }

  TEST_CASE("gradient check over random cases for every layer kind") {
    for (auto kind : kAllLayerKinds) {
      CAPTURE(to_string(kind));
      double worst = 0.0;
      for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto r = grad_check(kind, seed);
        CHECK(r.checked > 0);
        worst = std::max(worst, r.max_rel_error);
      }
      CHECK(worst <= 1e-5);
    }
  }

  TEST_CASE("Adam: zero gradients leave parameters unchanged") {
    Param<double> p("p", {3});
    p.value = {0.1, -0.2, 0.3};
    Adam<double> opt(AdamConfig{}, {&p});
    for (int i = 0; i < 3; ++i) opt.step({&p});
    CHECK(p.value == std::vector<double>{0.1, -0.2, 0.3});
    CHECK(opt.steps() == 3);
  }

  TEST_CASE("Adam: first step with constant unit gradient moves by about -lr") {
    Param<double> p("p", {1});
    AdamConfig cfg;
    cfg.lr = 1e-4;
    Adam<double> opt(cfg, {&p});
    p.grad = {1.0};
    opt.step({&p});
    // Bias-corrected moments give m_hat = 1 and v_hat = 1.
    CHECK(p.value[0] == doctest::Approx(-1e-4 / (1.0 + 1e-8)).epsilon(1e-10));
  }

  TEST_CASE("Adam: weight decay adds to the gradient, clipping clamps after the step") {
    Param<double> p("p", {2});
    p.value = {0.02, -0.5};
    AdamConfig cfg;
    cfg.clip_value = 0.01;
    Adam<double> opt(cfg, {&p});
    opt.step({&p});
    CHECK(p.value == std::vector<double>{0.01, -0.01});
    CHECK(max_abs_value<double>({&p}) == 0.01);

    Param<double> q("q", {1});
    q.value = {1.0};
    AdamConfig decay;
    decay.weight_decay = 0.5;
    Adam<double> opt2(decay, {&q});
    opt2.step({&q});
    CHECK(q.value[0] < 1.0);

    AdamConfig bad;
    bad.lr = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
  }

  TEST_CASE("checkpoint container round-trip and corruption") {
    CheckpointFile f;
    f.meta = R"({"k":1})";
    f.blobs.push_back({"a/w", {2, 3}, {1, 2, 3, 4, 5, 6}});
    f.blobs.push_back({"b", {1}, {-0.5f}});
    const auto bytes = encode_checkpoint(f);
    const auto back = decode_checkpoint(bytes);
    CHECK(back.meta == f.meta);
    REQUIRE(back.blobs.size() == 2);
    CHECK(back.find("a/w")->data == f.blobs[0].data);
    CHECK(back.find("a/w")->dims == f.blobs[0].dims);
    CHECK(back.find("missing") == nullptr);
    CHECK(encode_checkpoint(back) == bytes);

    auto bad = bytes;
    bad[0] = 'Z';
    CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
    bad = bytes;
    bad.resize(bytes.size() - 2);
    CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
    bad = bytes;
    bad.push_back(1);
    CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
  }
}
