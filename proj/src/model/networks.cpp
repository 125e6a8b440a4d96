#include "nggan/error.hpp"
#include "nggan/model.hpp"

namespace nggan {

using nd::Activation;

// ---------------------------------------------------------------- Generator

template <typename T>
Generator<T>::Generator(const NgganConfig& c)
    : cfg(c), dense("G.dense", c.latent_dim, c.base_len * c.base_ch) {
  const auto ladder = generator_channels(c);
  const std::size_t pad = (c.kernel_len - 1) / 2;
  for (std::size_t i = 0; i < c.blocks; ++i) {
    convs.emplace_back("G.conv" + std::to_string(i), c.kernel_len, ladder[i][0], ladder[i][1], 1, pad, pad);
    if (i + 1 < c.blocks) norms.emplace_back("G.bn" + std::to_string(i), ladder[i][1]);
  }
}

template <typename T>
void Generator<T>::init(Rng& rng) {
  nd::glorot_uniform(dense.weights, dense.in_dim, dense.out_dim, rng);
  dense.bias.value.assign(dense.bias.size(), T(0));
  for (auto& conv : convs) {
    nd::glorot_uniform(conv.kernel, conv.k_len * conv.in_ch, conv.k_len * conv.out_ch, rng);
    conv.bias.value.assign(conv.bias.size(), T(0));
  }
  for (auto& bn : norms) {
    bn.gamma.value.assign(bn.channels, T(1));
    bn.beta.value.assign(bn.channels, T(0));
    bn.running_mean.value.assign(bn.channels, T(0));
    bn.running_var.value.assign(bn.channels, T(1));
  }
}

template <typename T>
Tensor3<T> Generator<T>::forward(const Tensor3<T>& z, bool training, GeneratorCache<T>* cache) {
  if (z.length() * z.channels() != cfg.latent_dim) {
    throw ShapeError("generator: latent input " + nd::shape_string(z.shape()) + " does not hold " +
                     std::to_string(cfg.latent_dim) + " values per item");
  }
  const std::size_t batch = z.batch();
  const Tensor3<T> flat_z = z.reshaped(batch, 1, cfg.latent_dim);
  Tensor3<T> h = dense.forward(flat_z).reshaped(batch, cfg.base_len, cfg.base_ch);
  if (cache) {
    *cache = GeneratorCache<T>{};
    cache->z = flat_z;
  }
  for (std::size_t i = 0; i < cfg.blocks; ++i) {
    Tensor3<T> up = nd::upsample(h, 4, cfg.upsample_mode);
    Tensor3<T> c = convs[i].forward(up);
    if (cache) {
      cache->block_in.push_back(std::move(h));
      cache->conv_in.push_back(std::move(up));
    }
    if (i + 1 == cfg.blocks) {
      Tensor3<T> out = nd::activation_forward(Activation::Tanh, c);
      if (cache) {
        cache->conv_out.push_back(std::move(c));
        cache->out = out;
      }
      return out;
    }
    nd::BatchNormCache<T> bn_cache;
    Tensor3<T> n = norms[i].forward(c, training, cache ? &bn_cache : nullptr);
    h = nd::activation_forward(Activation::Relu, n);
    if (cache) {
      cache->conv_out.push_back(std::move(c));
      cache->bn.push_back(std::move(bn_cache));
      cache->bn_out.push_back(std::move(n));
    }
  }
  return h;  // unreachable: blocks >= 1
}

template <typename T>
Tensor3<T> Generator<T>::backward(const GeneratorCache<T>& cache, const Tensor3<T>& grad_out) {
  if (cache.conv_out.size() != cfg.blocks) throw ShapeError("generator backward: cache does not match the network");
  if (grad_out.shape() != cache.out.shape()) throw ShapeError("generator backward: gradient shape mismatch");
  Tensor3<T> g = nd::activation_backward(Activation::Tanh, cache.conv_out.back(), cache.out, grad_out);
  for (std::size_t i = cfg.blocks; i-- > 0;) {
    if (i + 1 < cfg.blocks) {
      g = nd::activation_backward(Activation::Relu, cache.bn_out[i], cache.bn_out[i], g);
      g = norms[i].backward(cache.bn[i], g);
    }
    g = convs[i].backward(cache.conv_in[i], g);
    g = nd::upsample_backward(g, 4, cfg.upsample_mode);
  }
  const std::size_t batch = g.batch();
  return dense.backward(cache.z, std::move(g).reshaped(batch, 1, cfg.base_len * cfg.base_ch));
}

template <typename T>
std::vector<nd::Param<T>*> Generator<T>::params() {
  std::vector<nd::Param<T>*> out{&dense.weights, &dense.bias};
  for (std::size_t i = 0; i < convs.size(); ++i) {
    out.push_back(&convs[i].kernel);
    out.push_back(&convs[i].bias);
    if (i < norms.size()) {
      out.push_back(&norms[i].gamma);
      out.push_back(&norms[i].beta);
    }
  }
  return out;
}

template <typename T>
std::vector<nd::Param<T>*> Generator<T>::buffers() {
  std::vector<nd::Param<T>*> out;
  for (auto& bn : norms) {
    out.push_back(&bn.running_mean);
    out.push_back(&bn.running_var);
  }
  return out;
}

template <typename T>
void Generator<T>::zero_grad() {
  for (auto* p : params()) p->zero_grad();
}

template <typename T>
std::vector<bool> Generator<T>::relu_signature(const GeneratorCache<T>& cache) {
  std::vector<bool> sig;
  for (const auto& t : cache.bn_out)
    for (T v : t.values()) sig.push_back(v > T(0));
  return sig;
}

// ------------------------------------------------------------------- Critic

template <typename T>
Critic<T>::Critic(const NgganConfig& c) : cfg(c), dense("D.dense", c.base_len * c.base_ch, 1) {
  const auto ladder = critic_channels(c);
  const std::size_t total_pad = c.kernel_len - 4;
  for (std::size_t i = 0; i < c.blocks; ++i) {
    convs.emplace_back("D.conv" + std::to_string(i), c.kernel_len, ladder[i][0], ladder[i][1], 4, total_pad / 2,
                       total_pad - total_pad / 2);
  }
}

template <typename T>
void Critic<T>::init(Rng& rng) {
  for (auto& conv : convs) {
    nd::glorot_uniform(conv.kernel, conv.k_len * conv.in_ch, conv.k_len * conv.out_ch, rng);
    conv.bias.value.assign(conv.bias.size(), T(0));
  }
  nd::glorot_uniform(dense.weights, dense.in_dim, dense.out_dim, rng);
  dense.bias.value.assign(dense.bias.size(), T(0));
}

template <typename T>
Tensor3<T> Critic<T>::forward(const Tensor3<T>& x, bool training, Rng* dropout_rng, CriticCache<T>* cache) const {
  if (x.length() != cfg.trace_len() || x.channels() != 1) {
    throw ShapeError("critic: input " + nd::shape_string(x.shape()) + " does not match trace length " +
                     std::to_string(cfg.trace_len()) + " with 1 channel");
  }
  const T slope = static_cast<T>(cfg.leaky_slope);
  const bool drop = training && dropout_rng != nullptr && cfg.dropout > 0.0;
  if (cache) {
    *cache = CriticCache<T>{};
    cache->x = x;
  }
  Tensor3<T> h = x;
  for (std::size_t i = 0; i < cfg.blocks; ++i) {
    Tensor3<T> c = convs[i].forward(h);
    Tensor3<T> a = nd::activation_forward(Activation::LeakyRelu, c, slope);
    std::vector<T> mask;
    Tensor3<T> d = drop ? nd::dropout_forward(a, cfg.dropout, *dropout_rng, mask) : a;
    if (cache) {
      cache->conv_in.push_back(std::move(h));
      cache->conv_out.push_back(std::move(c));
      cache->act.push_back(std::move(a));
      cache->masks.push_back(std::move(mask));
    }
    h = std::move(d);
  }
  const std::size_t batch = h.batch();
  Tensor3<T> flat = std::move(h).reshaped(batch, 1, cfg.base_len * cfg.base_ch);
  Tensor3<T> out = dense.forward(flat);
  if (cache) {
    cache->flat = std::move(flat);
    cache->out = out;
  }
  return out;
}

template <typename T>
Tensor3<T> Critic<T>::backward(const CriticCache<T>& cache, const Tensor3<T>& grad_out) {
  if (cache.conv_out.size() != cfg.blocks) throw ShapeError("critic backward: cache does not match the network");
  const T slope = static_cast<T>(cfg.leaky_slope);
  Tensor3<T> g = dense.backward(cache.flat, grad_out);
  const auto& last = cache.act.back();
  g = std::move(g).reshaped(last.batch(), last.length(), last.channels());
  for (std::size_t i = cfg.blocks; i-- > 0;) {
    if (!cache.masks[i].empty()) g = nd::dropout_backward(g, cache.masks[i]);
    g = nd::activation_backward(Activation::LeakyRelu, cache.conv_out[i], cache.act[i], g, slope);
    g = convs[i].backward(cache.conv_in[i], g);
  }
  return g;
}

template <typename T>
std::vector<nd::Param<T>*> Critic<T>::params() {
  std::vector<nd::Param<T>*> out;
  for (auto& conv : convs) {
    out.push_back(&conv.kernel);
    out.push_back(&conv.bias);
  }
  out.push_back(&dense.weights);
  out.push_back(&dense.bias);
  return out;
}

template <typename T>
void Critic<T>::zero_grad() {
  for (auto* p : params()) p->zero_grad();
}

template <typename T>
std::vector<bool> Critic<T>::leaky_signature(const CriticCache<T>& cache) {
  std::vector<bool> sig;
  for (const auto& t : cache.conv_out)
    for (T v : t.values()) sig.push_back(v > T(0));
  return sig;
}

template class Generator<float>;
template class Generator<double>;
template class Critic<float>;
template class Critic<double>;

}  // namespace nggan
