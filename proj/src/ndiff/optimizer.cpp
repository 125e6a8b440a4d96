#include "nggan/ndiff/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace nggan::nd {

void AdamConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw InvalidArgument("optimizer: lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidArgument("optimizer: betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw InvalidArgument("optimizer: eps must be > 0");
  if (!(weight_decay >= 0.0)) throw InvalidArgument("optimizer: weight_decay must be >= 0");
  if (clip_value && !(*clip_value > 0.0)) throw InvalidArgument("optimizer: clip_value must be > 0");
}

template <typename T>
Adam<T>::Adam(AdamConfig cfg, const std::vector<Param<T>*>& params) : cfg_(cfg) {
  cfg_.validate();
  for (auto* p : params) {
    if (p->grad.size() != p->value.size()) throw ShapeError("optimizer: gradient size mismatch for " + p->name);
    m_.emplace_back(p->size(), T(0));
    v_.emplace_back(p->size(), T(0));
  }
}

template <typename T>
void Adam<T>::step(const std::vector<Param<T>*>& params) {
  if (params.size() != m_.size()) throw ShapeError("optimizer: parameter list changed");
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(cfg_.beta1, t);
  const double c2 = 1.0 - std::pow(cfg_.beta2, t);
  const T b1 = static_cast<T>(cfg_.beta1);
  const T b2 = static_cast<T>(cfg_.beta2);
  const T wd = static_cast<T>(cfg_.weight_decay);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    if (p.grad.size() != p.value.size() || m_[k].size() != p.value.size()) {
      throw ShapeError("optimizer: parameter " + p.name + " changed size");
    }
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const T g = p.grad[i] + wd * p.value[i];
      m[i] = b1 * m[i] + (T(1) - b1) * g;
      v[i] = b2 * v[i] + (T(1) - b2) * g * g;
      const double mhat = static_cast<double>(m[i]) / c1;
      const double vhat = static_cast<double>(v[i]) / c2;
      p.value[i] -= static_cast<T>(cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
  }
  clip(params);
}

template <typename T>
void Adam<T>::clip(const std::vector<Param<T>*>& params) const {
  if (!cfg_.clip_value) return;
  const T c = static_cast<T>(*cfg_.clip_value);
  for (auto* p : params)
    for (auto& w : p->value) w = std::clamp(w, -c, c);
}

template <typename T>
double max_abs_value(const std::vector<Param<T>*>& params) {
  double out = 0.0;
  for (const auto* p : params)
    for (auto w : p->value) out = std::max(out, std::abs(static_cast<double>(w)));
  return out;
}

template class Adam<float>;
template class Adam<double>;
template double max_abs_value(const std::vector<Param<float>*>&);
template double max_abs_value(const std::vector<Param<double>*>&);

}  // namespace nggan::nd
