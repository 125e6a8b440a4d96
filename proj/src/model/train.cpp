#include <chrono>
#include <cmath>
#include <numeric>

#include "model/streams.hpp"
#include "nggan/error.hpp"
#include "nggan/metrics/features.hpp"
#include "nggan/metrics/stats.hpp"
#include "nggan/model.hpp"

namespace nggan {

namespace {

constexpr std::size_t kMinFidTraces = 9;

void shuffle(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
}

Tensor3<float> latent_batch(std::size_t batch, std::size_t latent, Rng& rng) {
  Tensor3<float> z(batch, 1, latent);
  for (auto& v : z.values()) v = static_cast<float>(2.0 * rng.uniform01() - 1.0);
  return z;
}

std::vector<double> as_doubles(const Tensor3<float>& t) { return {t.values().begin(), t.values().end()}; }

Tensor3<float> constant_grad(std::size_t batch, double value) {
  return Tensor3<float>(batch, 1, 1, static_cast<float>(value));
}

// Features of the traces in `data` (rows of `len` samples), skipping constant ones.
Eigen::MatrixXd monitor_features(const std::vector<float>& data, std::size_t len) {
  std::vector<metrics::FeatureVector> feats;
  for (std::size_t i = 0; i * len < data.size(); ++i) {
    try {
      feats.push_back(metrics::feature_vector(std::span<const float>(data.data() + i * len, len)));
    } catch (const DegenerateInput&) {
    }
  }
  return metrics::pca_feature_matrix(feats);
}

}  // namespace

const TrainHistory& train(NgganModel& model, const TraceSet& data, const Rng& rng, const TrainOptions& opts) {
  const NgganConfig& cfg = model.cfg;
  cfg.validate();
  const std::size_t len = cfg.trace_len();
  if (data.length() != len) {
    throw ConfigError("training data trace length " + std::to_string(data.length()) +
                      " does not match the model trace length " + std::to_string(len));
  }
  for (float v : data.data()) {
    if (!(std::abs(v) <= 1.0f)) throw ConfigError("training data must be normalized to [-1, 1]");
  }
  if (model.sample_rate_hz == 0.0) model.sample_rate_hz = data.sample_rate_hz();

  // Held-out slice for FID monitoring.
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng = rng.substream(streams::kHoldoutSplit);
  shuffle(order, split_rng);
  const std::size_t n_hold =
      cfg.fid_every > 0 ? static_cast<std::size_t>(std::llround(cfg.holdout_frac * static_cast<double>(data.size())))
                        : 0;
  if (n_hold >= data.size()) throw ConfigError("holdout leaves no training traces");
  const std::vector<std::size_t> held(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hold));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_hold), order.end());
  std::sort(train_idx.begin(), train_idx.end());

  Eigen::MatrixXd ref_feats;
  Tensor3<float> monitor_z;
  bool monitoring = false;
  if (n_hold >= kMinFidTraces) {
    std::vector<float> held_data;
    for (auto i : held) held_data.insert(held_data.end(), data.trace(i).begin(), data.trace(i).end());
    ref_feats = monitor_features(held_data, len);
    Rng mon = rng.substream(streams::kMonitorLatent);
    monitor_z = latent_batch(n_hold, cfg.latent_dim, mon);
    monitoring = static_cast<std::size_t>(ref_feats.rows()) >= kMinFidTraces;
  }
  auto evaluate_fid = [&]() -> double {
    const Tensor3<float> out = model.gen.forward(monitor_z, false);
    const Eigen::MatrixXd gen_feats = monitor_features(out.values(), len);
    if (static_cast<std::size_t>(gen_feats.rows()) < kMinFidTraces) return std::numeric_limits<double>::infinity();
    return metrics::fid_in_space(ref_feats, gen_feats, metrics::FidSpace::Standardized);
  };

  TrainHistory& hist = model.history;
  if (monitoring && model.epoch == 0 && std::isnan(hist.initial_fid)) hist.initial_fid = evaluate_fid();
  if (!opts.checkpoint_dir.empty()) std::filesystem::create_directories(opts.checkpoint_dir);

  const std::size_t batch = cfg.batch;
  while (model.epoch < cfg.epochs && !hist.stopped_early) {
    const auto t0 = std::chrono::steady_clock::now();
    Rng er = rng.substream(streams::kEpochBase + model.epoch);
    std::vector<std::size_t> perm = train_idx;
    shuffle(perm, er);

    EpochRecord rec;
    rec.epoch = model.epoch + 1;
    double d_sum = 0.0;
    double g_sum = 0.0;
    std::size_t d_steps = 0;
    std::size_t g_steps = 0;
    for (std::size_t start = 0; start < perm.size(); start += batch) {
      const std::size_t b = std::min(batch, perm.size() - start);
      if (b < 2) break;  // batch statistics need two items
      Tensor3<float> real(b, len, 1);
      for (std::size_t i = 0; i < b; ++i) {
        const auto tr = data.trace(perm[start + i]);
        std::copy(tr.begin(), tr.end(), real.data() + i * len);
      }
      const double inv_b = 1.0 / static_cast<double>(b);

      for (std::size_t s = 0; s < cfg.critic_steps_per_gen; ++s) {
        const Tensor3<float> fake = model.gen.forward(latent_batch(b, cfg.latent_dim, er), true);
        CriticCache<float> cr;
        CriticCache<float> cf;
        const auto d_real = as_doubles(model.critic.forward(real, true, &er, &cr));
        const auto d_fake = as_doubles(model.critic.forward(fake, true, &er, &cf));
        const double loss = critic_loss(d_real, d_fake);
        if (!std::isfinite(loss)) {
          throw NumericsError("non-finite critic loss at epoch " + std::to_string(rec.epoch) + ", critic step " +
                              std::to_string(model.opt_d.steps() + 1));
        }
        model.critic.zero_grad();
        model.critic.backward(cr, constant_grad(b, -inv_b));
        model.critic.backward(cf, constant_grad(b, inv_b));
        model.opt_d.step(model.critic.params());
        rec.max_critic_weight = std::max(rec.max_critic_weight, nd::max_abs_value(model.critic.params()));
        d_sum += loss;
        ++d_steps;
      }

      GeneratorCache<float> gc;
      const Tensor3<float> fake = model.gen.forward(latent_batch(b, cfg.latent_dim, er), true, &gc);
      CriticCache<float> cf;
      const double loss = generator_loss(as_doubles(model.critic.forward(fake, true, &er, &cf)));
      if (!std::isfinite(loss)) {
        throw NumericsError("non-finite generator loss at epoch " + std::to_string(rec.epoch) + ", generator step " +
                            std::to_string(model.opt_g.steps() + 1));
      }
      model.gen.zero_grad();
      const Tensor3<float> grad_fake = model.critic.backward(cf, constant_grad(b, -inv_b));
      model.gen.backward(gc, grad_fake);
      model.opt_g.step(model.gen.params());
      model.critic.zero_grad();
      g_sum += loss;
      ++g_steps;
    }
    if (d_steps == 0) throw ConfigError("training set has fewer than 2 traces per batch");
    rec.d_loss = d_sum / static_cast<double>(d_steps);
    rec.g_loss = g_sum / static_cast<double>(g_steps);
    ++model.epoch;

    bool improved = false;
    if (monitoring && (model.epoch % cfg.fid_every == 0 || model.epoch == cfg.epochs)) {
      rec.fid = evaluate_fid();
      if (rec.fid < hist.best_fid) {
        hist.best_fid = rec.fid;
        hist.best_epoch = model.epoch;
        hist.evals_since_best = 0;
        improved = true;
      } else {
        ++hist.evals_since_best;
        if (cfg.early_stop_patience > 0 && hist.evals_since_best >= cfg.early_stop_patience) {
          hist.stopped_early = true;
        }
      }
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    hist.epochs.push_back(rec);
    if (!opts.checkpoint_dir.empty()) {
      save_model(model, opts.checkpoint_dir / "last.ckpt");
      if (improved) save_model(model, opts.checkpoint_dir / "best.ckpt");
    }
    if (opts.on_epoch) opts.on_epoch(rec);
  }
  return hist;
}

}  // namespace nggan
