#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "nggan/error.hpp"
#include "nggan/model.hpp"
#include "nggan/parallel.hpp"
#include "model/streams.hpp"

namespace nggan {

using nlohmann::json;

namespace {

nd::AdamConfig generator_opt(const NgganConfig& cfg) {
  nd::AdamConfig a;
  a.lr = cfg.lr;
  a.beta1 = cfg.beta1;
  a.beta2 = cfg.beta2;
  a.weight_decay = cfg.l2;
  return a;
}

nd::AdamConfig critic_opt(const NgganConfig& cfg) {
  nd::AdamConfig a = generator_opt(cfg);
  a.clip_value = cfg.clip_value;
  return a;
}

// Non-finite values are written as strings so the metadata stays valid JSON.
json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double number(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw FormatError("checkpoint metadata: bad number '" + s + "'");
  }
  return j.get<double>();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

nd::Blob to_blob(const std::string& name, const std::vector<std::size_t>& shape, const std::vector<float>& data) {
  nd::Blob b;
  b.name = name;
  for (auto d : shape) b.dims.push_back(static_cast<std::uint32_t>(d));
  b.data = data;
  return b;
}

void from_blob(const nd::CheckpointFile& file, const std::string& name, std::vector<float>& dst) {
  const nd::Blob* b = file.find(name);
  if (!b) throw FormatError("checkpoint is missing tensor '" + name + "'");
  if (b->data.size() != dst.size()) {
    throw FormatError("checkpoint tensor '" + name + "' has " + std::to_string(b->data.size()) +
                      " values, model expects " + std::to_string(dst.size()));
  }
  dst = b->data;
}

}  // namespace

NgganModel build_model(const NgganConfig& cfg, const Rng& rng) {
  cfg.validate();
  NgganModel m;
  m.cfg = cfg;
  m.seed = rng.seed();
  m.gen = Generator<float>(cfg);
  m.critic = Critic<float>(cfg);
  Rng gen_rng = rng.substream(streams::kInitGenerator);
  Rng critic_rng = rng.substream(streams::kInitCritic);
  m.gen.init(gen_rng);
  m.critic.init(critic_rng);
  m.opt_g = nd::Adam<float>(generator_opt(cfg), m.gen.params());
  m.opt_d = nd::Adam<float>(critic_opt(cfg), m.critic.params());
  m.opt_d.clip(m.critic.params());
  return m;
}

Tensor3<float> generator_forward(NgganModel& model, const Tensor3<float>& z) { return model.gen.forward(z, false); }

std::vector<double> discriminator_forward(const NgganModel& model, const Tensor3<float>& x) {
  const auto out = model.critic.forward(x, false, nullptr);
  return std::vector<double>(out.values().begin(), out.values().end());
}

double critic_loss(const std::vector<double>& d_real, const std::vector<double>& d_fake) {
  if (d_real.size() != d_fake.size() || d_real.empty()) {
    throw ShapeError("critic_loss: real and fake batches must be non-empty and equal in size");
  }
  double real = 0.0;
  double fake = 0.0;
  for (double v : d_real) real += v;
  for (double v : d_fake) fake += v;
  return (fake - real) / static_cast<double>(d_real.size());
}

double generator_loss(const std::vector<double>& d_fake) {
  if (d_fake.empty()) throw InvalidArgument("generator_loss: empty batch");
  double s = 0.0;
  for (double v : d_fake) s += v;
  return -s / static_cast<double>(d_fake.size());
}

TraceSet generate(NgganModel& model, std::size_t n, const Rng& rng, unsigned threads) {
  if (n == 0) throw InvalidArgument("generate: count must be >= 1");
  const std::size_t latent = model.cfg.latent_dim;
  const std::size_t len = model.cfg.trace_len();
  constexpr std::size_t kChunk = 64;
  const std::size_t chunks = (n + kChunk - 1) / kChunk;
  std::vector<float> data(n * len);
  const float top = std::nextafter(1.0f, 0.0f);
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t first = c * kChunk;
    const std::size_t count = std::min(kChunk, n - first);
    Tensor3<float> z(count, 1, latent);
    for (std::size_t i = 0; i < count; ++i) {
      Rng r = rng.substream(first + i);
      for (std::size_t k = 0; k < latent; ++k) z(i, 0, k) = static_cast<float>(2.0 * r.uniform01() - 1.0);
    }
    const Tensor3<float> out = model.gen.forward(z, false);
    for (std::size_t i = 0; i < count * len; ++i) data[first * len + i] = std::clamp(out.values()[i], -top, top);
  });
  const double fs = model.sample_rate_hz > 0.0 ? model.sample_rate_hz : 1.0;
  return TraceSet("generated", fs, len, std::move(data));
}

nd::CheckpointFile to_checkpoint(const NgganModel& model) {
  auto& m = const_cast<NgganModel&>(model);  // params() hands out mutable pointers; nothing is written here
  json meta;
  meta["format"] = "nggan-model";
  meta["config"] = json::parse(model.cfg.to_json());
  meta["config_hash"] = hex64(model.cfg.hash());
  meta["seed"] = model.seed;
  meta["epoch"] = model.epoch;
  meta["sample_rate_hz"] = number(model.sample_rate_hz);
  meta["data_scale"] = number(model.data_scale);
  meta["opt_g_steps"] = model.opt_g.steps();
  meta["opt_d_steps"] = model.opt_d.steps();
  const auto& h = model.history;
  json hist;
  hist["initial_fid"] = number(h.initial_fid);
  hist["best_fid"] = number(h.best_fid);
  hist["best_epoch"] = h.best_epoch;
  hist["evals_since_best"] = h.evals_since_best;
  hist["stopped_early"] = h.stopped_early;
  json rows = json::array();
  for (const auto& r : h.epochs) {
    rows.push_back({r.epoch, number(r.d_loss), number(r.g_loss), number(r.fid), number(r.max_critic_weight)});
  }
  hist["epochs"] = rows;
  meta["history"] = hist;

  nd::CheckpointFile file;
  file.meta = meta.dump();
  auto add_group = [&](const std::vector<nd::Param<float>*>& params) {
    for (auto* p : params) file.blobs.push_back(to_blob(p->name, p->shape, p->value));
  };
  add_group(m.gen.params());
  add_group(m.gen.buffers());
  add_group(m.critic.params());
  auto add_moments = [&](const std::string& prefix, const nd::Adam<float>& opt,
                         const std::vector<nd::Param<float>*>& params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      file.blobs.push_back(to_blob(prefix + ".m/" + params[i]->name, params[i]->shape, opt.first_moments()[i]));
      file.blobs.push_back(to_blob(prefix + ".v/" + params[i]->name, params[i]->shape, opt.second_moments()[i]));
    }
  };
  add_moments("adam_g", model.opt_g, m.gen.params());
  add_moments("adam_d", model.opt_d, m.critic.params());
  return file;
}

NgganModel from_checkpoint(const nd::CheckpointFile& file) {
  json meta;
  try {
    meta = json::parse(file.meta);
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint metadata is not valid JSON: ") + e.what());
  }
  if (meta.value("format", "") != "nggan-model") throw FormatError("checkpoint is not an NGGAN model");
  NgganModel m;
  try {
    m = build_model(NgganConfig::from_json(meta.at("config").dump()), Rng(meta.at("seed").get<std::uint64_t>()));
    m.epoch = meta.at("epoch").get<std::size_t>();
    m.sample_rate_hz = number(meta.at("sample_rate_hz"));
    m.data_scale = number(meta.at("data_scale"));
    m.opt_g.set_steps(meta.at("opt_g_steps").get<std::uint64_t>());
    m.opt_d.set_steps(meta.at("opt_d_steps").get<std::uint64_t>());
    const auto& hist = meta.at("history");
    m.history.initial_fid = number(hist.at("initial_fid"));
    m.history.best_fid = number(hist.at("best_fid"));
    m.history.best_epoch = hist.at("best_epoch").get<std::size_t>();
    m.history.evals_since_best = hist.at("evals_since_best").get<std::size_t>();
    m.history.stopped_early = hist.at("stopped_early").get<bool>();
    for (const auto& row : hist.at("epochs")) {
      EpochRecord r;
      r.epoch = row.at(0).get<std::size_t>();
      r.d_loss = number(row.at(1));
      r.g_loss = number(row.at(2));
      r.fid = number(row.at(3));
      r.max_critic_weight = number(row.at(4));
      m.history.epochs.push_back(r);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }
  auto load_group = [&](const std::vector<nd::Param<float>*>& params) {
    for (auto* p : params) from_blob(file, p->name, p->value);
  };
  load_group(m.gen.params());
  load_group(m.gen.buffers());
  load_group(m.critic.params());
  auto load_moments = [&](const std::string& prefix, nd::Adam<float>& opt,
                          const std::vector<nd::Param<float>*>& params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      from_blob(file, prefix + ".m/" + params[i]->name, opt.first_moments()[i]);
      from_blob(file, prefix + ".v/" + params[i]->name, opt.second_moments()[i]);
    }
  };
  load_moments("adam_g", m.opt_g, m.gen.params());
  load_moments("adam_d", m.opt_d, m.critic.params());
  return m;
}

void save_model(const NgganModel& model, const std::filesystem::path& path) {
  nd::save_checkpoint(to_checkpoint(model), path);
}

NgganModel load_model(const std::filesystem::path& path) { return from_checkpoint(nd::load_checkpoint(path)); }

bool same_state(const NgganModel& a, const NgganModel& b) {
  return nd::encode_checkpoint(to_checkpoint(a)) == nd::encode_checkpoint(to_checkpoint(b));
}

// ------------------------------------------------------ network grad check

namespace {

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

NgganConfig toy_config(Rng& rng) {
  NgganConfig cfg;
  cfg.blocks = 2;
  cfg.base_len = 4;
  cfg.base_ch = 2 * pick(rng, 1, 3);
  cfg.latent_dim = pick(rng, 2, 5);
  cfg.dropout = 0.3;
  return cfg;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

nd::GradCheckResult grad_check_network(Network which, std::uint64_t seed, double h) {
  Rng rng(seed);
  const NgganConfig cfg = toy_config(rng);
  const std::size_t batch = pick(rng, 2, 3);
  std::vector<double*> coords;
  std::vector<double> analytic;
  auto add = [&](std::vector<double>& values, const std::vector<double>& grads) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      coords.push_back(&values[i]);
      analytic.push_back(grads[i]);
    }
  };

  if (which == Network::Generator) {
    Generator<double> gen(cfg);
    gen.init(rng);
    for (auto& bn : gen.norms) {
      for (auto& v : bn.gamma.value) v = 0.5 + rng.uniform01();
      for (auto& v : bn.beta.value) v = rng.gaussian01() * 0.3;
    }
    Tensor3<double> z(batch, 1, cfg.latent_dim);
    for (auto& v : z.values()) v = 2.0 * rng.uniform01() - 1.0;
    Tensor3<double> g(batch, cfg.trace_len(), 1);
    for (auto& v : g.values()) v = rng.gaussian01();
    GeneratorCache<double> cache;
    gen.forward(z, true, &cache);
    gen.zero_grad();
    const Tensor3<double> gz = gen.backward(cache, g);
    for (auto* p : gen.params()) add(p->value, p->grad);
    add(z.values(), gz.values());
    GeneratorCache<double> probe;
    return nd::check_gradient(
        coords, analytic, [&] { return dot(gen.forward(z, true, &probe).values(), g.values()); },
        [&] { return Generator<double>::relu_signature(probe); }, h);
  }

  Critic<double> critic(cfg);
  critic.init(rng);
  Tensor3<double> x(batch, cfg.trace_len(), 1);
  for (auto& v : x.values()) v = rng.gaussian01();
  Tensor3<double> g(batch, 1, 1);
  for (auto& v : g.values()) v = rng.gaussian01();
  const Rng mask_rng = rng.substream(1);
  CriticCache<double> cache;
  Rng r0 = mask_rng;
  critic.forward(x, true, &r0, &cache);
  critic.zero_grad();
  const Tensor3<double> gx = critic.backward(cache, g);
  for (auto* p : critic.params()) add(p->value, p->grad);
  add(x.values(), gx.values());
  CriticCache<double> probe;
  return nd::check_gradient(
      coords, analytic,
      [&] {
        Rng r = mask_rng;
        return dot(critic.forward(x, true, &r, &probe).values(), g.values());
      },
      [&] { return Critic<double>::leaky_signature(probe); }, h);
}

}  // namespace nggan
