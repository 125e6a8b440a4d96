#include <nlohmann/json.hpp>

#include <cstdio>
#include <set>

#include "nggan/error.hpp"
#include "nggan/model.hpp"

namespace nggan {

using nlohmann::json;

std::size_t NgganConfig::trace_len() const {
  std::size_t len = base_len;
  for (std::size_t i = 0; i < blocks; ++i) len *= 4;
  return len;
}

void NgganConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("model config: " + what); };
  if (latent_dim < 1) fail("latent_dim must be >= 1");
  if (blocks < 1 || blocks > 8) fail("blocks must lie in [1, 8]");
  if (base_len < 1) fail("base_len must be >= 1");
  if (upsample_mode != nd::UpsampleMode::Nearest && base_len < 2) fail("linear/hybrid upsampling needs base_len >= 2");
  const std::size_t ladder = std::size_t{1} << (blocks - 1);
  if (base_ch < ladder || base_ch % ladder != 0) {
    fail("base_ch must be a positive multiple of 2^(blocks-1) = " + std::to_string(ladder));
  }
  if (kernel_len < 5 || kernel_len % 2 == 0) fail("kernel_len must be odd and >= 5");
  if (!(leaky_slope >= 0.0)) fail("leaky_slope must be >= 0");
  if (!(lr > 0.0)) fail("lr must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) fail("betas must lie in [0, 1)");
  if (batch < 2) fail("batch must be >= 2");
  if (critic_steps_per_gen < 1) fail("critic_steps_per_gen must be >= 1");
  if (!(clip_value > 0.0)) fail("clip_value must be > 0");
  if (!(l2 >= 0.0)) fail("l2 must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (!(holdout_frac >= 0.0 && holdout_frac < 1.0)) fail("holdout_frac must lie in [0, 1)");
  if (fid_every > 0 && !(holdout_frac > 0.0)) fail("FID monitoring needs holdout_frac > 0");
}

std::string NgganConfig::to_json() const {
  json j;
  j["latent_dim"] = latent_dim;
  j["base_len"] = base_len;
  j["base_ch"] = base_ch;
  j["blocks"] = blocks;
  j["kernel_len"] = kernel_len;
  j["leaky_slope"] = leaky_slope;
  j["lr"] = lr;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["epochs"] = epochs;
  j["batch"] = batch;
  j["critic_steps_per_gen"] = critic_steps_per_gen;
  j["clip_value"] = clip_value;
  j["l2"] = l2;
  j["dropout"] = dropout;
  j["early_stop_patience"] = early_stop_patience;
  j["fid_every"] = fid_every;
  j["holdout_frac"] = holdout_frac;
  j["upsample_mode"] = std::string(nd::to_string(upsample_mode));
  return j.dump();
}

NgganConfig NgganConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("model config: expected a JSON object");
  NgganConfig c;
  static const std::set<std::string> known = {
      "latent_dim", "base_len", "base_ch", "blocks", "kernel_len", "leaky_slope", "lr", "beta1", "beta2",
      "epochs", "batch", "critic_steps_per_gen", "clip_value", "l2", "dropout", "early_stop_patience",
      "fid_every", "holdout_frac", "upsample_mode"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError("model config: unknown key '" + it.key() + "'");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("latent_dim", c.latent_dim);
    get("base_len", c.base_len);
    get("base_ch", c.base_ch);
    get("blocks", c.blocks);
    get("kernel_len", c.kernel_len);
    get("leaky_slope", c.leaky_slope);
    get("lr", c.lr);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("epochs", c.epochs);
    get("batch", c.batch);
    get("critic_steps_per_gen", c.critic_steps_per_gen);
    get("clip_value", c.clip_value);
    get("l2", c.l2);
    get("dropout", c.dropout);
    get("early_stop_patience", c.early_stop_patience);
    get("fid_every", c.fid_every);
    get("holdout_frac", c.holdout_frac);
    if (j.contains("upsample_mode")) c.upsample_mode = nd::parse_upsample_mode(j.at("upsample_mode").get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return c;
}

std::uint64_t NgganConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

NgganConfig desk_config() {
  NgganConfig c;
  c.blocks = 3;
  c.base_ch = 32;
  c.epochs = 50;
  return c;
}

std::vector<std::array<std::size_t, 2>> generator_channels(const NgganConfig& cfg) {
  std::vector<std::array<std::size_t, 2>> out;
  for (std::size_t i = 0; i < cfg.blocks; ++i) {
    const std::size_t in = cfg.base_ch >> i;
    const std::size_t o = i + 1 == cfg.blocks ? 1 : cfg.base_ch >> (i + 1);
    out.push_back({in, o});
  }
  return out;
}

std::vector<std::array<std::size_t, 2>> critic_channels(const NgganConfig& cfg) {
  std::vector<std::array<std::size_t, 2>> out;
  for (std::size_t i = 0; i < cfg.blocks; ++i) {
    const std::size_t in = i == 0 ? 1 : cfg.base_ch >> (cfg.blocks - i);
    out.push_back({in, cfg.base_ch >> (cfg.blocks - 1 - i)});
  }
  return out;
}

}  // namespace nggan
