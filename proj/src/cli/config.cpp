#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include "nggan/cli.hpp"
#include "nggan/error.hpp"

namespace nggan::cli {

namespace pt = boost::property_tree;
using nlohmann::json;

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string where(const std::string& section, const std::string& key) {
  return section.empty() ? key : "[" + section + "] " + key;
}

double to_double(const std::string& section, const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end || !std::isfinite(out)) {
    throw ConfigError(where(section, key) + ": expected a number, found '" + v + "'");
  }
  return out;
}

std::uint64_t to_uint(const std::string& section, const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto r = std::from_chars(v.data(), end, out);
  if (r.ec != std::errc() || r.ptr != end) {
    throw ConfigError(where(section, key) + ": expected a non-negative integer, found '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& section, const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(where(section, key) + ": expected true or false, found '" + v + "'");
}

std::vector<double> to_list(const std::string& section, const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split(v, ',')) out.push_back(to_double(section, key, item));
  return out;
}

// "lo-hi, lo-hi" in Hz.
std::vector<metrics::Band> to_bands(const std::string& section, const std::string& key, const std::string& v) {
  std::vector<metrics::Band> out;
  for (const auto& item : split(v, ',')) {
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) throw ConfigError(where(section, key) + ": band '" + item + "' is not lo-hi");
    out.push_back({to_double(section, key, trim(item.substr(0, dash))),
                   to_double(section, key, trim(item.substr(dash + 1)))});
  }
  try {
    metrics::validate_bands(out);
  } catch (const Error& e) {
    throw ConfigError(where(section, key) + ": " + e.what());
  }
  return out;
}

// "center:gain:decay; center:gain:decay"
std::vector<synth::PsdTerm> to_psd(const std::string& section, const std::string& key, const std::string& v) {
  std::vector<synth::PsdTerm> out;
  for (const auto& item : split(v, ';')) {
    const auto parts = split(item, ':');
    if (parts.size() != 3) throw ConfigError(where(section, key) + ": term '" + item + "' is not center:gain:decay");
    out.push_back({to_double(section, key, parts[0]), to_double(section, key, parts[1]),
                   to_double(section, key, parts[2])});
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
  return out;
}

[[noreturn]] void unknown_key(const std::string& section, const std::string& key) {
  throw ConfigError("unknown config key " + where(section, key));
}

void apply_root(RunConfig& cfg, const std::string& key, const std::string& v) {
  if (key == "seed") cfg.seed = to_uint("", key, v);
  else if (key == "out") cfg.out = v;
  else if (key == "threads") cfg.threads = static_cast<unsigned>(to_uint("", key, v));
  else if (key == "log_level") cfg.log_level = v;
  else if (key == "plots") cfg.plots = to_bool("", key, v);
  else if (key == "preset") cfg.preset = v;  // applied by load_run_config before the rest of the file
  else unknown_key("", key);
}

void apply_synth(SynthSection& s, const std::string& key, const std::string& v) {
  const std::string sec = "synth";
  if (key == "model") {
    if (v != "fresh" && v != "pscgm") {
      throw ConfigError("unknown synthesis model '" + v + "'; valid models: fresh, pscgm");
    }
    s.model = v;
  } else if (key == "count") s.count = to_uint(sec, key, v);
  else if (key == "length") s.length = to_uint(sec, key, v);
  else unknown_key(sec, key);
}

void apply_fresh(synth::FreshConfig& f, const std::string& key, const std::string& v) {
  const std::string sec = "fresh";
  if (key == "cycle_period_s") f.cycle_period_s = to_double(sec, key, v);
  else if (key == "sample_rate_hz") f.sample_rate_hz = to_double(sec, key, v);
  else if (key == "temporal_center_frac") f.temporal_center_frac = to_double(sec, key, v);
  else if (key == "temporal_decay_s") f.temporal_decay_s = to_double(sec, key, v);
  else if (key == "random_phase") f.random_phase = to_bool(sec, key, v);
  else if (key.size() > 6 && (key.rfind("peak1_", 0) == 0 || key.rfind("peak2_", 0) == 0)) {
    auto& p = f.spectral_peaks[key[4] == '1' ? 0 : 1];
    const auto field = key.substr(6);
    if (field == "f0_hz") p.f0_hz = to_double(sec, key, v);
    else if (field == "amplitude") p.amplitude = to_double(sec, key, v);
    else if (field == "decay_left_hz") p.decay_left_hz = to_double(sec, key, v);
    else if (field == "decay_right_hz") p.decay_right_hz = to_double(sec, key, v);
    else unknown_key(sec, key);
  } else unknown_key(sec, key);
}

void apply_region(synth::RegionSpec& r, const std::string& sec, const std::string& key, const std::string& v) {
  if (key == "duration_s") r.duration_s = to_double(sec, key, v);
  else if (key == "rms_volts") r.rms_volts = to_double(sec, key, v);
  else if (key == "psd") r.psd_shape = to_psd(sec, key, v);
  else unknown_key(sec, key);
}

void apply_train(TrainSection& t, const std::string& key, const std::string& v) {
  const std::string sec = "train";
  if (key == "data") {
    t.data = v;
    return;
  }
  if (key == "resume") {
    t.resume = v;
    return;
  }
  json j = json::parse(t.model.to_json());
  if (!j.contains(key)) unknown_key(sec, key);
  auto& slot = j[key];
  if (slot.is_string()) slot = v;
  else if (slot.is_number_unsigned() || slot.is_number_integer()) slot = to_uint(sec, key, v);
  else if (slot.is_boolean()) slot = to_bool(sec, key, v);
  else slot = to_double(sec, key, v);
  t.model = NgganConfig::from_json(j.dump());
}

void apply_generate(GenerateSection& g, const std::string& key, const std::string& v) {
  const std::string sec = "generate";
  if (key == "checkpoint") g.checkpoint = v;
  else if (key == "count") g.count = to_uint(sec, key, v);
  else if (key == "normalized") g.normalized = to_bool(sec, key, v);
  else unknown_key(sec, key);
}

void apply_evaluate(EvaluateSection& e, const std::string& key, const std::string& v) {
  const std::string sec = "evaluate";
  if (key == "reference") e.reference = v;
  else if (key == "candidate") e.candidate = v;
  else if (key == "threshold") e.threshold = to_double(sec, key, v);
  else if (key == "alphas") e.alphas = to_list(sec, key, v);
  else if (key == "f_min_hz") e.f_min_hz = to_double(sec, key, v);
  else if (key == "f_max_hz") e.f_max_hz = to_double(sec, key, v);
  else if (key == "band_alpha_hz") e.band_alpha_hz = to_double(sec, key, v);
  else if (key == "bands") e.bands = to_bands(sec, key, v);
  else if (key == "error_alpha_range") {
    const auto r = to_list(sec, key, v);
    if (r.size() != 2 || r[0] > r[1]) throw ConfigError("[evaluate] error_alpha_range: expected 'lo, hi'");
    e.error_alpha_range = std::pair{r[0], r[1]};
  } else if (key == "nfft") e.nfft = to_uint(sec, key, v);
  else if (key == "fid_space") {
    try {
      e.fid_space = metrics::parse_fid_space(v);
    } catch (const Error& err) {
      throw ConfigError(std::string("[evaluate] fid_space: ") + err.what());
    }
  } else if (key == "feature_thresh_volts") e.feature_thresh_volts = to_double(sec, key, v);
  else unknown_key(sec, key);
}

void validate(const RunConfig& cfg) {
  if (cfg.threads == 0) throw ConfigError("threads must be at least 1");
  if (cfg.synth.count == 0 || cfg.synth.length == 0) throw ConfigError("[synth] count and length must be positive");
  const auto& e = cfg.evaluate;
  if (!(e.threshold > 0.0 && e.threshold < 1.0)) throw ConfigError("[evaluate] threshold must lie in (0, 1)");
  if (e.alphas.empty()) throw ConfigError("[evaluate] alphas must not be empty");
  for (double a : e.alphas) {
    if (a <= 0.0) throw ConfigError("[evaluate] alphas must be positive");
  }
  if (e.f_max_hz && *e.f_max_hz <= e.f_min_hz) throw ConfigError("[evaluate] f_max_hz must exceed f_min_hz");
  try {
    cfg.train.model.validate();
    cfg.synth.fresh.validate();
    cfg.synth.pscgm.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& err) {
    throw ConfigError(err.what());
  }
}

}  // namespace

void apply_preset(RunConfig& cfg, const std::string& name) {
  RunConfig fresh_cfg;
  fresh_cfg.seed = cfg.seed;
  fresh_cfg.out = cfg.out;
  fresh_cfg.threads = cfg.threads;
  fresh_cfg.log_level = cfg.log_level;
  fresh_cfg.plots = cfg.plots;
  fresh_cfg.preset = name;
  auto& s = fresh_cfg.synth;
  auto& e = fresh_cfg.evaluate;
  if (name == "dataset1-like") {
    s.model = "pscgm";
    e.threshold = 0.9;
  } else if (name == "dataset2-like") {
    s.model = "fresh";
    e.threshold = 0.5;
  } else if (name == "dataset1-desk" || name == "dataset2-desk") {
    s.model = name == "dataset1-desk" ? "pscgm" : "fresh";
    s.fresh = synth::fresh_dataset2_desk();
    s.pscgm = synth::pscgm_dataset1_desk();
    s.count = 2048;
    s.length = 1024;
    fresh_cfg.train.model = desk_config();
    e.threshold = name == "dataset1-desk" ? 0.9 : 0.5;
  } else if (name == "measured") {
    e.threshold = 0.3;
    e.alphas = {114, 228, 342, 456, 570, 684};
    e.band_alpha_hz = 114.0;
  } else {
    std::string valid;
    for (const char* p : kPresetNames) valid += (valid.empty() ? "" : ", ") + std::string(p);
    throw ConfigError("unknown preset '" + name + "'; valid presets: " + valid);
  }
  cfg = std::move(fresh_cfg);
}

void apply_ini(RunConfig& cfg, const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  // Region sections replace the preset's regions as a whole.
  std::vector<std::pair<std::size_t, const pt::ptree*>> regions;
  std::size_t declared_regions = 0;

  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      apply_root(cfg, name, trim(node.data()));
      continue;
    }
    for (const auto& [key, leaf] : node) {
      if (!leaf.empty()) throw ConfigError("nested key under [" + name + "] " + key);
    }
    const auto each = [&](auto&& fn) {
      for (const auto& [key, leaf] : node) fn(key, trim(leaf.data()));
    };
    if (name == "synth") each([&](auto& k, auto v) { apply_synth(cfg.synth, k, v); });
    else if (name == "fresh") each([&](auto& k, auto v) { apply_fresh(cfg.synth.fresh, k, v); });
    else if (name == "pscgm") {
      each([&](auto& k, auto v) {
        if (k == "cycle_period_s") cfg.synth.pscgm.cycle_period_s = to_double(name, k, v);
        else if (k == "sample_rate_hz") cfg.synth.pscgm.sample_rate_hz = to_double(name, k, v);
        else if (k == "random_phase") cfg.synth.pscgm.random_phase = to_bool(name, k, v);
        else if (k == "regions") declared_regions = to_uint(name, k, v);
        else unknown_key(name, k);
      });
    } else if (name.rfind("pscgm.region", 0) == 0) {
      const auto idx = to_uint(name, "section", name.substr(12));
      if (idx == 0) throw ConfigError("[" + name + "]: regions are numbered from 1");
      regions.emplace_back(idx, &node);
    } else if (name == "train") each([&](auto& k, auto v) { apply_train(cfg.train, k, v); });
    else if (name == "generate") each([&](auto& k, auto v) { apply_generate(cfg.generate, k, v); });
    else if (name == "evaluate") each([&](auto& k, auto v) { apply_evaluate(cfg.evaluate, k, v); });
    else if (name == "report") {
      each([&](auto& k, auto v) {
        if (k == "input") cfg.report.input = v;
        else unknown_key(name, k);
      });
    } else {
      throw ConfigError("unknown config section [" + name +
                        "]; valid sections: synth, fresh, pscgm, pscgm.regionN, train, generate, evaluate, report");
    }
  }

  if (declared_regions || !regions.empty()) {
    if (regions.size() != declared_regions) {
      throw ConfigError("[pscgm] regions = " + std::to_string(declared_regions) + " but " +
                        std::to_string(regions.size()) + " [pscgm.regionN] sections found");
    }
    std::vector<synth::RegionSpec> specs(declared_regions);
    std::set<std::size_t> seen;
    for (const auto& [idx, node] : regions) {
      if (idx > declared_regions || !seen.insert(idx).second) {
        throw ConfigError("[pscgm.region" + std::to_string(idx) + "] out of range or repeated");
      }
      const std::string sec = "pscgm.region" + std::to_string(idx);
      for (const auto& [key, leaf] : *node) apply_region(specs[idx - 1], sec, key, trim(leaf.data()));
    }
    cfg.synth.pscgm.regions = std::move(specs);
  }
  validate(cfg);
}

RunConfig load_run_config(const std::filesystem::path& path, const std::string& preset_override) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();

  if (path.extension() == ".json") {
    try {
      const auto j = json::parse(text);
      text = j.at("config_ini").get<std::string>();
    } catch (const json::exception& e) {
      throw ConfigError("manifest " + path.string() + " has no usable config_ini: " + e.what());
    }
  }

  std::string preset = preset_override;
  if (preset.empty()) {
    pt::ptree tree;
    try {
      std::istringstream ini(text);
      pt::read_ini(ini, tree);
    } catch (const pt::ini_parser_error& e) {
      throw ConfigError(std::string("config parse error: ") + e.what());
    }
    if (const auto p = tree.get_optional<std::string>("preset"); p && tree.get_child("preset").empty()) {
      preset = trim(*p);
    }
  }
  RunConfig cfg;
  if (!preset.empty()) apply_preset(cfg, preset);
  apply_ini(cfg, text);
  return cfg;
}

std::string RunConfig::to_ini() const {
  std::ostringstream os;
  os << "seed = " << seed << "\n";
  os << "out = " << out.string() << "\n";
  os << "threads = " << threads << "\n";
  os << "log_level = " << log_level << "\n";
  os << "plots = " << (plots ? "true" : "false") << "\n";
  if (!preset.empty()) os << "preset = " << preset << "\n";

  os << "\n[synth]\nmodel = " << synth.model << "\ncount = " << synth.count << "\nlength = " << synth.length << "\n";

  const auto& f = synth.fresh;
  os << "\n[fresh]\ncycle_period_s = " << fmt(f.cycle_period_s) << "\nsample_rate_hz = " << fmt(f.sample_rate_hz)
     << "\ntemporal_center_frac = " << fmt(f.temporal_center_frac) << "\ntemporal_decay_s = " << fmt(f.temporal_decay_s)
     << "\nrandom_phase = " << (f.random_phase ? "true" : "false") << "\n";
  for (int i = 0; i < 2; ++i) {
    const auto& p = f.spectral_peaks[i];
    const std::string k = "peak" + std::to_string(i + 1) + "_";
    os << k << "f0_hz = " << fmt(p.f0_hz) << "\n" << k << "amplitude = " << fmt(p.amplitude) << "\n"
       << k << "decay_left_hz = " << fmt(p.decay_left_hz) << "\n" << k << "decay_right_hz = " << fmt(p.decay_right_hz)
       << "\n";
  }

  const auto& p = synth.pscgm;
  os << "\n[pscgm]\ncycle_period_s = " << fmt(p.cycle_period_s) << "\nsample_rate_hz = " << fmt(p.sample_rate_hz)
     << "\nrandom_phase = " << (p.random_phase ? "true" : "false") << "\nregions = " << p.regions.size() << "\n";
  for (std::size_t i = 0; i < p.regions.size(); ++i) {
    const auto& r = p.regions[i];
    os << "\n[pscgm.region" << i + 1 << "]\nduration_s = " << fmt(r.duration_s) << "\nrms_volts = " << fmt(r.rms_volts)
       << "\npsd = ";
    for (std::size_t t = 0; t < r.psd_shape.size(); ++t) {
      const auto& term = r.psd_shape[t];
      os << (t ? "; " : "") << fmt(term.center_hz) << ":" << fmt(term.gain) << ":" << fmt(term.decay_hz);
    }
    os << "\n";
  }

  os << "\n[train]\n";
  if (!train.data.empty()) os << "data = " << train.data.string() << "\n";
  if (!train.resume.empty()) os << "resume = " << train.resume.string() << "\n";
  const json model_json = json::parse(train.model.to_json());
  for (const auto& [k, v] : model_json.items()) {
    if (v.is_string()) os << k << " = " << v.get<std::string>() << "\n";
    else if (v.is_number_float()) os << k << " = " << fmt(v.get<double>()) << "\n";
    else os << k << " = " << v.dump() << "\n";
  }

  os << "\n[generate]\n";
  if (!generate.checkpoint.empty()) os << "checkpoint = " << generate.checkpoint.string() << "\n";
  os << "count = " << generate.count << "\nnormalized = " << (generate.normalized ? "true" : "false") << "\n";

  const auto& e = evaluate;
  os << "\n[evaluate]\n";
  if (!e.reference.empty()) os << "reference = " << e.reference.string() << "\n";
  if (!e.candidate.empty()) os << "candidate = " << e.candidate.string() << "\n";
  os << "threshold = " << fmt(e.threshold) << "\nalphas = " << join(e.alphas) << "\nf_min_hz = " << fmt(e.f_min_hz)
     << "\n";
  if (e.f_max_hz) os << "f_max_hz = " << fmt(*e.f_max_hz) << "\n";
  os << "band_alpha_hz = " << fmt(e.band_alpha_hz) << "\n";
  if (!e.bands.empty()) {
    os << "bands = ";
    for (std::size_t i = 0; i < e.bands.size(); ++i) {
      os << (i ? ", " : "") << fmt(e.bands[i].lo_hz) << "-" << fmt(e.bands[i].hi_hz);
    }
    os << "\n";
  }
  if (e.error_alpha_range) {
    os << "error_alpha_range = " << fmt(e.error_alpha_range->first) << ", " << fmt(e.error_alpha_range->second) << "\n";
  }
  os << "nfft = " << e.nfft << "\nfid_space = " << metrics::to_string(e.fid_space)
     << "\nfeature_thresh_volts = " << fmt(e.feature_thresh_volts) << "\n";

  if (!report.input.empty()) os << "\n[report]\ninput = " << report.input.string() << "\n";
  return os.str();
}

}  // namespace nggan::cli
