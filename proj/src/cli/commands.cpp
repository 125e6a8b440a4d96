#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "common/bytes.hpp"
#include "nggan/cli.hpp"
#include "nggan/error.hpp"
#include "nggan/metrics/features.hpp"
#include "nggan/metrics/spectrogram.hpp"

namespace nggan::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

void log(const RunConfig& cfg, const std::string& msg) {
  if (cfg.log_level != "quiet") std::cerr << "nggan: " << msg << "\n";
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  detail::write_file(path, std::vector<unsigned char>(text.begin(), text.end()));
}

void prepare_out(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw IoError("cannot create output directory " + cfg.out.string() + ": " + ec.message());
}

TraceSet load_input(const fs::path& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("no ") + what + " file given");
  return load_traceset(path);
}

// 8-bit binary PGM of a rows x cols matrix, log-scaled over a 60 dB range.
void write_pgm(const fs::path& path, std::size_t rows, std::size_t cols, const std::vector<double>& values) {
  double peak = 0.0;
  for (double v : values) peak = std::max(peak, v);
  const std::string header = "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
  std::vector<unsigned char> bytes(header.begin(), header.end());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = values[r * cols + c];
      double level = 0.0;
      if (peak > 0.0 && v > 0.0) level = std::clamp(1.0 + std::log10(v / peak) / 3.0, 0.0, 1.0);
      bytes.push_back(static_cast<unsigned char>(std::lround(level * 255.0)));
    }
  }
  detail::write_file(path, bytes);
}

// Spectrogram (frequency rows, time columns) of trace 0.
fs::path plot_spectrogram(const RunConfig& cfg, const TraceSet& set, const std::string& stem) {
  const std::size_t win = std::min<std::size_t>(256, set.length());
  const auto spec = metrics::spectrogram(set.trace(0), set.sample_rate_hz(), win, std::max<std::size_t>(1, win / 4));
  std::vector<double> flipped(spec.frames * spec.bins);
  for (std::size_t f = 0; f < spec.frames; ++f) {
    for (std::size_t b = 0; b < spec.bins; ++b) flipped[(spec.bins - 1 - b) * spec.frames + f] = spec.at(f, b);
  }
  const fs::path rel = fs::path("plots") / (stem + "_spectrogram.pgm");
  fs::create_directories(cfg.out / "plots");
  write_pgm(cfg.out / rel, spec.bins, spec.frames, flipped);
  return rel;
}

// |CSC| of trace 0, one row per alpha.
fs::path plot_csc(const RunConfig& cfg, const TraceSet& set, const std::string& stem, std::size_t nfft) {
  std::vector<double> samples(set.trace(0).begin(), set.trace(0).end());
  auto spec = metrics::csd(std::span<const double>(samples), set.sample_rate_hz(), cfg.evaluate.alphas, nfft);
  metrics::csc(spec);
  std::vector<double> mag(spec.csc.size());
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(spec.csc[i]);
  const fs::path rel = fs::path("plots") / (stem + "_csc.pgm");
  fs::create_directories(cfg.out / "plots");
  write_pgm(cfg.out / rel, spec.rows(), spec.cols(), mag);
  return rel;
}

struct Summary {
  double mean = 0.0;
  double std = 0.0;
  double median = 0.0;
};

Summary summarize(std::vector<double> v) {
  Summary s;
  if (v.empty()) return {std::nan(""), std::nan(""), std::nan("")};
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  s.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  return s;
}

std::vector<metrics::Band> default_bands(double fs) {
  const double q = fs / 8.0;
  return {{0, q}, {q, 2 * q}, {2 * q, 3 * q}, {3 * q, 4 * q}};
}

bool in_error_range(const EvaluateSection& e, double alpha) {
  return !e.error_alpha_range || (alpha >= e.error_alpha_range->first && alpha <= e.error_alpha_range->second);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) throw FormatError(path.string() + " is empty");
  return rows;
}

std::string markdown_table(const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out += "|";
    for (const auto& c : rows[r]) out += " " + c + " |";
    out += "\n";
    if (r == 0) {
      out += "|";
      for (std::size_t c = 0; c < rows[r].size(); ++c) out += "---|";
      out += "\n";
    }
  }
  return out;
}

}  // namespace

std::vector<fs::path> cmd_synth(const RunConfig& cfg) {
  prepare_out(cfg);
  const Rng rng(cfg.seed);
  const auto& s = cfg.synth;
  log(cfg, "synthesizing " + std::to_string(s.count) + " " + s.model + " traces of " + std::to_string(s.length) +
               " samples");
  TraceSet set = s.model == "pscgm" ? synth::gen_pscgm(s.pscgm, s.count, s.length, rng, cfg.threads)
               : s.model == "fresh" ? synth::gen_fresh(s.fresh, s.count, s.length, rng, cfg.threads)
                                    : throw ConfigError("unknown synthesis model '" + s.model +
                                                        "'; valid models: fresh, pscgm");
  std::vector<fs::path> out = {"traces.ngts"};
  save_traceset(set, cfg.out / out[0]);
  if (cfg.plots) out.push_back(plot_spectrogram(cfg, set, "traces"));
  write_manifest(cfg, {"synth", {}, out});
  return out;
}

std::vector<fs::path> cmd_train(const RunConfig& cfg) {
  prepare_out(cfg);
  const TraceSet data = load_input(cfg.train.data, "training data ([train] data)");
  const Rng rng(cfg.seed);

  NgganModel model = [&] {
    if (cfg.train.resume.empty()) {
      auto m = build_model(cfg.train.model, rng);
      m.sample_rate_hz = data.sample_rate_hz();
      return m;
    }
    auto m = load_model(cfg.train.resume);
    if (m.seed != cfg.seed) {
      throw ConfigError("checkpoint was trained with seed " + std::to_string(m.seed) + ", config has " +
                        std::to_string(cfg.seed));
    }
    // Only the epoch budget may change on resume.
    NgganConfig wanted = cfg.train.model;
    wanted.epochs = m.cfg.epochs;
    if (wanted.hash() != m.cfg.hash()) {
      throw ConfigError("checkpoint " + cfg.train.resume.string() + " was trained with a different model config");
    }
    m.cfg.epochs = cfg.train.model.epochs;
    log(cfg, "resuming from epoch " + std::to_string(m.epoch));
    return m;
  }();

  if (data.length() != model.cfg.trace_len()) {
    throw ConfigError("training data has trace length " + std::to_string(data.length()) + ", model expects " +
                      std::to_string(model.cfg.trace_len()));
  }
  auto [normalized, scale] = normalize_maxabs(data);
  if (cfg.train.resume.empty()) {
    model.data_scale = scale;
  } else if (scale != model.data_scale) {
    throw ConfigError("training data peak " + num(scale) + " differs from the checkpoint's " +
                      num(model.data_scale) + "; resume needs the original data");
  }

  TrainOptions opts;
  opts.checkpoint_dir = cfg.out;
  opts.on_epoch = [&](const EpochRecord& r) {
    log(cfg, "epoch " + std::to_string(r.epoch) + " d_loss " + num(r.d_loss) + " g_loss " + num(r.g_loss) + " fid " +
                 num(r.fid) + " (" + num(r.seconds) + " s)");
  };
  const auto& history = train(model, normalized, rng, opts);

  // Wall times only go to the console so the log stays reproducible.
  std::string csv = "epoch,d_loss,g_loss,fid,max_critic_weight\n";
  for (const auto& r : history.epochs) {
    csv += std::to_string(r.epoch) + "," + num(r.d_loss) + "," + num(r.g_loss) + "," + num(r.fid) + "," +
           num(r.max_critic_weight) + "\n";
  }
  write_text(cfg.out / "training_log.csv", csv);

  std::vector<fs::path> out = {"last.ckpt"};
  if (fs::exists(cfg.out / "best.ckpt")) out.push_back("best.ckpt");
  out.push_back("training_log.csv");
  std::vector<fs::path> inputs = {cfg.train.data};
  if (!cfg.train.resume.empty()) inputs.push_back(cfg.train.resume);
  write_manifest(cfg, {"train", inputs, out});
  return out;
}

std::vector<fs::path> cmd_generate(const RunConfig& cfg) {
  prepare_out(cfg);
  if (cfg.generate.checkpoint.empty()) throw ConfigError("no checkpoint given ([generate] checkpoint)");
  NgganModel model = load_model(cfg.generate.checkpoint);
  if (cfg.generate.count == 0) throw ConfigError("[generate] count must be positive");
  TraceSet set = generate(model, cfg.generate.count, Rng(cfg.seed), cfg.threads);
  if (!cfg.generate.normalized) set = rescale(set, model.data_scale);
  std::vector<fs::path> out = {"generated.ngts"};
  save_traceset(set, cfg.out / out[0]);
  if (cfg.plots) out.push_back(plot_spectrogram(cfg, set, "generated"));
  write_manifest(cfg, {"generate", {cfg.generate.checkpoint}, out});
  return out;
}

std::vector<fs::path> cmd_evaluate(const RunConfig& cfg) {
  prepare_out(cfg);
  const auto& e = cfg.evaluate;
  const TraceSet ref = load_input(e.reference, "reference set ([evaluate] reference)");
  const TraceSet cand = load_input(e.candidate, "candidate set ([evaluate] candidate)");
  if (ref.sample_rate_hz() != cand.sample_rate_hz()) {
    throw ConfigError("sample rates differ: " + num(ref.sample_rate_hz()) + " Hz vs " + num(cand.sample_rate_hz()) +
                      " Hz");
  }
  const double fs_hz = ref.sample_rate_hz();
  std::vector<fs::path> out;

  // Feature table.
  std::size_t ref_skipped = 0, cand_skipped = 0;
  const auto ref_feats = metrics::feature_set(ref, e.feature_thresh_volts, cfg.threads, &ref_skipped);
  const auto cand_feats = metrics::feature_set(cand, e.feature_thresh_volts, cfg.threads, &cand_skipped);
  {
    std::string csv = "feature,set,mean,std,median\n";
    for (std::size_t k = 0; k < metrics::kFeatureNames.size(); ++k) {
      for (const auto& [label, feats] : {std::pair{"reference", &ref_feats}, std::pair{"candidate", &cand_feats}}) {
        std::vector<double> col;
        col.reserve(feats->size());
        for (const auto& f : *feats) col.push_back(f.values()[k]);
        const auto s = summarize(std::move(col));
        csv += std::to_string(k + 1) + "," + label + "," + num(s.mean) + "," + num(s.std) + "," + num(s.median) +
               "\n";
      }
    }
    write_text(cfg.out / "features.csv", csv);
    out.emplace_back("features.csv");
  }

  // FID and PCA scatter.
  const auto ref_x = metrics::pca_feature_matrix(ref_feats);
  const auto cand_x = metrics::pca_feature_matrix(cand_feats);
  {
    const double value = metrics::fid_in_space(ref_x, cand_x, e.fid_space);
    std::string csv = "space,fid,reference_traces,candidate_traces,reference_skipped,candidate_skipped\n";
    csv += std::string(metrics::to_string(e.fid_space)) + "," + num(value) + "," + std::to_string(ref_feats.size()) +
           "," + std::to_string(cand_feats.size()) + "," + std::to_string(ref_skipped) + "," +
           std::to_string(cand_skipped) + "\n";
    write_text(cfg.out / "fid.csv", csv);
    out.emplace_back("fid.csv");

    const auto model = metrics::pca_fit(ref_x);
    std::string scatter = "set,index,pc1,pc2\n";
    for (const auto& [label, x] : {std::pair{"reference", &ref_x}, std::pair{"candidate", &cand_x}}) {
      const auto scores = metrics::pca_project(model, *x, 2);
      for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        scatter += std::string(label) + "," + std::to_string(i) + "," + num(scores(i, 0)) + "," + num(scores(i, 1)) +
                   "\n";
      }
    }
    write_text(cfg.out / "pca_scatter.csv", scatter);
    out.emplace_back("pca_scatter.csv");
  }

  // Cyclic statistics.
  metrics::CyclicStatsRequest req;
  req.alphas = e.alphas;
  req.threshold = e.threshold;
  req.f_min_hz = e.f_min_hz;
  req.f_max_hz = e.f_max_hz.value_or(fs_hz / 2.0);
  req.band_alpha_hz = e.band_alpha_hz;
  req.bands = e.bands.empty() ? default_bands(fs_hz) : e.bands;
  req.nfft = e.nfft;
  if (std::find(req.alphas.begin(), req.alphas.end(), req.band_alpha_hz) == req.alphas.end()) {
    throw ConfigError("[evaluate] band_alpha_hz " + num(req.band_alpha_hz) + " is not among the alphas");
  }
  const auto ref_cyc = metrics::cyclic_stats(ref, req, cfg.threads);
  const auto cand_cyc = metrics::cyclic_stats(cand, req, cfg.threads);
  {
    std::string csv = "row,reference_pct,candidate_pct,ratio_pct,abs_diff_pct\n";
    double error = 0.0;
    for (std::size_t i = 0; i < ref_cyc.alphas.size(); ++i) {
      const double r = ref_cyc.exceedance_pct[i], c = cand_cyc.exceedance_pct[i];
      const double ratio = r > 0.0 ? 100.0 * c / r : std::nan("");
      if (in_error_range(e, ref_cyc.alphas[i])) error += std::abs(c - r);
      csv += num(ref_cyc.alphas[i]) + "," + num(r) + "," + num(c) + "," + num(ratio) + "," + num(std::abs(c - r)) +
             "\n";
    }
    csv += "Error,,,," + num(error) + "\n";
    write_text(cfg.out / "exceedance.csv", csv);
    out.emplace_back("exceedance.csv");

    std::string bands = "band,lo_hz,hi_hz,reference_pct,candidate_pct,abs_diff_pct\n";
    double band_error = 0.0;
    for (std::size_t i = 0; i < req.bands.size(); ++i) {
      const double r = ref_cyc.band_pct[i], c = cand_cyc.band_pct[i];
      band_error += std::abs(c - r);
      bands += std::to_string(i + 1) + "," + num(req.bands[i].lo_hz) + "," + num(req.bands[i].hi_hz) + "," + num(r) +
               "," + num(c) + "," + num(std::abs(c - r)) + "\n";
    }
    bands += "Error,,,,," + num(band_error) + "\n";
    write_text(cfg.out / "bands.csv", bands);
    out.emplace_back("bands.csv");
  }

  ordered_json meta;
  meta["sample_rate_hz"] = fs_hz;
  meta["threshold"] = e.threshold;
  meta["band_alpha_hz"] = req.band_alpha_hz;
  meta["f_range_hz"] = {req.f_min_hz, req.f_max_hz};
  meta["nfft"] = ref_cyc.nfft;
  // Inputs are named by content so the file is independent of the run location;
  // their paths are in manifest.json.
  meta["reference"] = {{"sha256", sha256_file(e.reference)}, {"traces", ref.size()}, {"masked_bins", ref_cyc.masked_bins},
                       {"excluded_traces", ref_cyc.excluded_traces}};
  meta["candidate"] = {{"sha256", sha256_file(e.candidate)}, {"traces", cand.size()},
                       {"masked_bins", cand_cyc.masked_bins}, {"excluded_traces", cand_cyc.excluded_traces}};
  write_text(cfg.out / "evaluate.json", meta.dump(2) + "\n");
  out.emplace_back("evaluate.json");

  if (cfg.plots) {
    out.push_back(plot_spectrogram(cfg, ref, "reference"));
    out.push_back(plot_spectrogram(cfg, cand, "candidate"));
    out.push_back(plot_csc(cfg, ref, "reference", ref_cyc.nfft));
    out.push_back(plot_csc(cfg, cand, "candidate", cand_cyc.nfft));
  }
  write_manifest(cfg, {"evaluate", {e.reference, e.candidate}, out});
  return out;
}

std::vector<fs::path> cmd_report(const RunConfig& cfg) {
  const fs::path in = cfg.report.input;
  if (in.empty()) throw ConfigError("no evaluate directory given ([report] input)");
  prepare_out(cfg);

  std::string md = "# Evaluation report\n\n";

  // Feature table: one row per feature, mean/std/median per set.
  {
    const auto rows = read_csv(in / "features.csv");
    std::map<int, std::map<std::string, std::vector<std::string>>> by_feature;
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].size() != 5) throw FormatError("features.csv row " + std::to_string(r + 1) + " has wrong width");
      by_feature[std::stoi(rows[r][0])][rows[r][1]] = {rows[r][2], rows[r][3], rows[r][4]};
    }
    std::vector<std::vector<std::string>> table = {{"Feature", "Reference mean", "Reference std", "Reference median",
                                                    "Candidate mean", "Candidate std", "Candidate median"}};
    for (auto& [id, sets] : by_feature) {
      std::vector<std::string> row = {"(" + std::to_string(id) + ")"};
      for (const char* s : {"reference", "candidate"}) {
        const auto& v = sets[s];
        for (std::size_t i = 0; i < 3; ++i) row.push_back(i < v.size() ? v[i] : "");
      }
      table.push_back(row);
    }
    md += "## Noise features\n\n";
    for (std::size_t k = 0; k < metrics::kFeatureNames.size(); ++k) {
      md += "(" + std::to_string(k + 1) + ") " + std::string(metrics::kFeatureNames[k]) + (k + 1 < 9 ? ", " : "\n\n");
    }
    md += markdown_table(table) + "\n";
  }

  {
    const auto meta = nlohmann::json::parse(std::string(
        [&] {
          const auto b = detail::read_file(in / "evaluate.json");
          return std::string(b.begin(), b.end());
        }()));
    const auto rows = read_csv(in / "exceedance.csv");
    std::vector<std::vector<std::string>> table = {{"Feature", "Reference", "Candidate", "Ratio"}};
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& c = rows[r];
      if (c.size() != 5) throw FormatError("exceedance.csv row " + std::to_string(r + 1) + " has wrong width");
      if (c[0] == "Error") table.push_back({"Error", "-", c[4] + "%", "-"});
      else table.push_back({c[0] + " Hz", c[1] + "%", c[2] + "%", c[3] + "%"});
    }
    md += "## Cyclic coefficients exceeding " + num(meta.at("threshold").get<double>()) + "\n\n" +
          markdown_table(table) + "\n";

    const auto brows = read_csv(in / "bands.csv");
    std::vector<std::vector<std::string>> btable = {{"Band", "Reference", "Candidate"}};
    for (std::size_t r = 1; r < brows.size(); ++r) {
      const auto& c = brows[r];
      if (c.size() != 6) throw FormatError("bands.csv row " + std::to_string(r + 1) + " has wrong width");
      if (c[0] == "Error") btable.push_back({"Error", "-", c[5] + "%"});
      else btable.push_back({c[1] + "-" + c[2] + " Hz", c[3] + "%", c[4] + "%"});
    }
    md += "## Maximum coefficient location at " + num(meta.at("band_alpha_hz").get<double>()) + " Hz\n\n" +
          markdown_table(btable) + "\n";
  }

  {
    const auto rows = read_csv(in / "fid.csv");
    if (rows.size() < 2 || rows[1].size() < 2) throw FormatError("fid.csv has no value row");
    md += "## FID\n\n" + markdown_table({{"Space", "FID"}, {rows[1][0], rows[1][1]}}) + "\n";
  }

  if (fs::exists(in / "training_log.csv")) {
    const auto rows = read_csv(in / "training_log.csv");
    md += "## Training\n\n" + std::to_string(rows.size() - 1) + " epochs logged; last row: " +
          (rows.size() > 1 ? rows.back()[0] : std::string("-")) + "\n";
  }

  write_text(cfg.out / "report.md", md);
  std::vector<fs::path> out = {"report.md"};
  std::vector<fs::path> inputs;
  for (const char* f : {"features.csv", "exceedance.csv", "bands.csv", "fid.csv", "evaluate.json"}) {
    inputs.push_back(in / f);
  }
  write_manifest(cfg, {"report", inputs, out});
  return out;
}

}  // namespace nggan::cli
