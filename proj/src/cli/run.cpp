#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "nggan/cli.hpp"
#include "nggan/error.hpp"

namespace nggan::cli {

namespace {

struct Flags {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> threads;
  std::optional<std::string> log_level;
  bool plots = false;

  std::optional<std::string> model;
  std::optional<std::size_t> count;
  std::optional<std::size_t> length;
  std::optional<std::string> data;
  std::optional<std::string> resume;
  std::optional<std::size_t> epochs;
  std::optional<std::string> checkpoint;
  bool normalized = false;
  std::vector<std::string> sets;
  std::optional<double> threshold;
  std::optional<std::vector<double>> alphas;
  std::optional<std::string> input;
};

RunConfig resolve(const Flags& f, const std::string& command) {
  RunConfig cfg;
  if (!f.config.empty()) {
    cfg = load_run_config(f.config, f.preset);
  } else if (!f.preset.empty()) {
    apply_preset(cfg, f.preset);
  }
  if (f.seed) cfg.seed = *f.seed;
  if (f.out) cfg.out = *f.out;
  if (f.threads) cfg.threads = *f.threads;
  if (f.log_level) cfg.log_level = *f.log_level;
  if (f.plots) cfg.plots = true;

  if (f.model) {
    if (*f.model != "fresh" && *f.model != "pscgm") {
      throw ConfigError("unknown synthesis model '" + *f.model + "'; valid models: fresh, pscgm");
    }
    cfg.synth.model = *f.model;
  }
  if (f.count) (command == "generate" ? cfg.generate.count : cfg.synth.count) = *f.count;
  if (f.length) cfg.synth.length = *f.length;
  if (f.data) cfg.train.data = *f.data;
  if (f.resume) cfg.train.resume = *f.resume;
  if (f.epochs) cfg.train.model.epochs = *f.epochs;
  if (f.checkpoint) cfg.generate.checkpoint = *f.checkpoint;
  if (f.normalized) cfg.generate.normalized = true;
  if (f.sets.size() == 2) {
    cfg.evaluate.reference = f.sets[0];
    cfg.evaluate.candidate = f.sets[1];
  }
  if (f.threshold) cfg.evaluate.threshold = *f.threshold;
  if (f.alphas) cfg.evaluate.alphas = *f.alphas;
  if (f.input) cfg.report.input = *f.input;

  if (cfg.threads == 0) throw ConfigError("--threads must be at least 1");
  if (!(cfg.evaluate.threshold > 0.0 && cfg.evaluate.threshold < 1.0)) {
    throw ConfigError("threshold must lie in (0, 1)");
  }
  if (cfg.log_level != "quiet" && cfg.log_level != "info") {
    throw ConfigError("log level must be quiet or info");
  }
  try {
    cfg.train.model.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Noise synthesis, GAN training and cyclostationary evaluation"};
  app.require_subcommand(1);
  Flags f;

  app.add_option("--config", f.config, "INI config file, or a manifest.json to re-run");
  app.add_option("--preset", f.preset, "dataset1-like, dataset2-like, dataset1-desk, dataset2-desk or measured");
  app.add_option("--seed", f.seed, "Root random seed");
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--threads", f.threads, "Worker threads; 1 gives bitwise-reproducible output");
  app.add_option("--log-level", f.log_level, "quiet or info");
  app.add_flag("--plots", f.plots, "Also write PGM heatmaps");

  auto* synth = app.add_subcommand("synth", "Synthesize a trace file from a parametric noise model");
  synth->add_option("--model", f.model, "fresh or pscgm");
  synth->add_option("--count", f.count, "Number of traces");
  synth->add_option("--length", f.length, "Samples per trace");

  auto* train = app.add_subcommand("train", "Train a model on a trace file");
  train->add_option("--data", f.data, "Training trace file");
  train->add_option("--resume", f.resume, "Checkpoint to continue from");
  train->add_option("--epochs", f.epochs, "Total epoch budget");

  auto* gen = app.add_subcommand("generate", "Sample traces from a checkpoint");
  gen->add_option("--checkpoint", f.checkpoint, "Model checkpoint");
  gen->add_option("--count", f.count, "Number of traces");
  gen->add_flag("--normalized", f.normalized, "Keep the generator's [-1, 1] scale");

  auto* eval = app.add_subcommand("evaluate", "Compare a candidate trace file against a reference");
  eval->add_option("sets", f.sets, "REFERENCE CANDIDATE")->expected(2);
  eval->add_option("--threshold", f.threshold, "Cyclic coefficient threshold in (0, 1)");
  eval->add_option("--alphas", f.alphas, "Cyclic frequencies in Hz")->delimiter(',');

  auto* report = app.add_subcommand("report", "Render an evaluate directory as markdown tables");
  report->add_option("--input", f.input, "Evaluate output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const RunConfig cfg = resolve(f, command);
    std::vector<std::filesystem::path> written;
    if (command == "synth") written = cmd_synth(cfg);
    else if (command == "train") written = cmd_train(cfg);
    else if (command == "generate") written = cmd_generate(cfg);
    else if (command == "evaluate") written = cmd_evaluate(cfg);
    else written = cmd_report(cfg);
    if (cfg.log_level != "quiet") {
      for (const auto& p : written) std::cerr << "nggan: wrote " << (cfg.out / p).string() << "\n";
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "nggan " << command << ": error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "nggan " << command << ": error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace nggan::cli
