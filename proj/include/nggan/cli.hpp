#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nggan/metrics/cyclic.hpp"
#include "nggan/metrics/stats.hpp"
#include "nggan/model.hpp"
#include "nggan/synth.hpp"

// Pipeline commands behind the nggan tool. Every command writes a manifest.json
// into its output directory holding the resolved config, the seed and SHA-256
// hashes of its inputs and artifacts.
namespace nggan::cli {

inline constexpr const char* kPresetNames[] = {"dataset1-like", "dataset2-like", "dataset1-desk", "dataset2-desk",
                                              "measured"};

struct SynthSection {
  std::string model = "fresh";  // fresh | pscgm
  std::size_t count = 100;
  std::size_t length = 16384;
  synth::FreshConfig fresh = synth::fresh_dataset2_like();
  synth::PscgmConfig pscgm = synth::pscgm_dataset1_like();
};

struct TrainSection {
  std::filesystem::path data;
  std::filesystem::path resume;  // checkpoint to continue from
  NgganConfig model;
};

struct GenerateSection {
  std::filesystem::path checkpoint;
  std::size_t count = 100;
  bool normalized = false;  // keep the generator's [-1, 1] scale instead of volts
};

struct EvaluateSection {
  std::filesystem::path reference;
  std::filesystem::path candidate;
  double threshold = 0.5;
  std::vector<double> alphas = {122, 244, 366, 488, 610, 732};
  double f_min_hz = 0.0;
  std::optional<double> f_max_hz;  // defaults to fs / 2
  double band_alpha_hz = 122.0;
  // Empty means four equal bands over [0, fs / 2].
  std::vector<metrics::Band> bands;
  // Alpha range summed into the Error row; defaults to every alpha.
  std::optional<std::pair<double, double>> error_alpha_range;
  std::size_t nfft = 0;
  metrics::FidSpace fid_space = metrics::FidSpace::Standardized;
  double feature_thresh_volts = 0.05;
};

struct ReportSection {
  std::filesystem::path input;  // an evaluate output directory
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out = "out";
  unsigned threads = 1;
  std::string log_level = "info";
  std::string preset;
  bool plots = false;
  SynthSection synth;
  TrainSection train;
  GenerateSection generate;
  EvaluateSection evaluate;
  ReportSection report;

  // INI text that parses back to this config.
  std::string to_ini() const;
};

// Resets cfg to the named preset (ConfigError listing valid names otherwise).
void apply_preset(RunConfig& cfg, const std::string& name);

// Applies INI text on top of cfg. Unknown sections and keys are ConfigError.
void apply_ini(RunConfig& cfg, const std::string& text);

// Reads an INI file, or a manifest.json whose embedded config is re-applied.
// A root-level `preset` key is applied before the rest of the file.
RunConfig load_run_config(const std::filesystem::path& path, const std::string& preset_override = "");

std::string sha256_hex(const std::vector<unsigned char>& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct Manifest {
  std::string command;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> artifacts;  // relative to the output directory
};
void write_manifest(const RunConfig& cfg, const Manifest& manifest);

// Each returns the paths written (relative to cfg.out), manifest excluded.
std::vector<std::filesystem::path> cmd_synth(const RunConfig& cfg);
std::vector<std::filesystem::path> cmd_train(const RunConfig& cfg);
std::vector<std::filesystem::path> cmd_generate(const RunConfig& cfg);
std::vector<std::filesystem::path> cmd_evaluate(const RunConfig& cfg);
std::vector<std::filesystem::path> cmd_report(const RunConfig& cfg);

// Entry point used by the tool: parses argv, runs, maps errors to exit codes.
int run(int argc, char** argv);

}  // namespace nggan::cli
