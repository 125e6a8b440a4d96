#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "nggan/cli.hpp"
#include "nggan/error.hpp"
#include "nggan/trace.hpp"

using namespace nggan;
using namespace nggan::cli;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / "nggan_cli_unit" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_args(std::vector<std::string> args) {
  args.insert(args.begin(), "nggan");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run(static_cast<int>(argv.size()), argv.data());
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string cell; std::getline(ss, cell, ',');) out.push_back(cell);
  if (!s.empty() && s.back() == ',') out.push_back("");
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

// Small network over 1024-sample traces so CLI training runs in well under a second.
constexpr const char* kToyTrain =
    "[train]\n"
    "latent_dim = 8\n"
    "base_len = 64\n"
    "base_ch = 8\n"
    "blocks = 2\n"
    "kernel_len = 5\n"
    "batch = 16\n"
    "epochs = 1\n"
    "fid_every = 0\n";

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("presets set model and threshold") {
    RunConfig cfg;
    apply_preset(cfg, "dataset1-like");
    CHECK(cfg.synth.model == "pscgm");
    CHECK(cfg.evaluate.threshold == 0.9);
    CHECK(cfg.synth.length == 16384);
    CHECK(cfg.synth.pscgm.sample_rate_hz == 400e3);
    apply_preset(cfg, "dataset2-like");
    CHECK(cfg.synth.model == "fresh");
    CHECK(cfg.evaluate.threshold == 0.5);
    apply_preset(cfg, "measured");
    CHECK(cfg.evaluate.threshold == 0.3);
    apply_preset(cfg, "dataset2-desk");
    CHECK(cfg.synth.length == 1024);
    CHECK(cfg.synth.count == 2048);
    CHECK(cfg.train.model.trace_len() == 1024);
    try {
      apply_preset(cfg, "dataset9");
      FAIL("unknown preset accepted");
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("dataset2-like") != std::string::npos);
    }
  }

  TEST_CASE("INI text round-trips through to_ini") {
    RunConfig cfg;
    apply_preset(cfg, "dataset1-desk");
    apply_ini(cfg,
              "seed = 77\n"
              "threads = 2\n"
              "[synth]\ncount = 12\n"
              "[pscgm]\ncycle_period_s = 0.01\nregions = 2\n"
              "[pscgm.region1]\nduration_s = 0.006\nrms_volts = 0.01\npsd = 0:1:3000\n"
              "[pscgm.region2]\nduration_s = 0.004\nrms_volts = 0.3\npsd = 1000:1:500; 2000:0.5:250\n"
              "[evaluate]\nalphas = 122, 244\nbands = 0-3000, 3000-12500\nerror_alpha_range = 0, 200\n"
              "fid_space = pca\n"
              "[train]\nlr = 0.0003\nupsample_mode = linear\n");
    CHECK(cfg.seed == 77);
    CHECK(cfg.synth.count == 12);
    CHECK(cfg.synth.pscgm.regions[1].rms_volts == 0.3);
    REQUIRE(cfg.synth.pscgm.regions[1].psd_shape.size() == 2);
    CHECK(cfg.synth.pscgm.regions[1].psd_shape[1].decay_hz == 250.0);
    CHECK(cfg.evaluate.alphas == std::vector<double>{122, 244});
    CHECK(cfg.evaluate.bands.size() == 2);
    CHECK(cfg.train.model.lr == 3e-4);

    RunConfig back;
    apply_ini(back, cfg.to_ini());
    CHECK(back.to_ini() == cfg.to_ini());
    CHECK(back.train.model.hash() == cfg.train.model.hash());
  }

  TEST_CASE("unknown sections, keys and values are config errors") {
    RunConfig cfg;
    CHECK_THROWS_AS(apply_ini(cfg, "[nonsense]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(apply_ini(cfg, "[synth]\ncolour = blue\n"), ConfigError);
    CHECK_THROWS_AS(apply_ini(cfg, "[train]\nblocks = 0\n"), ConfigError);
    // Region sections replace the region list as a whole.
    CHECK_THROWS_AS(apply_ini(cfg, "[pscgm.region2]\nrms_volts = 0.3\n"), ConfigError);
    try {
      apply_ini(cfg, "[synth]\nmodel = brown\n");
      FAIL("unknown model accepted");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("fresh") != std::string::npos);
      CHECK(msg.find("pscgm") != std::string::npos);
    }
  }

  TEST_CASE("exit codes") {
    const auto dir = temp_dir("codes");
    CHECK(run_args({"--log-level", "quiet", "--out", dir.string(), "synth", "--model", "brown"}) == 2);
    CHECK(run_args({"--no-such-flag", "synth"}) == 2);
    CHECK(run_args({"--log-level", "quiet", "--out", dir.string(), "train", "--data",
                    (dir / "missing.ngts").string()}) == 3);
    CHECK(run_args({"--log-level", "quiet", "--threads", "0", "synth"}) == 2);
  }

  TEST_CASE("synth is reproducible and writes a manifest") {
    const auto a = temp_dir("synth_a");
    const auto b = temp_dir("synth_b");
    for (const auto& dir : {a, b}) {
      REQUIRE(run_args({"--log-level", "quiet", "--preset", "dataset2-desk", "--seed", "5", "--out", dir.string(),
                        "synth", "--count", "12"}) == 0);
    }
    const auto hash = sha256_file(a / "traces.ngts");
    CHECK(hash == sha256_file(b / "traces.ngts"));
    const auto set = load_traceset(a / "traces.ngts");
    CHECK(set.size() == 12);
    CHECK(set.length() == 1024);
    CHECK(set.sample_rate_hz() == 25e3);

    std::ifstream in(a / "manifest.json");
    const auto m = nlohmann::json::parse(in);
    CHECK(m["command"] == "synth");
    CHECK(m["seed"] == 5);
    REQUIRE(m["artifacts"].size() == 1);
    CHECK(m["artifacts"][0]["sha256"] == hash);

    // The manifest alone re-creates the artifact.
    const auto c = temp_dir("synth_c");
    REQUIRE(run_args({"--log-level", "quiet", "--config", (a / "manifest.json").string(), "--out", c.string(),
                      "synth"}) == 0);
    CHECK(sha256_file(c / "traces.ngts") == hash);
  }

  TEST_CASE("evaluate a set against itself, then report") {
    const auto dir = temp_dir("eval_self");
    REQUIRE(run_args({"--log-level", "quiet", "--preset", "dataset2-desk", "--out", (dir / "s").string(), "synth",
                      "--count", "16"}) == 0);
    const auto traces = (dir / "s" / "traces.ngts").string();
    const auto ev = dir / "e";
    REQUIRE(run_args({"--log-level", "quiet", "--preset", "dataset2-desk", "--out", ev.string(), "evaluate", traces,
                      traces}) == 0);

    const auto fid = read_lines(ev / "fid.csv");
    REQUIRE(fid.size() == 2);
    CHECK(std::fabs(std::stod(split(fid[1])[1])) <= 1e-9);

    const auto ex = read_lines(ev / "exceedance.csv");
    REQUIRE(ex.size() == 1 + 6 + 1);
    for (std::size_t i = 1; i <= 6; ++i) CHECK(std::stod(split(ex[i])[4]) == 0.0);
    CHECK(split(ex[7])[0] == "Error");
    CHECK(std::stod(split(ex[7]).back()) == 0.0);

    const auto bands = read_lines(ev / "bands.csv");
    for (std::size_t i = 1; i + 1 < bands.size(); ++i) {
      const auto cells = split(bands[i]);
      CHECK(cells[3] == cells[4]);
    }

    const auto feats = read_lines(ev / "features.csv");
    CHECK(feats.size() == 1 + 9 * 2);

    const auto rep = dir / "r";
    REQUIRE(run_args({"--log-level", "quiet", "--out", rep.string(), "report", "--input", ev.string()}) == 0);
    std::ifstream in(rep / "report.md");
    const std::string md((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    CHECK(md.find("| Error") != std::string::npos);
    CHECK(md.find("FID") != std::string::npos);
    CHECK(md.find("732") != std::string::npos);
  }

  TEST_CASE("evaluate separates FRESH from white noise") {
    const auto dir = temp_dir("eval_sep");
    REQUIRE(run_args({"--log-level", "quiet", "--preset", "dataset2-desk", "--out", (dir / "s").string(), "synth",
                      "--count", "24"}) == 0);
    Rng rng(3);
    const auto v = rng_gaussian(rng, 24 * 1024, 0.0, 0.1);
    save_traceset(TraceSet("white", 25e3, 1024, std::vector<float>(v.begin(), v.end())), dir / "white.ngts");
    const auto ev = dir / "e";
    REQUIRE(run_args({"--log-level", "quiet", "--preset", "dataset2-desk", "--out", ev.string(), "evaluate",
                      (dir / "s" / "traces.ngts").string(), (dir / "white.ngts").string()}) == 0);
    CHECK(std::stod(split(read_lines(ev / "fid.csv")[1])[1]) > 0.0);
    const auto row = split(read_lines(ev / "exceedance.csv")[1]);
    CHECK(std::stod(row[1]) > std::stod(row[2]));
  }

  TEST_CASE("train, resume, generate") {
    const auto dir = temp_dir("train");
    REQUIRE(run_args({"--log-level", "quiet", "--preset", "dataset2-desk", "--out", (dir / "s").string(), "synth",
                      "--count", "32"}) == 0);
    const auto data = (dir / "s" / "traces.ngts").string();
    write_text(dir / "toy.ini", std::string("preset = dataset2-desk\nlog_level = quiet\n") + kToyTrain);

    const auto t1 = dir / "t1";
    REQUIRE(run_args({"--config", (dir / "toy.ini").string(), "--out", t1.string(), "train", "--data", data}) == 0);
    CHECK(read_lines(t1 / "training_log.csv").size() == 2);
    CHECK(fs::exists(t1 / "last.ckpt"));

    const auto t2 = dir / "t2";
    REQUIRE(run_args({"--config", (dir / "toy.ini").string(), "--out", t2.string(), "train", "--data", data,
                      "--resume", (t1 / "last.ckpt").string(), "--epochs", "2"}) == 0);
    const auto log = read_lines(t2 / "training_log.csv");
    REQUIRE(log.size() == 3);
    CHECK(split(log[1])[0] == "1");
    CHECK(split(log[2])[0] == "2");

    // A resumed run ends where an uninterrupted two-epoch run ends.
    const auto t3 = dir / "t3";
    REQUIRE(run_args({"--config", (dir / "toy.ini").string(), "--out", t3.string(), "train", "--data", data,
                      "--epochs", "2"}) == 0);
    CHECK(sha256_file(t3 / "last.ckpt") == sha256_file(t2 / "last.ckpt"));

    const auto g = dir / "g";
    REQUIRE(run_args({"--log-level", "quiet", "--out", g.string(), "generate", "--checkpoint",
                      (t2 / "last.ckpt").string(), "--count", "5"}) == 0);
    const auto gen = load_traceset(g / "generated.ngts");
    CHECK(gen.size() == 5);
    CHECK(gen.length() == 1024);
    CHECK(gen.sample_rate_hz() == 25e3);

    // A different seed is refused on resume.
    CHECK(run_args({"--config", (dir / "toy.ini").string(), "--seed", "99", "--out", (dir / "t4").string(), "train",
                    "--data", data, "--resume", (t1 / "last.ckpt").string(), "--epochs", "2"}) == 2);
  }

  TEST_CASE("training data of the wrong length names both lengths") {
    const auto dir = temp_dir("mismatch");
    save_traceset(TraceSet("short", 25e3, 512, std::vector<float>(16 * 512, 0.1f)), dir / "short.ngts");
    RunConfig cfg;
    apply_preset(cfg, "dataset2-desk");
    apply_ini(cfg, kToyTrain);
    cfg.log_level = "quiet";
    cfg.out = dir / "t";
    cfg.train.data = dir / "short.ngts";
    try {
      cmd_train(cfg);
      FAIL("length mismatch accepted");
    } catch (const ConfigError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("512") != std::string::npos);
      CHECK(msg.find("1024") != std::string::npos);
    }
  }

  TEST_CASE("sha256 of a known string") {
    const std::string abc = "abc";
    CHECK(sha256_hex(std::vector<unsigned char>(abc.begin(), abc.end())) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }
}
