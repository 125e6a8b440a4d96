#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "nggan/cli.hpp"
#include "nggan/error.hpp"
#include "nggan/metrics/cyclic.hpp"
#include "nggan/metrics/features.hpp"
#include "nggan/metrics/stats.hpp"
#include "nggan/model.hpp"
#include "nggan/synth.hpp"
#include "nggan/trace.hpp"

namespace py = pybind11;
using namespace nggan;

namespace {

using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

TraceSet traceset_from_array(const F32Array& samples, double sample_rate_hz, std::string name) {
  if (samples.ndim() != 2) throw ShapeError("samples must be a 2-D (count, length) array");
  const auto count = static_cast<std::size_t>(samples.shape(0));
  const auto length = static_cast<std::size_t>(samples.shape(1));
  std::vector<float> data(samples.data(), samples.data() + count * length);
  return TraceSet(std::move(name), sample_rate_hz, length, std::move(data));
}

py::array_t<float> traceset_to_array(const TraceSet& set) {
  py::array_t<float> out({set.size(), set.length()});
  std::memcpy(out.mutable_data(), set.data().data(), set.data().size() * sizeof(float));
  return out;
}

TraceSet synthesize(const std::string& preset, std::size_t count, std::size_t length, std::uint64_t seed,
                    unsigned threads) {
  cli::RunConfig cfg;
  cli::apply_preset(cfg, preset);
  const auto& s = cfg.synth;
  if (length == 0) length = s.length;
  const Rng rng(seed);
  if (s.model == "pscgm") return synth::gen_pscgm(s.pscgm, count, length, rng, threads);
  return synth::gen_fresh(s.fresh, count, length, rng, threads);
}

Eigen::MatrixXd features(const TraceSet& set, double thresh_volts, unsigned threads) {
  const auto feats = metrics::feature_set(set, thresh_volts, threads);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(feats.size()), 9);
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const auto v = feats[i].values();
    for (std::size_t j = 0; j < v.size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[j];
  }
  return out;
}

double fid_between(const TraceSet& ref, const TraceSet& gen, const std::string& space, double thresh_volts) {
  std::size_t skipped = 0;
  const auto a = metrics::pca_feature_matrix(metrics::feature_set(ref, thresh_volts, 1, &skipped));
  const auto b = metrics::pca_feature_matrix(metrics::feature_set(gen, thresh_volts, 1, &skipped));
  return metrics::fid_in_space(a, b, metrics::parse_fid_space(space));
}

py::dict cyclic_coherence(const F64Array& samples, double sample_rate_hz, std::vector<double> alphas,
                          std::size_t nfft) {
  if (samples.ndim() != 1) throw ShapeError("samples must be a 1-D array");
  const std::span<const double> x(samples.data(), static_cast<std::size_t>(samples.shape(0)));
  auto spec = metrics::csd(x, sample_rate_hz, std::move(alphas), nfft);
  metrics::csc(spec);
  const std::array<std::size_t, 2> shape = {spec.rows(), spec.cols()};
  py::array_t<std::complex<double>> csd_arr(shape), csc_arr(shape);
  std::memcpy(csd_arr.mutable_data(), spec.csd.data(), spec.csd.size() * sizeof(metrics::cplx));
  std::memcpy(csc_arr.mutable_data(), spec.csc.data(), spec.csc.size() * sizeof(metrics::cplx));
  py::array_t<bool> valid(shape);
  for (std::size_t i = 0; i < spec.valid.size(); ++i) valid.mutable_data()[i] = spec.valid[i] != 0;
  py::dict out;
  out["alphas"] = spec.alphas;
  out["freqs"] = spec.freqs;
  out["nfft"] = spec.nfft;
  out["csd"] = csd_arr;
  out["csc"] = csc_arr;
  out["valid"] = valid;
  return out;
}

TraceSet generate_from(const std::filesystem::path& checkpoint, std::size_t count, std::uint64_t seed,
                       bool normalized, unsigned threads) {
  NgganModel model = load_model(checkpoint);
  TraceSet set = generate(model, count, Rng(seed), threads);
  return normalized ? set : rescale(set, model.data_scale);
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<std::string> owned = {"nggan"};
  owned.insert(owned.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : owned) argv.push_back(a.data());
  argv.push_back(nullptr);
  py::gil_scoped_release release;
  return cli::run(static_cast<int>(owned.size()), argv.data());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Power line noise synthesis, GAN training and cyclostationary metrics";

  static py::exception<Error> base(m, "NgganError", PyExc_RuntimeError);
  static py::exception<Error> config(m, "ConfigError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const bool is_config = e.kind() == ErrorKind::Config || e.kind() == ErrorKind::InvalidArgument;
      PyErr_SetString((is_config ? config : base).ptr(), e.what());
    }
  });

  py::class_<TraceSet>(m, "TraceSet")
      .def(py::init(&traceset_from_array), py::arg("samples"), py::arg("sample_rate_hz"), py::arg("name") = "")
      .def_property_readonly("name", &TraceSet::name)
      .def_property_readonly("sample_rate_hz", &TraceSet::sample_rate_hz)
      .def_property_readonly("length", &TraceSet::length)
      .def("__len__", &TraceSet::size)
      .def("to_numpy", &traceset_to_array, "Samples as a (count, length) float32 array.")
      .def("slice", &TraceSet::slice, py::arg("first"), py::arg("count"))
      .def("__eq__", [](const TraceSet& a, const TraceSet& b) { return a == b; });

  m.def("load_traceset", &load_traceset, py::arg("path"));
  m.def("save_traceset", &save_traceset, py::arg("set"), py::arg("path"));

  m.def("presets", [] { return std::vector<std::string>(std::begin(cli::kPresetNames), std::end(cli::kPresetNames)); });
  m.def("synthesize", &synthesize, py::arg("preset"), py::arg("count"), py::arg("length") = 0,
        py::arg("seed") = 1, py::arg("threads") = 1,
        "Traces from a named preset. length 0 keeps the preset length.");

  m.def("features", &features, py::arg("set"), py::arg("thresh_volts") = 0.05, py::arg("threads") = 1,
        "Per-trace feature matrix, one row per trace, columns in feature_names() order.");
  m.def("feature_names", [] {
    return std::vector<std::string>(metrics::kFeatureNames.begin(), metrics::kFeatureNames.end());
  });
  m.def("fid", &fid_between, py::arg("reference"), py::arg("candidate"), py::arg("space") = "standardized",
        py::arg("thresh_volts") = 0.05);
  m.def("fid_features", &metrics::fid, py::arg("x_feats"), py::arg("g_feats"),
        "Frechet distance between two feature matrices (rows are samples).");
  m.def("cyclic_coherence", &cyclic_coherence, py::arg("samples"), py::arg("sample_rate_hz"), py::arg("alphas"),
        py::arg("nfft") = 0);
  m.def(
      "exceedance",
      [](const TraceSet& set, const std::vector<double>& alphas, double threshold, double f_min, double f_max,
         std::size_t nfft, unsigned threads) {
        if (f_max <= 0.0) f_max = set.sample_rate_hz() / 2.0;
        return metrics::exceedance_stats(set, alphas, threshold, {f_min, f_max}, nfft, threads);
      },
      py::arg("set"), py::arg("alphas"), py::arg("threshold"), py::arg("f_min_hz") = 0.0, py::arg("f_max_hz") = 0.0,
      py::arg("nfft") = 0, py::arg("threads") = 1,
      "Percentage of bins with |csc| above threshold, per alpha. f_max_hz 0 means fs / 2.");

  m.def("generate", &generate_from, py::arg("checkpoint"), py::arg("count"), py::arg("seed") = 1,
        py::arg("normalized") = false, py::arg("threads") = 1);
  m.def("run_cli", &run_cli, py::arg("args"), "Runs the nggan tool with the given arguments and returns its exit code.");
}
