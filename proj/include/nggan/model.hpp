#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "nggan/ndiff/checkpoint.hpp"
#include "nggan/ndiff/gradcheck.hpp"
#include "nggan/ndiff/layers.hpp"
#include "nggan/ndiff/optimizer.hpp"
#include "nggan/rng.hpp"
#include "nggan/trace.hpp"

namespace nggan {

using nd::Tensor3;

struct NgganConfig {
  std::size_t latent_dim = 100;
  std::size_t base_len = 16;
  std::size_t base_ch = 1024;
  std::size_t blocks = 5;
  std::size_t kernel_len = 25;
  double leaky_slope = 0.2;
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  std::size_t epochs = 200;
  std::size_t batch = 64;
  std::size_t critic_steps_per_gen = 5;
  double clip_value = 0.01;
  double l2 = 0.0;
  double dropout = 0.3;
  // Early stopping: evaluations without a new best FID before stopping. 0 disables.
  std::size_t early_stop_patience = 20;
  // FID against the held-out slice every `fid_every` epochs. 0 disables monitoring.
  std::size_t fid_every = 1;
  double holdout_frac = 0.1;
  nd::UpsampleMode upsample_mode = nd::UpsampleMode::Hybrid;

  std::size_t trace_len() const;
  // Throws ConfigError.
  void validate() const;
  std::string to_json() const;
  static NgganConfig from_json(const std::string& text);
  // FNV-1a 64 of the canonical JSON form.
  std::uint64_t hash() const;
};

// blocks = 3, base_ch = 32, epochs = 50: trace length 1024.
NgganConfig desk_config();

// Input and output channel counts of each conv, in forward order.
std::vector<std::array<std::size_t, 2>> generator_channels(const NgganConfig& cfg);
std::vector<std::array<std::size_t, 2>> critic_channels(const NgganConfig& cfg);

template <typename T>
struct GeneratorCache {
  Tensor3<T> z;
  std::vector<Tensor3<T>> block_in;   // input of each upsample, first one is the reshaped dense output
  std::vector<Tensor3<T>> conv_in;    // upsampled signal
  std::vector<Tensor3<T>> conv_out;
  std::vector<nd::BatchNormCache<T>> bn;
  std::vector<Tensor3<T>> bn_out;     // ReLU inputs
  Tensor3<T> out;
};

// dense -> reshape (base_len, base_ch) -> blocks x [upsample x4 -> conv k s1 ->
// BN -> ReLU], where the last block's conv feeds tanh instead of BN/ReLU.
template <typename T>
class Generator {
 public:
  Generator() = default;
  explicit Generator(const NgganConfig& cfg);

  // Glorot-uniform weights, zero biases, BN gamma 1 / beta 0.
  void init(Rng& rng);
  // z: (batch, 1, latent_dim). Output: (batch, trace_len, 1).
  Tensor3<T> forward(const Tensor3<T>& z, bool training, GeneratorCache<T>* cache = nullptr);
  // Accumulates parameter gradients; returns the gradient w.r.t. z.
  Tensor3<T> backward(const GeneratorCache<T>& cache, const Tensor3<T>& grad_out);

  std::vector<nd::Param<T>*> params();
  std::vector<nd::Param<T>*> buffers();
  void zero_grad();
  // Sign of every ReLU input, for finite-difference kink detection.
  static std::vector<bool> relu_signature(const GeneratorCache<T>& cache);

  NgganConfig cfg;
  nd::Dense<T> dense;
  std::vector<nd::Conv1d<T>> convs;
  std::vector<nd::BatchNorm<T>> norms;  // blocks - 1 entries
};

template <typename T>
struct CriticCache {
  Tensor3<T> x;
  std::vector<Tensor3<T>> conv_in;
  std::vector<Tensor3<T>> conv_out;  // leaky-ReLU inputs
  std::vector<Tensor3<T>> act;       // leaky-ReLU outputs
  std::vector<std::vector<T>> masks; // dropout multipliers, empty when off
  Tensor3<T> flat;
  Tensor3<T> out;
};

// blocks x [conv k s4 pad (10, 11) -> leaky ReLU -> dropout] -> flatten -> dense -> 1.
// No output nonlinearity. Dropout only runs when `training` and a generator is given.
template <typename T>
class Critic {
 public:
  Critic() = default;
  explicit Critic(const NgganConfig& cfg);

  void init(Rng& rng);
  // x: (batch, trace_len, 1). Output: (batch, 1, 1).
  Tensor3<T> forward(const Tensor3<T>& x, bool training, Rng* dropout_rng, CriticCache<T>* cache = nullptr) const;
  Tensor3<T> backward(const CriticCache<T>& cache, const Tensor3<T>& grad_out);

  std::vector<nd::Param<T>*> params();
  void zero_grad();
  static std::vector<bool> leaky_signature(const CriticCache<T>& cache);

  NgganConfig cfg;
  std::vector<nd::Conv1d<T>> convs;
  nd::Dense<T> dense;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double d_loss = 0.0;    // mean critic loss over the epoch's critic steps
  double g_loss = 0.0;    // mean generator loss over the epoch's generator steps
  double fid = std::numeric_limits<double>::quiet_NaN();  // NaN when not evaluated
  double max_critic_weight = 0.0;  // max |w| seen after any critic step this epoch
  double seconds = 0.0;            // wall time; not stored in checkpoints
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  double initial_fid = std::numeric_limits<double>::quiet_NaN();
  double best_fid = std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t evals_since_best = 0;
  bool stopped_early = false;
};

struct NgganModel {
  NgganConfig cfg;
  Generator<float> gen;
  Critic<float> critic;
  nd::Adam<float> opt_g;
  nd::Adam<float> opt_d;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;  // completed epochs
  double sample_rate_hz = 0.0;
  // Training data were divided by this before training; generated output times
  // this scale is in volts.
  double data_scale = 1.0;
  TrainHistory history;
};

// Validates cfg (ConfigError) and initializes both networks from substreams of rng.
NgganModel build_model(const NgganConfig& cfg, const Rng& rng);

// Inference-mode passes (running BN statistics, no dropout).
Tensor3<float> generator_forward(NgganModel& model, const Tensor3<float>& z);
std::vector<double> discriminator_forward(const NgganModel& model, const Tensor3<float>& x);

// mean(d_fake) - mean(d_real).
double critic_loss(const std::vector<double>& d_real, const std::vector<double>& d_fake);
// -mean(d_fake).
double generator_loss(const std::vector<double>& d_fake);

struct TrainOptions {
  // Written each epoch (last.ckpt) and on every new best FID (best.ckpt) when set.
  std::filesystem::path checkpoint_dir;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Trains from model.epoch up to cfg.epochs. `data` must be normalized to [-1, 1]
// with length cfg.trace_len(). All randomness comes from substreams of rng keyed
// by purpose and epoch, so resuming from a checkpoint continues the same run.
// Throws ConfigError on a length mismatch and NumericsError on a non-finite loss.
const TrainHistory& train(NgganModel& model, const TraceSet& data, const Rng& rng, const TrainOptions& opts = {});

// n traces of length trace_len with values in (-1, 1); trace i uses latent
// substream i, so output does not depend on `threads`.
TraceSet generate(NgganModel& model, std::size_t n, const Rng& rng, unsigned threads = 1);

nd::CheckpointFile to_checkpoint(const NgganModel& model);
NgganModel from_checkpoint(const nd::CheckpointFile& file);
void save_model(const NgganModel& model, const std::filesystem::path& path);
NgganModel load_model(const std::filesystem::path& path);

// Same checkpoint bytes.
bool same_state(const NgganModel& a, const NgganModel& b);

enum class Network { Generator, Critic };

// Finite-difference check of a whole network at toy shape (blocks 2, base_len 4,
// small random widths) in 64-bit, over all parameters and the network input.
nd::GradCheckResult grad_check_network(Network which, std::uint64_t seed, double h = 1e-4);

}  // namespace nggan
