#ifndef SNN_TRAINER_HPP
#define SNN_TRAINER_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "snn/distributions.hpp"
#include "snn/hsr.hpp"
#include "snn/network.hpp"
#include "snn/polynomial.hpp"

namespace snn {

enum class TrainerBackend { Hsr, Dense };

struct TrainConfig {
  int d = 8;
  int m = 1024;
  double B = 1.0;
  double b0 = 0.0;
  double eta = 1e-3;
  int batch = 16;
  int steps = 100;
  std::uint64_t seed = 0;
  TrainerBackend backend = TrainerBackend::Hsr;
  EvenPolynomial target = EvenPolynomial(1, {});
  Distribution input = Distribution::uniform_sphere(1);
  // When > 0, fire sets of this many fixed probe inputs are recorded every
  // iteration (needed for flip statistics; batches themselves are redrawn
  // each step, so per-batch fire sets are not comparable across time).
  int record_probes = 0;
};

struct IterRecord {
  int t = 0;
  double loss = 0.0;
  long fired_total = 0;   // sum_i |fire_i|
  long fired_max = 0;     // max_i |fire_i|
  long q_size = 0;        // touched neurons |Q|
  long t_query_us = 0;
  long t_forward_us = 0;
  long t_backward_us = 0;
  long t_update_us = 0;
};

struct TrainMetrics {
  std::vector<IterRecord> iters;
  // probe_fire_sets[t-1][p] = fire set of probe p at iteration t (before the
  // update of iteration t); empty unless record_probes > 0.
  std::vector<std::vector<FireSet>> probe_fire_sets;
};

struct DivergenceError : std::runtime_error {
  explicit DivergenceError(int iteration)
      : std::runtime_error("training diverged (non-finite loss) at iteration " +
                           std::to_string(iteration)),
        iteration(iteration) {}
  int iteration;
};

struct TrainResult {
  TwoLayerNet returned;  // snapshot at the pre-drawn uniform t* in [T]
  TwoLayerNet final;     // W(T+1)
  TrainMetrics metrics;
  int t_star = 0;
};

TrainResult train(const TrainConfig& cfg);

std::vector<FireSet> fire_sets_dense(const TwoLayerNet& net, const Batch& batch);

void write_metrics_csv(const TrainMetrics& metrics, const std::string& path);

// --- desk-scale experiments -------------------------------------------------

struct SparsityRow {
  int m = 0;
  double b0 = 0.0;
  double mean_fired = 0.0;   // mean |fire| over trials, out of 2m neurons
  long max_fired = 0;
  double mean_fraction = 0.0;
  double stderr_fraction = 0.0;  // empirical stderr of mean_fraction
  double phi = 0.0;          // Phi(-b0), predicted fired fraction
  double ratio_vs_phi = 0.0; // mean_fraction / phi
  double m45_bound = 0.0;    // 2*(2m)^{4/5} * margin 4
};

std::vector<SparsityRow> sparsity_experiment(const std::vector<int>& m_grid,
                                             int d, int trials, Rng& rng);

struct ScalingRow {
  int m = 0;
  double median_iter_us_hsr = 0.0;
  double median_iter_us_dense = 0.0;
  bool fired_counts_match = false;
};

struct ScalingResult {
  std::vector<ScalingRow> rows;
  double slope_hsr = 0.0;    // fitted log-log slope of time vs m
  double slope_dense = 0.0;
};

ScalingResult scaling_experiment(const std::vector<int>& m_grid, int d,
                                 int batch, int steps, Rng& rng);

struct FlipRow {
  int t = 0;
  double mean_flip = 0.0;  // mean |flip set| over probes
  long max_flip = 0;
};

struct FlipStatistics {
  std::vector<FlipRow> rows;
  double nonflip_fraction = 0.0;  // neurons that never changed status
};

struct RecordingDisabledError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

FlipStatistics flip_statistics(const TrainMetrics& metrics, int num_neurons);

// Fitted slope of log(y) against log(x) by least squares.
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

// Standard normal CDF.
double normal_cdf(double z);

inline double default_b0(int num_neurons) {
  return std::sqrt(0.4 * std::log(static_cast<double>(num_neurons)));
}

}  // namespace snn

#endif  // SNN_TRAINER_HPP
