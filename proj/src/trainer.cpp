#include "snn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <optional>

namespace snn {

namespace {

using Clock = std::chrono::steady_clock;

long elapsed_us(Clock::time_point from) {
  return std::chrono::duration_cast<std::chrono::microseconds>(Clock::now() -
                                                               from)
      .count();
}

void validate(const TrainConfig& cfg) {
  if (cfg.d < 1 || cfg.m < 1 || cfg.B <= 0.0 || cfg.b0 < 0.0 || cfg.eta < 0.0 ||
      cfg.batch < 1 || cfg.steps < 1)
    throw std::invalid_argument("TrainConfig: invalid parameter");
  if (cfg.input.dim() != cfg.d || cfg.target.dim() != cfg.d)
    throw ShapeError("TrainConfig: input/target dimension mismatch");
}

}  // namespace

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

std::vector<FireSet> fire_sets_dense(const TwoLayerNet& net, const Batch& batch) {
  std::vector<FireSet> sets;
  sets.reserve(batch.size());
  for (const auto& s : batch) sets.push_back(fire_set_dense(net, s.x));
  return sets;
}

TrainResult train(const TrainConfig& cfg) {
  validate(cfg);
  Rng base(cfg.seed);
  Rng init_rng = base.split("init");
  Rng batch_rng = base.split("batch");
  Rng tstar_rng = base.split("tstar");
  Rng probe_rng = base.split("probe");

  TwoLayerNet net = init_net(cfg.d, cfg.m, cfg.B, init_rng);
  net.b0 = cfg.b0;
  const int t_star =
      1 + static_cast<int>(tstar_rng.next_u64() % static_cast<unsigned>(cfg.steps));

  std::optional<HsrIndex> index;
  if (cfg.backend == TrainerBackend::Hsr) {
    std::vector<Vector> rows;
    rows.reserve(net.neurons());
    for (int r = 0; r < net.neurons(); ++r) rows.push_back(net.W.row(r));
    index.emplace(rows, HsrBackend::BallTree);
  }

  Batch probes;
  for (int p = 0; p < cfg.record_probes; ++p)
    probes.push_back({cfg.input.sample(probe_rng), 0.0});

  TrainResult result;
  result.t_star = t_star;

  for (int t = 1; t <= cfg.steps; ++t) {
    Batch batch;
    batch.reserve(cfg.batch);
    for (int i = 0; i < cfg.batch; ++i) {
      Vector x = cfg.input.sample(batch_rng);
      double y = cfg.target.eval(x);
      batch.push_back({std::move(x), y});
    }

    if (t == t_star) result.returned = net;
    if (cfg.record_probes > 0)
      result.metrics.probe_fire_sets.push_back(fire_sets_dense(net, probes));

    IterRecord rec;
    rec.t = t;

    auto t0 = Clock::now();
    std::vector<FireSet> fire_sets;
    fire_sets.reserve(cfg.batch);
    if (index) {
      for (const auto& s : batch)
        fire_sets.push_back(index->query(HalfSpace{s.x, cfg.b0}));
    } else {
      fire_sets = fire_sets_dense(net, batch);
    }
    rec.t_query_us = elapsed_us(t0);
    for (const auto& f : fire_sets) {
      rec.fired_total += static_cast<long>(f.size());
      rec.fired_max = std::max(rec.fired_max, static_cast<long>(f.size()));
    }

    t0 = Clock::now();
    double loss = 0.0;
    for (int i = 0; i < cfg.batch; ++i) {
      double resid = forward_sparse(net, batch[i].x, fire_sets[i]) - batch[i].y;
      loss += 0.5 * resid * resid;
    }
    rec.t_forward_us = elapsed_us(t0);
    rec.loss = loss;
    if (!std::isfinite(loss)) throw DivergenceError(t);

    t0 = Clock::now();
    SparseGradient grad = sparse_gradient(net, batch, fire_sets);
    rec.t_backward_us = elapsed_us(t0);

    t0 = Clock::now();
    for (const auto& [r, g] : grad.rows) {
      if (g.isZero(0.0)) continue;
      net.W.row(r) -= cfg.eta * g.transpose();
      ++rec.q_size;
      if (index) {
        index->erase(r);
        index->insert(r, net.W.row(r));
      }
    }
    rec.t_update_us = elapsed_us(t0);

    result.metrics.iters.push_back(rec);
  }

  result.final = std::move(net);
  return result;
}

void write_metrics_csv(const TrainMetrics& metrics, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_metrics_csv: cannot open " + path);
  os << "t,loss,fired_total,q_size,t_query_us,t_forward_us,t_backward_us,"
        "t_update_us\n";
  for (const auto& r : metrics.iters)
    os << r.t << ',' << r.loss << ',' << r.fired_total << ',' << r.q_size << ','
       << r.t_query_us << ',' << r.t_forward_us << ',' << r.t_backward_us << ','
       << r.t_update_us << '\n';
}

std::vector<SparsityRow> sparsity_experiment(const std::vector<int>& m_grid,
                                             int d, int trials, Rng& rng) {
  if (m_grid.empty())
    throw std::invalid_argument("sparsity_experiment: empty grid");
  std::vector<SparsityRow> rows;
  for (std::size_t gi = 0; gi < m_grid.size(); ++gi) {
    const int m = m_grid[gi];
    SparsityRow row;
    row.m = m;
    row.b0 = default_b0(m);
    Rng net_rng = rng.split("sparsity-net", gi);
    Rng input_rng = rng.split("sparsity-input", gi);
    TwoLayerNet net = init_net(d, m, 1.0, net_rng);
    net.b0 = row.b0;
    long total = 0;
    std::vector<double> fracs;
    fracs.reserve(trials);
    for (int trial = 0; trial < trials; ++trial) {
      Vector x = sample_sphere(d, input_rng);
      long fired = static_cast<long>(fire_set_dense(net, x).size());
      total += fired;
      row.max_fired = std::max(row.max_fired, fired);
      fracs.push_back(static_cast<double>(fired) / (2.0 * m));
    }
    row.mean_fired = static_cast<double>(total) / trials;
    row.mean_fraction = row.mean_fired / (2.0 * m);
    if (trials > 1) {
      double var = 0.0;
      for (double f : fracs)
        var += (f - row.mean_fraction) * (f - row.mean_fraction) / (trials - 1);
      row.stderr_fraction = std::sqrt(var / trials);
    }
    row.phi = normal_cdf(-row.b0);
    row.ratio_vs_phi = row.mean_fraction / row.phi;
    row.m45_bound = 2.0 * std::pow(2.0 * m, 0.8) * 4.0;
    rows.push_back(row);
  }
  return rows;
}

double log_log_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double lx = std::log(x[i]);
    double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ScalingResult scaling_experiment(const std::vector<int>& m_grid, int d,
                                 int batch, int steps, Rng& rng) {
  if (m_grid.empty())
    throw std::invalid_argument("scaling_experiment: empty grid");
  ScalingResult result;
  std::vector<double> ms, t_hsr, t_dense;
  for (std::size_t gi = 0; gi < m_grid.size(); ++gi) {
    const int m = m_grid[gi];
    Rng u_rng = rng.split("scaling-target", gi);
    Vector u = sample_sphere(d, u_rng);
    TrainConfig cfg;
    cfg.d = d;
    cfg.m = m;
    cfg.b0 = default_b0(2 * m);
    cfg.eta = 1e-3;
    cfg.batch = batch;
    cfg.steps = steps;
    cfg.seed = rng.split("scaling-seed", gi).next_u64();
    cfg.target = EvenPolynomial::quadratic_form(u);
    cfg.input = Distribution::uniform_sphere(d);

    auto median_iter_us = [](const TrainMetrics& mtr) {
      std::vector<double> per_iter;
      for (const auto& r : mtr.iters)
        per_iter.push_back(static_cast<double>(r.t_query_us + r.t_forward_us +
                                               r.t_backward_us + r.t_update_us));
      std::nth_element(per_iter.begin(), per_iter.begin() + per_iter.size() / 2,
                       per_iter.end());
      return per_iter[per_iter.size() / 2];
    };

    cfg.backend = TrainerBackend::Hsr;
    TrainResult hsr_run = train(cfg);
    cfg.backend = TrainerBackend::Dense;
    TrainResult dense_run = train(cfg);

    ScalingRow row;
    row.m = m;
    row.median_iter_us_hsr = median_iter_us(hsr_run.metrics);
    row.median_iter_us_dense = median_iter_us(dense_run.metrics);
    row.fired_counts_match = true;
    for (std::size_t t = 0; t < hsr_run.metrics.iters.size(); ++t)
      if (hsr_run.metrics.iters[t].fired_total !=
          dense_run.metrics.iters[t].fired_total)
        row.fired_counts_match = false;
    result.rows.push_back(row);
    ms.push_back(m);
    t_hsr.push_back(row.median_iter_us_hsr);
    t_dense.push_back(row.median_iter_us_dense);
  }
  result.slope_hsr = log_log_slope(ms, t_hsr);
  result.slope_dense = log_log_slope(ms, t_dense);
  return result;
}

FlipStatistics flip_statistics(const TrainMetrics& metrics, int num_neurons) {
  const auto& rec = metrics.probe_fire_sets;
  if (rec.empty())
    throw RecordingDisabledError("flip_statistics: fire-set recording disabled");
  FlipStatistics stats;
  std::vector<char> flipped(num_neurons, 0);
  for (std::size_t t = 1; t < rec.size(); ++t) {
    FlipRow row;
    row.t = static_cast<int>(t + 1);
    long total = 0;
    for (std::size_t p = 0; p < rec[t].size(); ++p) {
      std::vector<int> diff;
      std::set_symmetric_difference(rec[t][p].begin(), rec[t][p].end(),
                                    rec[t - 1][p].begin(), rec[t - 1][p].end(),
                                    std::back_inserter(diff));
      total += static_cast<long>(diff.size());
      row.max_flip = std::max(row.max_flip, static_cast<long>(diff.size()));
      for (int r : diff) flipped[r] = 1;
    }
    row.mean_flip = rec[t].empty() ? 0.0 : static_cast<double>(total) / rec[t].size();
    stats.rows.push_back(row);
  }
  long never = std::count(flipped.begin(), flipped.end(), 0);
  stats.nonflip_fraction = static_cast<double>(never) / num_neurons;
  return stats;
}

}  // namespace snn
