// Command-line harness: training runs and the desk-scale experiments, with
// CSV outputs under --out. Exit codes: 0 success, 1 property failure,
// 2 usage error, 3 divergence.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "snn/kernel.hpp"
#include "snn/trainer.hpp"

namespace fs = std::filesystem;
using namespace snn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPropertyFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitDivergence = 3;

std::vector<int> parse_grid(const std::string& spec) {
  std::vector<int> grid;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    int v = std::stoi(item, &pos);
    if (pos != item.size() || v < 1) throw std::invalid_argument("bad grid entry: " + item);
    grid.push_back(v);
  }
  if (grid.empty()) throw std::invalid_argument("empty grid");
  return grid;
}

std::vector<double> parse_grid_real(const std::string& spec) {
  std::vector<double> grid;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    double v = std::stod(item, &pos);
    if (pos != item.size() || v <= 0) throw std::invalid_argument("bad grid entry: " + item);
    grid.push_back(v);
  }
  if (grid.empty()) throw std::invalid_argument("empty grid");
  return grid;
}

// The manifest is written before any computation so failed runs remain
// attributable to their full configuration.
void write_manifest(const fs::path& out,
                    const std::vector<std::pair<std::string, std::string>>& kv) {
  fs::create_directories(out);
  std::ofstream os(out / "manifest.txt");
  for (const auto& [k, v] : kv) os << k << "=" << v << "\n";
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

struct CommonOpts {
  std::uint64_t seed = 1;
  std::string out = "run_out";
};

int run_train(int d, int m, double eta, int batch, int steps, CommonOpts& common,
              const std::string& backend, int target_degree, double target_norm,
              double b0, double B) {
  if (b0 < 0.0) b0 = default_b0(2 * m);
  write_manifest(common.out, {{"command", "train"},
                              {"d", std::to_string(d)},
                              {"m", std::to_string(m)},
                              {"eta", fmt(eta)},
                              {"batch", std::to_string(batch)},
                              {"steps", std::to_string(steps)},
                              {"seed", std::to_string(common.seed)},
                              {"backend", backend},
                              {"target_degree", std::to_string(target_degree)},
                              {"target_norm", fmt(target_norm)},
                              {"b0", fmt(b0)},
                              {"B", fmt(B)}});
  Rng target_rng = Rng(common.seed).split("target");
  TrainConfig cfg;
  cfg.d = d;
  cfg.m = m;
  cfg.B = B;
  cfg.b0 = b0;
  cfg.eta = eta;
  cfg.batch = batch;
  cfg.steps = steps;
  cfg.seed = common.seed;
  cfg.backend = backend == "hsr" ? TrainerBackend::Hsr : TrainerBackend::Dense;
  cfg.target = EvenPolynomial::sample(target_degree, target_norm, d, target_rng);
  cfg.input = Distribution::uniform_sphere(d);
  try {
    TrainResult result = train(cfg);
    fs::path out(common.out);
    write_metrics_csv(result.metrics, (out / "metrics.csv").string());
    save_net(result.returned, (out / "checkpoint_returned.bin").string());
    save_net(result.final, (out / "checkpoint_final.bin").string());
    std::cout << "final_loss=" << fmt(result.metrics.iters.back().loss) << "\n";
    return kExitOk;
  } catch (const DivergenceError& e) {
    std::cerr << e.what() << "\n";
    return kExitDivergence;
  }
}

int run_sparsity(const std::string& grid_spec, int d, int trials,
                 CommonOpts& common, double ratio_min, double ratio_max) {
  auto grid = parse_grid(grid_spec);
  write_manifest(common.out, {{"command", "sparsity"},
                              {"m_grid", grid_spec},
                              {"d", std::to_string(d)},
                              {"trials", std::to_string(trials)},
                              {"seed", std::to_string(common.seed)}});
  Rng rng(common.seed);
  auto rows = sparsity_experiment(grid, d, trials, rng);
  std::ofstream os(fs::path(common.out) / "sparsity.csv");
  os << "m,b0,mean_fired,max_fired,mean_fraction,stderr_fraction,phi,"
        "ratio_vs_phi,m45_bound\n";
  bool ok = true;
  for (const auto& r : rows) {
    os << r.m << ',' << fmt(r.b0) << ',' << fmt(r.mean_fired) << ','
       << r.max_fired << ',' << fmt(r.mean_fraction) << ','
       << fmt(r.stderr_fraction) << ',' << fmt(r.phi) << ','
       << fmt(r.ratio_vs_phi) << ',' << fmt(r.m45_bound) << '\n';
    if (r.ratio_vs_phi < ratio_min || r.ratio_vs_phi > ratio_max) ok = false;
    if (static_cast<double>(r.max_fired) > r.m45_bound) ok = false;
  }
  std::cout << "sparsity_ok=" << (ok ? 1 : 0) << "\n";
  return ok ? kExitOk : kExitPropertyFailure;
}

int run_scaling(const std::string& grid_spec, int d, int batch, int steps,
                CommonOpts& common, double slope_max) {
  auto grid = parse_grid(grid_spec);
  write_manifest(common.out, {{"command", "scaling"},
                              {"m_grid", grid_spec},
                              {"d", std::to_string(d)},
                              {"batch", std::to_string(batch)},
                              {"steps", std::to_string(steps)},
                              {"seed", std::to_string(common.seed)}});
  Rng rng(common.seed);
  auto result = scaling_experiment(grid, d, batch, steps, rng);
  std::ofstream os(fs::path(common.out) / "scaling.csv");
  os << "m,median_iter_us_hsr,median_iter_us_dense,fired_counts_match\n";
  bool counts_ok = true;
  for (const auto& r : result.rows) {
    os << r.m << ',' << fmt(r.median_iter_us_hsr) << ','
       << fmt(r.median_iter_us_dense) << ',' << (r.fired_counts_match ? 1 : 0)
       << '\n';
    counts_ok = counts_ok && r.fired_counts_match;
  }
  std::cout << "slope_hsr=" << fmt(result.slope_hsr)
            << " slope_dense=" << fmt(result.slope_dense) << "\n";
  bool ok = counts_ok && result.slope_hsr < slope_max &&
            result.slope_hsr < result.slope_dense;
  return ok ? kExitOk : kExitPropertyFailure;
}

int run_kernel_check(int d, double b0, int m, double eps, int trials,
                     CommonOpts& common, double max_violation) {
  write_manifest(common.out, {{"command", "kernel-check"},
                              {"d", std::to_string(d)},
                              {"b0", fmt(b0)},
                              {"m", std::to_string(m)},
                              {"eps", fmt(eps)},
                              {"trials", std::to_string(trials)},
                              {"seed", std::to_string(common.seed)}});
  Rng rng(common.seed);
  double rate = kernel_concentration_check(d, b0, m, eps, trials, rng);
  std::ofstream os(fs::path(common.out) / "kernel_check.csv");
  os << "m,eps,trials,violation_rate\n";
  os << m << ',' << fmt(eps) << ',' << trials << ',' << fmt(rate) << '\n';
  std::cout << "violation_rate=" << fmt(rate) << "\n";
  return rate <= max_violation ? kExitOk : kExitPropertyFailure;
}

int run_rfs(int d, double b0, int m, int steps, int batch, int num_seeds,
            CommonOpts& common, const std::string& loss_name) {
  write_manifest(common.out, {{"command", "rfs"},
                              {"d", std::to_string(d)},
                              {"b0", fmt(b0)},
                              {"m", std::to_string(m)},
                              {"steps", std::to_string(steps)},
                              {"batch", std::to_string(batch)},
                              {"seeds", std::to_string(num_seeds)},
                              {"loss", loss_name},
                              {"seed", std::to_string(common.seed)}});
  // Realizable target f*(x) = <u,x> Phi(-b0), the expectation of the model
  // with constant witness u; M = R = C = L = 1.
  const double M = 1.0, L = 1.0, C = 1.0, R = 1.0;
  const double eta = M / (std::sqrt(static_cast<double>(steps)) * L * C);
  const double bound =
      2.0 * (L * R * C * M / std::sqrt(static_cast<double>(m) * d) +
             L * C * M / std::sqrt(static_cast<double>(steps)));
  RfsLoss loss = loss_name == "hinge" ? RfsLoss::Hinge : RfsLoss::Absolute;
  Distribution input = Distribution::uniform_sphere(d);
  const double phi = normal_cdf(-b0);

  std::ofstream os(fs::path(common.out) / "rfs.csv");
  os << "seed,final_trace_loss,holdout_loss\n";
  double mean_holdout = 0.0;
  try {
    for (int s = 0; s < num_seeds; ++s) {
      Rng rng(common.seed + static_cast<std::uint64_t>(s));
      Rng u_rng = rng.split("rfs-u");
      Vector u = sample_sphere(d, u_rng);
      LabelFn target = [&](const Vector& x) { return u.dot(x) * phi; };
      Rng emb_rng = rng.split("rfs-emb");
      RfsEmbedding emb = sample_embedding(m, d, b0, emb_rng);
      RfsTrainResult run =
          rfs_train(emb, loss, eta, batch, steps, target, input, rng);
      Rng eval_rng = rng.split("rfs-eval");
      double holdout = 0.0;
      const int eval_n = 10000;
      for (int i = 0; i < eval_n; ++i) {
        Vector x = input.sample(eval_rng);
        holdout += std::abs(run.model.predict(x) - target(x));
      }
      holdout /= eval_n;
      mean_holdout += holdout / num_seeds;
      os << s << ',' << fmt(run.loss_trace.back()) << ',' << fmt(holdout) << '\n';
    }
  } catch (const DivergenceError& e) {
    std::cerr << e.what() << "\n";
    return kExitDivergence;
  }
  std::cout << "mean_loss=" << fmt(mean_holdout) << " bound=" << fmt(bound)
            << "\n";
  return mean_holdout <= bound ? kExitOk : kExitPropertyFailure;
}

int run_ntk_equiv(int d, int m, double eta, int batch, int steps,
                  const std::string& B_grid_spec, CommonOpts& common) {
  auto B_grid = parse_grid_real(B_grid_spec);
  write_manifest(common.out, {{"command", "ntk-equiv"},
                              {"d", std::to_string(d)},
                              {"m", std::to_string(m)},
                              {"eta", fmt(eta)},
                              {"batch", std::to_string(batch)},
                              {"steps", std::to_string(steps)},
                              {"B_grid", B_grid_spec},
                              {"seed", std::to_string(common.seed)}});
  Rng target_rng = Rng(common.seed).split("target-u");
  Vector u = sample_sphere(d, target_rng);
  auto rows = ntk_equivalence_experiment(d, m, eta, batch, steps, B_grid,
                                         EvenPolynomial::quadratic_form(u),
                                         common.seed);
  std::ofstream os(fs::path(common.out) / "ntk_equiv.csv");
  os << "B,net_loss,ntk_loss,gap,diverged\n";
  for (const auto& r : rows)
    os << fmt(r.B) << ',' << fmt(r.net_loss) << ',' << fmt(r.ntk_loss) << ','
       << fmt(r.gap) << ',' << (r.diverged ? 1 : 0) << '\n';
  bool ok = !rows.front().diverged && !rows.back().diverged &&
            rows.back().gap < rows.front().gap;
  std::cout << "gap_first=" << fmt(rows.front().gap)
            << " gap_last=" << fmt(rows.back().gap) << "\n";
  return ok ? kExitOk : kExitPropertyFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sublinear fired-neuron training harness"};
  app.require_subcommand(1);
  app.set_config("--config");

  CommonOpts common;

  // train
  auto* train_cmd = app.add_subcommand("train", "Run the SGD trainer");
  int d = 8, m = 0, batch = 16, steps = 100, target_degree = 2;
  double eta = 1e-3, target_norm = 1.0, b0 = -1.0, B = 1.0;
  std::string backend = "hsr";
  train_cmd->add_option("--d", d, "input dimension");
  train_cmd->add_option("--m", m, "neuron pair count")->required();
  train_cmd->add_option("--eta", eta, "learning rate")->required();
  train_cmd->add_option("--batch", batch, "batch size");
  train_cmd->add_option("--steps", steps, "iterations")->required();
  train_cmd->add_option("--seed", common.seed, "seed");
  train_cmd->add_option("--backend", backend)->check(CLI::IsMember({"hsr", "dense"}));
  train_cmd->add_option("--target-degree", target_degree);
  train_cmd->add_option("--target-norm", target_norm);
  train_cmd->add_option("--b0", b0, "threshold; default sqrt(0.4 ln(2m))");
  train_cmd->add_option("--B", B, "output weight scale");
  train_cmd->add_option("--out", common.out);

  // sparsity
  auto* sparsity_cmd = app.add_subcommand("sparsity", "Fired-count statistics at init");
  std::string m_grid = "4096,16384,65536";
  int trials = 100;
  double ratio_min = 0.8, ratio_max = 1.2;
  sparsity_cmd->add_option("--m-grid", m_grid)->required();
  sparsity_cmd->add_option("--d", d);
  sparsity_cmd->add_option("--trials", trials);
  sparsity_cmd->add_option("--seed", common.seed);
  sparsity_cmd->add_option("--ratio-min", ratio_min);
  sparsity_cmd->add_option("--ratio-max", ratio_max);
  sparsity_cmd->add_option("--out", common.out);

  // scaling
  auto* scaling_cmd = app.add_subcommand("scaling", "Per-iteration time vs m");
  double slope_max = 0.95;
  scaling_cmd->add_option("--m-grid", m_grid)->required();
  scaling_cmd->add_option("--d", d);
  scaling_cmd->add_option("--batch", batch);
  scaling_cmd->add_option("--steps", steps);
  scaling_cmd->add_option("--seed", common.seed);
  scaling_cmd->add_option("--slope-max", slope_max);
  scaling_cmd->add_option("--out", common.out);

  // kernel-check
  auto* kernel_cmd = app.add_subcommand("kernel-check", "Empirical kernel concentration");
  double eps = 0.05, max_violation = 0.02, kc_b0 = 0.0;
  int kc_m = 4240, kc_trials = 1000;
  kernel_cmd->add_option("--d", d);
  kernel_cmd->add_option("--b0", kc_b0);
  kernel_cmd->add_option("--m", kc_m)->required();
  kernel_cmd->add_option("--eps", eps);
  kernel_cmd->add_option("--trials", kc_trials);
  kernel_cmd->add_option("--seed", common.seed);
  kernel_cmd->add_option("--max-violation", max_violation);
  kernel_cmd->add_option("--out", common.out);

  // rfs
  auto* rfs_cmd = app.add_subcommand("rfs", "SGD over the random feature embedding");
  int rfs_m = 4096, rfs_steps = 4096, rfs_batch = 1, rfs_seeds = 5;
  double rfs_b0 = 1.0;
  std::string rfs_loss = "absolute";
  rfs_cmd->add_option("--d", d);
  rfs_cmd->add_option("--b0", rfs_b0);
  rfs_cmd->add_option("--m", rfs_m);
  rfs_cmd->add_option("--steps", rfs_steps);
  rfs_cmd->add_option("--batch", rfs_batch);
  rfs_cmd->add_option("--seeds", rfs_seeds);
  rfs_cmd->add_option("--loss", rfs_loss)->check(CLI::IsMember({"absolute", "hinge"}));
  rfs_cmd->add_option("--seed", common.seed);
  rfs_cmd->add_option("--out", common.out);

  // ntk-equiv
  auto* ntk_cmd = app.add_subcommand("ntk-equiv", "Lazy-training gap across output scales");
  std::string B_grid = "1,10,100,1000";
  int ntk_m = 1024, ntk_steps = 500;
  ntk_cmd->add_option("--d", d);
  ntk_cmd->add_option("--m", ntk_m);
  ntk_cmd->add_option("--eta", eta);
  ntk_cmd->add_option("--batch", batch);
  ntk_cmd->add_option("--steps", ntk_steps);
  ntk_cmd->add_option("--B-grid", B_grid);
  ntk_cmd->add_option("--seed", common.seed);
  ntk_cmd->add_option("--out", common.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed())
      return run_train(d, m, eta, batch, steps, common, backend, target_degree,
                       target_norm, b0, B);
    if (sparsity_cmd->parsed())
      return run_sparsity(m_grid, d, trials, common, ratio_min, ratio_max);
    if (scaling_cmd->parsed())
      return run_scaling(m_grid, d, batch, steps, common, slope_max);
    if (kernel_cmd->parsed())
      return run_kernel_check(d, kc_b0, kc_m, eps, kc_trials, common,
                              max_violation);
    if (rfs_cmd->parsed())
      return run_rfs(d, rfs_b0, rfs_m, rfs_steps, rfs_batch, rfs_seeds, common,
                     rfs_loss);
    if (ntk_cmd->parsed())
      return run_ntk_equiv(d, ntk_m, eta, batch, ntk_steps, B_grid, common);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
