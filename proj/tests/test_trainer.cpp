#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "snn/trainer.hpp"

using namespace snn;

namespace {

TrainConfig small_config(std::uint64_t seed) {
  Rng rng(seed ^ 0xabcdefull);
  Vector u = sample_sphere(8, rng);
  TrainConfig cfg;
  cfg.d = 8;
  cfg.m = 256;
  cfg.b0 = default_b0(2 * cfg.m);
  cfg.eta = 0.05;
  cfg.batch = 8;
  cfg.steps = 20;
  cfg.seed = seed;
  cfg.backend = TrainerBackend::Dense;
  cfg.target = EvenPolynomial::quadratic_form(u);
  cfg.input = Distribution::uniform_sphere(8);
  return cfg;
}

}  // namespace

TEST_CASE("train: eta = 0 leaves the net unchanged") {
  auto cfg = small_config(1);
  cfg.eta = 0.0;
  auto result = train(cfg);
  Rng init_rng = Rng(cfg.seed).split("init");
  auto fresh = init_net(cfg.d, cfg.m, cfg.B, init_rng);
  CHECK(result.final.W == fresh.W);
  CHECK(result.returned.W == fresh.W);
}

TEST_CASE("train: hsr and dense agree after one step") {
  auto cfg = small_config(2);
  cfg.steps = 1;
  cfg.backend = TrainerBackend::Hsr;
  auto hsr = train(cfg);
  cfg.backend = TrainerBackend::Dense;
  auto dense = train(cfg);
  CHECK((hsr.final.W - dense.final.W).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(hsr.metrics.iters[0].fired_total == dense.metrics.iters[0].fired_total);
}

TEST_CASE("train: backend equivalence over many iterations") {
  auto cfg = small_config(3);
  cfg.steps = 200;
  cfg.backend = TrainerBackend::Hsr;
  auto hsr = train(cfg);
  cfg.backend = TrainerBackend::Dense;
  auto dense = train(cfg);
  REQUIRE(hsr.metrics.iters.size() == dense.metrics.iters.size());
  for (std::size_t t = 0; t < hsr.metrics.iters.size(); ++t) {
    CHECK(hsr.metrics.iters[t].fired_total == dense.metrics.iters[t].fired_total);
    CHECK(hsr.metrics.iters[t].q_size == dense.metrics.iters[t].q_size);
  }
  CHECK((hsr.final.W - dense.final.W).cwiseAbs().maxCoeff() <= 1e-7);
  CHECK(hsr.t_star == dense.t_star);
}

TEST_CASE("train: metrics invariants and random-iterate rule") {
  auto cfg = small_config(4);
  auto result = train(cfg);
  REQUIRE(static_cast<int>(result.metrics.iters.size()) == cfg.steps);
  for (const auto& r : result.metrics.iters) {
    CHECK(r.fired_total <= static_cast<long>(cfg.batch) * 2 * cfg.m);
    CHECK(r.q_size <= r.fired_total);
    CHECK(std::isfinite(r.loss));
  }
  CHECK(result.t_star >= 1);
  CHECK(result.t_star <= cfg.steps);

  // replay to the snapshot iteration: truncating the run at t*-1 steps must
  // reproduce the returned net exactly
  auto cfg2 = cfg;
  if (result.t_star > 1) {
    cfg2.steps = result.t_star - 1;
    auto prefix = train(cfg2);
    CHECK(prefix.final.W == result.returned.W);
  } else {
    Rng init_rng = Rng(cfg.seed).split("init");
    CHECK(init_net(cfg.d, cfg.m, cfg.B, init_rng).W == result.returned.W);
  }
}

TEST_CASE("train: divergence raises with the iteration number") {
  auto cfg = small_config(5);
  cfg.eta = 1e6;
  cfg.steps = 50;
  CHECK_THROWS_AS(train(cfg), DivergenceError);
}

TEST_CASE("fire_sets_dense: threshold extremes") {
  Rng rng(6);
  auto net = init_net(4, 16, 1.0, rng);
  Batch batch;
  for (int i = 0; i < 5; ++i) batch.push_back({sample_sphere(4, rng), 0.0});
  net.b0 = 1e9;
  for (const auto& f : fire_sets_dense(net, batch)) CHECK(f.empty());
  net.b0 = -1e9;
  for (const auto& f : fire_sets_dense(net, batch))
    CHECK(static_cast<int>(f.size()) == 2 * 16);
}

TEST_CASE("sparsity experiment: b0 = 0 fires half the neurons") {
  Rng rng(7);
  auto rows = sparsity_experiment({4096}, 8, 50, rng);
  REQUIRE(rows.size() == 1);
  // grid uses b0 = sqrt(0.4 ln m) != 0; rerun the b0 = 0 case directly
  TwoLayerNet net = init_net(8, 16, 1.0, rng);
  net.b0 = 0.0;
  long fired = 0;
  const int trials = 200;
  for (int i = 0; i < trials; ++i)
    fired += static_cast<long>(fire_set_dense(net, sample_sphere(8, rng)).size());
  double mean = static_cast<double>(fired) / trials;
  CHECK(mean == doctest::Approx(16.0).epsilon(0.2));  // half of 2m = 32
}

TEST_CASE("sparsity experiment: observed fraction tracks Phi(-b0)") {
  Rng rng(8);
  auto rows = sparsity_experiment({4096, 16384}, 8, 100, rng);
  for (const auto& r : rows) {
    CHECK(r.ratio_vs_phi > 0.8);
    CHECK(r.ratio_vs_phi < 1.2);
    CHECK(static_cast<double>(r.max_fired) <= r.m45_bound);
  }
  CHECK_THROWS_AS(sparsity_experiment({}, 8, 10, rng), std::invalid_argument);
}

TEST_CASE("flip statistics: eta = 0 gives empty flip sets") {
  auto cfg = small_config(9);
  cfg.eta = 0.0;
  cfg.record_probes = 10;
  auto result = train(cfg);
  auto stats = flip_statistics(result.metrics, 2 * cfg.m);
  for (const auto& row : stats.rows) {
    CHECK(row.mean_flip == 0.0);
    CHECK(row.max_flip == 0);
  }
  CHECK(stats.nonflip_fraction == 1.0);
}

TEST_CASE("flip statistics: symmetric difference identity and lazy regime") {
  auto cfg = small_config(10);
  cfg.m = 2048;
  cfg.b0 = default_b0(2 * cfg.m);
  cfg.eta = 0.01;
  cfg.steps = 50;
  cfg.record_probes = 16;
  auto result = train(cfg);
  auto stats = flip_statistics(result.metrics, 2 * cfg.m);
  REQUIRE(static_cast<int>(stats.rows.size()) == cfg.steps - 1);
  // identity check against a direct recount
  const auto& rec = result.metrics.probe_fire_sets;
  for (std::size_t t = 1; t < rec.size(); ++t) {
    long total = 0;
    for (std::size_t p = 0; p < rec[t].size(); ++p) {
      std::vector<int> diff;
      std::set_symmetric_difference(rec[t][p].begin(), rec[t][p].end(),
                                    rec[t - 1][p].begin(), rec[t - 1][p].end(),
                                    std::back_inserter(diff));
      total += static_cast<long>(diff.size());
    }
    CHECK(stats.rows[t - 1].mean_flip ==
          doctest::Approx(static_cast<double>(total) / rec[t].size()));
  }
  CHECK(stats.nonflip_fraction > 0.9);

  TrainMetrics empty;
  CHECK_THROWS_AS(flip_statistics(empty, 10), RecordingDisabledError);
}

TEST_CASE("metrics csv has the stable header") {
  auto cfg = small_config(11);
  cfg.steps = 3;
  auto result = train(cfg);
  auto path = std::filesystem::temp_directory_path() / "snn_metrics_test.csv";
  write_metrics_csv(result.metrics, path.string());
  std::ifstream is(path);
  std::string header;
  std::getline(is, header);
  CHECK(header ==
        "t,loss,fired_total,q_size,t_query_us,t_forward_us,t_backward_us,"
        "t_update_us");
  int rows = 0;
  std::string line;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 3);
  std::filesystem::remove(path);
}

TEST_CASE("log_log_slope recovers exact power laws") {
  std::vector<double> x{1024, 2048, 4096, 8192};
  std::vector<double> lin, sub;
  for (double v : x) {
    lin.push_back(3.0 * v);
    sub.push_back(2.0 * std::pow(v, 0.8));
  }
  CHECK(log_log_slope(x, lin) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(log_log_slope(x, sub) == doctest::Approx(0.8).epsilon(1e-9));
}

TEST_CASE("scaling experiment on a small grid is self-consistent") {
  Rng rng(12);
  auto result = scaling_experiment({512, 1024, 2048}, 8, 4, 6, rng);
  REQUIRE(result.rows.size() == 3);
  for (const auto& r : result.rows) {
    CHECK(r.fired_counts_match);
    CHECK(r.median_iter_us_hsr > 0);
    CHECK(r.median_iter_us_dense > 0);
  }
}
