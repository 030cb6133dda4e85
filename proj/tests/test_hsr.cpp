#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "snn/hsr.hpp"
#include "snn/rng.hpp"
#include "snn/trainer.hpp"

using namespace snn;

namespace {

std::vector<Vector> gaussian_points(int n, int d, Rng& rng) {
  std::vector<Vector> pts;
  pts.reserve(n);
  for (int i = 0; i < n; ++i) {
    Vector p(d);
    for (int j = 0; j < d; ++j) p[j] = rng.gaussian();
    pts.push_back(std::move(p));
  }
  return pts;
}

HalfSpace random_halfspace(int d, double b, Rng& rng) {
  return HalfSpace{sample_sphere(d, rng), b};
}

}  // namespace

TEST_CASE("hsr: empty index and tiny cases") {
  HsrIndex idx({}, HsrBackend::BallTree);
  CHECK(idx.size() == 0);

  std::vector<Vector> pts;
  Vector p(2);
  p << 1, 0;
  pts.push_back(p);
  p << 0, 1;
  pts.push_back(p);
  p << -1, 0;
  pts.push_back(p);
  HsrIndex idx3(pts, HsrBackend::BallTree);
  CHECK(idx3.size() == 3);

  Vector a(2);
  a << 1, 0;
  CHECK(idx3.query({a, 0.5}) == std::vector<int>{0});
  a << 0, 1;
  CHECK(idx3.query({a, -2.0}) == std::vector<int>{0, 1, 2});
}

TEST_CASE("hsr: ragged input and dimension mismatch rejected") {
  std::vector<Vector> pts{Vector::Zero(2), Vector::Zero(3)};
  CHECK_THROWS_AS(HsrIndex(pts, HsrBackend::BallTree), ShapeError);

  HsrIndex idx({Vector::Zero(2)}, HsrBackend::BallTree);
  CHECK_THROWS_AS(idx.query({Vector::Zero(3), 0.0}), ShapeError);
  CHECK_THROWS_AS(idx.insert(5, Vector::Zero(3)), ShapeError);
}

TEST_CASE("hsr: ball tree equals brute force on static queries") {
  Rng rng(101);
  for (int d : {2, 4, 8}) {
    auto pts = gaussian_points(2000, d, rng);
    HsrIndex tree(pts, HsrBackend::BallTree);
    HsrIndex brute(pts, HsrBackend::BruteForce);
    for (int q = 0; q < 200; ++q) {
      auto h = random_halfspace(d, 2.0 * rng.uniform() - 0.5, rng);
      CHECK(tree.query(h) == brute.query(h));
    }
  }
}

TEST_CASE("hsr: reported set is exactly the strict predicate") {
  Rng rng(103);
  auto pts = gaussian_points(500, 4, rng);
  HsrIndex tree(pts, HsrBackend::BallTree);
  auto h = random_halfspace(4, 1.0, rng);
  auto out = tree.query(h);
  std::vector<char> reported(pts.size(), 0);
  for (int id : out) {
    CHECK(h.a.dot(pts[id]) > h.b);
    reported[id] = 1;
  }
  long expected = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool inside = h.a.dot(pts[i]) > h.b;
    if (inside) ++expected;
    CHECK(inside == static_cast<bool>(reported[i]));
  }
  // ~ n * Phi(-1) reported on average
  CHECK(expected == static_cast<long>(out.size()));
  CHECK(out.size() > 30);
  CHECK(out.size() < 160);
}

TEST_CASE("hsr: insert then delete restores query answers") {
  Rng rng(107);
  auto pts = gaussian_points(200, 4, rng);
  HsrIndex tree(pts, HsrBackend::BallTree);
  auto h = random_halfspace(4, 0.0, rng);
  auto before = tree.query(h);
  Vector p(4);
  p << 5, 5, 5, 5;
  tree.insert(200, p);
  tree.erase(200);
  CHECK(tree.query(h) == before);
}

TEST_CASE("hsr: delete everything") {
  Rng rng(109);
  auto pts = gaussian_points(100, 3, rng);
  HsrIndex tree(pts, HsrBackend::BallTree);
  for (int i = 0; i < 100; ++i) tree.erase(i);
  CHECK(tree.size() == 0);
  CHECK(tree.query(random_halfspace(3, -10.0, rng)).empty());
}

TEST_CASE("hsr: update errors") {
  Rng rng(113);
  auto pts = gaussian_points(10, 3, rng);
  HsrIndex tree(pts, HsrBackend::BallTree);
  CHECK_THROWS_AS(tree.erase(42), MissingIdError);
  CHECK_THROWS_AS(tree.insert(3, Vector::Zero(3)), DuplicateIdError);
  tree.erase(3);
  CHECK_THROWS_AS(tree.erase(3), MissingIdError);
  tree.insert(3, Vector::Zero(3));  // reinsert after delete is fine
  CHECK(tree.contains(3));
}

TEST_CASE("hsr: interleaved updates match brute-force replay") {
  Rng rng(127);
  const int d = 4;
  auto pts = gaussian_points(1000, d, rng);
  HsrIndex tree(pts, HsrBackend::BallTree);
  HsrIndex brute(pts, HsrBackend::BruteForce);
  std::vector<int> live(1000);
  for (int i = 0; i < 1000; ++i) live[i] = i;
  int next_id = 1000;
  for (int op = 0; op < 5000; ++op) {
    bool do_insert = live.empty() || (rng.next_u64() & 1u);
    if (do_insert) {
      Vector p(d);
      for (int j = 0; j < d; ++j) p[j] = rng.gaussian();
      tree.insert(next_id, p);
      brute.insert(next_id, p);
      live.push_back(next_id++);
    } else {
      std::size_t k = rng.next_u64() % live.size();
      tree.erase(live[k]);
      brute.erase(live[k]);
      live[k] = live.back();
      live.pop_back();
    }
    if (op % 25 == 0) {
      auto h = random_halfspace(d, 2.0 * rng.uniform() - 1.0, rng);
      CHECK(tree.query(h) == brute.query(h));
    }
  }
  for (int q = 0; q < 200; ++q) {
    auto h = random_halfspace(d, 2.0 * rng.uniform() - 1.0, rng);
    CHECK(tree.query(h) == brute.query(h));
  }
}

TEST_CASE("hsr: rebuild preserves answers bit-exactly") {
  Rng rng(131);
  const int d = 4;
  auto pts = gaussian_points(600, d, rng);
  HsrIndex tree(pts, HsrBackend::BallTree);
  std::vector<HalfSpace> queries;
  for (int q = 0; q < 50; ++q)
    queries.push_back(random_halfspace(d, rng.uniform(), rng));
  std::vector<std::vector<int>> before;
  for (const auto& h : queries) before.push_back(tree.query(h));
  std::size_t rebuilds0 = tree.rebuild_count();
  // churn deletes until a rebuild triggers, on ids we then restore
  int removed = 0;
  std::vector<std::pair<int, Vector>> stash;
  for (int i = 0; i < 600 && tree.rebuild_count() == rebuilds0; ++i) {
    stash.emplace_back(i, pts[i]);
    tree.erase(i);
    ++removed;
  }
  CHECK(tree.rebuild_count() > rebuilds0);
  for (auto& [id, p] : stash) tree.insert(id, p);
  for (std::size_t q = 0; q < queries.size(); ++q)
    CHECK(tree.query(queries[q]) == before[q]);
}

TEST_CASE("hsr: degenerate duplicate points") {
  std::vector<Vector> pts(300, Vector::Ones(3));
  HsrIndex tree(pts, HsrBackend::BallTree);
  Vector a = Vector::Ones(3).normalized();
  auto all = tree.query({a, 1.0});
  CHECK(all.size() == 300);
  CHECK(tree.query({a, 3.0}).empty());
}

TEST_CASE("hsr: query work grows sublinearly in n") {
  Rng rng(137);
  const int d = 8;
  std::vector<double> ns, work;
  for (int logn = 12; logn <= 16; ++logn) {
    const int n = 1 << logn;
    auto pts = gaussian_points(n, d, rng);
    HsrIndex tree(pts, HsrBackend::BallTree);
    tree.reset_predicate_evals();
    const int queries = 30;
    for (int q = 0; q < queries; ++q)
      tree.query({sample_sphere(d, rng), std::sqrt(0.4 * std::log(n))});
    ns.push_back(n);
    work.push_back(static_cast<double>(tree.predicate_evals()) / queries);
  }
  double slope = log_log_slope(ns, work);
  CHECK(slope < 0.95);
}

TEST_CASE("hsr: debug dump is parseable and covers all live points") {
  Rng rng(139);
  auto pts = gaussian_points(200, 3, rng);
  HsrIndex tree(pts, HsrBackend::BallTree);
  std::ostringstream os;
  tree.dump_tree(os);
  std::istringstream is(os.str());
  std::string line;
  int leaf_ids = 0;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    CHECK((kind == "leaf" || kind == "node"));
    if (kind == "leaf") {
      std::string tok;
      bool in_ids = false;
      while (ls >> tok) {
        if (tok == "ids") in_ids = true;
        else if (in_ids) ++leaf_ids;
      }
    }
  }
  CHECK(leaf_ids == 200);
}
