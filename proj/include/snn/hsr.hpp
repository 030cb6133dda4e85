#ifndef SNN_HSR_HPP
#define SNN_HSR_HPP

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "snn/distributions.hpp"

namespace snn {

// Query half-space. Membership is the strict inequality <a, w> > b.
struct HalfSpace {
  Vector a;
  double b;
};

enum class HsrBackend { BruteForce, BallTree };

struct MissingIdError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DuplicateIdError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Dynamic half-space range reporting index over an id-addressed point set.
//
// The ball-tree backend prunes on bounding balls: a node at (c, rho) is
// skipped when <a,c> + rho <= b and bulk-reported when <a,c> - rho > b.
// Deletions count toward a staleness threshold; once deletions since the
// last build exceed half the live count, or a leaf grows past 4x capacity,
// the tree is rebuilt from the live points.
class HsrIndex {
 public:
  static constexpr int kLeafCapacity = 32;

  HsrIndex(const std::vector<Vector>& points, HsrBackend backend);

  int dim() const { return d_; }
  std::size_t size() const { return live_count_; }
  HsrBackend backend() const { return backend_; }
  bool contains(int id) const;
  const double* point(int id) const;

  // All live ids with <h.a, w_id> > h.b, sorted ascending.
  std::vector<int> query(const HalfSpace& h) const;

  void insert(int id, const Vector& point);
  void erase(int id);

  // Point-predicate work done by queries since the last reset: leaf points
  // examined plus ids bulk-reported from fully-inside subtrees.
  std::size_t predicate_evals() const { return predicate_evals_; }
  void reset_predicate_evals() { predicate_evals_ = 0; }
  std::size_t rebuild_count() const { return rebuilds_; }

  // Line-oriented tree dump for test tooling.
  void dump_tree(std::ostream& os) const;

 private:
  struct Node {
    Vector center;
    double radius = 0.0;
    int left = -1;   // internal iff left >= 0
    int right = -1;
    std::vector<int> ids;  // leaf payload
    bool is_leaf() const { return left < 0; }
  };

  void ensure_id(int id);
  int build(std::vector<int>& ids, int begin, int end);
  void rebuild();
  void insert_into_tree(int id);
  void split_leaf(int node);
  void query_node(int node, const HalfSpace& h, std::vector<int>& out) const;
  void report_subtree(int node, std::vector<int>& out) const;

  int d_;
  HsrBackend backend_;
  std::vector<double> coords_;   // id-major, d_ doubles per id
  std::vector<char> live_;
  std::size_t live_count_ = 0;
  std::size_t deletions_since_build_ = 0;
  std::vector<Node> nodes_;
  int root_ = -1;
  std::vector<int> leaf_of_;     // id -> leaf node index, -1 if not stored
  std::size_t rebuilds_ = 0;
  mutable std::size_t predicate_evals_ = 0;
};

}  // namespace snn

#endif  // SNN_HSR_HPP
