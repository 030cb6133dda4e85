#ifndef SNN_NETWORK_HPP
#define SNN_NETWORK_HPP

#include <string>
#include <utility>
#include <vector>

#include "snn/distributions.hpp"
#include "snn/rng.hpp"

namespace snn {

// Shifted ReLU: max(0, z - b0). The derivative is 0 at the kink, matching
// the strict fire-set predicate <w, x> > b0.
inline double shifted_relu(double z, double b0) {
  return z > b0 ? z - b0 : 0.0;
}
inline double shifted_relu_deriv(double z, double b0) {
  return z > b0 ? 1.0 : 0.0;
}

// Sorted neuron ids with <w_r, x> > b0 for one input.
using FireSet = std::vector<int>;

// Two-layer network f(x) = (1/sqrt(2m)) sum_r a_r * relu_b0(<w_r, x>).
// Only W trains; the output signs a are frozen at ±B. Initialization pairs
// the rows: w_{m+r} = w_r with a_{m+r} = -a_r, so f is identically zero at
// init.
struct TwoLayerNet {
  Matrix W;   // 2m x d, row r is neuron r's weight
  Vector a;   // ±B
  double b0 = 0.0;
  int m = 0;
  int d = 0;

  int neurons() const { return 2 * m; }
};

TwoLayerNet init_net(int d, int m, double B, Rng& rng);

double forward_dense(const TwoLayerNet& net, const Vector& x);

// Forward restricted to the given fire set. Caller guarantees `fire` is the
// exact fire set of x; NDEBUG-off builds assert it contains no dead neuron.
double forward_sparse(const TwoLayerNet& net, const Vector& x,
                      const FireSet& fire);

FireSet fire_set_dense(const TwoLayerNet& net, const Vector& x);

struct Sample {
  Vector x;
  double y;
};
using Batch = std::vector<Sample>;

double l2_loss(const TwoLayerNet& net, const Batch& batch);
Vector per_sample_residuals(const TwoLayerNet& net, const Batch& batch);

// Gradient of the l2 loss w.r.t. W, nonzero only on fired rows:
// row r = (1/sqrt(2m)) a_r sum_{i: r fired} (f(x_i) - y_i) x_i.
// Rows are emitted in ascending neuron id with a fixed summation order so
// that results are reproducible across backends.
struct SparseGradient {
  std::vector<std::pair<int, Vector>> rows;  // (neuron id, d-vector), sorted
};

SparseGradient sparse_gradient(const TwoLayerNet& net, const Batch& batch,
                               const std::vector<FireSet>& fire_sets);

// Binary checkpoint, bit-exact round trip.
void save_net(const TwoLayerNet& net, const std::string& path);
TwoLayerNet load_net(const std::string& path);

}  // namespace snn

#endif  // SNN_NETWORK_HPP
