#ifndef SNN_KERNEL_HPP
#define SNN_KERNEL_HPP

#include <functional>
#include <vector>

#include "snn/distributions.hpp"
#include "snn/polynomial.hpp"
#include "snn/rng.hpp"
#include "snn/trainer.hpp"

namespace snn {

// Random feature embedding for the shifted-ReLU tangent kernel. The feature
// is factorized: psi(w, x) = 1[<w,x> > b0] * x, so it is C-bounded with
// C = 1 for unit-norm x.
struct RfsEmbedding {
  Matrix w;  // m x d, rows i.i.d. standard Gaussian
  double b0 = 0.0;

  int features() const { return static_cast<int>(w.rows()); }
  int dim() const { return static_cast<int>(w.cols()); }
};

RfsEmbedding sample_embedding(int m, int d, double b0, Rng& rng);

// Empirical kernel (1/m) sum_i 1[<w_i,x1>>b0] 1[<w_i,x2>>b0] <x1,x2>.
double m_kernel(const RfsEmbedding& emb, const Vector& x1, const Vector& x2);

// Linear model over the embedding: f(x) = (1/sqrt m) sum_i gate_i <v_i, x>.
struct RfsModel {
  Matrix v;  // m x d
  RfsEmbedding emb;

  double predict(const Vector& x) const;
};

enum class RfsLoss { Absolute, Hinge };

struct RfsTrainResult {
  RfsModel model;            // random-iterate snapshot
  std::vector<double> loss_trace;
  int t_star = 0;
};

using LabelFn = std::function<double(const Vector&)>;

RfsTrainResult rfs_train(const RfsEmbedding& emb, RfsLoss loss, double eta,
                         int batch, int steps, const LabelFn& target,
                         const Distribution& input, Rng& rng);

// Fraction of random unit pairs with |k_w - k| >= eps, where k is a
// Monte Carlo reference over the bivariate projection (<w,x1>, <w,x2>)
// computed from a shared pool of `reference_samples` Gaussian draws.
double kernel_concentration_check(int d, double b0, int m, double eps,
                                  int trials, Rng& rng,
                                  int reference_samples = 1000000);

struct DualActivationEstimate {
  double mean = 0.0;
  double stderr = 0.0;
};

// sigma_hat(rho) = E[sigma_b0(X) sigma_b0(Y)] over rho-correlated standard
// Gaussians, by Monte Carlo.
DualActivationEstimate dual_activation_mc(double b0, double rho, int samples,
                                          Rng& rng);

struct RfsApproximationResult {
  double at_u_empirical = 0.0;   // mean (f - f_w)^2 at x = u over w draws
  double at_u_stderr = 0.0;
  double at_u_predicted = 0.0;   // Phi(-b0)(1 - Phi(-b0)) / m
  double sphere_empirical = 0.0; // E over x and w of (f - f_w)^2
  double sphere_bound = 0.0;     // 2 C^2 ||f||_k^2 / (m d)
};

// Approximation error of the m-feature functional against its expectation,
// for the explicit witness f~(w) = u, i.e. f(x) = <u,x> Phi(-b0).
RfsApproximationResult rfs_approximation_check(int d, double b0, int m,
                                               const Vector& u, int samples,
                                               Rng& rng);

struct NtkEquivRow {
  double B = 0.0;
  double net_loss = 0.0;  // held-out loss of the network trainer's output
  double ntk_loss = 0.0;  // held-out loss of the linearized trainer's output
  double gap = 0.0;
  bool diverged = false;
};

// Couples the network trainer (output scale B, learning rate eta/B^2) with
// SGD on the linearization at the shared initialization (learning rate eta),
// on identical mini-batch streams, and reports the held-out loss gap per B.
std::vector<NtkEquivRow> ntk_equivalence_experiment(
    int d, int m, double eta, int batch, int steps,
    const std::vector<double>& B_grid, const EvenPolynomial& target,
    std::uint64_t seed, int holdout_samples = 10000);

}  // namespace snn

#endif  // SNN_KERNEL_HPP
