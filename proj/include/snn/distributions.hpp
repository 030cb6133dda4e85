#ifndef SNN_DISTRIBUTIONS_HPP
#define SNN_DISTRIBUTIONS_HPP

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "snn/rng.hpp"

namespace snn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Uniform sample from the unit sphere S^{d-1} (normalized Gaussian).
Vector sample_sphere(int d, Rng& rng);

// Uniform sample from the scaled cube {±1/√d}^d, fair independent coordinates.
Vector sample_cube(int d, Rng& rng);

// Sphere-supported input distribution: uniform sphere, discrete cube, or a
// fixed finite point set (sampled uniformly).
class Distribution {
 public:
  enum class Kind { UniformSphere, DiscreteCube, FinitePointSet };

  static Distribution uniform_sphere(int d);
  static Distribution discrete_cube(int d);
  static Distribution finite_point_set(std::vector<Vector> points);

  Vector sample(Rng& rng) const;
  int dim() const { return d_; }
  Kind kind() const { return kind_; }

 private:
  Distribution(Kind kind, int d) : kind_(kind), d_(d) {}
  Kind kind_;
  int d_;
  std::vector<Vector> points_;
};

// Estimate of R in the second-moment bound sup_u E[<u,x>^2] <= R^2/d.
// Power iteration on the empirical second-moment matrix; the supremum over
// unit u is its top eigenvalue, so R̂ = sqrt(d * λmax).
double estimate_r_bound(const Distribution& dist, int num_samples, Rng& rng);

}  // namespace snn

#endif  // SNN_DISTRIBUTIONS_HPP
