#include "snn/distributions.hpp"

#include <cmath>

namespace snn {

Vector sample_sphere(int d, Rng& rng) {
  if (d < 1) throw std::invalid_argument("sample_sphere: dimension must be >= 1");
  Vector x(d);
  double norm2;
  do {
    for (int i = 0; i < d; ++i) x[i] = rng.gaussian();
    norm2 = x.squaredNorm();
  } while (norm2 == 0.0);
  return x / std::sqrt(norm2);
}

Vector sample_cube(int d, Rng& rng) {
  if (d < 1) throw std::invalid_argument("sample_cube: dimension must be >= 1");
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Vector x(d);
  for (int i = 0; i < d; ++i) x[i] = (rng.next_u64() & 1u) ? scale : -scale;
  return x;
}

Distribution Distribution::uniform_sphere(int d) {
  if (d < 1) throw std::invalid_argument("Distribution: dimension must be >= 1");
  return Distribution(Kind::UniformSphere, d);
}

Distribution Distribution::discrete_cube(int d) {
  if (d < 1) throw std::invalid_argument("Distribution: dimension must be >= 1");
  return Distribution(Kind::DiscreteCube, d);
}

Distribution Distribution::finite_point_set(std::vector<Vector> points) {
  if (points.empty())
    throw std::invalid_argument("Distribution: finite point set must be nonempty");
  const int d = static_cast<int>(points.front().size());
  for (const auto& p : points)
    if (p.size() != d) throw ShapeError("Distribution: ragged point dimensions");
  Distribution dist(Kind::FinitePointSet, d);
  dist.points_ = std::move(points);
  return dist;
}

Vector Distribution::sample(Rng& rng) const {
  switch (kind_) {
    case Kind::UniformSphere:
      return sample_sphere(d_, rng);
    case Kind::DiscreteCube:
      return sample_cube(d_, rng);
    case Kind::FinitePointSet: {
      std::size_t i = rng.next_u64() % points_.size();
      return points_[i];
    }
  }
  throw std::logic_error("Distribution: unknown kind");
}

double estimate_r_bound(const Distribution& dist, int num_samples, Rng& rng) {
  if (num_samples <= 0)
    throw std::invalid_argument("estimate_r_bound: need at least one sample");
  const int d = dist.dim();
  Matrix sigma = Matrix::Zero(d, d);
  for (int i = 0; i < num_samples; ++i) {
    Vector x = dist.sample(rng);
    sigma.noalias() += x * x.transpose();
  }
  sigma /= static_cast<double>(num_samples);

  // Power iteration; sigma is PSD so the top eigenvalue is the spectral norm.
  Vector v(d);
  for (int i = 0; i < d; ++i) v[i] = rng.gaussian();
  v.normalize();
  double lambda = 0.0;
  for (int iter = 0; iter < 10000; ++iter) {
    Vector w = sigma * v;
    double norm = w.norm();
    if (norm == 0.0) return 0.0;
    w /= norm;
    double next = w.dot(sigma * w);
    if (iter > 0 && std::abs(next - lambda) <= 1e-6 * std::abs(next)) {
      lambda = next;
      break;
    }
    lambda = next;
    v = w;
  }
  return std::sqrt(static_cast<double>(d) * lambda);
}

}  // namespace snn
