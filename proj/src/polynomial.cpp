#include "snn/polynomial.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace snn {

namespace {

// Enumerate multi-indices of even total degree <= c in lexicographic order,
// stopping once `cap` indices have been produced. Returns false on overflow.
bool enumerate_even(int dim, int c, std::size_t cap,
                    std::vector<std::vector<int>>& out) {
  std::vector<int> alpha(dim, 0);
  // Odometer enumeration: advance to the lexicographically next multi-index
  // with total degree <= c, keeping only even totals.
  auto total = [&](const std::vector<int>& a) {
    int s = 0;
    for (int v : a) s += v;
    return s;
  };
  while (true) {
    if (total(alpha) % 2 == 0) {
      if (out.size() >= cap) return false;
      out.push_back(alpha);
    }
    // next multi-index with sum <= c
    int i = dim - 1;
    while (i >= 0) {
      alpha[i] += 1;
      if (total(alpha) <= c) break;
      alpha[i] = 0;
      --i;
    }
    if (i < 0) return true;
  }
}

}  // namespace

EvenPolynomial::EvenPolynomial(int dim, std::vector<Term> terms)
    : dim_(dim), terms_(std::move(terms)) {
  for (const auto& t : terms_) {
    if (static_cast<int>(t.alpha.size()) != dim_)
      throw ShapeError("EvenPolynomial: multi-index dimension mismatch");
    int deg = 0;
    for (int e : t.alpha) {
      if (e < 0) throw std::invalid_argument("EvenPolynomial: negative exponent");
      deg += e;
    }
    if (deg % 2 != 0)
      throw std::invalid_argument("EvenPolynomial: odd total degree");
  }
}

EvenPolynomial EvenPolynomial::sample(int c, double M, int dim, Rng& rng,
                                      std::size_t max_terms) {
  if (c < 0 || c % 2 != 0)
    throw std::invalid_argument("EvenPolynomial::sample: degree cap must be even");
  if (M <= 0.0) throw std::invalid_argument("EvenPolynomial::sample: M must be > 0");
  if (dim < 1) throw std::invalid_argument("EvenPolynomial::sample: dim must be >= 1");

  std::vector<std::vector<int>> indices;
  if (!enumerate_even(dim, c, max_terms, indices)) {
    // Full index set too large: draw a sparse random subset instead.
    std::set<std::vector<int>> chosen;
    while (chosen.size() < max_terms) {
      int deg = 2 * static_cast<int>(rng.next_u64() % (c / 2 + 1));
      std::vector<int> alpha(dim, 0);
      for (int k = 0; k < deg; ++k) alpha[rng.next_u64() % dim] += 1;
      chosen.insert(std::move(alpha));
    }
    indices.assign(chosen.begin(), chosen.end());
  }

  std::vector<Term> terms;
  terms.reserve(indices.size());
  double norm2 = 0.0;
  for (auto& alpha : indices) {
    double a = rng.gaussian();
    norm2 += a * a;
    terms.push_back(Term{std::move(alpha), a});
  }
  double scale = M / std::sqrt(norm2);
  for (auto& t : terms) t.coeff *= scale;
  return EvenPolynomial(dim, std::move(terms));
}

EvenPolynomial EvenPolynomial::quadratic_form(const Vector& u) {
  const int d = static_cast<int>(u.size());
  std::vector<Term> terms;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      double a = (i == j) ? u[i] * u[i] : 2.0 * u[i] * u[j];
      if (a == 0.0) continue;
      std::vector<int> alpha(d, 0);
      alpha[i] += 1;
      alpha[j] += 1;
      terms.push_back(Term{std::move(alpha), a});
    }
  }
  return EvenPolynomial(d, std::move(terms));
}

double EvenPolynomial::eval(const Vector& x) const {
  if (static_cast<int>(x.size()) != dim_)
    throw ShapeError("EvenPolynomial::eval: dimension mismatch");
  double sum = 0.0;
  for (const auto& t : terms_) {
    double mono = t.coeff;
    for (int i = 0; i < dim_ && mono != 0.0; ++i) {
      for (int e = 0; e < t.alpha[i]; ++e) mono *= x[i];
    }
    sum += mono;
  }
  return sum;
}

double EvenPolynomial::coeff_norm() const {
  double norm2 = 0.0;
  for (const auto& t : terms_) norm2 += t.coeff * t.coeff;
  return std::sqrt(norm2);
}

}  // namespace snn
