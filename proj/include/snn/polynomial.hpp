#ifndef SNN_POLYNOMIAL_HPP
#define SNN_POLYNOMIAL_HPP

#include <vector>

#include "snn/distributions.hpp"
#include "snn/rng.hpp"

namespace snn {

// Even polynomial p(x) = sum_alpha a_alpha x^alpha where every multi-index
// alpha has even total degree <= c and sum a_alpha^2 <= M^2.
class EvenPolynomial {
 public:
  struct Term {
    std::vector<int> alpha;  // exponent per coordinate, |alpha| even
    double coeff;
  };

  EvenPolynomial(int dim, std::vector<Term> terms);

  // Random polynomial on the even multi-indices of total degree <= c,
  // rescaled so the coefficient vector has norm exactly M. When the full
  // index set exceeds max_terms, a sparse random subset is used.
  static EvenPolynomial sample(int c, double M, int dim, Rng& rng,
                               std::size_t max_terms = 10000);

  // Quadratic <u, x>^2, expanded into monomials. Coefficient norm depends
  // on u; for unit u it is at most sqrt(2).
  static EvenPolynomial quadratic_form(const Vector& u);

  double eval(const Vector& x) const;

  int dim() const { return dim_; }
  const std::vector<Term>& terms() const { return terms_; }
  double coeff_norm() const;

 private:
  int dim_;
  std::vector<Term> terms_;
};

}  // namespace snn

#endif  // SNN_POLYNOMIAL_HPP
