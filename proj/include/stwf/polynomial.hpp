#ifndef STWF_POLYNOMIAL_HPP
#define STWF_POLYNOMIAL_HPP

#include <vector>

#include "stwf/common.hpp"

namespace stwf {

/*
 * Monomial basis of all terms x^e with |e| <= order in `dim` variables.
 *
 * Terms are ordered by total degree, then lexicographically by exponent
 * vector in decreasing order of the leading exponent, e.g. for dim = 2,
 * order = 2: 1, x1, x2, x1^2, x1 x2, x2^2.
 */
class MonomialBasis {
public:
    MonomialBasis() = default;
    MonomialBasis(int dim, int order);

    int dim() const { return dim_; }
    int order() const { return order_; }
    Index size() const { return static_cast<Index>(exponents_.size()); }
    const std::vector<std::vector<int>>& exponents() const { return exponents_; }

    /// Term values m_t(x), length size().
    Vector values(const Vector& x) const;
    /// d x size(): entry (i, t) = dm_t / dx_i.
    Matrix gradients(const Vector& x) const;
    /// (d*d) x size(): entry (i*d + j, t) = d^2 m_t / dx_i dx_j.
    Matrix hessians(const Vector& x) const;

    /// n x size(): term values for every row of `xs`.
    Matrix values_batch(const Matrix& xs) const;
    /// n x size(): dm_t / dx_i for every row of `xs`.
    Matrix partials_batch(const Matrix& xs, int i) const;

    /// Index of the term with the given exponent vector, or -1.
    Index find(const std::vector<int>& exponent) const;

private:
    int dim_ = 0;
    int order_ = 0;
    std::vector<std::vector<int>> exponents_;
};

}  // namespace stwf

#endif  // STWF_POLYNOMIAL_HPP
