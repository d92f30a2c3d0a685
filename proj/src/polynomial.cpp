#include "stwf/polynomial.hpp"

#include <algorithm>
#include <functional>

namespace stwf {

namespace {

double ipow(double base, int e) {
    double r = 1.0;
    for (int k = 0; k < e; ++k) {
        r *= base;
    }
    return r;
}

// Monomial with exponent e, optionally differentiated once in `di` and once in
// `dj` (-1 means no differentiation).
double monomial(const Vector& x, const std::vector<int>& e, int di, int dj) {
    double coeff = 1.0;
    double r = 1.0;
    for (int k = 0; k < static_cast<int>(e.size()); ++k) {
        int p = e[k];
        for (int d : {di, dj}) {
            if (d == k) {
                if (p == 0) {
                    return 0.0;
                }
                coeff *= p;
                --p;
            }
        }
        r *= ipow(x[k], p);
    }
    return coeff * r;
}

}  // namespace

MonomialBasis::MonomialBasis(int dim, int order) : dim_(dim), order_(order) {
    require(dim > 0, "polynomial dimension must be positive");
    require(order >= 0, "polynomial order must be non-negative");
    std::vector<int> e(dim, 0);
    for (int deg = 0; deg <= order; ++deg) {
        // Enumerate exponent vectors with sum == deg, leading exponent first.
        std::function<void(int, int)> rec = [&](int pos, int left) {
            if (pos == dim - 1) {
                e[pos] = left;
                exponents_.push_back(e);
                return;
            }
            for (int p = left; p >= 0; --p) {
                e[pos] = p;
                rec(pos + 1, left - p);
            }
        };
        rec(0, deg);
    }
}

Vector MonomialBasis::values(const Vector& x) const {
    Vector v(size());
    for (Index t = 0; t < size(); ++t) {
        v[t] = monomial(x, exponents_[t], -1, -1);
    }
    return v;
}

Matrix MonomialBasis::gradients(const Vector& x) const {
    Matrix g(dim_, size());
    for (Index t = 0; t < size(); ++t) {
        for (int i = 0; i < dim_; ++i) {
            g(i, t) = monomial(x, exponents_[t], i, -1);
        }
    }
    return g;
}

Matrix MonomialBasis::hessians(const Vector& x) const {
    Matrix h(dim_ * dim_, size());
    for (Index t = 0; t < size(); ++t) {
        for (int i = 0; i < dim_; ++i) {
            for (int j = 0; j < dim_; ++j) {
                h(i * dim_ + j, t) = monomial(x, exponents_[t], i, j);
            }
        }
    }
    return h;
}

namespace {

// Column k holds x^k elementwise, k = 0..order.
std::vector<Matrix> power_table(const Matrix& xs, int order) {
    std::vector<Matrix> pw(static_cast<std::size_t>(order + 1), Matrix::Ones(xs.rows(), xs.cols()));
    for (int k = 1; k <= order; ++k) {
        pw[k] = pw[k - 1].cwiseProduct(xs);
    }
    return pw;
}

}  // namespace

Matrix MonomialBasis::values_batch(const Matrix& xs) const {
    require(xs.cols() == dim_, "monomial batch has wrong width");
    const auto pw = power_table(xs, order_);
    Matrix out(xs.rows(), size());
    for (Index t = 0; t < size(); ++t) {
        Vector col = Vector::Ones(xs.rows());
        for (int k = 0; k < dim_; ++k) {
            if (exponents_[t][k] > 0) {
                col.array() *= pw[exponents_[t][k]].col(k).array();
            }
        }
        out.col(t) = col;
    }
    return out;
}

Matrix MonomialBasis::partials_batch(const Matrix& xs, int i) const {
    require(xs.cols() == dim_, "monomial batch has wrong width");
    require(i >= 0 && i < dim_, "partial derivative index out of range");
    const auto pw = power_table(xs, order_);
    Matrix out(xs.rows(), size());
    for (Index t = 0; t < size(); ++t) {
        const auto& e = exponents_[t];
        if (e[i] == 0) {
            out.col(t).setZero();
            continue;
        }
        Vector col = Vector::Constant(xs.rows(), static_cast<double>(e[i]));
        for (int k = 0; k < dim_; ++k) {
            const int p = k == i ? e[k] - 1 : e[k];
            if (p > 0) {
                col.array() *= pw[p].col(k).array();
            }
        }
        out.col(t) = col;
    }
    return out;
}

Index MonomialBasis::find(const std::vector<int>& exponent) const {
    auto it = std::find(exponents_.begin(), exponents_.end(), exponent);
    return it == exponents_.end() ? -1 : static_cast<Index>(it - exponents_.begin());
}

}  // namespace stwf
