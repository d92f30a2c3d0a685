#ifndef STWF_COMMON_HPP
#define STWF_COMMON_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace stwf {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Bad argument, shape, or configuration. Maps to CLI exit code 1.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DimensionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// Numerical or I/O failure during a run. Maps to CLI exit code 2.
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-feature bounds [lo, hi]. Infinite bounds mean "unconstrained".
struct Box {
    Vector lo;
    Vector hi;

    static Box unbounded(Index dim) {
        const double inf = std::numeric_limits<double>::infinity();
        return {Vector::Constant(dim, -inf), Vector::Constant(dim, inf)};
    }
    static Box uniform(Index dim, double lo, double hi) {
        return {Vector::Constant(dim, lo), Vector::Constant(dim, hi)};
    }

    Index dim() const { return lo.size(); }
    bool bounded() const { return lo.allFinite() && hi.allFinite(); }

    bool contains(const Vector& x) const {
        return ((x.array() >= lo.array()) && (x.array() <= hi.array())).all();
    }

    Vector clamp(const Vector& x) const { return x.cwiseMax(lo).cwiseMin(hi); }

    // Width per coordinate; unbounded coordinates report 1.
    Vector width() const {
        Vector w(dim());
        for (Index i = 0; i < dim(); ++i) {
            w[i] = std::isfinite(lo[i]) && std::isfinite(hi[i]) ? hi[i] - lo[i] : 1.0;
        }
        return w;
    }
};

inline double sigmoid(double u) {
    if (u >= 0) {
        return 1.0 / (1.0 + std::exp(-u));
    }
    const double e = std::exp(u);
    return e / (1.0 + e);
}

inline constexpr double kProbClip = 1e-7;

inline double clip_probability(double p) {
    return std::min(std::max(p, kProbClip), 1.0 - kProbClip);
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) {
        throw ValidationError(msg);
    }
}

inline void require_dim(const Vector& x, Index dim, const char* what) {
    if (x.size() != dim) {
        throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(dim) +
                             ", got " + std::to_string(x.size()));
    }
}

inline void require_finite(const Vector& x, const char* what) {
    if (!x.allFinite()) {
        throw ValidationError(std::string(what) + ": non-finite input");
    }
}

}  // namespace stwf

#endif  // STWF_COMMON_HPP
