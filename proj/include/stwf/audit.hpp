#ifndef STWF_AUDIT_HPP
#define STWF_AUDIT_HPP

#include <optional>
#include <string>
#include <vector>

#include "stwf/common.hpp"
#include "stwf/models.hpp"
#include "stwf/response.hpp"

namespace stwf {

/// Tensor grid over a box: `count[i]` evenly spaced points on [lo[i], hi[i]].
/// A single point is allowed only for a degenerate interval (lo == hi).
struct GridSpec {
    Vector lo;
    Vector hi;
    std::vector<int> count;
    Index cap = 100000;

    static GridSpec uniform(Index dim, double lo, double hi, int count, Index cap = 100000);
    static GridSpec point(const Vector& x);

    Index dim() const { return lo.size(); }
    Index total() const;
    void validate() const;
    /// total() x dim, first coordinate varying slowest.
    Matrix points() const;
};

struct AuditViolation {
    Vector base;
    Vector probe;
    double magnitude = 0.0;
};

struct AuditReport {
    std::string condition;
    bool pass = true;
    double tolerance = 0.0;
    double worst = 0.0;
    std::vector<AuditViolation> violations;  // first 100 in grid order
    Index checked = 0;
    std::optional<double> offset;       // offset equivalence only
    std::optional<bool> offset_positive;
    std::optional<bool> realizable;     // safety alignment with a polynomial policy

    static constexpr std::size_t kMaxViolations = 100;
};

/// max |Q_x(x') - f(x')| over grid base points x and evaluation points x'.
AuditReport check_taylor_exactness(const Policy& policy, int order, const GridSpec& grid, double tol);

/*
 * Per-coordinate sign condition dh/dx'_i * dQ_x/dx'_i >= -tol for base points
 * x in `base` and probes x' in `probe`, where Q_x is the order-K expansion of
 * the policy at x. For polynomial policies the report also says whether h
 * is representable in the policy's family (least squares over the grid).
 */
AuditReport check_safety_alignment(const LabelingModel& h, const Policy& policy, int order, const GridSpec& base,
                                   const GridSpec& probe, double tol);
AuditReport check_safety_alignment(const LabelingModel& h, const Policy& policy, int order, const GridSpec& grid,
                                   double tol);

/*
 * Whether Q^{f_b}_x - Q^{f_a}_x is one constant C over base points and probes.
 * The report carries C (mean difference) and whether it is non-negative.
 */
AuditReport check_offset_equivalence(const SmoothFunction& f_a, const SmoothFunction& f_b, int order,
                                     const GridSpec& base, const GridSpec& probe, double tol);
AuditReport check_offset_equivalence(const Policy& f_a, const Policy& f_b, int order, const GridSpec& grid,
                                     double tol);

/// Least-squares residual (max abs over the grid) of fitting h by the
/// polynomial family of `basis`.
double representation_residual(const LabelingModel& h, const MonomialBasis& basis, const GridSpec& grid);

struct ExampleAgent {
    double x = 0.0;
    double x_star = 0.0;
    double h_before = 0.0;
    double h_after = 0.0;
};

struct ExampleReport {
    std::string name;
    bool pass = true;
    std::vector<std::string> checks;   // one line per assertion
    std::vector<ExampleAgent> agents;
    double imp = 0.0;
    double sf = 0.0;
    double aw = 0.0;
    // ex1 only
    double best_slope = 0.0;
    double best_intercept = 0.0;
    double ls_slope = 0.0;
    double ls_intercept = 0.0;
    double constant_aw = 0.0;
};

/// "ex1" or "ex2"; ValidationError otherwise.
ExampleReport reproduce_example(const std::string& which);

}  // namespace stwf

#endif  // STWF_AUDIT_HPP
