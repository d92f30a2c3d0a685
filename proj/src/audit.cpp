#include "stwf/audit.hpp"

#include <cmath>
#include <sstream>

#include "stwf/welfare.hpp"

namespace stwf {

GridSpec GridSpec::uniform(Index dim, double lo, double hi, int count, Index cap) {
    return {Vector::Constant(dim, lo), Vector::Constant(dim, hi), std::vector<int>(dim, count), cap};
}

GridSpec GridSpec::point(const Vector& x) { return {x, x, std::vector<int>(x.size(), 1), 100000}; }

Index GridSpec::total() const {
    Index n = 1;
    for (int c : count) {
        n *= c;
    }
    return n;
}

void GridSpec::validate() const {
    require(lo.size() > 0 && hi.size() == lo.size() && static_cast<Index>(count.size()) == lo.size(),
            "grid bounds and counts must have the same dimension");
    for (Index i = 0; i < dim(); ++i) {
        require(std::isfinite(lo[i]) && std::isfinite(hi[i]) && lo[i] <= hi[i], "grid bounds must be finite, lo <= hi");
        if (lo[i] == hi[i]) {
            require(count[i] == 1, "a degenerate grid axis takes exactly one point");
        } else {
            require(count[i] >= 2, "grid axes need at least two points");
        }
    }
    double n = 1.0;
    for (int c : count) {
        n *= c;
    }
    if (n > static_cast<double>(cap)) {
        throw ValidationError("grid has " + std::to_string(static_cast<long long>(n)) + " points, above the cap of " +
                              std::to_string(cap));
    }
}

Matrix GridSpec::points() const {
    validate();
    const Index d = dim();
    const Index n = total();
    Matrix out(n, d);
    for (Index r = 0; r < n; ++r) {
        Index rest = r;
        for (Index i = d - 1; i >= 0; --i) {
            const int c = count[i];
            const Index k = rest % c;
            rest /= c;
            out(r, i) = c == 1 ? lo[i] : lo[i] + (hi[i] - lo[i]) * static_cast<double>(k) / (c - 1);
        }
    }
    return out;
}

namespace {

// Tracks the worst violation and the first violating pairs in scan order.
struct Collector {
    AuditReport report;

    Collector(std::string id, double tol) {
        report.condition = std::move(id);
        report.tolerance = tol;
    }

    void add(const Vector& base, const Vector& probe, double magnitude) {
        ++report.checked;
        if (magnitude > report.worst) {
            report.worst = magnitude;
        }
        if (magnitude > report.tolerance && report.violations.size() < AuditReport::kMaxViolations) {
            report.violations.push_back({base, probe, magnitude});
        }
    }

    AuditReport finish() {
        report.pass = report.worst <= report.tolerance;
        return std::move(report);
    }
};

void require_order(int order) { require(order == 1 || order == 2, "information level must be 1 or 2"); }

}  // namespace

AuditReport check_taylor_exactness(const Policy& policy, int order, const GridSpec& grid, double tol) {
    require_order(order);
    const Matrix pts = grid.points();
    require(pts.cols() == policy.dim(), "grid dimension does not match the policy");
    const Vector f = policy.eval_batch(pts);
    Collector col("taylor-exactness", tol);
    for (Index b = 0; b < pts.rows(); ++b) {
        const Vector x = pts.row(b).transpose();
        const TaylorExpansion q = taylor_expand(policy, x, order);
        for (Index p = 0; p < pts.rows(); ++p) {
            const Vector xp = pts.row(p).transpose();
            col.add(x, xp, std::abs(q(xp) - f[p]));
        }
    }
    return col.finish();
}

double representation_residual(const LabelingModel& h, const MonomialBasis& basis, const GridSpec& grid) {
    const Matrix pts = grid.points();
    require(pts.cols() == h.dim() && basis.dim() == h.dim(), "grid dimension does not match the labeler");
    const Matrix a = basis.values_batch(pts);
    const Vector y = h.eval_batch(pts);
    const Vector coef = a.colPivHouseholderQr().solve(y);
    return (a * coef - y).cwiseAbs().maxCoeff();
}

AuditReport check_safety_alignment(const LabelingModel& h, const Policy& policy, int order, const GridSpec& base,
                                   const GridSpec& probe, double tol) {
    require_order(order);
    const Matrix bases = base.points();
    const Matrix probes = probe.points();
    require(bases.cols() == policy.dim() && probes.cols() == policy.dim() && h.dim() == policy.dim(),
            "grid dimension does not match the policy");
    const Matrix gh = h.gradient_batch(probes);
    Collector col("safety-alignment", tol);
    for (Index b = 0; b < bases.rows(); ++b) {
        const Vector x = bases.row(b).transpose();
        const TaylorExpansion q = taylor_expand(policy, x, order);
        for (Index p = 0; p < probes.rows(); ++p) {
            const Vector xp = probes.row(p).transpose();
            const Vector gq = q.gradient_at(xp);
            const double worst_product = gh.row(p).transpose().cwiseProduct(gq).minCoeff();
            col.add(x, xp, std::max(0.0, -worst_product));
        }
    }
    AuditReport r = col.finish();
    if (policy.is_polynomial()) {
        const MonomialBasis basis =
            policy.kind() == PolicyKind::Polynomial ? policy.basis() : MonomialBasis(static_cast<int>(policy.dim()), 1);
        r.realizable = representation_residual(h, basis, probe) <= 1e-8;
    }
    return r;
}

AuditReport check_safety_alignment(const LabelingModel& h, const Policy& policy, int order, const GridSpec& grid,
                                   double tol) {
    return check_safety_alignment(h, policy, order, grid, grid, tol);
}

AuditReport check_offset_equivalence(const SmoothFunction& f_a, const SmoothFunction& f_b, int order,
                                     const GridSpec& base, const GridSpec& probe, double tol) {
    require_order(order);
    require(f_a.dim == f_b.dim, "functions have different input dimensions");
    const Matrix bases = base.points();
    const Matrix probes = probe.points();
    require(bases.cols() == f_a.dim && probes.cols() == f_a.dim, "grid dimension does not match the functions");
    const Index n = bases.rows() * probes.rows();
    Vector diff(n);
    Index k = 0;
    for (Index b = 0; b < bases.rows(); ++b) {
        const Vector x = bases.row(b).transpose();
        const TaylorExpansion qa = taylor_expand(f_a, x, order);
        const TaylorExpansion qb = taylor_expand(f_b, x, order);
        for (Index p = 0; p < probes.rows(); ++p) {
            const Vector xp = probes.row(p).transpose();
            diff[k++] = qb(xp) - qa(xp);
        }
    }
    const double c = diff.mean();
    Collector col("offset-equivalence", tol);
    k = 0;
    for (Index b = 0; b < bases.rows(); ++b) {
        for (Index p = 0; p < probes.rows(); ++p) {
            col.add(bases.row(b).transpose(), probes.row(p).transpose(), std::abs(diff[k++] - c));
        }
    }
    AuditReport r = col.finish();
    r.offset = c;
    r.offset_positive = c >= -tol;
    return r;
}

AuditReport check_offset_equivalence(const Policy& f_a, const Policy& f_b, int order, const GridSpec& grid,
                                     double tol) {
    return check_offset_equivalence(as_smooth(f_a), as_smooth(f_b), order, grid, grid, tol);
}

namespace {

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(12);
    out << v;
    return out.str();
}

void check(ExampleReport& r, bool ok, const std::string& what) {
    r.checks.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    r.pass = r.pass && ok;
}

// h(x) = -4 x (x - 1) on [0, 1]
LabelingModel hiring_labeler() {
    Vector c(3);
    c << 0.0, 4.0, -4.0;
    return LabelingModel::closed_quadratic(1, c);
}

ResponseModel unit_cost_response() {
    ResponseModel m;
    m.kind = ResponseKind::ClosedForm;
    m.order = 1;
    m.cost = CostModel::quadratic(1.0, 1);
    return m;
}

Dataset agents_at(const std::vector<double>& xs, const LabelingModel& h) {
    Matrix f(static_cast<Index>(xs.size()), 1);
    Eigen::VectorXi y(f.rows());
    for (Index i = 0; i < f.rows(); ++i) {
        f(i, 0) = xs[static_cast<std::size_t>(i)];
        y[i] = h.eval(f.row(i).transpose()) >= 0.5 ? 1 : 0;
    }
    return Dataset(f, y, Eigen::VectorXi(), {"x"}).with_domain(Box::uniform(1, 0.0, 1.0));
}

ExampleReport example_two() {
    ExampleReport r;
    r.name = "ex2";
    const LabelingModel h = hiring_labeler();
    Policy f = Policy::polynomial(1, 2, h.params());
    f.set_domain(Box::uniform(1, 0.0, 1.0));
    const ResponseModel resp = unit_cost_response();
    const Dataset data = agents_at({0.4}, h);
    const Matrix moved = apply_response_batch(resp, f, data.features());
    const WelfareReport w = welfare_report(f, data, h, moved);
    ExampleAgent a;
    a.x = 0.4;
    a.x_star = moved(0, 0);
    a.h_before = h.eval(data.features().row(0).transpose());
    a.h_after = h.eval(moved.row(0).transpose());
    r.agents.push_back(a);
    r.imp = w.imp;
    r.sf = w.sf;
    r.aw = w.aw;
    constexpr double tol = 1e-9;
    check(r, std::abs(a.x_star - 0.8) <= tol, "x* = " + fmt(a.x_star) + " (expected 0.8)");
    check(r, std::abs(a.h_after - 0.64) <= tol, "h(x*) = " + fmt(a.h_after) + " (expected 0.64)");
    check(r, std::abs(a.h_before - 0.96) <= tol, "h(x) = " + fmt(a.h_before) + " (expected 0.96)");
    check(r, std::abs(w.imp + 0.32) <= tol, "IMP = " + fmt(w.imp) + " (expected -0.32)");
    check(r, std::abs(w.sf + 0.32) <= tol, "SF = " + fmt(w.sf) + " (expected -0.32)");
    check(r, std::abs(w.aw) <= tol, "AW = " + fmt(w.aw) + " (expected 0)");
    return r;
}

ExampleReport example_one() {
    ExampleReport r;
    r.name = "ex1";
    const LabelingModel h = hiring_labeler();
    const std::vector<double> xs = {0.1, 0.2, 0.3, 0.4, 0.7};
    const Dataset data = agents_at(xs, h);
    const ResponseModel resp = unit_cost_response();
    const Box box = Box::uniform(1, 0.0, 1.0);

    // Brute force over lines f(x) = s x + b; the first maximiser in scan order wins.
    const int n_slope = 321;      // -8 .. 8 step 0.05
    const int n_intercept = 161;  // -4 .. 4 step 0.05
    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_slope; ++i) {
        const double s = -8.0 + 0.05 * i;
        for (int j = 0; j < n_intercept; ++j) {
            const double b = -4.0 + 0.05 * j;
            Vector w(1);
            w << s;
            Policy f = Policy::linear_raw(w, b);
            f.set_domain(box);
            const double imp = welfare_report(f, data, h, apply_response_batch(resp, f, data.features())).imp;
            if (imp > best) {
                best = imp;
                r.best_slope = s;
                r.best_intercept = b;
            }
        }
    }
    Vector w(1);
    w << r.best_slope;
    Policy best_policy = Policy::linear_raw(w, r.best_intercept);
    best_policy.set_domain(box);
    const Matrix moved = apply_response_batch(resp, best_policy, data.features());
    const WelfareReport wr = welfare_report(best_policy, data, h, moved);
    r.imp = wr.imp;
    r.sf = wr.sf;
    r.aw = wr.aw;
    for (Index i = 0; i < data.size(); ++i) {
        ExampleAgent a;
        a.x = data.features()(i, 0);
        a.x_star = moved(i, 0);
        a.h_before = h.eval(data.features().row(i).transpose());
        a.h_after = h.eval(moved.row(i).transpose());
        r.agents.push_back(a);
    }

    // Least-squares line through the qualification values.
    Matrix design(data.size(), 2);
    design.col(0) = data.features().col(0);
    design.col(1).setOnes();
    const Vector target = h.eval_batch(data.features());
    const Vector ls = design.colPivHouseholderQr().solve(target);
    r.ls_slope = ls[0];
    r.ls_intercept = ls[1];

    Vector zero(1);
    zero << 0.0;
    Policy constant = Policy::linear_raw(zero, 1.0);
    constant.set_domain(box);
    r.constant_aw = agent_welfare(constant, data, h);

    bool green_improve = true;
    for (std::size_t i = 0; i + 1 < r.agents.size(); ++i) {
        green_improve = green_improve && r.agents[i].h_after > r.agents[i].h_before;
    }
    const ExampleAgent& black = r.agents.back();
    check(r, r.sf < 0.0, "IMP-maximising line s = " + fmt(r.best_slope) + " has SF = " + fmt(r.sf) + " < 0");
    check(r, green_improve, "agents below 0.5 improve under the IMP-maximising line");
    check(r, black.h_after < black.h_before,
          "agent at 0.7 deteriorates: h " + fmt(black.h_before) + " -> " + fmt(black.h_after));
    check(r, std::abs(r.ls_slope - r.best_slope) > 1e-6 || std::abs(r.ls_intercept - r.best_intercept) > 1e-6,
          "least-squares line (" + fmt(r.ls_slope) + ", " + fmt(r.ls_intercept) + ") differs from the IMP maximiser");
    check(r, r.constant_aw == 0.0, "f = 1 has AW = " + fmt(r.constant_aw));
    return r;
}

}  // namespace

ExampleReport reproduce_example(const std::string& which) {
    if (which == "ex1") return example_one();
    if (which == "ex2") return example_two();
    throw ValidationError("unknown example '" + which + "' (expected ex1 or ex2)");
}

}  // namespace stwf
