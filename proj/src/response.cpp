#include "stwf/response.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace stwf {

void CostModel::validate(Index dim) const {
    require(scale > 0.0 && std::isfinite(scale), "cost scale must be positive");
    require_dim(mask, dim, "improvable mask");
    require((mask.array() == 0.0 || mask.array() == 1.0).all(), "improvable mask must be 0/1");
}

// ---------------------------------------------------------------------------
// Taylor expansion

TaylorExpansion::TaylorExpansion(Vector base, int requested_order, double value, Vector gradient,
                                 std::optional<Matrix> hessian)
    : base_(std::move(base)),
      requested_order_(requested_order),
      value_(value),
      gradient_(std::move(gradient)),
      hessian_(std::move(hessian)) {
    require(requested_order_ >= 1, "information level must be at least 1");
    require_dim(gradient_, base_.size(), "Taylor gradient");
    if (hessian_) {
        require(hessian_->rows() == dim() && hessian_->cols() == dim(), "Taylor Hessian has wrong shape");
    }
}

Matrix TaylorExpansion::hessian() const { return hessian_ ? *hessian_ : Matrix::Zero(dim(), dim()); }

double TaylorExpansion::operator()(const Vector& x) const {
    require_dim(x, dim(), "Taylor evaluation point");
    const Vector delta = x - base_;
    double q = value_ + gradient_.dot(delta);
    if (hessian_) {
        q += 0.5 * delta.dot(*hessian_ * delta);
    }
    return q;
}

Vector TaylorExpansion::gradient_at(const Vector& x) const {
    require_dim(x, dim(), "Taylor evaluation point");
    if (!hessian_) {
        return gradient_;
    }
    return gradient_ + *hessian_ * (x - base_);
}

TaylorExpansion taylor_expand(const SmoothFunction& f, const Vector& x, int order) {
    require(order == 1 || order == 2, "information level must be 1 or 2");
    require_dim(x, f.dim, "Taylor base point");
    std::optional<Matrix> hessian;
    if (order >= 2 && f.max_order >= 2 && f.hessian) {
        hessian = f.hessian(x);
    }
    return TaylorExpansion(x, order, f.value(x), f.gradient(x), std::move(hessian));
}

TaylorExpansion taylor_expand(const Policy& policy, const Vector& x, int order) {
    require(order == 1 || order == 2, "information level must be 1 or 2");
    std::optional<Matrix> hessian;
    if (order == 2) {
        hessian = policy.hessian(x);
    }
    return TaylorExpansion(x, order, policy.eval(x), policy.gradient(x), std::move(hessian));
}

// ---------------------------------------------------------------------------
// Best responses

double response_objective(const TaylorExpansion& q, const CostModel& cost, const Vector& x_new) {
    return q(x_new) - cost(q.base(), x_new);
}

namespace {

void check_box(const Box& box, Index dim) {
    require(box.lo.size() == dim && box.hi.size() == dim, "domain box dimension mismatch");
}

BestResponse finish(const Vector& raw, const Box& box) {
    BestResponse r;
    r.x_star = box.clamp(raw);
    r.clamped = (raw.array() < box.lo.array()) || (raw.array() > box.hi.array());
    return r;
}

std::vector<Index> improvable_indices(const Vector& mask) {
    std::vector<Index> idx;
    for (Index i = 0; i < mask.size(); ++i) {
        if (mask[i] != 0.0) {
            idx.push_back(i);
        }
    }
    return idx;
}

// Improvement direction delta on improvable coordinates for the second-order
// estimate: (2a I - H_II) delta_I = g_I. Throws if the system is not positive
// definite (objective unbounded above).
Vector second_order_step(const Vector& g, const Matrix& h, const CostModel& cost) {
    const auto idx = improvable_indices(cost.mask);
    const Index m = static_cast<Index>(idx.size());
    Vector delta = Vector::Zero(g.size());
    if (m == 0) {
        return delta;
    }
    Matrix system(m, m);
    Vector rhs(m);
    for (Index r = 0; r < m; ++r) {
        rhs[r] = g[idx[r]];
        for (Index c = 0; c < m; ++c) {
            system(r, c) = (r == c ? 2.0 * cost.scale : 0.0) - h(idx[r], idx[c]);
        }
    }
    Eigen::LLT<Matrix> llt(system);
    if (llt.info() != Eigen::Success || (llt.matrixLLT().diagonal().array() <= 0.0).any()) {
        throw UnboundedResponseError("second-order estimate minus cost is not strictly concave; no bounded maximiser");
    }
    const Vector sol = llt.solve(rhs);
    for (Index r = 0; r < m; ++r) {
        delta[idx[r]] = sol[r];
    }
    return delta;
}

}  // namespace

BestResponse best_respond_closed(const TaylorExpansion& q, const CostModel& cost, const Box& box) {
    const Index d = q.dim();
    cost.validate(d);
    check_box(box, d);
    const Vector& x = q.base();
    if (!q.has_hessian()) {
        return finish(x + cost.mask.cwiseProduct(q.gradient()) / (2.0 * cost.scale), box);
    }
    return finish(x + second_order_step(q.gradient(), q.hessian(), cost), box);
}

BestResponse best_respond_numeric(const TaylorExpansion& q, const CostModel& cost, const Box& box,
                                  const NumericOptions& opts) {
    const Index d = q.dim();
    cost.validate(d);
    check_box(box, d);
    require(opts.max_iters > 0 && opts.restarts >= 0 && opts.step_fraction > 0, "invalid numeric options");
    const Vector& x = q.base();
    const Vector steps = opts.step_fraction * box.width();
    const Vector frozen = Vector::Ones(d) - cost.mask;

    auto objective = [&](const Vector& y) { return response_objective(q, cost, y); };
    auto ascent_direction = [&](const Vector& y) {
        Vector g = q.gradient_at(y) - 2.0 * cost.scale * cost.mask.cwiseProduct(y - x);
        return Vector(g.cwiseProduct(cost.mask));
    };
    auto projected_norm = [&](const Vector& y, const Vector& g) {
        double worst = 0.0;
        for (Index i = 0; i < d; ++i) {
            const bool blocked = (y[i] <= box.lo[i] && g[i] < 0.0) || (y[i] >= box.hi[i] && g[i] > 0.0);
            if (!blocked) {
                worst = std::max(worst, std::abs(g[i]));
            }
        }
        return worst;
    };

    struct Run {
        Vector y;
        double value;
        bool converged;
    };
    auto run = [&](Vector start) {
        Vector y = box.clamp(start.cwiseProduct(cost.mask) + x.cwiseProduct(frozen));
        double fy = objective(y);
        double eta = 1.0;
        for (int it = 0; it < opts.max_iters; ++it) {
            const Vector g = ascent_direction(y);
            if (projected_norm(y, g) <= opts.tolerance) {
                return Run{y, fy, true};
            }
            bool moved = false;
            while (eta > 1e-30) {
                const Vector cand = box.clamp(y + eta * steps.cwiseProduct(g));
                const double fc = objective(cand);
                if (fc >= fy + 1e-4 * g.dot(cand - y) && cand != y) {
                    y = cand;
                    fy = fc;
                    eta *= 1.5;
                    moved = true;
                    break;
                }
                eta *= 0.5;
            }
            if (!moved) {
                return Run{y, fy, projected_norm(y, g) <= std::sqrt(opts.tolerance)};
            }
        }
        return Run{y, fy, projected_norm(y, ascent_direction(y)) <= opts.tolerance};
    };

    Run best = run(x);
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int r = 0; r < opts.restarts; ++r) {
        Vector start(d);
        for (Index i = 0; i < d; ++i) {
            const double u = unit(rng);
            start[i] = std::isfinite(box.lo[i]) && std::isfinite(box.hi[i])
                           ? box.lo[i] + u * (box.hi[i] - box.lo[i])
                           : x[i] + (2.0 * u - 1.0);
        }
        Run cand = run(start);
        if (cand.value > best.value) {
            best = std::move(cand);
        }
    }
    BestResponse out;
    out.x_star = best.y;
    out.clamped = (best.y.array() <= box.lo.array()) || (best.y.array() >= box.hi.array());
    out.converged = best.converged;
    return out;
}

// ---------------------------------------------------------------------------
// Information encoding and learned responses

Index information_width(Index dim, int order) {
    return 1 + dim + (order >= 2 ? dim * (dim + 1) / 2 : 0);
}

Vector encode_information(const Policy& policy, const Vector& x, int order) {
    require(order == 1 || order == 2, "information level must be 1 or 2");
    const Index d = policy.dim();
    Vector info(information_width(d, order));
    info[0] = policy.eval(x);
    info.segment(1, d) = policy.gradient(x);
    if (order == 2) {
        const Matrix h = policy.hessian(x);
        Index k = 1 + d;
        for (Index i = 0; i < d; ++i) {
            for (Index j = i; j < d; ++j) {
                info[k++] = h(i, j);
            }
        }
    }
    return info;
}

namespace {

// Rows of d I_K / d theta, matching encode_information's layout.
Matrix information_param_jacobian(const Policy& policy, const Vector& x, int order) {
    const Index d = policy.dim();
    Matrix jac(information_width(d, order), policy.num_params());
    jac.row(0) = policy.param_jacobian(ParamQuantity::Value, x).matrix;
    jac.middleRows(1, d) = policy.param_jacobian(ParamQuantity::InputGradient, x).matrix;
    if (order == 2) {
        const Matrix hj = policy.param_jacobian(ParamQuantity::InputHessian, x).matrix;
        Index k = 1 + d;
        for (Index i = 0; i < d; ++i) {
            for (Index j = i; j < d; ++j) {
                jac.row(k++) = hj.row(i * d + j);
            }
        }
    }
    return jac;
}

}  // namespace

LearnedResponse::LearnedResponse(Mlp net, int order, Index dim, Vector in_offset, Vector in_scale,
                                 Vector out_scale)
    : net_(std::move(net)),
      order_(order),
      dim_(dim),
      in_offset_(std::move(in_offset)),
      in_scale_(std::move(in_scale)),
      out_scale_(std::move(out_scale)) {
    const Index width = dim_ + information_width(dim_, order_);
    require(net_.input_dim() == width, "learned response network has wrong input width");
    require(net_.output_dim() == dim_, "learned response network has wrong output width");
    require(in_offset_.size() == width && in_scale_.size() == width, "input standardisation mismatch");
    require(out_scale_.size() == dim_, "output scale mismatch");
}

Vector LearnedResponse::predict(const Vector& x, const Vector& info) const {
    require_dim(x, dim_, "response input");
    require_dim(info, info_width(), "response information");
    Vector u(x.size() + info.size());
    u << x, info;
    u = (u - in_offset_).cwiseQuotient(in_scale_);
    return x + out_scale_.cwiseProduct(net_.forward(u));
}

Matrix LearnedResponse::predict_batch(const Matrix& xs, const Matrix& infos) const {
    require(xs.cols() == dim_ && infos.cols() == info_width() && xs.rows() == infos.rows(),
            "response batch has wrong shape");
    Matrix u(xs.rows(), xs.cols() + infos.cols());
    u << xs, infos;
    u = (u.rowwise() - in_offset_.transpose()).array().rowwise() / in_scale_.transpose().array();
    Matrix out = net_.forward_batch(u);
    return xs + (out.array().rowwise() * out_scale_.transpose().array()).matrix();
}

Matrix LearnedResponse::info_jacobian(const Vector& x, const Vector& info) const {
    Vector u(x.size() + info.size());
    u << x, info;
    u = (u - in_offset_).cwiseQuotient(in_scale_);
    const Matrix full = net_.input_jacobian(u);
    const Index m = info_width();
    Matrix jac = full.rightCols(m);
    jac = out_scale_.asDiagonal() * jac;
    return jac * in_scale_.tail(m).cwiseInverse().asDiagonal();
}

std::string to_string(ResponseKind kind) {
    switch (kind) {
        case ResponseKind::ClosedForm: return "closed";
        case ResponseKind::Numeric: return "numeric";
        case ResponseKind::Learned: return "learned";
    }
    return "closed";
}

ResponseKind response_kind_from_string(const std::string& name) {
    if (name == "closed" || name == "closed-form-taylor") return ResponseKind::ClosedForm;
    if (name == "numeric" || name == "numeric-taylor") return ResponseKind::Numeric;
    if (name == "learned") return ResponseKind::Learned;
    throw ValidationError("unknown response kind '" + name + "'");
}

namespace {

const Box& response_box(const Policy& policy) { return policy.domain(); }

BestResponse respond_learned(const ResponseModel& model, const Policy& policy, const Vector& x) {
    require(model.learned != nullptr, "learned response model is missing");
    const LearnedResponse& net = *model.learned;
    require(net.dim() == policy.dim(), "learned response dimension does not match policy");
    const Vector info = encode_information(policy, x, net.order());
    Vector raw = net.predict(x, info);
    const Vector frozen = Vector::Ones(x.size()) - model.cost.mask;
    raw = raw.cwiseProduct(model.cost.mask) + x.cwiseProduct(frozen);
    return finish(raw, response_box(policy));
}

}  // namespace

BestResponse apply_response(const ResponseModel& model, const Policy& policy, const Vector& x) {
    model.cost.validate(policy.dim());
    switch (model.kind) {
        case ResponseKind::ClosedForm: {
            const TaylorExpansion q = taylor_expand(policy, x, model.order);
            try {
                return best_respond_closed(q, model.cost, response_box(policy));
            } catch (const UnboundedResponseError&) {
                BestResponse r = best_respond_numeric(q, model.cost, response_box(policy), model.numeric);
                r.fallback = true;
                return r;
            }
        }
        case ResponseKind::Numeric:
            return best_respond_numeric(taylor_expand(policy, x, model.order), model.cost, response_box(policy),
                                        model.numeric);
        case ResponseKind::Learned:
            return respond_learned(model, policy, x);
    }
    throw ValidationError("unknown response kind");
}

Matrix apply_response_batch(const ResponseModel& model, const Policy& policy, const Matrix& xs) {
    if (policy.kind() == PolicyKind::LinearSigmoid && model.kind == ResponseKind::ClosedForm && model.order == 1) {
        if (xs.cols() != policy.dim()) {
            throw DimensionError("response inputs: expected dimension " + std::to_string(policy.dim()));
        }
        model.cost.validate(policy.dim());
        const Index d = policy.dim();
        const Vector w = policy.params().head(d);
        const Vector s = ((xs * w).array() + policy.params()[d]).unaryExpr([](double v) { return sigmoid(v); });
        const Vector s1 = s.array() * (1.0 - s.array());
        const Vector step = model.cost.mask.cwiseProduct(w) / (2.0 * model.cost.scale);
        Matrix out = xs + s1 * step.transpose();
        const Box& box = policy.domain();
        for (Index j = 0; j < d; ++j) {
            out.col(j) = out.col(j).cwiseMax(box.lo[j]).cwiseMin(box.hi[j]);
        }
        return out;
    }
    Matrix out(xs.rows(), xs.cols());
    for (Index r = 0; r < xs.rows(); ++r) {
        out.row(r) = apply_response(model, policy, xs.row(r).transpose()).x_star.transpose();
    }
    return out;
}

ResponseDerivative respond_with_jacobian(const ResponseModel& model, const Policy& policy, const Vector& x) {
    const Index d = policy.dim();
    const Index p = policy.num_params();
    model.cost.validate(d);
    ResponseDerivative out;
    switch (model.kind) {
        case ResponseKind::Numeric:
            throw ValidationError("numeric responses have no parameter derivative");
        case ResponseKind::ClosedForm: {
            const TaylorExpansion q = taylor_expand(policy, x, model.order);
            const Matrix grad_jac = policy.param_jacobian(ParamQuantity::InputGradient, x).matrix;
            BestResponse r;
            if (!q.has_hessian()) {
                r = best_respond_closed(q, model.cost, response_box(policy));
                out.jacobian = model.cost.mask.asDiagonal() * grad_jac / (2.0 * model.cost.scale);
            } else {
                const auto idx = improvable_indices(model.cost.mask);
                Vector delta;
                try {
                    delta = second_order_step(q.gradient(), q.hessian(), model.cost);
                } catch (const UnboundedResponseError&) {
                    BestResponse fb = best_respond_numeric(q, model.cost, response_box(policy), model.numeric);
                    out.x_star = fb.x_star;
                    out.jacobian = Matrix::Zero(d, p);
                    return out;
                }
                r = finish(x + delta, response_box(policy));
                // d delta_I = M^{-1} (d g_I + d H_II delta_I), M = 2a I - H_II
                const Index m = static_cast<Index>(idx.size());
                const Matrix h = q.hessian();
                const Matrix hess_jac = policy.param_jacobian(ParamQuantity::InputHessian, x).matrix;
                Matrix system(m, m);
                Matrix rhs = Matrix::Zero(m, p);
                for (Index a = 0; a < m; ++a) {
                    rhs.row(a) = grad_jac.row(idx[a]);
                    for (Index b = 0; b < m; ++b) {
                        system(a, b) = (a == b ? 2.0 * model.cost.scale : 0.0) - h(idx[a], idx[b]);
                        rhs.row(a) += hess_jac.row(idx[a] * d + idx[b]) * delta[idx[b]];
                    }
                }
                out.jacobian = Matrix::Zero(d, p);
                const Matrix sol = m > 0 ? Matrix(system.llt().solve(rhs)) : Matrix(0, p);
                for (Index a = 0; a < m; ++a) {
                    out.jacobian.row(idx[a]) = sol.row(a);
                }
            }
            out.x_star = r.x_star;
            for (Index i = 0; i < d; ++i) {
                if (r.clamped[i]) {
                    out.jacobian.row(i).setZero();
                }
            }
            return out;
        }
        case ResponseKind::Learned: {
            require(model.learned != nullptr, "learned response model is missing");
            const LearnedResponse& net = *model.learned;
            const BestResponse r = respond_learned(model, policy, x);
            const Vector info = encode_information(policy, x, net.order());
            out.x_star = r.x_star;
            out.jacobian = net.info_jacobian(x, info) * information_param_jacobian(policy, x, net.order());
            for (Index i = 0; i < d; ++i) {
                if (r.clamped[i] || model.cost.mask[i] == 0.0) {
                    out.jacobian.row(i).setZero();
                }
            }
            return out;
        }
    }
    throw ValidationError("unknown response kind");
}

// ---------------------------------------------------------------------------
// Response datasets

ResponseRows build_response_dataset(const Matrix& samples, const std::vector<Policy>& policies, int order,
                                    const ResponseModel& oracle) {
    if (samples.rows() == 0 || policies.empty()) {
        throw ValidationError("response dataset needs at least one sample and one policy");
    }
    require(order == 1 || order == 2, "information level must be 1 or 2");
    const Index n = samples.rows();
    const Index d = samples.cols();
    const Index rows = n * static_cast<Index>(policies.size());
    ResponseRows out;
    out.order = order;
    out.x.resize(rows, d);
    out.info.resize(rows, information_width(d, order));
    out.x_star.resize(rows, d);
    Index r = 0;
    for (const auto& policy : policies) {
        require(policy.dim() == d, "policy dimension does not match samples");
        for (Index j = 0; j < n; ++j, ++r) {
            const Vector x = samples.row(j).transpose();
            out.x.row(r) = x.transpose();
            out.info.row(r) = encode_information(policy, x, order).transpose();
            out.x_star.row(r) = apply_response(oracle, policy, x).x_star.transpose();
        }
    }
    return out;
}

std::vector<Policy> random_linear_policies(std::size_t count, Index dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Policy> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Vector w(dim);
        for (Index k = 0; k < dim; ++k) {
            w[k] = normal(rng);
        }
        w.normalize();
        out.push_back(Policy::linear_sigmoid(w, normal(rng)));
    }
    return out;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

void write_response_csv(const ResponseRows& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw RuntimeFailure("cannot write '" + path + "'");
    }
    const Index d = rows.dim();
    const Index m = rows.info.cols();
    std::vector<std::string> header;
    for (Index i = 0; i < d; ++i) header.push_back("x_" + std::to_string(i + 1));
    for (Index i = 0; i < m; ++i) header.push_back("info_" + std::to_string(i + 1));
    for (Index i = 0; i < d; ++i) header.push_back("xstar_" + std::to_string(i + 1));
    for (std::size_t c = 0; c < header.size(); ++c) {
        out << (c ? "," : "") << header[c];
    }
    out << '\n';
    for (Index r = 0; r < rows.size(); ++r) {
        for (Index i = 0; i < d; ++i) out << fmt(rows.x(r, i)) << ',';
        for (Index i = 0; i < m; ++i) out << fmt(rows.info(r, i)) << ',';
        for (Index i = 0; i < d; ++i) out << fmt(rows.x_star(r, i)) << (i + 1 < d ? "," : "\n");
    }
}

ResponseRows read_response_csv(const std::string& path, int order) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open response rows '" + path + "'");
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw ValidationError("response rows file is empty");
    }
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    Index d = 0;
    Index m = 0;
    for (const auto& h : header) {
        if (h.rfind("x_", 0) == 0) ++d;
        if (h.rfind("info_", 0) == 0) ++m;
    }
    require(d > 0 && static_cast<Index>(header.size()) == 2 * d + m, "response rows header is malformed");
    require(m == information_width(d, order), "response rows information width does not match order");
    std::vector<std::vector<double>> values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || ptr != cell.data() + cell.size()) {
                throw ValidationError("non-numeric cell '" + cell + "' in response rows");
            }
            row.push_back(v);
        }
        require(static_cast<Index>(row.size()) == 2 * d + m, "response row has wrong width");
        values.push_back(std::move(row));
    }
    ResponseRows rows;
    rows.order = order;
    const Index n = static_cast<Index>(values.size());
    rows.x.resize(n, d);
    rows.info.resize(n, m);
    rows.x_star.resize(n, d);
    for (Index r = 0; r < n; ++r) {
        const auto& v = values[static_cast<std::size_t>(r)];
        for (Index i = 0; i < d; ++i) rows.x(r, i) = v[static_cast<std::size_t>(i)];
        for (Index i = 0; i < m; ++i) rows.info(r, i) = v[static_cast<std::size_t>(d + i)];
        for (Index i = 0; i < d; ++i) rows.x_star(r, i) = v[static_cast<std::size_t>(d + m + i)];
    }
    return rows;
}

ResponseErrorStats evaluate_learned_response(const LearnedResponse& model, const ResponseRows& rows) {
    ResponseErrorStats stats;
    if (rows.size() == 0) {
        return stats;
    }
    const Matrix pred = model.predict_batch(rows.x, rows.info);
    std::vector<double> rel;
    double sq = 0.0;
    for (Index r = 0; r < rows.size(); ++r) {
        const double err = (pred.row(r) - rows.x_star.row(r)).norm();
        const double move = (rows.x_star.row(r) - rows.x.row(r)).norm();
        stats.max_abs_error = std::max(stats.max_abs_error, (pred.row(r) - rows.x_star.row(r)).cwiseAbs().maxCoeff());
        sq += err * err;
        if (move > 1e-12) {
            rel.push_back(err / move);
        }
    }
    stats.mse = sq / static_cast<double>(rows.size() * rows.dim());
    stats.moving_rows = static_cast<Index>(rel.size());
    if (!rel.empty()) {
        const auto mid = rel.begin() + static_cast<std::ptrdiff_t>(rel.size() / 2);
        std::nth_element(rel.begin(), mid, rel.end());
        double median = *mid;
        if (rel.size() % 2 == 0) {
            median = 0.5 * (median + *std::max_element(rel.begin(), mid));
        }
        stats.median_relative_error = median;
    }
    return stats;
}

LearnedResponseFit train_learned_response(const ResponseRows& rows, const ResponseArch& arch,
                                          const ResponseTrainConfig& cfg) {
    if (rows.size() < 100) {
        throw ValidationError("learned response needs at least 100 rows, got " + std::to_string(rows.size()));
    }
    require(arch.hidden.size() == 2, "learned response needs two hidden layers");
    require(cfg.holdout_fraction >= 0.0 && cfg.holdout_fraction < 1.0, "holdout fraction must be in [0, 1)");
    const Index n = rows.size();
    const Index d = rows.dim();
    const Index m = rows.info.cols();
    require(m == information_width(d, rows.order), "response rows information width does not match order");

    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    const Index n_hold = static_cast<Index>(std::floor(cfg.holdout_fraction * static_cast<double>(n)));
    const Index n_fit = n - n_hold;

    auto take = [&](Index begin, Index count) {
        ResponseRows part;
        part.order = rows.order;
        part.x.resize(count, d);
        part.info.resize(count, m);
        part.x_star.resize(count, d);
        for (Index r = 0; r < count; ++r) {
            const Index src = perm[static_cast<std::size_t>(begin + r)];
            part.x.row(r) = rows.x.row(src);
            part.info.row(r) = rows.info.row(src);
            part.x_star.row(r) = rows.x_star.row(src);
        }
        return part;
    };
    const ResponseRows fit_rows = take(0, n_fit);
    const ResponseRows hold_rows = take(n_fit, n_hold);

    Matrix inputs(n_fit, d + m);
    inputs << fit_rows.x, fit_rows.info;
    const Matrix moves = fit_rows.x_star - fit_rows.x;

    Vector in_offset = inputs.colwise().mean().transpose();
    Vector in_scale(d + m);
    for (Index c = 0; c < d + m; ++c) {
        const double var = (inputs.col(c).array() - in_offset[c]).square().mean();
        in_scale[c] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
    Vector out_scale(d);
    for (Index c = 0; c < d; ++c) {
        const double rms = std::sqrt(moves.col(c).array().square().mean());
        out_scale[c] = rms > 1e-12 ? rms : 1.0;
    }
    const Matrix std_inputs = (inputs.rowwise() - in_offset.transpose()).array().rowwise() / in_scale.transpose().array();
    const Matrix std_targets = moves.array().rowwise() / out_scale.transpose().array();

    std::vector<int> widths{static_cast<int>(d + m), arch.hidden[0], arch.hidden[1], static_cast<int>(d)};
    Mlp net = Mlp::random(widths, arch.activation, Activation::Identity, cfg.seed);
    Vector theta = net.params();
    Adam adam(theta.size());
    std::vector<Index> order(static_cast<std::size_t>(n_fit));
    std::iota(order.begin(), order.end(), Index{0});
    const Index batch = std::min<Index>(cfg.batch_size, n_fit);
    const int total_steps = cfg.epochs * static_cast<int>((n_fit + batch - 1) / batch);
    int step = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (Index start = 0; start < n_fit; start += batch) {
            const Index b = std::min(batch, n_fit - start);
            Matrix xb(b, d + m);
            Matrix yb(b, d);
            for (Index r = 0; r < b; ++r) {
                xb.row(r) = std_inputs.row(order[static_cast<std::size_t>(start + r)]);
                yb.row(r) = std_targets.row(order[static_cast<std::size_t>(start + r)]);
            }
            const Matrix pred = net.forward_batch(xb);
            const Matrix dout = 2.0 * (pred - yb) / static_cast<double>(b * d);
            // cosine-decayed step size
            const double lr = cfg.learning_rate * 0.5 *
                              (1.0 + std::cos(3.141592653589793 * step / std::max(1, total_steps)));
            adam.step(theta, net.param_gradient_batch(xb, dout), lr);
            net.set_params(theta);
            ++step;
        }
    }

    LearnedResponseFit fit;
    fit.model = LearnedResponse(std::move(net), rows.order, d, in_offset, in_scale, out_scale);
    fit.train = evaluate_learned_response(fit.model, fit_rows);
    fit.heldout = evaluate_learned_response(fit.model, hold_rows);
    return fit;
}

}  // namespace stwf
