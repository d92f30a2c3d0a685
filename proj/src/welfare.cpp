#include "stwf/welfare.hpp"

#include <limits>
#include <sstream>

namespace stwf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_nonempty(const Dataset& data) {
    if (data.empty()) {
        throw ValidationError("welfare metrics need a non-empty dataset");
    }
}

double gap(double a, double b) { return std::isnan(a) || std::isnan(b) ? kNaN : std::abs(a - b); }

double ratio(double num, double den) { return den > 0 ? num / den : kNaN; }

// Linear-sigmoid policy with first-order closed-form responses: the whole
// batch in matrix form. Agrees with the per-sample path up to rounding.
bool has_linear_fast_path(const Policy& policy, const ResponseModel& resp) {
    return policy.kind() == PolicyKind::LinearSigmoid && resp.kind == ResponseKind::ClosedForm && resp.order == 1;
}

LossBreakdown linear_composite_loss(const Policy& policy, const Matrix& features, const Eigen::VectorXi& labels,
                                    const LabelingModel& h, const ResponseModel& resp, const LossWeights& weights,
                                    bool with_gradient, bool swf_active) {
    const Index n = features.rows();
    const Index d = features.cols();
    resp.cost.validate(d);
    const Vector w = policy.params().head(d);
    const double b = policy.params()[d];
    const Vector mask = resp.cost.mask;
    const double inv2a = 1.0 / (2.0 * resp.cost.scale);
    const Box& box = policy.domain();

    const Vector u = (features * w).array() + b;
    const Vector s = u.unaryExpr([](double v) { return sigmoid(v); });
    const Vector s1 = s.array() * (1.0 - s.array());
    const Vector step = mask.cwiseProduct(w) * inv2a;
    Matrix raw = features + s1 * step.transpose();
    Matrix x_star = raw;
    for (Index j = 0; j < d; ++j) {
        x_star.col(j) = raw.col(j).cwiseMax(box.lo[j]).cwiseMin(box.hi[j]);
    }
    const Vector h_before = h.eval_batch(features);
    const Vector h_after = h.eval_batch(x_star);

    LossBreakdown out;
    out.components = weights.components;
    Vector coef_dw = Vector::Zero(n);   // d loss / d u per sample
    Vector coef_aw = Vector::Zero(n);
    Vector resp_weight = Vector::Zero(n);  // multiplies d h(x*) / d theta
    const double nn = static_cast<double>(n);
    for (Index i = 0; i < n; ++i) {
        const double y = labels[i];
        const double f = s[i];
        const double fc = clip_probability(f);
        out.l_dw -= y * std::log(fc) + (1.0 - y) * std::log(1.0 - fc);
        const bool underestimated = f < h_before[i];
        if (underestimated) {
            out.l_aw -= std::log(fc);
            ++out.n_aw;
        }
        const double hc = clip_probability(h_after[i]);
        const double imp_term = -std::log(hc);
        out.l_imp += imp_term;
        const bool deteriorated = h_after[i] < h_before[i];
        if (deteriorated) {
            out.l_sf += imp_term;
            ++out.n_sf;
        }
        if (!with_gradient) {
            continue;
        }
        if (fc == f) {
            // df/du = s1
            coef_dw[i] = (-(y / f) + (1.0 - y) / (1.0 - f)) * s1[i];
            if (underestimated) {
                coef_aw[i] = -s1[i] / f;
            }
        }
        if (swf_active && hc == h_after[i]) {
            double c = 0.0;
            if (weights.components.imp) c -= 1.0 / h_after[i];
            if (weights.components.sf && deteriorated) c -= 1.0 / h_after[i];
            resp_weight[i] = c;
        }
    }
    out.l_dw /= nn;
    out.l_imp /= nn;
    out.l_sf /= nn;
    out.l_aw /= nn;
    const double swf = (weights.components.imp ? out.l_imp : 0.0) + (weights.components.sf ? out.l_sf : 0.0);
    out.total = out.l_dw + weights.lambda1 * swf + weights.lambda2 * out.l_aw;
    if (!with_gradient) {
        return out;
    }

    Vector du = coef_dw;
    if (weights.lambda2 > 0.0) {
        du += weights.lambda2 * coef_aw;
    }
    out.grad = Vector::Zero(d + 1);
    out.grad.head(d) = features.transpose() * du;
    out.grad[d] = du.sum();
    if (swf_active) {
        // d x*_j / d w_k = step_j-like terms: mask_j/(2a) (delta_jk s1 + w_j s2 x_k)
        Matrix gh = h.gradient_batch(x_star);
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < d; ++j) {
                if (raw(i, j) < box.lo[j] || raw(i, j) > box.hi[j]) {
                    gh(i, j) = 0.0;
                }
            }
        }
        const Matrix v = gh * (mask * inv2a).asDiagonal();
        const Vector s2 = s1.array() * (1.0 - 2.0 * s.array());
        const Vector vw = v * w;
        const Vector a1 = weights.lambda1 * resp_weight.cwiseProduct(s1);
        const Vector a2 = weights.lambda1 * resp_weight.cwiseProduct(s2).cwiseProduct(vw);
        out.grad.head(d) += v.transpose() * a1 + features.transpose() * a2;
        out.grad[d] += a2.sum();
    }
    out.grad /= nn;
    return out;
}

}  // namespace

double decision_welfare(const Policy& policy, const Dataset& data) {
    require_nonempty(data);
    const Vector scores = policy.eval_batch(data.features());
    Index correct = 0;
    for (Index i = 0; i < data.size(); ++i) {
        correct += decide(scores[i]) == data.labels()[i];
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

double agent_welfare(const Policy& policy, const Dataset& data, const LabelingModel& h) {
    require_nonempty(data);
    const Vector f = policy.eval_batch(data.features());
    const Vector q = h.eval_batch(data.features());
    double sum = 0.0;
    for (Index i = 0; i < data.size(); ++i) {
        sum += std::min(f[i] - q[i], 0.0);
    }
    return sum / static_cast<double>(data.size());
}

WelfareReport welfare_report(const Policy& policy, const Dataset& data, const LabelingModel& h,
                             const Matrix& responses) {
    require_nonempty(data);
    require(responses.rows() == data.size() && responses.cols() == data.dim(), "responses do not match data");
    const Index n = data.size();
    const Vector f = policy.eval_batch(data.features());
    const Vector h_before = h.eval_batch(data.features());
    const Vector h_after = h.eval_batch(responses);
    WelfareReport r;
    double correct = 0.0;
    double imp = 0.0;
    double sf = 0.0;
    double aw = 0.0;
    for (Index i = 0; i < n; ++i) {
        correct += decide(f[i]) == data.labels()[i] ? 1.0 : 0.0;
        const double change = h_after[i] - h_before[i];
        imp += change;
        if (change < 0.0) {
            sf += change;
            ++r.n_deteriorated;
        }
        if (f[i] < h_before[i]) {
            aw += f[i] - h_before[i];
            ++r.n_underestimated;
        }
    }
    const double nn = static_cast<double>(n);
    r.dw = correct / nn;
    r.imp = imp / nn;
    r.sf = sf / nn;
    r.aw = aw / nn;
    r.swf = r.imp + r.sf;
    r.total = r.dw + r.swf + r.aw;
    return r;
}

WelfareReport welfare_report(const Policy& policy, const Dataset& data, const LabelingModel& h,
                             const ResponseModel& resp) {
    require_nonempty(data);
    return welfare_report(policy, data, h, apply_response_batch(resp, policy, data.features()));
}

double improvement(const Policy& policy, const Dataset& data, const LabelingModel& h, const ResponseModel& resp) {
    return welfare_report(policy, data, h, resp).imp;
}

double safety(const Policy& policy, const Dataset& data, const LabelingModel& h, const ResponseModel& resp) {
    return welfare_report(policy, data, h, resp).sf;
}

FairnessReport fairness_report(const Policy& policy, const Dataset& data, const Matrix& responses) {
    require_nonempty(data);
    if (!data.has_groups()) {
        throw ValidationError("fairness report needs a group attribute");
    }
    require(responses.rows() == data.size() && responses.cols() == data.dim(), "responses do not match data");
    const Vector f = policy.eval_batch(data.features());
    const Vector f_after = policy.eval_batch(responses);
    // counts per group
    std::array<double, 2> n{}, below{}, crossed{}, accepted{}, qualified{}, qualified_accepted{};
    for (Index i = 0; i < data.size(); ++i) {
        const int z = data.groups()[i];
        const bool pos = decide(f[i]) == 1;
        const bool pos_after = decide(f_after[i]) == 1;
        n[z] += 1;
        if (!pos) {
            below[z] += 1;
            if (pos_after) {
                crossed[z] += 1;
            }
        }
        if (pos) {
            accepted[z] += 1;
        }
        if (data.labels()[i] == 1) {
            qualified[z] += 1;
            if (pos) {
                qualified_accepted[z] += 1;
            }
        }
    }
    FairnessReport r;
    for (int z = 0; z < 2; ++z) {
        r.ei_rate[z] = ratio(crossed[z], below[z]);
        r.be_rate[z] = ratio(crossed[z], n[z]);
        r.dp_rate[z] = ratio(accepted[z], n[z]);
        r.eo_rate[z] = ratio(qualified_accepted[z], qualified[z]);
    }
    r.ei_gap = gap(r.ei_rate[0], r.ei_rate[1]);
    r.be_gap = gap(r.be_rate[0], r.be_rate[1]);
    r.dp_gap = gap(r.dp_rate[0], r.dp_rate[1]);
    r.eo_gap = gap(r.eo_rate[0], r.eo_rate[1]);
    return r;
}

FairnessReport fairness_report(const Policy& policy, const Dataset& data, const ResponseModel& resp) {
    require_nonempty(data);
    return fairness_report(policy, data, apply_response_batch(resp, policy, data.features()));
}

std::string SwfComponents::to_string() const {
    if (imp && sf) return "imp,sf";
    if (imp) return "imp";
    if (sf) return "sf";
    return "none";
}

SwfComponents SwfComponents::parse(const std::string& text) {
    SwfComponents c{false, false};
    if (text == "none") {
        return c;
    }
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        if (part == "imp" || part == "IMP") {
            c.imp = true;
        } else if (part == "sf" || part == "SF") {
            c.sf = true;
        } else {
            throw ValidationError("unknown social-welfare component '" + part + "'");
        }
    }
    return c;
}

LossBreakdown composite_loss(const Policy& policy, const Matrix& features, const Eigen::VectorXi& labels,
                             const LabelingModel& h, const ResponseModel& resp, const LossWeights& weights,
                             bool with_gradient) {
    if (weights.lambda1 < 0.0 || weights.lambda2 < 0.0) {
        throw ValidationError("lambda1 and lambda2 must be non-negative");
    }
    const Index n = features.rows();
    require(n > 0, "loss needs a non-empty batch");
    require(labels.size() == n, "labels do not match batch");
    require(features.cols() == policy.dim() && h.dim() == policy.dim(), "feature dimension mismatch");

    const Index p = policy.num_params();
    const bool swf_active = weights.lambda1 > 0.0 && (weights.components.imp || weights.components.sf);
    const bool need_response_grad = with_gradient && swf_active;
    if (need_response_grad && resp.kind == ResponseKind::Numeric) {
        throw ValidationError("numeric responses have no parameter derivative; use closed or learned responses");
    }

    if (has_linear_fast_path(policy, resp)) {
        return linear_composite_loss(policy, features, labels, h, resp, weights, with_gradient, swf_active);
    }

    LossBreakdown out;
    out.components = weights.components;
    Vector g_dw = Vector::Zero(p);
    Vector g_imp = Vector::Zero(p);
    Vector g_sf = Vector::Zero(p);
    Vector g_aw = Vector::Zero(p);

    for (Index i = 0; i < n; ++i) {
        const Vector x = features.row(i).transpose();
        const double y = labels[i];
        const double f = policy.eval(x);
        const double fc = clip_probability(f);
        const bool f_inside = fc == f;
        const double h_before = h.eval(x);

        out.l_dw -= y * std::log(fc) + (1.0 - y) * std::log(1.0 - fc);
        const bool underestimated = f < h_before;
        if (underestimated) {
            out.l_aw -= std::log(fc);
            ++out.n_aw;
        }

        Vector x_star;
        Matrix x_star_jac;
        if (need_response_grad) {
            ResponseDerivative rd = respond_with_jacobian(resp, policy, x);
            x_star = std::move(rd.x_star);
            x_star_jac = std::move(rd.jacobian);
        } else {
            x_star = apply_response(resp, policy, x).x_star;
        }
        const double h_after = h.eval(x_star);
        const double hc = clip_probability(h_after);
        const double imp_term = -std::log(hc);
        out.l_imp += imp_term;
        const bool deteriorated = h_after < h_before;
        if (deteriorated) {
            out.l_sf += imp_term;
            ++out.n_sf;
        }

        if (!with_gradient) {
            continue;
        }
        if (f_inside) {
            const Vector df = policy.param_jacobian(ParamQuantity::Value, x).matrix.row(0).transpose();
            g_dw += (-(y / f) + (1.0 - y) / (1.0 - f)) * df;
            if (underestimated) {
                g_aw -= df / f;
            }
        }
        if (need_response_grad && hc == h_after) {
            const Vector dh = x_star_jac.transpose() * h.gradient(x_star);
            g_imp -= dh / h_after;
            if (deteriorated) {
                g_sf -= dh / h_after;
            }
        }
    }

    const double nn = static_cast<double>(n);
    out.l_dw /= nn;
    out.l_imp /= nn;
    out.l_sf /= nn;
    out.l_aw /= nn;
    const double swf = (weights.components.imp ? out.l_imp : 0.0) + (weights.components.sf ? out.l_sf : 0.0);
    out.total = out.l_dw + weights.lambda1 * swf + weights.lambda2 * out.l_aw;
    if (with_gradient) {
        out.grad = g_dw / nn;
        if (swf_active) {
            Vector g_swf = Vector::Zero(p);
            if (weights.components.imp) g_swf += g_imp;
            if (weights.components.sf) g_swf += g_sf;
            out.grad += weights.lambda1 * g_swf / nn;
        }
        if (weights.lambda2 > 0.0) {
            out.grad += weights.lambda2 * g_aw / nn;
        }
    }
    return out;
}

PenaltyValue fairness_penalty(const Policy& policy, const Matrix& features, const Eigen::VectorXi& groups,
                              const ResponseModel& resp, FairnessPenalty kind, double temperature) {
    require(temperature > 0.0, "surrogate temperature must be positive");
    require(groups.size() == features.rows(), "groups do not match batch");
    const Index n = features.rows();
    const Index p = policy.num_params();
    PenaltyValue out;
    out.grad = Vector::Zero(p);

    std::array<double, 2> num{}, den{};
    std::array<Vector, 2> dnum{Vector::Zero(p), Vector::Zero(p)};
    std::array<Vector, 2> dden{Vector::Zero(p), Vector::Zero(p)};
    std::array<Index, 2> count{};
    for (Index i = 0; i < n; ++i) {
        const int z = groups[i];
        ++count[z];
        const Vector x = features.row(i).transpose();
        const ResponseDerivative rd = respond_with_jacobian(resp, policy, x);
        const double f = policy.eval(x);
        const double f_after = policy.eval(rd.x_star);
        const double below = sigmoid((0.5 - f) / temperature);
        const double crossed = sigmoid((f_after - 0.5) / temperature);
        const Vector df = policy.param_jacobian(ParamQuantity::Value, x).matrix.row(0).transpose();
        const Vector df_after = policy.param_jacobian(ParamQuantity::Value, rd.x_star).matrix.row(0).transpose() +
                                rd.jacobian.transpose() * policy.gradient(rd.x_star);
        const Vector d_below = -below * (1.0 - below) / temperature * df;
        const Vector d_crossed = crossed * (1.0 - crossed) / temperature * df_after;
        num[z] += below * crossed;
        dnum[z] += d_below * crossed + below * d_crossed;
        if (kind == FairnessPenalty::EqualImprovability) {
            den[z] += below;
            dden[z] += d_below;
        }
    }
    if (count[0] == 0 || count[1] == 0) {
        return out;
    }
    if (kind == FairnessPenalty::BoundedEffort) {
        for (int z = 0; z < 2; ++z) {
            den[z] = static_cast<double>(count[z]);
        }
    }
    if (den[0] <= 0.0 || den[1] <= 0.0) {
        return out;
    }
    std::array<double, 2> rate{};
    std::array<Vector, 2> drate;
    for (int z = 0; z < 2; ++z) {
        rate[z] = num[z] / den[z];
        drate[z] = (dnum[z] * den[z] - num[z] * dden[z]) / (den[z] * den[z]);
    }
    out.gap = rate[0] - rate[1];
    out.value = out.gap * out.gap;
    out.grad = 2.0 * out.gap * (drate[0] - drate[1]);
    return out;
}

}  // namespace stwf
