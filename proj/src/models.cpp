#include "stwf/models.hpp"

#include <algorithm>
#include <iostream>
#include <numeric>
#include <random>

namespace stwf {

std::string to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::LinearSigmoid: return "linear-sigmoid";
        case PolicyKind::LinearRaw: return "linear-raw";
        case PolicyKind::Polynomial: return "polynomial";
    }
    return "linear-sigmoid";
}

PolicyKind policy_kind_from_string(const std::string& name) {
    if (name == "linear-sigmoid") return PolicyKind::LinearSigmoid;
    if (name == "linear-raw") return PolicyKind::LinearRaw;
    if (name == "polynomial") return PolicyKind::Polynomial;
    throw ValidationError("unknown policy kind '" + name + "'");
}

std::string to_string(LabelerKind kind) {
    return kind == LabelerKind::ClosedPolynomial ? "closed-polynomial" : "mlp";
}

// ---------------------------------------------------------------------------
// Policy

Policy Policy::linear_sigmoid(Vector weights, double bias) {
    require(weights.size() > 0, "policy needs at least one feature");
    Policy p;
    p.kind_ = PolicyKind::LinearSigmoid;
    p.dim_ = weights.size();
    p.order_ = 0;
    p.params_.resize(p.dim_ + 1);
    p.params_ << weights, bias;
    p.domain_ = Box::unbounded(p.dim_);
    return p;
}

Policy Policy::linear_raw(Vector weights, double bias) {
    Policy p = linear_sigmoid(std::move(weights), bias);
    p.kind_ = PolicyKind::LinearRaw;
    p.order_ = 1;
    return p;
}

Policy Policy::polynomial(int dim, int order, Vector coefficients) {
    Policy p;
    p.kind_ = PolicyKind::Polynomial;
    p.dim_ = dim;
    p.order_ = order;
    p.basis_ = MonomialBasis(dim, order);
    require(coefficients.size() == p.basis_.size(),
            "polynomial needs " + std::to_string(p.basis_.size()) + " coefficients");
    p.params_ = std::move(coefficients);
    p.domain_ = Box::unbounded(dim);
    return p;
}

Policy Policy::zeros(PolicyKind kind, Index dim, int order) {
    switch (kind) {
        case PolicyKind::LinearSigmoid: return linear_sigmoid(Vector::Zero(dim), 0.0);
        case PolicyKind::LinearRaw: return linear_raw(Vector::Zero(dim), 0.0);
        case PolicyKind::Polynomial:
            return polynomial(static_cast<int>(dim), order,
                              Vector::Zero(MonomialBasis(static_cast<int>(dim), order).size()));
    }
    return linear_sigmoid(Vector::Zero(dim), 0.0);
}

void Policy::set_params(const Vector& theta) {
    require(theta.size() == params_.size(), "policy parameter vector has wrong length");
    params_ = theta;
}

void Policy::set_domain(Box box) {
    require(box.dim() == dim_ && box.hi.size() == dim_, "domain box dimension mismatch");
    require((box.lo.array() <= box.hi.array()).all(), "domain box has lo > hi");
    domain_ = std::move(box);
}

void Policy::check_input(const Vector& x) const {
    require_dim(x, dim_, "policy input");
    require_finite(x, "policy input");
}

double Policy::eval(const Vector& x) const {
    check_input(x);
    switch (kind_) {
        case PolicyKind::LinearSigmoid:
            return sigmoid(params_.head(dim_).dot(x) + params_[dim_]);
        case PolicyKind::LinearRaw:
            return params_.head(dim_).dot(x) + params_[dim_];
        case PolicyKind::Polynomial:
            return params_.dot(basis_.values(x));
    }
    return 0.0;
}

Vector Policy::gradient(const Vector& x) const {
    check_input(x);
    switch (kind_) {
        case PolicyKind::LinearSigmoid: {
            const double s = sigmoid(params_.head(dim_).dot(x) + params_[dim_]);
            return s * (1.0 - s) * params_.head(dim_);
        }
        case PolicyKind::LinearRaw:
            return params_.head(dim_);
        case PolicyKind::Polynomial:
            return basis_.gradients(x) * params_;
    }
    return {};
}

Matrix Policy::hessian(const Vector& x) const {
    check_input(x);
    switch (kind_) {
        case PolicyKind::LinearSigmoid: {
            const double s = sigmoid(params_.head(dim_).dot(x) + params_[dim_]);
            const double curv = s * (1.0 - s) * (1.0 - 2.0 * s);
            const Vector w = params_.head(dim_);
            return curv * w * w.transpose();
        }
        case PolicyKind::LinearRaw:
            return Matrix::Zero(dim_, dim_);
        case PolicyKind::Polynomial: {
            const Vector flat = basis_.hessians(x) * params_;
            return Eigen::Map<const RowMatrix>(flat.data(), dim_, dim_);
        }
    }
    return {};
}

ParamJacobian Policy::param_jacobian(ParamQuantity quantity, const Vector& x) const {
    check_input(x);
    const Index d = dim_;
    ParamJacobian out{quantity, {}};
    if (kind_ == PolicyKind::Polynomial) {
        switch (quantity) {
            case ParamQuantity::Value: out.matrix = basis_.values(x).transpose(); break;
            case ParamQuantity::InputGradient: out.matrix = basis_.gradients(x); break;
            case ParamQuantity::InputHessian: out.matrix = basis_.hessians(x); break;
        }
        return out;
    }

    Vector ext(d + 1);
    ext << x, 1.0;
    if (kind_ == PolicyKind::LinearRaw) {
        switch (quantity) {
            case ParamQuantity::Value: out.matrix = ext.transpose(); break;
            case ParamQuantity::InputGradient:
                out.matrix = Matrix::Zero(d, d + 1);
                out.matrix.leftCols(d).setIdentity();
                break;
            case ParamQuantity::InputHessian: out.matrix = Matrix::Zero(d * d, d + 1); break;
        }
        return out;
    }

    // Linear-sigmoid: derivatives of s = sigmoid(u), u = w.x + b.
    const Vector w = params_.head(d);
    const double s = sigmoid(w.dot(x) + params_[d]);
    const double s1 = s * (1.0 - s);                      // ds/du
    const double s2 = s1 * (1.0 - 2.0 * s);                // d^2s/du^2
    const double s3 = s1 * (1.0 - 6.0 * s + 6.0 * s * s);  // d^3s/du^3
    switch (quantity) {
        case ParamQuantity::Value: out.matrix = s1 * ext.transpose(); break;
        case ParamQuantity::InputGradient:
            // d(s1 w_i)/d theta_k = s2 w_i ext_k + s1 [k == i]
            out.matrix = s2 * w * ext.transpose();
            out.matrix.leftCols(d).diagonal().array() += s1;
            break;
        case ParamQuantity::InputHessian:
            // d(s2 w_i w_j)/d theta_k = s3 w_i w_j ext_k + s2 ([k==i] w_j + w_i [k==j])
            out.matrix.resize(d * d, d + 1);
            for (Index i = 0; i < d; ++i) {
                for (Index j = 0; j < d; ++j) {
                    auto row = out.matrix.row(i * d + j);
                    row = s3 * w[i] * w[j] * ext.transpose();
                    row[i] += s2 * w[j];
                    row[j] += s2 * w[i];
                }
            }
            break;
    }
    return out;
}

Vector Policy::eval_batch(const Matrix& inputs) const {
    require(inputs.cols() == dim_, "policy batch has wrong width");
    switch (kind_) {
        case PolicyKind::LinearSigmoid: {
            Vector u = inputs * params_.head(dim_);
            u.array() += params_[dim_];
            return u.unaryExpr([](double v) { return sigmoid(v); });
        }
        case PolicyKind::LinearRaw: {
            Vector u = inputs * params_.head(dim_);
            u.array() += params_[dim_];
            return u;
        }
        case PolicyKind::Polynomial: {
            return basis_.values_batch(inputs) * params_;
        }
    }
    return {};
}

double eval_policy(const Policy& policy, const Vector& x) { return policy.eval(x); }

Matrix grad_policy(const Policy& policy, const Vector& x, int order) {
    if (order == 1) {
        return policy.gradient(x);
    }
    if (order == 2) {
        return policy.hessian(x);
    }
    throw ValidationError("derivative order " + std::to_string(order) + " not supported (1 or 2)");
}

ParamJacobian param_jacobian(const Policy& policy, ParamQuantity quantity, const Vector& x) {
    return policy.param_jacobian(quantity, x);
}

// ---------------------------------------------------------------------------
// LabelingModel

LabelingModel LabelingModel::closed_polynomial(int dim, int order, Vector coefficients) {
    LabelingModel h;
    h.kind_ = LabelerKind::ClosedPolynomial;
    h.dim_ = dim;
    h.basis_ = MonomialBasis(dim, order);
    require(coefficients.size() == h.basis_.size(),
            "closed-form labeler needs " + std::to_string(h.basis_.size()) + " coefficients");
    h.coefficients_ = std::move(coefficients);
    return h;
}

LabelingModel LabelingModel::mlp(Mlp net) {
    require(net.layers().size() == 3, "MLP labeler must have exactly three layers");
    require(net.output_dim() == 1, "MLP labeler must have a scalar output");
    require(net.layers().back().activation == Activation::Sigmoid, "MLP labeler needs a sigmoid output");
    LabelingModel h;
    h.kind_ = LabelerKind::Mlp;
    h.dim_ = net.input_dim();
    h.net_ = std::move(net);
    return h;
}

Vector LabelingModel::params() const {
    return kind_ == LabelerKind::ClosedPolynomial ? coefficients_ : net_.params();
}

Activation LabelingModel::activation() const {
    return kind_ == LabelerKind::Mlp ? net_.layers().front().activation : Activation::Identity;
}

double LabelingModel::raw_polynomial(const Vector& x) const {
    return coefficients_.dot(basis_.values(x));
}

double LabelingModel::eval(const Vector& x) const {
    require_dim(x, dim_, "labeler input");
    if (kind_ == LabelerKind::ClosedPolynomial) {
        return std::clamp(raw_polynomial(x), 0.0, 1.0);
    }
    return net_.forward(x)[0];
}

bool LabelingModel::clamped(const Vector& x) const {
    if (kind_ != LabelerKind::ClosedPolynomial) {
        return false;
    }
    const double q = raw_polynomial(x);
    return q <= 0.0 || q >= 1.0;
}

Vector LabelingModel::gradient(const Vector& x) const {
    require_dim(x, dim_, "labeler input");
    if (kind_ == LabelerKind::ClosedPolynomial) {
        if (clamped(x)) {
            return Vector::Zero(dim_);
        }
        return basis_.gradients(x) * coefficients_;
    }
    return net_.input_jacobian(x).row(0).transpose();
}

Matrix LabelingModel::hessian(const Vector& x) const {
    require(kind_ == LabelerKind::ClosedPolynomial, "Hessian is only available for closed-form labelers");
    require_dim(x, dim_, "labeler input");
    if (clamped(x)) {
        return Matrix::Zero(dim_, dim_);
    }
    const Vector flat = basis_.hessians(x) * coefficients_;
    return Eigen::Map<const RowMatrix>(flat.data(), dim_, dim_);
}

Vector LabelingModel::eval_batch(const Matrix& inputs) const {
    require(inputs.cols() == dim_, "labeler batch has wrong width");
    if (kind_ == LabelerKind::Mlp) {
        return net_.forward_batch(inputs).col(0);
    }
    return (basis_.values_batch(inputs) * coefficients_).cwiseMax(0.0).cwiseMin(1.0);
}

Matrix LabelingModel::gradient_batch(const Matrix& inputs) const {
    require(inputs.cols() == dim_, "labeler batch has wrong width");
    if (kind_ == LabelerKind::Mlp) {
        return net_.input_gradient_batch(inputs);
    }
    const Vector q = basis_.values_batch(inputs) * coefficients_;
    Matrix out(inputs.rows(), dim_);
    for (int i = 0; i < dim_; ++i) {
        out.col(i) = basis_.partials_batch(inputs, i) * coefficients_;
    }
    for (Index r = 0; r < inputs.rows(); ++r) {
        if (q[r] <= 0.0 || q[r] >= 1.0) {
            out.row(r).setZero();
        }
    }
    return out;
}

LabelerFit train_labeler(const Matrix& features, const Eigen::VectorXi& labels, const MlpSpec& arch,
                         const LabelerTrainConfig& cfg) {
    const Index n = features.rows();
    if (n == 0) {
        throw ValidationError("cannot train a labeler on an empty dataset");
    }
    require(labels.size() == n, "labels and features disagree on sample count");
    require(arch.hidden.size() == 2, "MLP labeler needs two hidden layers");
    require(cfg.epochs > 0 && cfg.batch_size > 0 && cfg.learning_rate > 0, "invalid labeler training config");

    LabelerFit fit;
    const Index positives = labels.count();
    if (positives == 0 || positives == n) {
        fit.single_class = true;
        std::cerr << "warning: labeler training data has a single class\n";
    }

    std::vector<int> widths{static_cast<int>(features.cols()), arch.hidden[0], arch.hidden[1], 1};
    Mlp net = Mlp::random(widths, arch.activation, Activation::Sigmoid, cfg.seed);
    Vector theta = net.params();
    Adam adam(theta.size());

    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<Index> order(n);
    std::iota(order.begin(), order.end(), Index{0});
    const Index batch = std::min<Index>(cfg.batch_size, n);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        for (Index start = 0; start < n; start += batch) {
            const Index m = std::min(batch, n - start);
            Matrix xb(m, features.cols());
            Vector yb(m);
            for (Index r = 0; r < m; ++r) {
                xb.row(r) = features.row(order[start + r]);
                yb[r] = labels[order[start + r]];
            }
            const Vector p = net.forward_batch(xb).col(0);
            Matrix dout(m, 1);
            for (Index r = 0; r < m; ++r) {
                const double pc = clip_probability(p[r]);
                loss_sum -= yb[r] * std::log(pc) + (1.0 - yb[r]) * std::log(1.0 - pc);
                dout(r, 0) = (-(yb[r] / pc) + (1.0 - yb[r]) / (1.0 - pc)) / static_cast<double>(m);
            }
            const Vector grad = net.param_gradient_batch(xb, dout);
            adam.step(theta, grad, cfg.learning_rate);
            net.set_params(theta);
        }
        fit.epoch_loss.push_back(loss_sum / static_cast<double>(n));
    }
    fit.model = LabelingModel::mlp(std::move(net));
    return fit;
}

SmoothFunction as_smooth(const Policy& policy) {
    SmoothFunction f;
    f.dim = policy.dim();
    f.max_order = 2;
    f.value = [policy](const Vector& x) { return policy.eval(x); };
    f.gradient = [policy](const Vector& x) { return policy.gradient(x); };
    f.hessian = [policy](const Vector& x) { return policy.hessian(x); };
    return f;
}

SmoothFunction as_smooth(const LabelingModel& labeler) {
    SmoothFunction f;
    f.dim = labeler.dim();
    f.value = [labeler](const Vector& x) { return labeler.eval(x); };
    f.gradient = [labeler](const Vector& x) { return labeler.gradient(x); };
    if (labeler.kind() == LabelerKind::ClosedPolynomial) {
        f.max_order = 2;
        f.hessian = [labeler](const Vector& x) { return labeler.hessian(x); };
    } else {
        f.max_order = 1;
    }
    return f;
}

}  // namespace stwf
