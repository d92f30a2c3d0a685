#ifndef STWF_MODELS_HPP
#define STWF_MODELS_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stwf/common.hpp"
#include "stwf/mlp.hpp"
#include "stwf/polynomial.hpp"

namespace stwf {

enum class PolicyKind { LinearSigmoid, LinearRaw, Polynomial };

std::string to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(const std::string& name);

/// Which quantity a parameter Jacobian differentiates.
enum class ParamQuantity {
    Value,          // f(x): 1 row
    InputGradient,  // grad_x f(x): d rows
    InputHessian,   // hess_x f(x), row-major flattened: d*d rows
};

struct ParamJacobian {
    ParamQuantity quantity = ParamQuantity::Value;
    Matrix matrix;  // quantity size x number of parameters
};

/*
 * Scoring policy f(x) with exact derivatives in x (orders 1 and 2) and in
 * its parameters.
 *
 * Parameter layouts:
 *  - linear kinds: [w_1 .. w_d, b]
 *  - polynomial:   one coefficient per term of MonomialBasis(d, order)
 *
 * The domain box is carried for the response model; evaluation itself is
 * defined on all of R^d.
 */
class Policy {
public:
    Policy() = default;

    static Policy linear_sigmoid(Vector weights, double bias);
    static Policy linear_raw(Vector weights, double bias);
    static Policy polynomial(int dim, int order, Vector coefficients);
    /// All-zero parameters of the given kind.
    static Policy zeros(PolicyKind kind, Index dim, int order = 1);

    PolicyKind kind() const { return kind_; }
    Index dim() const { return dim_; }
    /// Polynomial degree; 1 for linear-raw, 0 for sigmoid (not a polynomial).
    int order() const { return order_; }
    bool is_polynomial() const { return kind_ != PolicyKind::LinearSigmoid; }
    Index num_params() const { return params_.size(); }
    const Vector& params() const { return params_; }
    void set_params(const Vector& theta);
    const Box& domain() const { return domain_; }
    void set_domain(Box box);
    const MonomialBasis& basis() const { return basis_; }

    double eval(const Vector& x) const;
    Vector gradient(const Vector& x) const;
    Matrix hessian(const Vector& x) const;
    ParamJacobian param_jacobian(ParamQuantity quantity, const Vector& x) const;

    /// Scores for every row of `inputs` (n x d).
    Vector eval_batch(const Matrix& inputs) const;

private:
    void check_input(const Vector& x) const;

    PolicyKind kind_ = PolicyKind::LinearSigmoid;
    Index dim_ = 0;
    int order_ = 0;
    Vector params_;
    Box domain_;
    MonomialBasis basis_;
};

double eval_policy(const Policy& policy, const Vector& x);
/// Order 1 returns a d x 1 gradient, order 2 the d x d Hessian.
Matrix grad_policy(const Policy& policy, const Vector& x, int order);
ParamJacobian param_jacobian(const Policy& policy, ParamQuantity quantity, const Vector& x);

/// D(x) = 1(score >= threshold).
inline int decide(double score, double threshold = 0.5) { return score >= threshold ? 1 : 0; }
inline int decide(const Policy& policy, const Vector& x, double threshold = 0.5) {
    return decide(policy.eval(x), threshold);
}

enum class LabelerKind { ClosedPolynomial, Mlp };

std::string to_string(LabelerKind kind);

/*
 * Ground-truth qualification h(x) in [0, 1].
 *
 * Closed form: h = clamp(q(x), 0, 1) for a polynomial q over
 * MonomialBasis(d, order); the gradient is zero wherever the clamp is active.
 * MLP: three dense layers with a sigmoid output.
 */
class LabelingModel {
public:
    LabelingModel() = default;

    static LabelingModel closed_polynomial(int dim, int order, Vector coefficients);
    static LabelingModel closed_quadratic(int dim, Vector coefficients) {
        return closed_polynomial(dim, 2, std::move(coefficients));
    }
    static LabelingModel mlp(Mlp net);

    LabelerKind kind() const { return kind_; }
    Index dim() const { return dim_; }
    Vector params() const;
    const Mlp& network() const { return net_; }
    const MonomialBasis& basis() const { return basis_; }
    int order() const { return basis_.order(); }
    /// Hidden activation (MLP) or identity (closed form).
    Activation activation() const;

    double eval(const Vector& x) const;
    Vector gradient(const Vector& x) const;
    /// Closed form only.
    Matrix hessian(const Vector& x) const;
    /// True where the closed form is clamped to 0 or 1.
    bool clamped(const Vector& x) const;

    Vector eval_batch(const Matrix& inputs) const;
    Matrix gradient_batch(const Matrix& inputs) const;

private:
    double raw_polynomial(const Vector& x) const;

    LabelerKind kind_ = LabelerKind::ClosedPolynomial;
    Index dim_ = 0;
    MonomialBasis basis_;
    Vector coefficients_;
    Mlp net_;
};

struct MlpSpec {
    std::vector<int> hidden = {32, 32};
    Activation activation = Activation::Relu;
};

struct LabelerTrainConfig {
    int epochs = 60;
    int batch_size = 64;
    double learning_rate = 0.01;
    std::uint64_t seed = 0;
};

struct LabelerFit {
    LabelingModel model;
    std::vector<double> epoch_loss;  // mean cross-entropy per epoch
    bool single_class = false;
};

/// Fits an MLP labeler by minibatch cross-entropy with adaptive moments.
LabelerFit train_labeler(const Matrix& features, const Eigen::VectorXi& labels, const MlpSpec& arch,
                         const LabelerTrainConfig& cfg);

/// Type-erased scalar field with derivatives up to `max_order` (1 or 2).
struct SmoothFunction {
    Index dim = 0;
    int max_order = 2;
    std::function<double(const Vector&)> value;
    std::function<Vector(const Vector&)> gradient;
    std::function<Matrix(const Vector&)> hessian;
};

SmoothFunction as_smooth(const Policy& policy);
SmoothFunction as_smooth(const LabelingModel& labeler);

}  // namespace stwf

#endif  // STWF_MODELS_HPP
