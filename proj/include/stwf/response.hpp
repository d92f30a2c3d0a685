#ifndef STWF_RESPONSE_HPP
#define STWF_RESPONSE_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stwf/common.hpp"
#include "stwf/mlp.hpp"
#include "stwf/models.hpp"

namespace stwf {

/// c(x, x') = scale * || mask .* (x' - x) ||^2
struct CostModel {
    double scale = 1.0;
    Vector mask;  // 1 = improvable, 0 = frozen

    static CostModel quadratic(double scale, Index dim) { return {scale, Vector::Ones(dim)}; }

    double operator()(const Vector& x, const Vector& x_new) const {
        return scale * (mask.cwiseProduct(x_new - x)).squaredNorm();
    }
    void validate(Index dim) const;
};

/*
 * Order-K local estimate of f around a base point x:
 *
 *   Q(x') = f(x) + grad f(x) . (x' - x) [+ 1/2 (x' - x)^T H(x) (x' - x)]
 *
 * When the source exposes fewer derivative orders than requested, the
 * expansion stops at the highest available order.
 */
class TaylorExpansion {
public:
    TaylorExpansion(Vector base, int requested_order, double value, Vector gradient,
                    std::optional<Matrix> hessian);

    const Vector& base() const { return base_; }
    Index dim() const { return base_.size(); }
    int order() const { return hessian_ ? 2 : 1; }
    int requested_order() const { return requested_order_; }
    double value() const { return value_; }
    const Vector& gradient() const { return gradient_; }
    bool has_hessian() const { return hessian_.has_value(); }
    /// Zero matrix for first-order expansions.
    Matrix hessian() const;

    double operator()(const Vector& x) const;
    Vector gradient_at(const Vector& x) const;

private:
    Vector base_;
    int requested_order_;
    double value_;
    Vector gradient_;
    std::optional<Matrix> hessian_;
};

TaylorExpansion taylor_expand(const SmoothFunction& f, const Vector& x, int order);
TaylorExpansion taylor_expand(const Policy& policy, const Vector& x, int order);

/// Raised when a second-order estimate has no bounded maximiser.
class UnboundedResponseError : public RuntimeFailure {
public:
    using RuntimeFailure::RuntimeFailure;
};

struct BestResponse {
    Vector x_star;
    Eigen::Array<bool, Eigen::Dynamic, 1> clamped;  // coordinates held by the box
    bool converged = true;
    bool fallback = false;  // numeric solver replaced an unbounded closed form
};

/// Q(x') - c(x, x') with x the expansion's base point.
double response_objective(const TaylorExpansion& q, const CostModel& cost, const Vector& x_new);

BestResponse best_respond_closed(const TaylorExpansion& q, const CostModel& cost, const Box& box);

struct NumericOptions {
    double step_fraction = 0.05;  // initial step, as a fraction of the box width
    int max_iters = 500;
    int restarts = 4;
    double tolerance = 1e-8;  // on the projected gradient (sup norm)
    std::uint64_t seed = 0;
};

/// Projected gradient ascent with backtracking from x and from `restarts`
/// random points in the box; returns the best iterate found.
BestResponse best_respond_numeric(const TaylorExpansion& q, const CostModel& cost, const Box& box,
                                  const NumericOptions& opts = {});

/// I_K(f, x) = [f(x); grad f(x)] (+ row-major upper-triangular Hessian for K = 2).
Vector encode_information(const Policy& policy, const Vector& x, int order);
Index information_width(Index dim, int order);

/*
 * Regressor x* = x + scale .* net(standardised [x; I_K(f, x)]), trained on
 * response rows. Two hidden layers.
 */
class LearnedResponse {
public:
    LearnedResponse() = default;
    LearnedResponse(Mlp net, int order, Index dim, Vector in_offset, Vector in_scale, Vector out_scale);

    int order() const { return order_; }
    Index dim() const { return dim_; }
    Index info_width() const { return information_width(dim_, order_); }
    const Mlp& network() const { return net_; }
    const Vector& input_offset() const { return in_offset_; }
    const Vector& input_scale() const { return in_scale_; }
    const Vector& output_scale() const { return out_scale_; }

    /// Unclamped prediction of x*.
    Vector predict(const Vector& x, const Vector& info) const;
    Matrix predict_batch(const Matrix& xs, const Matrix& infos) const;
    /// d x info_width(): derivative of the prediction w.r.t. the information vector.
    Matrix info_jacobian(const Vector& x, const Vector& info) const;

private:
    Mlp net_;
    int order_ = 1;
    Index dim_ = 0;
    Vector in_offset_;
    Vector in_scale_;
    Vector out_scale_;
};

enum class ResponseKind { ClosedForm, Numeric, Learned };

std::string to_string(ResponseKind kind);
ResponseKind response_kind_from_string(const std::string& name);

struct ResponseModel {
    ResponseKind kind = ResponseKind::ClosedForm;
    int order = 1;
    CostModel cost;
    NumericOptions numeric;
    std::shared_ptr<const LearnedResponse> learned;
};

/// Agent response to `policy` at x, clamped to the policy's domain box and
/// with frozen coordinates left unchanged.
BestResponse apply_response(const ResponseModel& model, const Policy& policy, const Vector& x);
Matrix apply_response_batch(const ResponseModel& model, const Policy& policy, const Matrix& xs);

struct ResponseDerivative {
    Vector x_star;
    Matrix jacobian;  // d x num_params: d x* / d theta
};

/// Response together with its parameter Jacobian. Clamped and frozen
/// coordinates have zero rows; a numeric fallback contributes a zero
/// Jacobian. Throws ValidationError for the numeric kind.
ResponseDerivative respond_with_jacobian(const ResponseModel& model, const Policy& policy, const Vector& x);

/// Alg.-2 training rows: one per (policy, sample) pair, policy-major.
struct ResponseRows {
    int order = 1;
    Matrix x;       // rows x d
    Matrix info;    // rows x info width
    Matrix x_star;  // rows x d

    Index size() const { return x.rows(); }
    Index dim() const { return x.cols(); }
};

ResponseRows build_response_dataset(const Matrix& samples, const std::vector<Policy>& policies, int order,
                                    const ResponseModel& oracle);

/// Linear-sigmoid policies with unit-norm standard-normal weights and
/// standard-normal bias.
std::vector<Policy> random_linear_policies(std::size_t count, Index dim, std::uint64_t seed);

void write_response_csv(const ResponseRows& rows, const std::string& path);
ResponseRows read_response_csv(const std::string& path, int order);

struct ResponseArch {
    std::vector<int> hidden = {32, 32};
    Activation activation = Activation::Tanh;
};

struct ResponseTrainConfig {
    int epochs = 60;
    int batch_size = 128;
    double learning_rate = 3e-3;
    double holdout_fraction = 0.2;
    std::uint64_t seed = 0;
};

struct ResponseErrorStats {
    double median_relative_error = 0.0;  // ||pred - x*|| / ||x* - x|| over moving rows
    double max_abs_error = 0.0;
    double mse = 0.0;
    Index moving_rows = 0;
};

/// Prediction errors of `model` on `rows` (box clamping is not applied).
ResponseErrorStats evaluate_learned_response(const LearnedResponse& model, const ResponseRows& rows);

struct LearnedResponseFit {
    LearnedResponse model;
    ResponseErrorStats train;
    ResponseErrorStats heldout;
};

LearnedResponseFit train_learned_response(const ResponseRows& rows, const ResponseArch& arch,
                                          const ResponseTrainConfig& cfg);

}  // namespace stwf

#endif  // STWF_RESPONSE_HPP
