#include <gtest/gtest.h>

#include "stwf/mlp.hpp"
#include "stwf/models.hpp"
#include "testing.hpp"

namespace stwf {
namespace {

std::vector<Policy> sample_policies(std::mt19937_64& rng) {
    Vector poly = testing::random_vector(MonomialBasis(3, 3).size(), -1.0, 1.0, rng);
    return {Policy::linear_sigmoid(testing::random_vector(3, -2.0, 2.0, rng), 0.3),
            Policy::linear_raw(testing::random_vector(3, -2.0, 2.0, rng), -0.4),
            Policy::polynomial(3, 3, poly)};
}

TEST(Policy, InputDerivativesMatchFiniteDifferences) {
    std::mt19937_64 rng(11);
    for (const Policy& f : sample_policies(rng)) {
        for (int trial = 0; trial < 4; ++trial) {
            const Vector x = testing::random_vector(3, -1.0, 1.0, rng);
            auto value = [&](const Vector& p) { return f.eval(p); };
            EXPECT_LT(testing::relative_error(f.gradient(x), testing::central_difference(value, x, 1e-6)), 1e-7)
                << to_string(f.kind());
            const Matrix h = f.hessian(x);
            for (int i = 0; i < 3; ++i) {
                auto partial = [&](const Vector& p) { return f.gradient(p)[i]; };
                const Vector fd = testing::central_difference(partial, x, 1e-6);
                EXPECT_LT((h.row(i).transpose() - fd).lpNorm<Eigen::Infinity>(), 1e-6) << to_string(f.kind());
            }
        }
    }
}

TEST(Policy, ParameterJacobiansMatchFiniteDifferences) {
    std::mt19937_64 rng(12);
    for (Policy f : sample_policies(rng)) {
        const Vector x = testing::random_vector(3, -1.0, 1.0, rng);
        const Vector theta = f.params();
        auto with = [&](const Vector& t) {
            Policy g = f;
            g.set_params(t);
            return g;
        };
        const Matrix jv = f.param_jacobian(ParamQuantity::Value, x).matrix;
        const Matrix jg = f.param_jacobian(ParamQuantity::InputGradient, x).matrix;
        const Matrix jh = f.param_jacobian(ParamQuantity::InputHessian, x).matrix;
        ASSERT_EQ(jv.rows(), 1);
        ASSERT_EQ(jg.rows(), 3);
        ASSERT_EQ(jh.rows(), 9);
        EXPECT_LT(testing::relative_error(jv.row(0).transpose(),
                                          testing::central_difference([&](const Vector& t) { return with(t).eval(x); },
                                                                      theta)),
                  1e-6);
        for (int i = 0; i < 3; ++i) {
            auto gi = [&](const Vector& t) { return with(t).gradient(x)[i]; };
            EXPECT_LT(testing::relative_error(jg.row(i).transpose(), testing::central_difference(gi, theta)), 1e-6);
            for (int j = 0; j < 3; ++j) {
                auto hij = [&](const Vector& t) { return with(t).hessian(x)(i, j); };
                EXPECT_LT(testing::relative_error(jh.row(i * 3 + j).transpose(), testing::central_difference(hij, theta)),
                          1e-5);
            }
        }
    }
}

TEST(Policy, BatchEvaluationAgreesWithPointwise) {
    std::mt19937_64 rng(13);
    Matrix xs(9, 3);
    for (Index r = 0; r < xs.rows(); ++r) xs.row(r) = testing::random_vector(3, -1.0, 1.0, rng).transpose();
    for (const Policy& f : sample_policies(rng)) {
        const Vector batch = f.eval_batch(xs);
        for (Index r = 0; r < xs.rows(); ++r) {
            EXPECT_NEAR(batch[r], f.eval(xs.row(r).transpose()), 1e-14);
        }
    }
}

TEST(Policy, LinearSigmoidValue) {
    Vector w(2);
    w << 1.0, -2.0;
    const Policy f = Policy::linear_sigmoid(w, 0.5);
    Vector x(2);
    x << 0.5, 0.5;
    EXPECT_NEAR(f.eval(x), 1.0 / (1.0 + std::exp(0.0)), 1e-15);
    x << 2.0, 0.0;
    EXPECT_NEAR(f.eval(x), 1.0 / (1.0 + std::exp(-2.5)), 1e-15);
    EXPECT_EQ(decide(f, x), 1);
    EXPECT_EQ(decide(0.4999), 0);
    EXPECT_EQ(decide(0.5), 1);
}

TEST(Policy, RejectsMismatchedInputs) {
    const Policy f = Policy::linear_sigmoid(Vector::Ones(2), 0.0);
    EXPECT_THROW(f.eval(Vector::Ones(3)), DimensionError);
    EXPECT_THROW(f.eval_batch(Matrix::Ones(2, 3)), ValidationError);
    Policy g = f;
    EXPECT_THROW(g.set_params(Vector::Ones(2)), ValidationError);
    EXPECT_THROW(Policy::polynomial(2, 2, Vector::Ones(5)), ValidationError);
    EXPECT_THROW(g.set_domain(Box::uniform(3, 0.0, 1.0)), ValidationError);
}

TEST(LabelingModel, ClosedFormClampsAndZeroesGradient) {
    Vector c(3);
    c << 0.0, 4.0, -4.0;  // 4x - 4x^2
    const LabelingModel h = LabelingModel::closed_quadratic(1, c);
    Vector x(1);
    x << 0.4;
    EXPECT_NEAR(h.eval(x), 0.96, 1e-15);
    EXPECT_NEAR(h.gradient(x)[0], 4.0 - 8.0 * 0.4, 1e-15);
    EXPECT_FALSE(h.clamped(x));
    x << 1.5;  // q = -3
    EXPECT_EQ(h.eval(x), 0.0);
    EXPECT_TRUE(h.clamped(x));
    EXPECT_EQ(h.gradient(x)[0], 0.0);
    EXPECT_EQ(h.hessian(x)(0, 0), 0.0);
}

TEST(LabelingModel, BatchedClosedFormAgreesWithPointwise) {
    std::mt19937_64 rng(14);
    const LabelingModel h = LabelingModel::closed_polynomial(2, 3, testing::random_vector(10, -1.0, 1.0, rng));
    Matrix xs(20, 2);
    for (Index r = 0; r < xs.rows(); ++r) xs.row(r) = testing::random_vector(2, -1.0, 1.0, rng).transpose();
    const Vector vals = h.eval_batch(xs);
    const Matrix grads = h.gradient_batch(xs);
    for (Index r = 0; r < xs.rows(); ++r) {
        const Vector x = xs.row(r).transpose();
        EXPECT_NEAR(vals[r], h.eval(x), 1e-14);
        EXPECT_LT((grads.row(r).transpose() - h.gradient(x)).norm(), 1e-13);
    }
}

TEST(LabelingModel, MlpDerivativesMatchFiniteDifferences) {
    const LabelingModel h = LabelingModel::mlp(Mlp::random({3, 8, 8, 1}, Activation::Softplus, Activation::Sigmoid, 4));
    std::mt19937_64 rng(15);
    for (int trial = 0; trial < 5; ++trial) {
        const Vector x = testing::random_vector(3, -1.0, 1.0, rng);
        auto value = [&](const Vector& p) { return h.eval(p); };
        EXPECT_LT(testing::relative_error(h.gradient(x), testing::central_difference(value, x, 1e-6)), 1e-6);
        const double v = h.eval(x);
        EXPECT_GT(v, 0.0);
        EXPECT_LT(v, 1.0);
    }
}

TEST(Mlp, ParameterGradientMatchesFiniteDifferences) {
    Mlp net = Mlp::random({2, 5, 4, 1}, Activation::Tanh, Activation::Sigmoid, 9);
    std::mt19937_64 rng(16);
    Matrix xs(6, 2);
    for (Index r = 0; r < xs.rows(); ++r) xs.row(r) = testing::random_vector(2, -1.0, 1.0, rng).transpose();
    const Matrix weights = testing::random_vector(6, -1.0, 1.0, rng);
    // L = sum_r weights_r * out_r
    auto loss = [&](const Vector& theta) {
        Mlp m = net;
        m.set_params(theta);
        return m.forward_batch(xs).col(0).dot(weights.col(0));
    };
    const Vector g = net.param_gradient_batch(xs, weights);
    EXPECT_EQ(g.size(), net.num_params());
    EXPECT_LT(testing::relative_error(g, testing::central_difference(loss, net.params(), 1e-6)), 1e-6);
}

TEST(Mlp, ParamsRoundTrip) {
    Mlp net = Mlp::random({3, 4, 2}, Activation::Relu, Activation::Identity, 1);
    const Vector theta = net.params();
    Mlp other = Mlp::random({3, 4, 2}, Activation::Relu, Activation::Identity, 2);
    other.set_params(theta);
    Vector x(3);
    x << 0.1, -0.2, 0.3;
    EXPECT_EQ(net.forward(x), other.forward(x));
    EXPECT_THROW(other.set_params(Vector::Zero(3)), ValidationError);
}

TEST(Adam, MinimisesAQuadratic) {
    Vector theta = Vector::Constant(2, 3.0);
    Adam adam(2);
    for (int k = 0; k < 2000; ++k) {
        adam.step(theta, 2.0 * theta, 0.05);
    }
    EXPECT_LT(theta.norm(), 1e-2);
}

TEST(TrainLabeler, FitsASeparableProblem) {
    std::mt19937_64 rng(17);
    Matrix xs(400, 2);
    Eigen::VectorXi ys(400);
    for (Index r = 0; r < 400; ++r) {
        xs.row(r) = testing::random_vector(2, -1.0, 1.0, rng).transpose();
        ys[r] = xs(r, 0) + 0.5 * xs(r, 1) > 0.0 ? 1 : 0;
    }
    LabelerTrainConfig cfg;
    cfg.epochs = 80;
    const LabelerFit fit = train_labeler(xs, ys, MlpSpec{{16, 16}, Activation::Relu}, cfg);
    Index correct = 0;
    for (Index r = 0; r < 400; ++r) correct += decide(fit.model.eval(xs.row(r).transpose())) == ys[r];
    EXPECT_GT(correct, 380);
    EXPECT_LT(fit.epoch_loss.back(), fit.epoch_loss.front());
    EXPECT_FALSE(fit.single_class);
}

TEST(TrainLabeler, RejectsEmptyData) {
    EXPECT_THROW(train_labeler(Matrix(0, 2), Eigen::VectorXi(0), MlpSpec{}, LabelerTrainConfig{}), ValidationError);
}

}  // namespace
}  // namespace stwf
