#include <gtest/gtest.h>

#include <memory>

#include "stwf/response.hpp"
#include "testing.hpp"

namespace stwf {
namespace {

// Brute-force maximiser of Q(x') - c(x, x') over a 2-D grid with spacing `step`.
Vector grid_maximiser(const TaylorExpansion& q, const CostModel& cost, const Vector& lo, const Vector& hi,
                      double step) {
    const int n0 = static_cast<int>(std::floor((hi[0] - lo[0]) / step + 1e-9)) + 1;
    const int n1 = static_cast<int>(std::floor((hi[1] - lo[1]) / step + 1e-9)) + 1;
    Vector best = lo;
    double best_value = -std::numeric_limits<double>::infinity();
    Vector y(2);
    for (int i = 0; i < n0; ++i) {
        y[0] = lo[0] + i * step;
        for (int j = 0; j < n1; ++j) {
            y[1] = lo[1] + j * step;
            const double v = q(y) - cost(q.base(), y);
            if (v > best_value) {
                best_value = v;
                best = y;
            }
        }
    }
    return best;
}

TEST(Taylor, FirstAndSecondOrderExpansions) {
    Vector c(3);
    c << 1.0, -2.0, 3.0;  // 1 - 2x + 3x^2
    const Policy f = Policy::polynomial(1, 2, c);
    Vector x(1);
    x << 0.5;
    const TaylorExpansion q1 = taylor_expand(f, x, 1);
    const TaylorExpansion q2 = taylor_expand(f, x, 2);
    EXPECT_EQ(q1.order(), 1);
    EXPECT_EQ(q2.order(), 2);
    Vector y(1);
    y << 1.5;
    EXPECT_NEAR(q1(y), f.eval(x) + f.gradient(x)[0], 1e-14);
    EXPECT_NEAR(q2(y), f.eval(y), 1e-14);
    EXPECT_NEAR(q2.gradient_at(y)[0], f.gradient(y)[0], 1e-14);
    EXPECT_THROW(taylor_expand(f, x, 3), ValidationError);
}

TEST(Taylor, SmoothFunctionWithoutHessianStopsAtFirstOrder) {
    SmoothFunction f{1, 1, [](const Vector& x) { return x[0] * x[0]; },
                     [](const Vector& x) { return Vector::Constant(1, 2.0 * x[0]); }, nullptr};
    const TaylorExpansion q = taylor_expand(f, Vector::Ones(1), 2);
    EXPECT_EQ(q.requested_order(), 2);
    EXPECT_EQ(q.order(), 1);
}

TEST(ClosedForm, FirstOrderMatchesGridOracle) {
    std::mt19937_64 rng(21);
    const CostModel cost = CostModel::quadratic(5.0, 2);
    const Box box = Box::uniform(2, 0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        Policy f = Policy::linear_sigmoid(testing::random_vector(2, -6.0, 6.0, rng), testing::random_vector(1, -3, 3, rng)[0]);
        f.set_domain(box);
        const Vector x = testing::random_vector(2, 0.0, 1.0, rng);
        const TaylorExpansion q = taylor_expand(f, x, 1);
        const BestResponse r = best_respond_closed(q, cost, box);
        const Vector oracle = grid_maximiser(q, cost, box.lo, box.hi, 1e-2);
        EXPECT_LE((r.x_star - oracle).lpNorm<Eigen::Infinity>(), 1e-2 + 1e-12);
        EXPECT_TRUE(box.contains(r.x_star));
    }
}

TEST(ClosedForm, FrozenCoordinatesDoNotMove) {
    CostModel cost = CostModel::quadratic(1.0, 3);
    cost.mask << 1.0, 0.0, 1.0;
    Vector w(3);
    w << 1.0, 2.0, -1.0;
    const Policy f = Policy::linear_raw(w, 0.0);
    const Vector x = Vector::Zero(3);
    const BestResponse r = best_respond_closed(taylor_expand(f, x, 1), cost, Box::unbounded(3));
    EXPECT_NEAR(r.x_star[0], 0.5, 1e-15);
    EXPECT_EQ(r.x_star[1], 0.0);
    EXPECT_NEAR(r.x_star[2], -0.5, 1e-15);
}

TEST(ClosedForm, ClampsToTheBoxAndReportsIt) {
    const Policy f = Policy::linear_raw(Vector::Constant(1, 10.0), 0.0);
    const CostModel cost = CostModel::quadratic(1.0, 1);
    const BestResponse r = best_respond_closed(taylor_expand(f, Vector::Constant(1, 0.5), 1), cost,
                                               Box::uniform(1, 0.0, 1.0));
    EXPECT_EQ(r.x_star[0], 1.0);
    EXPECT_TRUE(r.clamped[0]);
}

TEST(ClosedForm, SecondOrderSolvesTheShiftedSystem) {
    std::mt19937_64 rng(22);
    const CostModel cost = CostModel::quadratic(2.0, 2);
    for (int trial = 0; trial < 10; ++trial) {
        const Policy f = Policy::polynomial(2, 2, testing::random_vector(6, -1.0, 1.0, rng));
        const Vector x = testing::random_vector(2, -1.0, 1.0, rng);
        const Matrix system = 4.0 * Matrix::Identity(2, 2) - f.hessian(x);
        if (system.llt().info() != Eigen::Success) continue;
        const Vector delta = system.llt().solve(f.gradient(x));
        const BestResponse r = best_respond_closed(taylor_expand(f, x, 2), cost, Box::unbounded(2));
        EXPECT_LT((r.x_star - x - delta).norm(), 1e-12);
    }
}

TEST(ClosedForm, IndefiniteSecondOrderIsUnbounded) {
    Vector c(3);
    c << 0.0, 0.0, 5.0;  // 5x^2, Hessian 10 > 2a
    const Policy f = Policy::polynomial(1, 2, c);
    const CostModel cost = CostModel::quadratic(1.0, 1);
    EXPECT_THROW(best_respond_closed(taylor_expand(f, Vector::Zero(1), 2), cost, Box::unbounded(1)),
                 UnboundedResponseError);
}

TEST(ClosedForm, FallsBackToNumericInsideABox) {
    Vector c(3);
    c << 0.0, 0.1, 5.0;
    Policy f = Policy::polynomial(1, 2, c);
    f.set_domain(Box::uniform(1, -1.0, 1.0));
    ResponseModel model;
    model.order = 2;
    model.cost = CostModel::quadratic(1.0, 1);
    const BestResponse r = apply_response(model, f, Vector::Constant(1, 0.2));
    EXPECT_TRUE(r.fallback);
    // 5x^2 + 0.1x - (x - 0.2)^2 on [-1, 1] peaks at the right end.
    EXPECT_NEAR(r.x_star[0], 1.0, 1e-12);
}

TEST(Numeric, MatchesGridOracleOnIndefiniteEstimates) {
    std::mt19937_64 rng(23);
    const CostModel cost = CostModel::quadratic(1.0, 2);
    const Box box = Box::uniform(2, 0.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const Policy f = Policy::polynomial(2, 2, testing::random_vector(6, -3.0, 3.0, rng));
        const Vector x = testing::random_vector(2, 0.0, 1.0, rng);
        const TaylorExpansion q = taylor_expand(f, x, 2);
        NumericOptions opts;
        opts.seed = static_cast<std::uint64_t>(trial);
        const BestResponse r = best_respond_numeric(q, cost, box, opts);
        const Vector oracle = grid_maximiser(q, cost, box.lo, box.hi, 5e-3);
        const double got = response_objective(q, cost, r.x_star);
        const double want = response_objective(q, cost, oracle);
        EXPECT_GE(got, want - 1e-4);
    }
}

TEST(Numeric, AgreesWithClosedFormWhenConcave) {
    std::mt19937_64 rng(24);
    const CostModel cost = CostModel::quadratic(5.0, 2);
    for (int trial = 0; trial < 10; ++trial) {
        Policy f = Policy::linear_sigmoid(testing::random_vector(2, -3.0, 3.0, rng), 0.1);
        const Vector x = testing::random_vector(2, 0.2, 0.8, rng);
        const TaylorExpansion q = taylor_expand(f, x, 1);
        const Box box = Box::uniform(2, 0.0, 1.0);
        const BestResponse closed = best_respond_closed(q, cost, box);
        const BestResponse numeric = best_respond_numeric(q, cost, box);
        EXPECT_TRUE(numeric.converged);
        EXPECT_LT((closed.x_star - numeric.x_star).norm(), 1e-6);
    }
}

TEST(Jacobian, MatchesFiniteDifferencesForBothOrders) {
    std::mt19937_64 rng(25);
    for (int order = 1; order <= 2; ++order) {
        ResponseModel model;
        model.order = order;
        model.cost = CostModel::quadratic(3.0, 3);
        model.cost.mask << 1.0, 1.0, 0.0;
        Policy f = Policy::linear_sigmoid(testing::random_vector(3, -2.0, 2.0, rng), 0.2);
        f.set_domain(Box::uniform(3, -5.0, 5.0));
        const Vector x = testing::random_vector(3, -1.0, 1.0, rng);
        const ResponseDerivative d = respond_with_jacobian(model, f, x);
        EXPECT_LT((d.x_star - apply_response(model, f, x).x_star).norm(), 1e-14);
        for (Index i = 0; i < 3; ++i) {
            auto coord = [&](const Vector& theta) {
                Policy g = f;
                g.set_params(theta);
                return apply_response(model, g, x).x_star[i];
            };
            const Vector fd = testing::central_difference(coord, f.params());
            EXPECT_LT((d.jacobian.row(i).transpose() - fd).lpNorm<Eigen::Infinity>(), 1e-8) << "order " << order;
        }
    }
}

TEST(Jacobian, ClampedCoordinatesHaveNoDerivative) {
    ResponseModel model;
    model.cost = CostModel::quadratic(0.1, 1);
    Policy f = Policy::linear_sigmoid(Vector::Constant(1, 1.0), 0.0);
    f.set_domain(Box::uniform(1, 0.0, 1.0));
    const ResponseDerivative d = respond_with_jacobian(model, f, Vector::Constant(1, 0.9));
    EXPECT_EQ(d.x_star[0], 1.0);
    EXPECT_EQ(d.jacobian.norm(), 0.0);
}

TEST(Batch, AgreesWithPointwiseResponses) {
    std::mt19937_64 rng(26);
    for (int order = 1; order <= 2; ++order) {
        ResponseModel model;
        model.order = order;
        model.cost = CostModel::quadratic(5.0, 2);
        Policy f = Policy::linear_sigmoid(testing::random_vector(2, -4.0, 4.0, rng), -1.0);
        f.set_domain(Box::uniform(2, 0.0, 1.0));
        Matrix xs(30, 2);
        for (Index r = 0; r < xs.rows(); ++r) xs.row(r) = testing::random_vector(2, 0.0, 1.0, rng).transpose();
        const Matrix batch = apply_response_batch(model, f, xs);
        for (Index r = 0; r < xs.rows(); ++r) {
            EXPECT_LT((batch.row(r).transpose() - apply_response(model, f, xs.row(r).transpose()).x_star).norm(),
                      1e-14);
        }
        EXPECT_THROW(apply_response_batch(model, f, Matrix::Zero(3, 3)), DimensionError);
    }
}

TEST(Cost, ValidatesItsParameters) {
    CostModel cost = CostModel::quadratic(0.0, 2);
    EXPECT_THROW(cost.validate(2), ValidationError);
    cost.scale = 1.0;
    EXPECT_THROW(cost.validate(3), DimensionError);
    cost.mask << 0.5, 1.0;
    EXPECT_THROW(cost.validate(2), ValidationError);
    EXPECT_THROW(response_kind_from_string("oracle"), ValidationError);
    EXPECT_EQ(response_kind_from_string("numeric"), ResponseKind::Numeric);
}

TEST(Information, EncodingLayout) {
    Vector w(2);
    w << 1.0, -1.0;
    const Policy f = Policy::linear_sigmoid(w, 0.0);
    const Vector x = Vector::Zero(2);
    const Vector i1 = encode_information(f, x, 1);
    const Vector i2 = encode_information(f, x, 2);
    EXPECT_EQ(i1.size(), information_width(2, 1));
    EXPECT_EQ(i2.size(), 6);
    EXPECT_NEAR(i1[0], 0.5, 1e-15);
    EXPECT_NEAR(i1[1], 0.25, 1e-15);
    EXPECT_NEAR(i1[2], -0.25, 1e-15);
    EXPECT_NEAR(i2[3], 0.0, 1e-15);  // sigmoid'' vanishes at 0
}

TEST(LearnedResponse, RecoversTheClosedFormOnUnseenPolicies) {
    ResponseModel oracle;
    oracle.cost = CostModel::quadratic(5.0, 2);
    std::mt19937_64 rng(27);
    Matrix xs(200, 2);
    for (Index r = 0; r < xs.rows(); ++r) xs.row(r) = testing::random_vector(2, 0.0, 1.0, rng).transpose();
    auto policies = random_linear_policies(12, 2, 3);
    for (auto& p : policies) p.set_domain(Box::uniform(2, -1.0, 2.0));
    const std::vector<Policy> seen(policies.begin(), policies.begin() + 10);
    const std::vector<Policy> unseen(policies.begin() + 10, policies.end());
    const ResponseRows rows = build_response_dataset(xs, seen, 1, oracle);
    ASSERT_EQ(rows.size(), 2000);
    ResponseTrainConfig cfg;
    cfg.epochs = 80;
    const LearnedResponseFit fit = train_learned_response(rows, ResponseArch{}, cfg);
    const ResponseErrorStats stats = evaluate_learned_response(fit.model, build_response_dataset(xs, unseen, 1, oracle));
    EXPECT_LT(stats.median_relative_error, 0.1);

    ResponseModel learned;
    learned.kind = ResponseKind::Learned;
    learned.cost = oracle.cost;
    learned.learned = std::make_shared<LearnedResponse>(fit.model);
    const Vector x = xs.row(0).transpose();
    const ResponseDerivative d = respond_with_jacobian(learned, unseen[0], x);
    for (Index i = 0; i < 2; ++i) {
        auto coord = [&](const Vector& theta) {
            Policy g = unseen[0];
            g.set_params(theta);
            return apply_response(learned, g, x).x_star[i];
        };
        const Vector fd = testing::central_difference(coord, unseen[0].params());
        EXPECT_LT((d.jacobian.row(i).transpose() - fd).lpNorm<Eigen::Infinity>(), 1e-6);
    }
}

TEST(LearnedResponse, RejectsTooFewRows) {
    ResponseRows rows;
    rows.x = Matrix::Zero(10, 2);
    rows.info = Matrix::Zero(10, 3);
    rows.x_star = Matrix::Zero(10, 2);
    EXPECT_THROW(train_learned_response(rows, ResponseArch{}, ResponseTrainConfig{}), ValidationError);
}

TEST(ResponseRows, CsvRoundTrip) {
    ResponseModel oracle;
    oracle.cost = CostModel::quadratic(5.0, 2);
    Matrix xs(3, 2);
    xs << 0.1, 0.2, 0.3, 0.4, 0.5, 0.6;
    const ResponseRows rows = build_response_dataset(xs, random_linear_policies(2, 2, 1), 2, oracle);
    const auto dir = testing::scratch_dir("rows");
    write_response_csv(rows, (dir / "rows.csv").string());
    const ResponseRows back = read_response_csv((dir / "rows.csv").string(), 2);
    EXPECT_EQ(back.x, rows.x);
    EXPECT_EQ(back.info, rows.info);
    EXPECT_EQ(back.x_star, rows.x_star);
    EXPECT_THROW(read_response_csv((dir / "rows.csv").string(), 1), ValidationError);
    EXPECT_THROW(read_response_csv((dir / "missing.csv").string(), 1), ValidationError);
}

}  // namespace
}  // namespace stwf
