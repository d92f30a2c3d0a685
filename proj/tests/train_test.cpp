#include <gtest/gtest.h>

#include "stwf/train.hpp"
#include "testing.hpp"

namespace stwf {
namespace {

struct Fixture {
    Dataset train;
    Dataset test;
    LabelingModel h;
    ResponseModel resp;
};

Fixture small_setup(std::uint64_t seed, Index n = 1000) {
    SyntheticSpec spec = SyntheticSpec::preset(seed);
    spec.n = n;
    SplitOptions so;
    so.seed = seed;
    so.normalize = false;
    Fixture s;
    std::tie(s.train, s.test) = split(gen_synthetic(spec), so);
    s.h = spec.labeler();
    s.resp.cost = CostModel::quadratic(spec.cost_scale, 2);
    return s;
}

TrainConfig quick_config() {
    TrainConfig cfg;
    cfg.epochs = 15;
    cfg.batch_size = 64;
    cfg.learning_rate = 0.05;
    return cfg;
}

TEST(TrainConfig, Validation) {
    TrainConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.lambda1 = -0.1;
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = TrainConfig{};
    cfg.learning_rate = 0.0;
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = TrainConfig{};
    cfg.validation_fraction = 1.0;
    EXPECT_THROW(cfg.validate(), ValidationError);
    EXPECT_THROW(optimizer_from_string("rmsprop"), ValidationError);
    EXPECT_THROW(algo_from_string("svm"), ValidationError);
    EXPECT_EQ(algo_from_string("be"), Algo::Be);
    EXPECT_EQ(to_string(Optimizer::Sgd), "sgd");
}

TEST(Train, IsDeterministicInTheSeed) {
    const Fixture s = small_setup(0);
    TrainConfig cfg = quick_config();
    cfg.lambda1 = 1.0;
    cfg.lambda2 = 0.5;
    const TrainResult a = stwf_train(s.train, s.h, s.resp, cfg);
    const TrainResult b = stwf_train(s.train, s.h, s.resp, cfg);
    EXPECT_EQ(a.policy.params(), b.policy.params());
    EXPECT_EQ(a.trace.to_csv(), b.trace.to_csv());
    cfg.seed = 1;
    const TrainResult c = stwf_train(s.train, s.h, s.resp, cfg);
    EXPECT_NE(a.policy.params(), c.policy.params());
}

TEST(Train, ZeroLambdaReproducesErm) {
    const Fixture s = small_setup(1);
    const TrainConfig cfg = quick_config();
    const TrainResult stwf = stwf_train(s.train, s.h, s.resp, cfg);
    const TrainResult erm = baseline_train(s.train, s.h, s.resp, Algo::Erm, cfg);
    EXPECT_EQ(stwf.policy.params(), erm.policy.params());
}

TEST(Train, TraceHasOneRowPerEpoch) {
    const Fixture s = small_setup(2);
    const TrainConfig cfg = quick_config();
    const TrainResult r = stwf_train(s.train, s.h, s.resp, cfg);
    ASSERT_EQ(r.trace.epochs.size(), 15u);
    const std::string csv = r.trace.to_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "epoch,l_dw,l_imp,l_sf,l_aw,total,val_dw,val_imp,val_sf,val_aw");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 16);
    EXPECT_LT(r.trace.epochs.back().l_dw, r.trace.epochs.front().l_dw);
}

TEST(Train, ImprovesAccuracyOverTheZeroPolicy) {
    const Fixture s = small_setup(3);
    TrainConfig cfg = quick_config();
    cfg.epochs = 40;
    const TrainResult r = stwf_train(s.train, s.h, s.resp, cfg);
    EXPECT_GT(decision_welfare(r.policy, s.test), decision_welfare(initial_policy(s.train), s.test));
    EXPECT_EQ(r.policy.domain().lo, s.train.domain().lo);
}

TEST(Train, DivergenceRaisesWithTrace) {
    const Fixture s = small_setup(4);
    TrainConfig cfg = quick_config();
    cfg.optimizer = Optimizer::Sgd;
    cfg.learning_rate = 1e200;
    const Dataset huge(s.train.features() * 1e200, s.train.labels(), s.train.groups(), {});
    try {
        stwf_train(huge, s.h, s.resp, cfg);
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        EXPECT_LT(e.trace().epochs.size(), 15u);
    }
}

TEST(Train, RejectsInconsistentInputs) {
    const Fixture s = small_setup(5, 100);
    TrainConfig cfg = quick_config();
    cfg.batch_size = 1000;
    EXPECT_THROW(stwf_train(s.train, s.h, s.resp, cfg), ValidationError);
    const Dataset no_groups(s.train.features(), s.train.labels(), Eigen::VectorXi(0), {});
    EXPECT_THROW(baseline_train(no_groups, s.h, s.resp, Algo::Ei, quick_config()), ValidationError);
    EXPECT_THROW(baseline_train(s.train, s.h, s.resp, Algo::Stwf, quick_config()), ValidationError);
    const Dataset empty(Matrix(0, 2), Eigen::VectorXi(0), Eigen::VectorXi(0), {});
    EXPECT_THROW(stwf_train(empty, s.h, s.resp, quick_config()), ValidationError);
}

TEST(Baselines, FairnessRegularisersRunAndDifferFromErm) {
    const Fixture s = small_setup(6);
    TrainConfig cfg = quick_config();
    cfg.baseline_lambda = 2.0;
    const TrainResult erm = train_policy(s.train, s.h, s.resp, Algo::Erm, cfg);
    for (Algo algo : {Algo::Safe, Algo::Ei, Algo::Be}) {
        const TrainResult r = train_policy(s.train, s.h, s.resp, algo, cfg);
        EXPECT_TRUE(r.policy.params().allFinite()) << to_string(algo);
        EXPECT_NE(r.policy.params(), erm.policy.params()) << to_string(algo);
    }
}

TEST(CrossValidation, PicksTheBestAndBreaksTiesLow) {
    const Fixture s = small_setup(7, 600);
    TrainConfig base = quick_config();
    base.epochs = 5;
    CvGrid grid;
    grid.learning_rates = {0.01, 0.1};
    grid.lambda1 = {0.0, 1.0};
    grid.lambda2 = {0.0};
    const CvResult r = cross_validate(s.train, s.h, s.resp, Algo::Stwf, base, grid, {0, 1});
    ASSERT_EQ(r.candidates.size(), 4u);
    const auto best = std::max_element(r.candidates.begin(), r.candidates.end(),
                                       [](const CvCandidate& a, const CvCandidate& b) {
                                           return a.mean_total < b.mean_total;
                                       });
    EXPECT_EQ(r.best.learning_rate, best->learning_rate);
    EXPECT_EQ(r.best.lambda1, best->lambda1);

    const CvResult erm = cross_validate(s.train, s.h, s.resp, Algo::Erm, base, grid, {0});
    EXPECT_EQ(erm.candidates.size(), 2u);
    EXPECT_EQ(erm.best.lambda1, 0.0);

    // With no SWF component lambda1 has no effect, so both candidates tie.
    TrainConfig inert = base;
    inert.components = SwfComponents::parse("none");
    CvGrid flat;
    flat.learning_rates = {0.05};
    flat.lambda1 = {1.0, 0.0};
    flat.lambda2 = {0.0};
    const CvResult tied = cross_validate(s.train, s.h, s.resp, Algo::Stwf, inert, flat, {0});
    EXPECT_EQ(tied.candidates[0].mean_total, tied.candidates[1].mean_total);
    EXPECT_EQ(tied.best.lambda1, 0.0);
    EXPECT_THROW(cross_validate(s.train, s.h, s.resp, Algo::Stwf, base, CvGrid{{}, {}, {}}, {0}), ValidationError);
}

}  // namespace
}  // namespace stwf
