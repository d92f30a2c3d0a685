#include <gtest/gtest.h>

#include "stwf/serialize.hpp"
#include "testing.hpp"

namespace stwf {
namespace {

TEST(Serialize, PolicyRoundTripIsExact) {
    std::mt19937_64 rng(31);
    Policy sig = Policy::linear_sigmoid(testing::random_vector(3, -1.0, 1.0, rng), 0.1 / 3.0);
    sig.set_domain(Box::uniform(3, -0.25, 1.0 / 3.0));
    const Policy raw = Policy::linear_raw(testing::random_vector(2, -1.0, 1.0, rng), -2.0);
    const Policy poly = Policy::polynomial(2, 3, testing::random_vector(10, -1.0, 1.0, rng));
    for (const Policy& p : {sig, raw, poly}) {
        const Policy back = policy_from_json(Json::parse(to_json(p).dump()));
        EXPECT_EQ(back.kind(), p.kind());
        EXPECT_EQ(back.params(), p.params());
        EXPECT_EQ(back.domain().lo, p.domain().lo);
        EXPECT_EQ(back.domain().hi, p.domain().hi);
    }
    const Json j = to_json(raw);
    EXPECT_EQ(j["domain_box"]["lo"][0], nullptr);  // unbounded side
    EXPECT_EQ(j["format_version"], kFormatVersion);
}

TEST(Serialize, LabelerRoundTripIsExact) {
    const LabelingModel closed = SyntheticSpec::preset().labeler();
    const LabelingModel net = LabelingModel::mlp(Mlp::random({2, 4, 3, 1}, Activation::Relu, Activation::Sigmoid, 5));
    Vector x(2);
    x << 0.3, 0.7;
    for (const LabelingModel& h : {closed, net}) {
        const LabelingModel back = labeler_from_json(Json::parse(to_json(h).dump()));
        EXPECT_EQ(back.kind(), h.kind());
        EXPECT_EQ(back.eval(x), h.eval(x));
        EXPECT_EQ(back.gradient(x), h.gradient(x));
    }
}

TEST(Serialize, LearnedResponseRoundTripIsExact) {
    const Index width = 2 + information_width(2, 2);
    std::mt19937_64 rng(32);
    const LearnedResponse model(Mlp::random({static_cast<int>(width), 5, 5, 2}, Activation::Tanh,
                                            Activation::Identity, 3),
                                2, 2, testing::random_vector(width, -1, 1, rng), testing::random_vector(width, 1, 2, rng),
                                testing::random_vector(2, 0.1, 1.0, rng));
    const auto dir = testing::scratch_dir("serialize");
    save_json((dir / "r.json").string(), to_json(model));
    const LearnedResponse back = load_learned_response((dir / "r.json").string());
    const Vector x = testing::random_vector(2, 0, 1, rng);
    const Vector info = testing::random_vector(information_width(2, 2), -1, 1, rng);
    EXPECT_EQ(back.predict(x, info), model.predict(x, info));
    EXPECT_EQ(back.order(), 2);
}

TEST(Serialize, MalformedDocumentsAreValidationErrors) {
    Json p = to_json(Policy::linear_sigmoid(Vector::Ones(2), 0.0));
    Json missing = p;
    missing.erase("params");
    EXPECT_THROW(policy_from_json(missing), ValidationError);
    Json future = p;
    future["format_version"] = kFormatVersion + 1;
    EXPECT_THROW(policy_from_json(future), ValidationError);
    Json short_params = p;
    short_params["params"] = Json::array({1.0});
    EXPECT_THROW(policy_from_json(short_params), ValidationError);
    Json wrong_type = p;
    wrong_type["feature_dim"] = "two";
    EXPECT_THROW(policy_from_json(wrong_type), ValidationError);
    Json kind = p;
    kind["kind"] = "forest";
    EXPECT_THROW(policy_from_json(kind), ValidationError);
    EXPECT_THROW(labeler_from_json(Json{{"kind", "oracle"}}), ValidationError);
    EXPECT_THROW(learned_response_from_json(p), ValidationError);

    const auto dir = testing::scratch_dir("serialize_bad");
    testing::write_file(dir / "bad.json", "{not json");
    EXPECT_THROW(load_policy((dir / "bad.json").string()), ValidationError);
    EXPECT_THROW(load_policy((dir / "absent.json").string()), ValidationError);
}

TEST(Serialize, NonFiniteMetricsBecomeNull) {
    FairnessReport r;
    r.eo_gap = std::numeric_limits<double>::quiet_NaN();
    const Json j = to_json(r);
    EXPECT_TRUE(j["eo_gap"].is_null());
    EXPECT_EQ(j["dp_gap"], 0.0);
    const Vector v = vector_from_json(Json::parse(to_json(Vector::Constant(2, std::nan(""))).dump()));
    EXPECT_TRUE(std::isnan(v[0]));
}

TEST(Serialize, ShortestRoundTripDoubles) {
    Vector v(3);
    v << 0.1, 1.0 / 3.0, 1e-300;
    EXPECT_EQ(vector_from_json(Json::parse(to_json(v).dump())), v);
}

}  // namespace
}  // namespace stwf
