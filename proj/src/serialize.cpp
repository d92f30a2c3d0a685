#include "stwf/serialize.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace stwf {

namespace {

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double number_or(const Json& j, double fallback) { return j.is_null() ? fallback : j.get<double>(); }

const Json& field(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) {
        throw ValidationError(std::string("JSON document is missing field '") + key + "'");
    }
    return j.at(key);
}

void check_version(const Json& j) {
    if (j.contains("format_version") && j.at("format_version").get<int>() > kFormatVersion) {
        throw ValidationError("unsupported format version " + j.at("format_version").dump());
    }
}

template <typename Fn>
auto guarded(Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Json::exception& e) {
        throw ValidationError(std::string("malformed JSON document: ") + e.what());
    }
}

}  // namespace

Json to_json(const Vector& v) {
    Json out = Json::array();
    for (Index i = 0; i < v.size(); ++i) {
        out.push_back(number_or_null(v[i]));
    }
    return out;
}

Vector vector_from_json(const Json& j) {
    require(j.is_array(), "expected a JSON array of numbers");
    Vector v(static_cast<Index>(j.size()));
    for (Index i = 0; i < v.size(); ++i) {
        v[i] = number_or(j[static_cast<std::size_t>(i)], std::numeric_limits<double>::quiet_NaN());
    }
    return v;
}

Json to_json(const Box& box) { return {{"lo", to_json(box.lo)}, {"hi", to_json(box.hi)}}; }

Box box_from_json(const Json& j) {
    const double inf = std::numeric_limits<double>::infinity();
    Box box{vector_from_json(field(j, "lo")), vector_from_json(field(j, "hi"))};
    require(box.lo.size() == box.hi.size(), "domain box bounds differ in length");
    for (Index i = 0; i < box.lo.size(); ++i) {
        if (std::isnan(box.lo[i])) box.lo[i] = -inf;
        if (std::isnan(box.hi[i])) box.hi[i] = inf;
    }
    return box;
}

Json to_json(const Mlp& net) {
    Json layers = Json::array();
    for (const DenseLayer& l : net.layers()) {
        const RowMatrix w = l.weight;
        const Vector flat = Eigen::Map<const Vector>(w.data(), w.size());
        layers.push_back({{"in", l.weight.cols()},
                          {"out", l.weight.rows()},
                          {"activation", to_string(l.activation)},
                          {"weight", to_json(flat)},
                          {"bias", to_json(l.bias)}});
    }
    Json widths = Json::array();
    if (!net.layers().empty()) {
        widths.push_back(net.input_dim());
        for (const DenseLayer& l : net.layers()) {
            widths.push_back(l.weight.rows());
        }
    }
    return {{"layer_widths", widths}, {"layers", layers}};
}

Mlp mlp_from_json(const Json& j) {
    return guarded([&] {
        std::vector<DenseLayer> layers;
        for (const Json& l : field(j, "layers")) {
            const Index in = field(l, "in").get<Index>();
            const Index out = field(l, "out").get<Index>();
            const Vector flat = vector_from_json(field(l, "weight"));
            require(flat.size() == in * out, "layer weight has the wrong size");
            DenseLayer layer;
            layer.weight = Eigen::Map<const RowMatrix>(flat.data(), out, in);
            layer.bias = vector_from_json(field(l, "bias"));
            require(layer.bias.size() == out, "layer bias has the wrong size");
            layer.activation = activation_from_string(field(l, "activation").get<std::string>());
            layers.push_back(std::move(layer));
        }
        require(!layers.empty(), "network has no layers");
        return Mlp(std::move(layers));
    });
}

Json to_json(const Policy& policy) {
    Json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = to_string(policy.kind());
    j["feature_dim"] = policy.dim();
    j["order"] = policy.kind() == PolicyKind::Polynomial ? policy.basis().order() : 1;
    j["params"] = to_json(policy.params());
    j["domain_box"] = to_json(policy.domain());
    return j;
}

Policy policy_from_json(const Json& j) {
    return guarded([&] {
        check_version(j);
        const PolicyKind kind = policy_kind_from_string(field(j, "kind").get<std::string>());
        const Index d = field(j, "feature_dim").get<Index>();
        require(d > 0, "policy feature_dim must be positive");
        const Vector theta = vector_from_json(field(j, "params"));
        Policy p;
        if (kind == PolicyKind::Polynomial) {
            p = Policy::polynomial(static_cast<int>(d), field(j, "order").get<int>(), theta);
        } else {
            require(theta.size() == d + 1, "linear policy needs feature_dim + 1 parameters");
            p = kind == PolicyKind::LinearSigmoid ? Policy::linear_sigmoid(theta.head(d), theta[d])
                                                  : Policy::linear_raw(theta.head(d), theta[d]);
        }
        if (j.contains("domain_box")) {
            Box box = box_from_json(j.at("domain_box"));
            require(box.dim() == d, "domain box dimension does not match the policy");
            p.set_domain(std::move(box));
        }
        return p;
    });
}

Json to_json(const LabelingModel& h) {
    Json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = to_string(h.kind());
    j["feature_dim"] = h.dim();
    if (h.kind() == LabelerKind::ClosedPolynomial) {
        j["order"] = h.order();
        j["params"] = to_json(h.params());
    } else {
        j["activation"] = to_string(h.activation());
        j["network"] = to_json(h.network());
    }
    return j;
}

LabelingModel labeler_from_json(const Json& j) {
    return guarded([&] {
        check_version(j);
        const std::string kind = field(j, "kind").get<std::string>();
        if (kind == to_string(LabelerKind::ClosedPolynomial)) {
            return LabelingModel::closed_polynomial(field(j, "feature_dim").get<int>(), field(j, "order").get<int>(),
                                                    vector_from_json(field(j, "params")));
        }
        if (kind == to_string(LabelerKind::Mlp)) {
            return LabelingModel::mlp(mlp_from_json(field(j, "network")));
        }
        throw ValidationError("unknown labeler kind '" + kind + "'");
    });
}

Json to_json(const LearnedResponse& model) {
    Json j;
    j["format_version"] = kFormatVersion;
    j["kind"] = "learned-response";
    j["feature_dim"] = model.dim();
    j["order"] = model.order();
    j["input_offset"] = to_json(model.input_offset());
    j["input_scale"] = to_json(model.input_scale());
    j["output_scale"] = to_json(model.output_scale());
    j["network"] = to_json(model.network());
    return j;
}

LearnedResponse learned_response_from_json(const Json& j) {
    return guarded([&] {
        check_version(j);
        require(field(j, "kind").get<std::string>() == "learned-response", "document is not a learned response");
        return LearnedResponse(mlp_from_json(field(j, "network")), field(j, "order").get<int>(),
                               field(j, "feature_dim").get<Index>(), vector_from_json(field(j, "input_offset")),
                               vector_from_json(field(j, "input_scale")), vector_from_json(field(j, "output_scale")));
    });
}

Json to_json(const WelfareReport& r) {
    return {{"dw", r.dw}, {"imp", r.imp}, {"sf", r.sf}, {"aw", r.aw}, {"swf", r.swf}, {"total", r.total}};
}

Json to_json(const FairnessReport& r) {
    auto pair = [](const std::array<double, 2>& a) { return Json::array({number_or_null(a[0]), number_or_null(a[1])}); };
    return {{"ei_gap", number_or_null(r.ei_gap)},   {"be_gap", number_or_null(r.be_gap)},
            {"dp_gap", number_or_null(r.dp_gap)},   {"eo_gap", number_or_null(r.eo_gap)},
            {"ei_rate", pair(r.ei_rate)},           {"be_rate", pair(r.be_rate)},
            {"dp_rate", pair(r.dp_rate)},           {"eo_rate", pair(r.eo_rate)}};
}

Json to_json(const TrainConfig& cfg) {
    return {{"epochs", cfg.epochs},
            {"batch_size", cfg.batch_size},
            {"learning_rate", cfg.learning_rate},
            {"lambda1", cfg.lambda1},
            {"lambda2", cfg.lambda2},
            {"swf_components", cfg.components.to_string()},
            {"optimizer", to_string(cfg.optimizer)},
            {"seed", cfg.seed},
            {"temperature", cfg.temperature},
            {"baseline_lambda", cfg.baseline_lambda},
            {"validation_fraction", cfg.validation_fraction}};
}

Json to_json(const AuditReport& r) {
    Json j;
    j["condition"] = r.condition;
    j["pass"] = r.pass;
    j["tolerance"] = r.tolerance;
    j["worst_violation"] = r.worst;
    j["checked"] = r.checked;
    if (r.offset) j["offset"] = *r.offset;
    if (r.offset_positive) j["offset_positive"] = *r.offset_positive;
    if (r.realizable) j["realizable"] = *r.realizable;
    Json v = Json::array();
    for (const AuditViolation& a : r.violations) {
        v.push_back({{"base", to_json(a.base)}, {"probe", to_json(a.probe)}, {"magnitude", a.magnitude}});
    }
    j["violations"] = v;
    return j;
}

Json to_json(const ExampleReport& r) {
    Json j;
    j["example"] = r.name;
    j["pass"] = r.pass;
    Json agents = Json::array();
    for (const ExampleAgent& a : r.agents) {
        agents.push_back({{"x", a.x}, {"x_star", a.x_star}, {"h_x", a.h_before}, {"h_x_star", a.h_after}});
    }
    j["agents"] = agents;
    j["imp"] = r.imp;
    j["sf"] = r.sf;
    j["aw"] = r.aw;
    if (r.name == "ex1") {
        j["imp_max_line"] = {{"slope", r.best_slope}, {"intercept", r.best_intercept}};
        j["least_squares_line"] = {{"slope", r.ls_slope}, {"intercept", r.ls_intercept}};
        j["constant_policy_aw"] = r.constant_aw;
    }
    j["checks"] = r.checks;
    return j;
}

void save_json(const std::string& path, const Json& j) {
    std::ofstream out(path);
    if (!out) {
        throw RuntimeFailure("cannot write " + path);
    }
    out << j.dump(2) << '\n';
    if (!out) {
        throw RuntimeFailure("failed writing " + path);
    }
}

Json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return Json::parse(ss.str());
    } catch (const Json::parse_error& e) {
        throw ValidationError(path + ": invalid JSON: " + e.what());
    }
}

Policy load_policy(const std::string& path) { return policy_from_json(load_json(path)); }

LabelingModel load_labeler(const std::string& path) { return labeler_from_json(load_json(path)); }

LearnedResponse load_learned_response(const std::string& path) {
    return learned_response_from_json(load_json(path));
}

}  // namespace stwf
