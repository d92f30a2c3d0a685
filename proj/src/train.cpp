#include "stwf/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>

namespace stwf {

std::string to_string(Optimizer opt) { return opt == Optimizer::Sgd ? "sgd" : "adam"; }

Optimizer optimizer_from_string(const std::string& name) {
    if (name == "sgd") return Optimizer::Sgd;
    if (name == "adam") return Optimizer::Adam;
    throw ValidationError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

std::string to_string(Algo algo) {
    switch (algo) {
        case Algo::Stwf: return "stwf";
        case Algo::Erm: return "erm";
        case Algo::Safe: return "safe";
        case Algo::Ei: return "ei";
        case Algo::Be: return "be";
    }
    return "?";
}

Algo algo_from_string(const std::string& name) {
    for (Algo a : {Algo::Stwf, Algo::Erm, Algo::Safe, Algo::Ei, Algo::Be}) {
        if (to_string(a) == name) {
            return a;
        }
    }
    throw ValidationError("unknown algorithm '" + name + "' (expected stwf, erm, safe, ei or be)");
}

void TrainConfig::validate() const {
    require(epochs >= 1, "epochs must be at least 1");
    require(batch_size >= 1, "batch size must be at least 1");
    require(learning_rate > 0.0 && std::isfinite(learning_rate), "learning rate must be positive");
    require(lambda1 >= 0.0 && lambda2 >= 0.0, "lambda1 and lambda2 must be non-negative");
    require(temperature > 0.0, "surrogate temperature must be positive");
    require(baseline_lambda >= 0.0, "baseline regulariser must be non-negative");
    require(validation_fraction >= 0.0 && validation_fraction < 1.0, "validation fraction must be in [0, 1)");
}

std::string TrainTrace::to_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "epoch,l_dw,l_imp,l_sf,l_aw,total,val_dw,val_imp,val_sf,val_aw\n";
    for (const EpochRecord& e : epochs) {
        out << e.epoch << ',' << e.l_dw << ',' << e.l_imp << ',' << e.l_sf << ',' << e.l_aw << ',' << e.total << ','
            << e.validation.dw << ',' << e.validation.imp << ',' << e.validation.sf << ',' << e.validation.aw
            << '\n';
    }
    return out.str();
}

Policy initial_policy(const Dataset& data) {
    Policy p = Policy::zeros(PolicyKind::LinearSigmoid, data.dim());
    p.set_domain(data.domain());
    return p;
}

namespace {

struct Objective {
    LossWeights weights;
    bool penalty = false;
    FairnessPenalty penalty_kind = FairnessPenalty::EqualImprovability;
    double penalty_lambda = 0.0;
    double temperature = 0.1;
};

std::vector<Index> iota(Index n) {
    std::vector<Index> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), Index{0});
    return v;
}

TrainResult run_training(const Dataset& data, const LabelingModel& h, const ResponseModel& resp,
                         const TrainConfig& cfg, const Objective& obj, Policy policy) {
    cfg.validate();
    require(!data.empty(), "training data is empty");
    require(h.dim() == data.dim() && policy.dim() == data.dim(), "feature dimension mismatch");
    const Index n = data.size();
    const Index n_val = static_cast<Index>(std::llround(cfg.validation_fraction * static_cast<double>(n)));
    const Index n_fit = n - n_val;
    require(n_fit >= 1, "no rows left for training after the validation hold-out");
    require(cfg.batch_size <= n_fit, "batch size exceeds the number of training rows");
    if (obj.penalty) {
        require(data.has_groups(), "EI and BE baselines need a group attribute");
    }

    std::vector<Index> fit_rows = iota(n_fit);
    std::vector<Index> val_rows(static_cast<std::size_t>(n_val));
    std::iota(val_rows.begin(), val_rows.end(), n_fit);
    const Dataset val = n_val > 0 ? data.subset(val_rows) : Dataset();
    const Matrix& x_all = data.features();
    const Eigen::VectorXi& y_all = data.labels();

    std::mt19937_64 rng(cfg.seed);
    Adam adam(policy.num_params());
    TrainTrace trace;
    Vector theta = policy.params();
    const Index batch = cfg.batch_size;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(fit_rows.begin(), fit_rows.end(), rng);
        EpochRecord rec;
        rec.epoch = epoch;
        for (Index start = 0; start < n_fit; start += batch) {
            const Index m = std::min(batch, n_fit - start);
            Matrix xb(m, data.dim());
            Eigen::VectorXi yb(m);
            Eigen::VectorXi zb(obj.penalty ? m : 0);
            for (Index r = 0; r < m; ++r) {
                const Index src = fit_rows[static_cast<std::size_t>(start + r)];
                xb.row(r) = x_all.row(src);
                yb[r] = y_all[src];
                if (obj.penalty) {
                    zb[r] = data.groups()[src];
                }
            }
            LossBreakdown loss = composite_loss(policy, xb, yb, h, resp, obj.weights, true);
            double total = loss.total;
            if (obj.penalty && obj.penalty_lambda > 0.0) {
                const PenaltyValue pen = fairness_penalty(policy, xb, zb, resp, obj.penalty_kind, obj.temperature);
                total += obj.penalty_lambda * pen.value;
                loss.grad += obj.penalty_lambda * pen.grad;
            }
            const double share = static_cast<double>(m) / static_cast<double>(n_fit);
            rec.l_dw += share * loss.l_dw;
            rec.l_imp += share * loss.l_imp;
            rec.l_sf += share * loss.l_sf;
            rec.l_aw += share * loss.l_aw;
            rec.total += share * total;
            if (!std::isfinite(total) || !loss.grad.allFinite()) {
                trace.epochs.push_back(rec);
                throw DivergenceError("training diverged at epoch " + std::to_string(epoch), trace);
            }
            if (cfg.optimizer == Optimizer::Adam) {
                adam.step(theta, loss.grad, cfg.learning_rate);
            } else {
                theta -= cfg.learning_rate * loss.grad;
            }
            if (!theta.allFinite()) {
                trace.epochs.push_back(rec);
                throw DivergenceError("parameters became non-finite at epoch " + std::to_string(epoch), trace);
            }
            policy.set_params(theta);
        }
        if (cfg.trace && n_val > 0) {
            rec.validation = welfare_report(policy, val, h, resp);
        }
        trace.epochs.push_back(rec);
    }
    return {std::move(policy), std::move(trace)};
}

Objective stwf_objective(const TrainConfig& cfg) {
    Objective obj;
    obj.weights = {cfg.lambda1, cfg.lambda2, cfg.components};
    obj.temperature = cfg.temperature;
    return obj;
}

}  // namespace

TrainResult stwf_train(const Dataset& data, const LabelingModel& h, const ResponseModel& resp,
                       const TrainConfig& cfg, const Policy& init) {
    return run_training(data, h, resp, cfg, stwf_objective(cfg), init);
}

TrainResult stwf_train(const Dataset& data, const LabelingModel& h, const ResponseModel& resp,
                       const TrainConfig& cfg) {
    return stwf_train(data, h, resp, cfg, initial_policy(data));
}

TrainResult baseline_train(const Dataset& data, const LabelingModel& h, const ResponseModel& resp, Algo algo,
                           const TrainConfig& cfg) {
    Objective obj;
    obj.temperature = cfg.temperature;
    obj.weights.components = {true, true};
    switch (algo) {
        case Algo::Erm:
            break;
        case Algo::Safe:
            obj.weights.lambda1 = cfg.baseline_lambda;
            obj.weights.components = {false, true};
            break;
        case Algo::Ei:
        case Algo::Be:
            if (!data.has_groups()) {
                throw ValidationError(to_string(algo) + " baseline needs a group attribute");
            }
            obj.penalty = true;
            obj.penalty_kind = algo == Algo::Ei ? FairnessPenalty::EqualImprovability : FairnessPenalty::BoundedEffort;
            obj.penalty_lambda = cfg.baseline_lambda;
            break;
        case Algo::Stwf:
            throw ValidationError("baseline_train does not run STWF; use stwf_train");
    }
    return run_training(data, h, resp, cfg, obj, initial_policy(data));
}

TrainResult train_policy(const Dataset& data, const LabelingModel& h, const ResponseModel& resp, Algo algo,
                         const TrainConfig& cfg) {
    return algo == Algo::Stwf ? stwf_train(data, h, resp, cfg) : baseline_train(data, h, resp, algo, cfg);
}

CvResult cross_validate(const Dataset& data, const LabelingModel& h, const ResponseModel& resp, Algo algo,
                        const TrainConfig& base, const CvGrid& grid, const std::vector<std::uint64_t>& seeds) {
    if (grid.size() == 0) {
        throw ValidationError("cross-validation grid is empty");
    }
    require(!seeds.empty(), "cross-validation needs at least one seed");
    base.validate();
    const Index n = data.size();
    const Index n_val = static_cast<Index>(std::llround(base.validation_fraction * static_cast<double>(n)));
    require(n_val >= 1 && n - n_val >= 1, "cross-validation needs non-empty fit and validation parts");
    std::vector<Index> fit_rows = iota(n - n_val);
    std::vector<Index> val_rows(static_cast<std::size_t>(n_val));
    std::iota(val_rows.begin(), val_rows.end(), n - n_val);
    const Dataset fit = data.subset(fit_rows);
    const Dataset val = data.subset(val_rows);

    const bool search_lambda = algo == Algo::Stwf;
    const std::vector<double> zero = {0.0};
    const std::vector<double>& l1_grid = search_lambda ? grid.lambda1 : zero;
    const std::vector<double>& l2_grid = search_lambda ? grid.lambda2 : zero;

    CvResult out;
    bool have_best = false;
    CvCandidate best;
    for (double lr : grid.learning_rates) {
        for (double l1 : l1_grid) {
            for (double l2 : l2_grid) {
                TrainConfig cfg = base;
                cfg.learning_rate = lr;
                cfg.lambda1 = l1;
                cfg.lambda2 = l2;
                cfg.validation_fraction = 0.0;
                cfg.trace = false;
                double sum = 0.0;
                for (std::uint64_t seed : seeds) {
                    cfg.seed = seed;
                    double score;
                    try {
                        const TrainResult r = train_policy(fit, h, resp, algo, cfg);
                        score = welfare_report(r.policy, val, h, resp).total;
                    } catch (const DivergenceError&) {
                        score = -std::numeric_limits<double>::infinity();
                    }
                    sum += score;
                }
                CvCandidate c{lr, l1, l2, sum / static_cast<double>(seeds.size())};
                out.candidates.push_back(c);
                const auto key = [](const CvCandidate& k) {
                    return std::make_tuple(k.learning_rate, k.lambda1, k.lambda2);
                };
                if (!have_best || c.mean_total > best.mean_total ||
                    (c.mean_total == best.mean_total && key(c) < key(best))) {
                    best = c;
                    have_best = true;
                }
            }
        }
    }
    out.best = base;
    out.best.learning_rate = best.learning_rate;
    out.best.lambda1 = best.lambda1;
    out.best.lambda2 = best.lambda2;
    return out;
}

}  // namespace stwf
