#ifndef STWF_TRAIN_HPP
#define STWF_TRAIN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "stwf/common.hpp"
#include "stwf/data.hpp"
#include "stwf/models.hpp"
#include "stwf/response.hpp"
#include "stwf/welfare.hpp"

namespace stwf {

enum class Optimizer { Sgd, Adam };

std::string to_string(Optimizer opt);
Optimizer optimizer_from_string(const std::string& name);

struct TrainConfig {
    int epochs = 200;
    int batch_size = 128;
    double learning_rate = 0.01;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    SwfComponents components;
    Optimizer optimizer = Optimizer::Adam;
    std::uint64_t seed = 0;
    double temperature = 0.1;       // sigmoid surrogate for the fairness baselines
    double baseline_lambda = 0.1;   // regulariser strength for SAFE / EI / BE
    double validation_fraction = 0.2;
    bool trace = true;              // evaluate the validation split every epoch

    void validate() const;
};

struct EpochRecord {
    int epoch = 0;
    double l_dw = 0.0;
    double l_imp = 0.0;
    double l_sf = 0.0;
    double l_aw = 0.0;
    double total = 0.0;
    WelfareReport validation;
};

struct TrainTrace {
    std::vector<EpochRecord> epochs;

    std::string to_csv() const;
};

struct TrainResult {
    Policy policy;
    TrainTrace trace;
};

/// Raised when the loss or parameters become non-finite; carries the
/// epochs completed so far.
class DivergenceError : public RuntimeFailure {
public:
    DivergenceError(const std::string& what, TrainTrace trace)
        : RuntimeFailure(what), trace_(std::move(trace)) {}
    const TrainTrace& trace() const { return trace_; }

private:
    TrainTrace trace_;
};

enum class Algo { Stwf, Erm, Safe, Ei, Be };

std::string to_string(Algo algo);
Algo algo_from_string(const std::string& name);

/*
 * Minibatch training of a linear-sigmoid (or polynomial) policy against a
 * fixed labeler h and response model. The last `validation_fraction` of
 * `data` is held out for the per-epoch trace; batches are drawn from the
 * rest with a fresh permutation every epoch.
 */
TrainResult stwf_train(const Dataset& data, const LabelingModel& h, const ResponseModel& resp,
                       const TrainConfig& cfg, const Policy& init);
TrainResult stwf_train(const Dataset& data, const LabelingModel& h, const ResponseModel& resp,
                       const TrainConfig& cfg);

TrainResult baseline_train(const Dataset& data, const LabelingModel& h, const ResponseModel& resp, Algo algo,
                           const TrainConfig& cfg);

/// Dispatches on `algo`; Stwf uses cfg.lambda1 / cfg.lambda2.
TrainResult train_policy(const Dataset& data, const LabelingModel& h, const ResponseModel& resp, Algo algo,
                         const TrainConfig& cfg);

/// Zero-initialised linear-sigmoid policy carrying the data's domain box.
Policy initial_policy(const Dataset& data);

struct CvGrid {
    std::vector<double> learning_rates = {0.001, 0.01, 0.1};
    std::vector<double> lambda1 = {0.0, 0.5, 1.0, 1.5, 2.0};
    std::vector<double> lambda2 = {0.0, 0.5, 1.0, 1.5, 2.0};

    std::size_t size() const { return learning_rates.size() * lambda1.size() * lambda2.size(); }
};

struct CvCandidate {
    double learning_rate = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double mean_total = 0.0;
};

struct CvResult {
    TrainConfig best;
    std::vector<CvCandidate> candidates;  // grid order
};

/*
 * Grid search over (learning rate, lambda1, lambda2). Each candidate is
 * trained on the first (1 - validation_fraction) of `data` once per seed and
 * scored by total welfare on the remainder; the highest mean wins and ties
 * go to the lexicographically smallest triple. Non-STWF algorithms search the
 * learning rate only.
 */
CvResult cross_validate(const Dataset& data, const LabelingModel& h, const ResponseModel& resp, Algo algo,
                        const TrainConfig& base, const CvGrid& grid, const std::vector<std::uint64_t>& seeds);

}  // namespace stwf

#endif  // STWF_TRAIN_HPP
