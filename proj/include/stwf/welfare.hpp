#ifndef STWF_WELFARE_HPP
#define STWF_WELFARE_HPP

#include <array>
#include <string>

#include "stwf/common.hpp"
#include "stwf/data.hpp"
#include "stwf/models.hpp"
#include "stwf/response.hpp"

namespace stwf {

struct WelfareReport {
    double dw = 0.0;   // accuracy of 1(f(x) >= 0.5) on pre-response features
    double imp = 0.0;  // mean h(x*) - h(x)
    double sf = 0.0;   // mean min(h(x*) - h(x), 0)
    double aw = 0.0;   // mean min(f(x) - h(x), 0)
    double swf = 0.0;  // imp + sf
    double total = 0.0;  // dw + swf + aw
    Index n_deteriorated = 0;
    Index n_underestimated = 0;
};

/// Group-conditional rates; undefined conditionals are NaN.
struct FairnessReport {
    double ei_gap = 0.0;
    double be_gap = 0.0;
    double dp_gap = 0.0;
    double eo_gap = 0.0;
    std::array<double, 2> ei_rate{};
    std::array<double, 2> be_rate{};
    std::array<double, 2> dp_rate{};
    std::array<double, 2> eo_rate{};
};

double decision_welfare(const Policy& policy, const Dataset& data);
double improvement(const Policy& policy, const Dataset& data, const LabelingModel& h, const ResponseModel& resp);
double safety(const Policy& policy, const Dataset& data, const LabelingModel& h, const ResponseModel& resp);
double agent_welfare(const Policy& policy, const Dataset& data, const LabelingModel& h);

/// All four welfare measures from one pass over the responses.
WelfareReport welfare_report(const Policy& policy, const Dataset& data, const LabelingModel& h,
                             const ResponseModel& resp);
/// Same, with responses already computed (rows aligned with data).
WelfareReport welfare_report(const Policy& policy, const Dataset& data, const LabelingModel& h,
                             const Matrix& responses);

FairnessReport fairness_report(const Policy& policy, const Dataset& data, const ResponseModel& resp);
FairnessReport fairness_report(const Policy& policy, const Dataset& data, const Matrix& responses);

struct SwfComponents {
    bool imp = true;
    bool sf = true;

    std::string to_string() const;
    static SwfComponents parse(const std::string& text);
};

struct LossWeights {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    SwfComponents components;
};

struct LossBreakdown {
    double l_dw = 0.0;
    double l_imp = 0.0;
    double l_sf = 0.0;
    double l_aw = 0.0;
    double total = 0.0;
    Vector grad;  // d total / d theta
    SwfComponents components;
    Index n_sf = 0;  // |A_SF|
    Index n_aw = 0;  // |A_AW|
};

/*
 * Regularised training objective on a batch:
 *
 *   l_dw + lambda1 * (l_imp [+ l_sf]) + lambda2 * l_aw
 *
 * Subset losses are normalised by the full batch size. Set memberships
 * (deteriorated, underestimated) are recomputed from current values and
 * carry no gradient. Probabilities are clipped to [1e-7, 1 - 1e-7] inside
 * logs; the clip has zero gradient where active.
 */
LossBreakdown composite_loss(const Policy& policy, const Matrix& features, const Eigen::VectorXi& labels,
                             const LabelingModel& h, const ResponseModel& resp, const LossWeights& weights,
                             bool with_gradient = true);

enum class FairnessPenalty { EqualImprovability, BoundedEffort };

struct PenaltyValue {
    double value = 0.0;  // squared soft gap
    double gap = 0.0;
    Vector grad;
};

/// Squared difference of sigmoid-smoothed group rates; zero when a group is
/// empty. `temperature` scales the sigmoid surrogates of the indicators.
PenaltyValue fairness_penalty(const Policy& policy, const Matrix& features, const Eigen::VectorXi& groups,
                              const ResponseModel& resp, FairnessPenalty kind, double temperature);

}  // namespace stwf

#endif  // STWF_WELFARE_HPP
