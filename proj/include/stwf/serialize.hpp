#ifndef STWF_SERIALIZE_HPP
#define STWF_SERIALIZE_HPP

#include <string>

#include <json.hpp>

#include "stwf/audit.hpp"
#include "stwf/mlp.hpp"
#include "stwf/models.hpp"
#include "stwf/response.hpp"
#include "stwf/train.hpp"
#include "stwf/welfare.hpp"

namespace stwf {

using Json = nlohmann::ordered_json;

inline constexpr int kFormatVersion = 1;

// Doubles are written in shortest round-trip form, so every reader below
// restores parameters bit for bit. Infinite box bounds and NaN metrics are
// written as null.

Json to_json(const Vector& v);
Vector vector_from_json(const Json& j);

Json to_json(const Box& box);
Box box_from_json(const Json& j);

Json to_json(const Mlp& net);
Mlp mlp_from_json(const Json& j);

Json to_json(const Policy& policy);
Policy policy_from_json(const Json& j);

Json to_json(const LabelingModel& h);
LabelingModel labeler_from_json(const Json& j);

Json to_json(const LearnedResponse& model);
LearnedResponse learned_response_from_json(const Json& j);

Json to_json(const WelfareReport& r);
Json to_json(const FairnessReport& r);
Json to_json(const TrainConfig& cfg);
Json to_json(const AuditReport& r);
Json to_json(const ExampleReport& r);

/// Writes `j` (two-space indent, trailing newline).
void save_json(const std::string& path, const Json& j);
Json load_json(const std::string& path);

Policy load_policy(const std::string& path);
LabelingModel load_labeler(const std::string& path);
LearnedResponse load_learned_response(const std::string& path);

}  // namespace stwf

#endif  // STWF_SERIALIZE_HPP
