#pragma once

#include <json.hpp>

#include "memnet/evaluation.hpp"
#include "memnet/models.hpp"
#include "memnet/synth.hpp"
#include "memnet/training.hpp"

namespace memnet::models {
void to_json(nlohmann::json& j, const MemNetConfig& c);
void from_json(const nlohmann::json& j, MemNetConfig& c);
}  // namespace memnet::models

namespace memnet::train {
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
}  // namespace memnet::train

namespace memnet::corpus {
void to_json(nlohmann::json& j, const SyntheticConfig& c);
void from_json(const nlohmann::json& j, SyntheticConfig& c);
}  // namespace memnet::corpus

namespace memnet::eval {
void to_json(nlohmann::json& j, const SubsetMetrics& m);
void to_json(nlohmann::json& j, const AttentionStats& s);
void to_json(nlohmann::json& j, const EvalReport& r);
void to_json(nlohmann::json& j, const CompareReport& r);
}  // namespace memnet::eval
