#pragma once

#include <nlohmann/json.hpp>

#include "mml/losses.hpp"
#include "mml/synthdata.hpp"
#include "mml/train.hpp"

namespace mml {

// nlohmann ADL hooks so configs round-trip through JSON files (CLI --config,
// report provenance blocks, checkpoint headers).
void to_json(nlohmann::json& j, const SynthConfig& cfg);
void from_json(const nlohmann::json& j, SynthConfig& cfg);

void to_json(nlohmann::json& j, const MethodSpec& m);
void from_json(const nlohmann::json& j, MethodSpec& m);

void to_json(nlohmann::json& j, const SoftTripleConfig& cfg);
void from_json(const nlohmann::json& j, SoftTripleConfig& cfg);

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

std::string attention_name(AttentionMode mode);
AttentionMode attention_from_name(const std::string& name);
std::string norm_axis_name(NormAxis axis);
NormAxis norm_axis_from_name(const std::string& name);
std::string criterion_name(EsCriterion c);
EsCriterion criterion_from_name(const std::string& name);

}  // namespace mml
