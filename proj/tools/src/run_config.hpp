#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "oamfso/eval.hpp"

namespace oamfso::cli {

/// Seed used when no --seed is given: OAM_FSO_SEED if set, else 1.
std::uint64_t default_seed();

nlohmann::json to_json(const eval::PipelineConfig& config);
/// Fields absent from `j` keep the values already in `config`.
void merge_json(const nlohmann::json& j, eval::PipelineConfig& config);

/// --paper-scale: 99 screens per class, 50 of them for training.
void apply_paper_scale(eval::PipelineConfig& config);

nlohmann::json to_json(const eval::SerReport& report);

}  // namespace oamfso::cli
