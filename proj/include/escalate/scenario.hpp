#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "escalate/engine.hpp"

namespace escalate {

/// Ordered filtering periods to replay against a model.
struct Scenario {
    std::string label;
    std::vector<StepInput> steps;
};

/// JSON lines: one object per line, {"t", "values"} for observations and
/// {"kind": "evidence", "t", "clamps", "note"?} for evidence. Lines with the
/// same t are merged into one period.
Scenario parse_scenario_jsonl(std::string_view text, const ModelSpec& spec);
Scenario parse_scenario_csv(std::string_view text, const ModelSpec& spec);
/// Dispatches on extension: .csv, otherwise JSON lines.
Scenario load_scenario(const std::filesystem::path& path, const ModelSpec& spec);

/// Throws Error("OUT_OF_ORDER") unless period times strictly increase.
void check_scenario(const Scenario& scenario);

PosteriorTimeline run_scenario(const ModelHandle& model, const Scenario& scenario);
CaseState replay(const ModelHandle& model, const Scenario& scenario);

std::string read_file(const std::filesystem::path& path);

}  // namespace escalate
