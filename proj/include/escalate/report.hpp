#pragma once

#include <string>
#include <vector>

#include "escalate/diagnostics.hpp"
#include "escalate/engine.hpp"

namespace escalate {

/// "%.12g", with inf / -inf / nan spelled out.
std::string format_number(double x);

/// Columns: t, kind, one probability per state, score, rho_<id> per active
/// state (posterior log odds against neutral). The first row has kind
/// "initial" and holds the starting distribution; the rest are "posterior".
std::string timeline_csv(const PosteriorTimeline& timeline, const ModelSpec& spec);

/// Row per configuration bitstring (np_<bits>, first task leftmost), then
/// ntp (table total), p0 and xi rows; one column per active state.
std::string interp_table_csv(const CompiledModel& model);
nlohmann::json interp_table_json(const CompiledModel& model);

/// One row per (setting, state): the prior, then the probability in force at
/// every checkpoint.
std::string checkpoint_csv(const std::vector<SweepPoint>& points, const ModelSpec& spec,
                           const std::vector<std::int64_t>& checkpoints);
nlohmann::json checkpoint_json(const std::vector<SweepPoint>& points, const ModelSpec& spec,
                               const std::vector<std::int64_t>& checkpoints);

std::string robustness_csv(const RobustnessSeries& series);
nlohmann::json robustness_json(const RobustnessSeries& series);

std::string longrun_csv(const LongrunReport& report, const ModelSpec& spec);
std::string longrun_sweep_csv(const LongrunReport& report, const ModelSpec& spec);
nlohmann::json longrun_json(const LongrunReport& report, const ModelSpec& spec);

}  // namespace escalate
