#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "escalate/model_spec.hpp"

namespace escalate {

/// Raw observation vector Y_t; one slot per spec observable, nullopt = missing.
struct ObservationRecord {
    std::int64_t t = 0;
    std::vector<std::optional<double>> values;

    bool operator==(const ObservationRecord&) const = default;
};

/// Record with every observable missing.
ObservationRecord empty_record(const ModelSpec& spec, std::int64_t t);

/// Filtered intensity Z_j per task; nullopt when no incident observable is present.
struct IntensityVector {
    std::vector<std::optional<double>> z;

    bool operator==(const IntensityVector&) const = default;
};

/// (y - mean) / sd per observable; missing stays missing.
std::vector<std::optional<double>> normalize(const ObservationRecord& record, const ModelSpec& spec);

/// Z_j = mean of the present normalized observables incident on task j.
IntensityVector filter_tau(const std::vector<std::optional<double>>& normalized, const ModelSpec& spec);

IntensityVector intensities(const ObservationRecord& record, const ModelSpec& spec);

/// Asymmetric logistic task likelihood: rate k0 below x0, k1 at or above.
/// The not-enacted curve is the complement.
double logistic_g(double x, bool enacted, const LogisticParams& params);
double log_logistic_g(double x, bool enacted, const LogisticParams& params);

/// Per-task log g for theta = 0 and theta = 1. Tasks with undefined Z get
/// log 0.5 for both values and are flagged uninformative.
struct TaskLikelihoods {
    std::vector<std::array<double, 2>> log_g;
    std::vector<bool> informative;
};

TaskLikelihoods task_likelihoods(const IntensityVector& z, const ModelSpec& spec);

/// p(Z over a task set | configuration): mean (average mode) or product of
/// the per-task g values. Bit b of `mask` is the value of task b of the set.
double task_set_likelihood(const std::vector<double>& z, std::uint32_t mask, const std::vector<LogisticParams>& params,
                           LikelihoodMode mode);

/// Log of the same quantity from precomputed per-task log g values.
double log_task_set_likelihood(const std::vector<std::array<double, 2>>& log_g, std::uint32_t mask, LikelihoodMode mode);

/// One JSON record: {"t": int, "values": {observable id: number | null}}.
/// Observables left out are missing. Unknown observables throw.
ObservationRecord parse_observation(const nlohmann::json& doc, const ModelSpec& spec);
nlohmann::json to_json(const ObservationRecord& record, const ModelSpec& spec);

/// CSV with a header row: `t` then observable ids (any subset, any order).
/// Blank cells are missing.
std::vector<ObservationRecord> parse_observation_csv(std::string_view text, const ModelSpec& spec);

}  // namespace escalate
