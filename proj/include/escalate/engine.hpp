#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "escalate/model_spec.hpp"
#include "escalate/observation.hpp"
#include "escalate/rdceg.hpp"
#include "escalate/task_model.hpp"

namespace escalate {

/// Validated spec plus everything the filter needs precomputed: the
/// transition matrix and its k-step power, per-state task tables in log
/// space, and the neutral naive-Bayes joints over each state's task set.
class CompiledModel {
public:
    /// Throws Error("INVALID_MODEL") on validation errors and propagates
    /// NO_ROOT from the task tables. `tables` replaces the interpolated
    /// table of the listed active states.
    static std::shared_ptr<const CompiledModel> compile(ModelSpec spec,
                                                        const std::map<std::size_t, std::vector<double>>& tables = {});

    const ModelSpec& spec() const noexcept { return spec_; }
    std::size_t num_states() const noexcept { return spec_.num_states(); }
    const TransitionMatrix& matrix() const noexcept { return m_; }
    /// M^k, the transition over one observation interval.
    const TransitionMatrix& step_matrix() const noexcept { return mk_; }
    /// M^(k * intervals); intervals == 1 returns step_matrix().
    TransitionMatrix interval_matrix(std::int64_t intervals) const;
    const TaskConditionalTable& table(std::size_t state) const { return tables_.at(state); }
    const std::vector<std::size_t>& union_tasks() const noexcept { return union_tasks_; }
    StateDistribution prior() const { return StateDistribution(spec_.priors); }

    struct StateCache {
        std::vector<double> log_table;    // log p(theta | w_i) per mask
        std::vector<double> log_neutral;  // log naive-Bayes p(theta | w_0) per mask
    };
    const StateCache& cache(std::size_t state) const { return caches_.at(state); }

private:
    CompiledModel() = default;

    ModelSpec spec_;
    TransitionMatrix m_;
    TransitionMatrix mk_;
    std::vector<TaskConditionalTable> tables_;  // index 0 unused
    std::vector<StateCache> caches_;
    std::vector<std::size_t> union_tasks_;
};

using ModelHandle = std::shared_ptr<const CompiledModel>;

/// validate_model plus, when that is clean, an XI_NO_ROOT finding for every
/// active state whose interpolation has no normalizing exponent.
ValidationReport check_model(const ModelSpec& spec);

/// Direct task evidence: clamped task values, keyed by task index.
struct EvidenceEvent {
    std::int64_t t = 0;
    std::map<std::size_t, int> clamps;
    std::string note;

    bool operator==(const EvidenceEvent&) const = default;
};

struct Annotation {
    std::int64_t t = 0;
    std::string note;

    bool operator==(const Annotation&) const = default;
};

using CaseEvent = std::variant<ObservationRecord, EvidenceEvent, Annotation>;
std::int64_t event_time(const CaseEvent& event);

struct UpdateResult {
    StateDistribution posterior;
    std::vector<double> lambda;  // per state; 0 at neutral
    double log_evidence = 0.0;   // log p(Z, clamps | past) under the union neutral normalization
    bool informative = false;    // false when the update was skipped
};

/// dist * M^(k * intervals).
StateDistribution predict(const StateDistribution& dist, const CompiledModel& model, std::int64_t intervals = 1);

/// Filter update from per-task log likelihoods. Throws FLAT_EVIDENCE when
/// every state's mass vanishes.
UpdateResult update(const StateDistribution& dist, const TaskLikelihoods& likelihoods, const CompiledModel& model);
UpdateResult update(const StateDistribution& dist, const IntensityVector& z, const CompiledModel& model);

/// Update with clamped tasks. Clamped tasks restrict the configuration sum
/// and their intensities are ignored. Throws CONTRADICTORY_EVIDENCE when
/// every state's mass vanishes.
UpdateResult condition_on_tasks(const StateDistribution& dist, const EvidenceEvent& evidence,
                                const std::optional<TaskLikelihoods>& likelihoods, const CompiledModel& model);
UpdateResult condition_on_tasks(const StateDistribution& dist, const EvidenceEvent& evidence,
                                const std::optional<IntensityVector>& z, const CompiledModel& model);

double position_score(const StateDistribution& dist, const ModelSpec& spec);

struct TimelineEntry {
    std::int64_t t = 0;
    StateDistribution predicted;
    StateDistribution posterior;
    double score = 0.0;
    std::vector<double> rho;       // log(predicted_i / predicted_0)
    std::vector<double> lambda;    // task-marginalized log likelihood ratio
    std::vector<double> rho_star;  // log(posterior_i / posterior_0)
    double log_evidence = 0.0;
    bool informative = false;

    bool operator==(const TimelineEntry&) const = default;
};

struct PosteriorTimeline {
    std::int64_t initial_t = 0;
    StateDistribution initial;
    double initial_score = 0.0;
    std::vector<TimelineEntry> entries;

    bool operator==(const PosteriorTimeline&) const = default;
};

/// One filtering period: an observation, evidence, or both at the same t.
struct StepInput {
    std::int64_t t = 0;
    std::optional<ObservationRecord> record;
    std::optional<EvidenceEvent> evidence;
};

/// Immutable case value. Every operation returns a new CaseState.
class CaseState {
public:
    explicit CaseState(ModelHandle model);

    const ModelHandle& model() const noexcept { return model_; }
    const StateDistribution& current() const noexcept { return current_; }
    const std::vector<CaseEvent>& events() const noexcept { return events_; }
    const PosteriorTimeline& timeline() const noexcept { return timeline_; }
    std::optional<std::int64_t> last_time() const noexcept { return last_t_; }
    /// Time of the last filtering step (annotations excluded).
    std::optional<std::int64_t> last_step_time() const noexcept { return last_step_t_; }

    CaseState step(const StepInput& input) const;
    CaseState step(const ObservationRecord& record, const std::optional<EvidenceEvent>& evidence = std::nullopt) const;
    CaseState annotate(const Annotation& note) const;

private:
    ModelHandle model_;
    StateDistribution current_;
    std::vector<CaseEvent> events_;
    PosteriorTimeline timeline_;
    std::optional<std::int64_t> last_t_;
    std::optional<std::int64_t> last_step_t_;
};

/// Timeline of hypothetical steps computed on a copy; starts at the case's
/// current distribution.
PosteriorTimeline whatif(const CaseState& state, const std::vector<StepInput>& hypothetical);

struct LogOddsRow {
    std::int64_t t = 0;
    std::vector<double> rho;
    std::vector<double> lambda;
    std::vector<double> rho_star;  // rho + lambda
    /// Largest |rho + lambda - log(posterior_i / posterior_0)| over states
    /// where both sides are finite.
    double max_discrepancy = 0.0;
};
std::vector<LogOddsRow> log_odds_timeline(const CaseState& state);

/// Parse {"t", "clamps": {task id: 0|1}, "note"?}; unknown tasks throw.
EvidenceEvent parse_evidence(const nlohmann::json& doc, const ModelSpec& spec);
nlohmann::json to_json(const EvidenceEvent& evidence, const ModelSpec& spec);

/// A combined period: {"t", "values"?, "clamps"?, "note"?}. `values` gives
/// the observation record, `clamps` the evidence; either may be absent.
StepInput parse_step_input(const nlohmann::json& doc, const ModelSpec& spec);
nlohmann::json to_json(const StepInput& input, const ModelSpec& spec);

nlohmann::json to_json(const TimelineEntry& entry, const ModelSpec& spec);
nlohmann::json to_json(const PosteriorTimeline& timeline, const ModelSpec& spec);
/// Finite numbers stay numbers; infinities become "inf" / "-inf", NaN "nan".
nlohmann::json json_number(double x);

}  // namespace escalate
