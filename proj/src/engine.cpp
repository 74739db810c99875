#include "escalate/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "escalate/error.hpp"

namespace escalate {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Streaming log-sum-exp with max subtraction.
class LogSum {
public:
    void add(double x) {
        if (x == kNegInf) return;
        if (x <= peak_) {
            acc_ += std::exp(x - peak_);
        } else {
            acc_ = acc_ * std::exp(peak_ - x) + 1.0;
            peak_ = x;
        }
    }
    double value() const { return peak_ == kNegInf ? kNegInf : peak_ + std::log(acc_); }

private:
    double peak_ = kNegInf;
    double acc_ = 0.0;
};

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

// Log likelihood of one configuration from the unclamped bits only.
double config_loglik(const std::vector<std::array<double, 2>>& log_g, const std::vector<std::size_t>& free_bits,
                     std::uint32_t mask, LikelihoodMode mode) {
    if (free_bits.empty()) return 0.0;
    if (mode == LikelihoodMode::product) {
        double acc = 0.0;
        for (auto b : free_bits) acc += log_g[b][(mask >> b) & 1U];
        return acc;
    }
    LogSum sum;
    for (auto b : free_bits) sum.add(log_g[b][(mask >> b) & 1U]);
    return sum.value() - std::log(static_cast<double>(free_bits.size()));
}

const std::array<double, 2> kFlat = {-0.69314718055994530942, -0.69314718055994530942};

UpdateResult filter_update(const StateDistribution& dist, const TaskLikelihoods* likelihoods,
                           const std::map<std::size_t, int>& clamps, const CompiledModel& model, const char* fail_code) {
    const auto& spec = model.spec();
    const std::size_t n = model.num_states();
    if (dist.size() != n) throw Error("DIMENSION_MISMATCH", "distribution does not match the model");
    if (likelihoods && likelihoods->log_g.size() != spec.num_tasks()) {
        throw Error("DIMENSION_MISMATCH", "task likelihoods do not match the model");
    }

    auto log_g_of = [&](std::size_t task) -> const std::array<double, 2>& {
        return likelihoods ? likelihoods->log_g[task] : kFlat;
    };

    bool informative = false;
    if (likelihoods) {
        for (auto task : model.union_tasks()) {
            informative = informative || (likelihoods->informative[task] && !clamps.contains(task));
        }
    }

    UpdateResult result;
    result.lambda.assign(n, 0.0);
    result.informative = informative || !clamps.empty();
    if (!result.informative) {
        result.posterior = dist;
        return result;
    }

    const LikelihoodMode mode = spec.likelihood_mode;
    for (std::size_t i = 1; i < n; ++i) {
        const auto& sets = model.table(i).sets;
        const auto& cache = model.cache(i);
        const std::size_t r = sets.size();

        std::vector<std::array<double, 2>> local(r);
        std::vector<std::size_t> free_bits;
        std::uint32_t fixed_mask = 0;
        std::uint32_t fixed_values = 0;
        for (std::size_t b = 0; b < r; ++b) {
            const std::size_t task = sets.tasks[b];
            local[b] = log_g_of(task);
            if (auto it = clamps.find(task); it != clamps.end()) {
                fixed_mask |= 1U << b;
                if (it->second) fixed_values |= 1U << b;
            } else {
                free_bits.push_back(b);
            }
        }

        LogSum state_sum;
        LogSum neutral_sum;
        const std::uint32_t free_mask = (sets.num_configs() - 1) & ~fixed_mask;
        // Walk every subset of the free bits, fixed bits pinned.
        std::uint32_t sub = 0;
        do {
            const std::uint32_t mask = sub | fixed_values;
            const double ll = config_loglik(local, free_bits, mask, mode);
            state_sum.add(cache.log_table[mask] + ll);
            neutral_sum.add(cache.log_neutral[mask] + ll);
            sub = (sub - free_mask) & free_mask;
        } while (sub != 0);

        const double log_state = state_sum.value();
        result.lambda[i] = log_state == kNegInf ? kNegInf : log_state - neutral_sum.value();
    }

    // Neutral likelihood over the union of all task sets, in closed form.
    double log_neutral_union = 0.0;
    {
        std::vector<double> expected;
        for (auto task : model.union_tasks()) {
            const double p = spec.neutral_task_probs[task];
            if (auto it = clamps.find(task); it != clamps.end()) {
                log_neutral_union += it->second ? std::log(p) : std::log1p(-p);
                continue;
            }
            LogSum e;
            e.add(std::log(p) + log_g_of(task)[1]);
            e.add(std::log1p(-p) + log_g_of(task)[0]);
            expected.push_back(e.value());
        }
        if (!expected.empty()) {
            if (mode == LikelihoodMode::product) {
                for (double v : expected) log_neutral_union += v;
            } else {
                LogSum s;
                for (double v : expected) s.add(v);
                log_neutral_union += s.value() - std::log(static_cast<double>(expected.size()));
            }
        }
    }

    std::vector<double> log_w(n);
    double peak = kNegInf;
    for (std::size_t i = 0; i < n; ++i) {
        log_w[i] = safe_log(dist[i]) + result.lambda[i];
        if (std::isnan(log_w[i])) log_w[i] = kNegInf;
        peak = std::max(peak, log_w[i]);
    }
    if (peak == kNegInf || !std::isfinite(log_neutral_union)) {
        throw Error(fail_code, clamps.empty() ? "every state has zero likelihood for this observation"
                                              : "the clamped evidence leaves every state with zero mass");
    }
    std::vector<double> w(n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = std::exp(log_w[i] - peak);
        total += w[i];
    }
    for (auto& x : w) x /= total;
    result.posterior = StateDistribution(std::move(w));
    result.log_evidence = log_neutral_union + peak + std::log(total);
    return result;
}

std::vector<double> log_odds(const StateDistribution& dist) {
    std::vector<double> rho(dist.size(), 0.0);
    const double base = dist[kNeutral];
    for (std::size_t i = 1; i < dist.size(); ++i) {
        if (base == 0.0) {
            rho[i] = dist[i] > 0.0 ? std::numeric_limits<double>::infinity() : std::numeric_limits<double>::quiet_NaN();
        } else {
            rho[i] = safe_log(dist[i]) - std::log(base);
        }
    }
    return rho;
}

void check_evidence(const EvidenceEvent& evidence, const ModelSpec& spec) {
    for (const auto& [task, value] : evidence.clamps) {
        if (task >= spec.num_tasks()) throw Error("SCHEMA", "evidence names an unknown task");
        if (value != 0 && value != 1) throw Error("SCHEMA", "clamped task values must be 0 or 1");
    }
}

}  // namespace

std::shared_ptr<const CompiledModel> CompiledModel::compile(ModelSpec spec,
                                                            const std::map<std::size_t, std::vector<double>>& tables) {
    const auto report = validate_model(spec);
    if (report.has_errors()) {
        const auto& f = *std::find_if(report.findings.begin(), report.findings.end(),
                                      [](const Finding& x) { return x.severity == Severity::error; });
        throw Error("INVALID_MODEL", f.code + ": " + f.message, f.path);
    }

    std::shared_ptr<CompiledModel> model(new CompiledModel());
    model->spec_ = std::move(spec);
    const auto& s = model->spec_;
    model->m_ = build_transition_matrix(s);
    model->mk_ = matrix_power(model->m_, s.substeps_k);

    const std::size_t n = s.num_states();
    model->tables_.resize(n);
    model->caches_.resize(n);
    std::vector<bool> in_union(s.num_tasks(), false);
    for (std::size_t i = 1; i < n; ++i) {
        auto it = tables.find(i);
        model->tables_[i] = it == tables.end() ? conditional_table(s, i) : explicit_table(s, i, it->second);
        const auto& table = model->tables_[i];
        auto& cache = model->caches_[i];
        cache.log_table.resize(table.probability.size());
        cache.log_neutral.resize(table.probability.size());
        for (std::uint32_t mask = 0; mask < table.probability.size(); ++mask) {
            cache.log_table[mask] = safe_log(table.probability[mask]);
            cache.log_neutral[mask] = std::log(neutral_joint(s, table.sets.tasks, mask));
        }
        for (auto task : table.sets.tasks) in_union[task] = true;
    }
    for (std::size_t k = 0; k < s.num_tasks(); ++k) {
        if (in_union[k]) model->union_tasks_.push_back(k);
    }
    return model;
}

TransitionMatrix CompiledModel::interval_matrix(std::int64_t intervals) const {
    if (intervals < 1) throw Error("INVALID_ARGUMENT", "prediction needs at least one interval");
    if (intervals == 1) return mk_;
    return matrix_power(m_, static_cast<int>(intervals * spec_.substeps_k));
}

ValidationReport check_model(const ModelSpec& spec) {
    auto report = validate_model(spec);
    if (report.has_errors()) return report;
    for (std::size_t i = 1; i < spec.num_states(); ++i) {
        try {
            conditional_table(spec, i);
        } catch (const Error& e) {
            if (e.code() != "NO_ROOT") throw;
            report.findings.push_back({Severity::error, "XI_NO_ROOT", e.what(), "/states/" + std::to_string(i)});
        }
    }
    return report;
}

std::int64_t event_time(const CaseEvent& event) {
    return std::visit([](const auto& e) { return e.t; }, event);
}

StateDistribution predict(const StateDistribution& dist, const CompiledModel& model, std::int64_t intervals) {
    if (intervals == 1) return propagate(dist, model.step_matrix());
    return propagate(dist, model.interval_matrix(intervals));
}

UpdateResult update(const StateDistribution& dist, const TaskLikelihoods& likelihoods, const CompiledModel& model) {
    return filter_update(dist, &likelihoods, {}, model, "FLAT_EVIDENCE");
}

UpdateResult update(const StateDistribution& dist, const IntensityVector& z, const CompiledModel& model) {
    const auto likelihoods = task_likelihoods(z, model.spec());
    return update(dist, likelihoods, model);
}

UpdateResult condition_on_tasks(const StateDistribution& dist, const EvidenceEvent& evidence,
                                const std::optional<TaskLikelihoods>& likelihoods, const CompiledModel& model) {
    check_evidence(evidence, model.spec());
    return filter_update(dist, likelihoods ? &*likelihoods : nullptr, evidence.clamps, model,
                         evidence.clamps.empty() ? "FLAT_EVIDENCE" : "CONTRADICTORY_EVIDENCE");
}

UpdateResult condition_on_tasks(const StateDistribution& dist, const EvidenceEvent& evidence,
                                const std::optional<IntensityVector>& z, const CompiledModel& model) {
    std::optional<TaskLikelihoods> likelihoods;
    if (z) likelihoods = task_likelihoods(*z, model.spec());
    return condition_on_tasks(dist, evidence, likelihoods, model);
}

double position_score(const StateDistribution& dist, const ModelSpec& spec) {
    double score = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) score += spec.score_weights[i] * dist[i];
    return score;
}

CaseState::CaseState(ModelHandle model) : model_(std::move(model)) {
    if (!model_) throw Error("INVALID_ARGUMENT", "case needs a compiled model");
    current_ = model_->prior();
    timeline_.initial = current_;
    timeline_.initial_score = position_score(current_, model_->spec());
}

CaseState CaseState::step(const StepInput& input) const {
    const auto& spec = model_->spec();
    if (last_step_t_ && input.t <= *last_step_t_) {
        throw Error("OUT_OF_ORDER", "t=" + std::to_string(input.t) + " does not follow the last step at t=" +
                                        std::to_string(*last_step_t_));
    }
    if (last_t_ && input.t < *last_t_) {
        throw Error("OUT_OF_ORDER", "t=" + std::to_string(input.t) + " precedes the last event at t=" + std::to_string(*last_t_));
    }
    if (input.record && input.record->t != input.t) throw Error("SCHEMA", "observation time differs from step time");
    if (input.evidence && input.evidence->t != input.t) throw Error("SCHEMA", "evidence time differs from step time");
    if (input.record && input.record->values.size() != spec.num_observables()) {
        throw Error("SCHEMA", "observation does not match the model's observables");
    }
    if (input.evidence) check_evidence(*input.evidence, spec);

    const std::int64_t intervals = last_step_t_ ? input.t - *last_step_t_ : 1;
    const auto predicted = predict(current_, *model_, intervals);

    std::optional<TaskLikelihoods> likelihoods;
    if (input.record) likelihoods = task_likelihoods(intensities(*input.record, spec), spec);

    UpdateResult updated;
    if (input.evidence) {
        updated = condition_on_tasks(predicted, *input.evidence, likelihoods, *model_);
    } else if (likelihoods) {
        updated = update(predicted, *likelihoods, *model_);
    } else {
        updated = condition_on_tasks(predicted, EvidenceEvent{input.t, {}, {}}, likelihoods, *model_);
    }

    CaseState next = *this;
    if (input.record) next.events_.emplace_back(*input.record);
    if (input.evidence) next.events_.emplace_back(*input.evidence);
    next.current_ = updated.posterior;
    next.last_t_ = input.t;
    next.last_step_t_ = input.t;

    TimelineEntry entry;
    entry.t = input.t;
    entry.predicted = predicted;
    entry.posterior = updated.posterior;
    entry.score = position_score(updated.posterior, spec);
    entry.rho = log_odds(predicted);
    entry.lambda = updated.lambda;
    entry.rho_star = log_odds(updated.posterior);
    entry.log_evidence = updated.log_evidence;
    entry.informative = updated.informative;
    next.timeline_.entries.push_back(std::move(entry));
    return next;
}

CaseState CaseState::step(const ObservationRecord& record, const std::optional<EvidenceEvent>& evidence) const {
    return step(StepInput{record.t, record, evidence});
}

CaseState CaseState::annotate(const Annotation& note) const {
    if (last_t_ && note.t < *last_t_) {
        throw Error("OUT_OF_ORDER", "annotation at t=" + std::to_string(note.t) + " precedes the last event");
    }
    CaseState next = *this;
    next.events_.emplace_back(note);
    next.last_t_ = note.t;
    return next;
}

PosteriorTimeline whatif(const CaseState& state, const std::vector<StepInput>& hypothetical) {
    PosteriorTimeline out;
    out.initial_t = state.last_step_time().value_or(0);
    out.initial = state.current();
    out.initial_score = position_score(out.initial, state.model()->spec());
    CaseState copy = state;
    const std::size_t before = state.timeline().entries.size();
    for (const auto& input : hypothetical) copy = copy.step(input);
    const auto& entries = copy.timeline().entries;
    out.entries.assign(entries.begin() + static_cast<std::ptrdiff_t>(before), entries.end());
    return out;
}

std::vector<LogOddsRow> log_odds_timeline(const CaseState& state) {
    std::vector<LogOddsRow> rows;
    for (const auto& entry : state.timeline().entries) {
        LogOddsRow row;
        row.t = entry.t;
        row.rho = entry.rho;
        row.lambda = entry.lambda;
        row.rho_star.resize(entry.rho.size());
        for (std::size_t i = 0; i < entry.rho.size(); ++i) {
            row.rho_star[i] = entry.rho[i] + entry.lambda[i];
            const double direct = entry.rho_star[i];
            if (std::isfinite(row.rho_star[i]) && std::isfinite(direct)) {
                row.max_discrepancy = std::max(row.max_discrepancy, std::abs(row.rho_star[i] - direct));
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

EvidenceEvent parse_evidence(const nlohmann::json& doc, const ModelSpec& spec) {
    if (!doc.is_object()) throw Error("SCHEMA", "evidence must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        if (key != "t" && key != "clamps" && key != "note" && key != "kind") {
            throw Error("SCHEMA", "unknown field '" + key + "' in evidence", "/" + key);
        }
    }
    if (!doc.contains("t") || !doc["t"].is_number_integer()) throw Error("SCHEMA", "evidence needs an integer t", "/t");
    EvidenceEvent evidence;
    evidence.t = doc["t"].get<std::int64_t>();
    if (!doc.contains("clamps") || !doc["clamps"].is_object() || doc["clamps"].empty()) {
        throw Error("SCHEMA", "evidence needs a non-empty clamps object", "/clamps");
    }
    for (const auto& [key, value] : doc["clamps"].items()) {
        auto task = spec.find_task(key);
        if (!task) throw Error("SCHEMA", "unknown task '" + key + "'", "/clamps/" + key);
        int v = -1;
        if (value.is_boolean()) v = value.get<bool>() ? 1 : 0;
        if (value.is_number_integer()) v = value.get<int>();
        if (v != 0 && v != 1) throw Error("SCHEMA", "clamp for '" + key + "' must be 0 or 1", "/clamps/" + key);
        evidence.clamps[*task] = v;
    }
    if (doc.contains("note")) {
        if (!doc["note"].is_string()) throw Error("SCHEMA", "note must be a string", "/note");
        evidence.note = doc["note"].get<std::string>();
    }
    return evidence;
}

nlohmann::json to_json(const EvidenceEvent& evidence, const ModelSpec& spec) {
    nlohmann::json clamps = nlohmann::json::object();
    for (const auto& [task, value] : evidence.clamps) clamps[spec.tasks[task].id] = value;
    nlohmann::json out = {{"t", evidence.t}, {"clamps", std::move(clamps)}};
    if (!evidence.note.empty()) out["note"] = evidence.note;
    return out;
}

StepInput parse_step_input(const nlohmann::json& doc, const ModelSpec& spec) {
    if (!doc.is_object()) throw Error("SCHEMA", "step must be a JSON object");
    for (const auto& [key, value] : doc.items()) {
        if (key != "t" && key != "values" && key != "clamps" && key != "note" && key != "kind") {
            throw Error("SCHEMA", "unknown field '" + key + "'", "/" + key);
        }
    }
    if (!doc.contains("t") || !doc["t"].is_number_integer()) throw Error("SCHEMA", "step needs an integer t", "/t");
    StepInput input;
    input.t = doc["t"].get<std::int64_t>();
    if (doc.contains("values")) {
        input.record = parse_observation({{"t", input.t}, {"values", doc["values"]}}, spec);
    }
    if (doc.contains("clamps")) {
        nlohmann::json ev = {{"t", input.t}, {"clamps", doc["clamps"]}};
        if (doc.contains("note")) ev["note"] = doc["note"];
        input.evidence = parse_evidence(ev, spec);
    } else if (doc.contains("note")) {
        throw Error("SCHEMA", "note is only accepted alongside clamps", "/note");
    }
    if (!input.record && !input.evidence) throw Error("SCHEMA", "step needs values, clamps or both");
    return input;
}

nlohmann::json to_json(const StepInput& input, const ModelSpec& spec) {
    nlohmann::json out = {{"t", input.t}};
    if (input.record) out["values"] = to_json(*input.record, spec)["values"];
    if (input.evidence) {
        auto ev = to_json(*input.evidence, spec);
        out["clamps"] = ev["clamps"];
        if (ev.contains("note")) out["note"] = ev["note"];
    }
    return out;
}

nlohmann::json json_number(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

namespace {

nlohmann::json json_vector(const std::vector<double>& v) {
    auto out = nlohmann::json::array();
    for (double x : v) out.push_back(json_number(x));
    return out;
}

}  // namespace

nlohmann::json to_json(const TimelineEntry& entry, const ModelSpec&) {
    return {{"t", entry.t},
            {"predicted", json_vector(entry.predicted.values())},
            {"posterior", json_vector(entry.posterior.values())},
            {"score", json_number(entry.score)},
            {"rho", json_vector(entry.rho)},
            {"lambda", json_vector(entry.lambda)},
            {"rho_star", json_vector(entry.rho_star)},
            {"log_evidence", json_number(entry.log_evidence)},
            {"informative", entry.informative}};
}

nlohmann::json to_json(const PosteriorTimeline& timeline, const ModelSpec& spec) {
    auto states = nlohmann::json::array();
    for (const auto& s : spec.states) states.push_back(s.id);
    auto entries = nlohmann::json::array();
    for (const auto& e : timeline.entries) entries.push_back(to_json(e, spec));
    return {{"states", std::move(states)},
            {"initial",
             {{"t", timeline.initial_t},
              {"distribution", json_vector(timeline.initial.values())},
              {"score", json_number(timeline.initial_score)}}},
            {"entries", std::move(entries)}};
}

}  // namespace escalate
