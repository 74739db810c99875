#include "escalate/diagnostics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "escalate/error.hpp"

namespace escalate {

namespace {

std::string format_value(double v) {
    std::ostringstream out;
    out.precision(10);
    out << v;
    return out.str();
}

std::string sweep_label(const ModelSpec& spec, const SweepSpec& sweep, double value) {
    switch (sweep.target) {
        case SweepTarget::prior:
            return "prior:" + spec.states[sweep.state].id + (sweep.rule == PriorRule::shift && value >= 0 ? "+" : "") +
                   (sweep.rule == PriorRule::set ? "=" : "") + format_value(value);
        case SweepTarget::equal_priors:
            return "equal";
        case SweepTarget::zeta:
            return "zeta=" + format_value(value);
        case SweepTarget::zeta_state:
            return "zeta:" + spec.states[sweep.state].id + "=" + format_value(value);
    }
    return {};
}

}  // namespace

std::vector<double> shift_prior(const std::vector<double>& priors, std::size_t state, double delta) {
    if (state >= priors.size()) throw Error("UNKNOWN_STATE", "prior shift targets an unknown state");
    std::vector<double> out = priors;
    out[state] += delta;
    double total = 0.0;
    for (double p : out) {
        if (p < 0.0) throw Error("INVALID_SWEEP", "prior shift leaves a negative prior");
        total += p;
    }
    if (!(total > 0.0)) throw Error("INVALID_SWEEP", "prior shift leaves no prior mass");
    for (auto& p : out) p /= total;
    return out;
}

std::vector<double> set_prior(const std::vector<double>& priors, std::size_t state, double value) {
    if (state >= priors.size()) throw Error("UNKNOWN_STATE", "prior setting targets an unknown state");
    if (!(value >= 0.0 && value <= 1.0)) throw Error("INVALID_SWEEP", "prior setting must lie in [0,1]");
    if (priors.size() < 2) throw Error("INVALID_SWEEP", "prior setting needs at least two states");
    const double rest = (1.0 - value) / static_cast<double>(priors.size() - 1);
    std::vector<double> out(priors.size(), rest);
    out[state] = value;
    return out;
}

SweepSpec parse_sweep_target(const std::string& target, const ModelSpec& spec) {
    SweepSpec sweep;
    if (target == "equal") {
        sweep.target = SweepTarget::equal_priors;
    } else if (target == "zeta") {
        sweep.target = SweepTarget::zeta;
    } else if (target.rfind("prior:", 0) == 0) {
        sweep.target = SweepTarget::prior;
        sweep.state = spec.state_index(target.substr(6));
    } else if (target.rfind("zeta:", 0) == 0) {
        sweep.target = SweepTarget::zeta_state;
        sweep.state = spec.state_index(target.substr(5));
        if (sweep.state == kNeutral) throw Error("INVALID_SWEEP", "the neutral state has no holding parameter");
    } else {
        throw Error("INVALID_SWEEP", "unknown sweep target '" + target + "'");
    }
    return sweep;
}

ModelSpec apply_setting(const ModelSpec& spec, const SweepSpec& sweep, double value) {
    ModelSpec out = spec;
    switch (sweep.target) {
        case SweepTarget::prior:
            out.priors = sweep.rule == PriorRule::shift ? shift_prior(spec.priors, sweep.state, value)
                                                        : set_prior(spec.priors, sweep.state, value);
            break;
        case SweepTarget::equal_priors:
            out.priors.assign(spec.num_states(), 1.0 / static_cast<double>(spec.num_states()));
            break;
        case SweepTarget::zeta:
            if (!(value > 0.0 && value < 1.0)) throw Error("INVALID_SWEEP", "holding settings must lie in (0,1)");
            for (std::size_t i = 1; i < spec.num_states(); ++i) out.holding_params[i] = value;
            break;
        case SweepTarget::zeta_state:
            if (!(value > 0.0 && value < 1.0)) throw Error("INVALID_SWEEP", "holding settings must lie in (0,1)");
            out.holding_params[sweep.state] = value;
            break;
    }
    return out;
}

std::vector<SweepPoint> run_sweep(const ModelSpec& spec, const Scenario& scenario, const SweepSpec& sweep,
                                  std::size_t workers) {
    std::vector<double> values = sweep.values;
    if (sweep.target == SweepTarget::equal_priors) values = {0.0};
    if (values.empty()) throw Error("INVALID_SWEEP", "sweep needs at least one setting");

    // Build every variant up front so invalid settings fail before any work starts.
    std::vector<ModelSpec> variants;
    for (double v : values) variants.push_back(apply_setting(spec, sweep, v));

    std::function<SweepPoint(std::size_t)> fn = [&](std::size_t i) {
        auto model = CompiledModel::compile(variants[i]);
        return SweepPoint{sweep_label(spec, sweep, values[i]), values[i], variants[i], run_scenario(model, scenario)};
    };
    return parallel_map<SweepPoint>(values.size(), fn, workers);
}

std::vector<SweepPoint> prior_sensitivity(const ModelSpec& spec, const Scenario& scenario, const SweepSpec& sweep,
                                          std::size_t workers) {
    if (sweep.target != SweepTarget::prior && sweep.target != SweepTarget::equal_priors) {
        throw Error("INVALID_SWEEP", "prior sensitivity needs a prior target");
    }
    return run_sweep(spec, scenario, sweep, workers);
}

std::vector<SweepPoint> zeta_sensitivity(const ModelSpec& spec, const Scenario& scenario,
                                         const std::vector<double>& settings, std::size_t workers) {
    SweepSpec sweep;
    sweep.target = SweepTarget::zeta;
    sweep.values = settings;
    return run_sweep(spec, scenario, sweep, workers);
}

const StateDistribution& at_checkpoint(const PosteriorTimeline& timeline, std::int64_t c) {
    const StateDistribution* found = &timeline.initial;
    for (const auto& entry : timeline.entries) {
        if (entry.t > c) break;
        found = &entry.posterior;
    }
    return *found;
}

StateCorrespondence default_correspondence(const ModelSpec& base, const ModelSpec& variant,
                                           const StateCorrespondence& overrides) {
    StateCorrespondence out;
    for (const auto& [group, members] : overrides) {
        if (!variant.find_state(group)) throw Error("UNMATCHED_STATE", "mapping names unknown variant state '" + group + "'");
        for (const auto& m : members) {
            if (!base.find_state(m)) throw Error("UNMATCHED_STATE", "mapping names unknown base state '" + m + "'");
        }
        out[group] = members;
    }
    for (const auto& s : variant.states) {
        if (out.contains(s.id)) continue;
        if (!base.find_state(s.id)) {
            throw Error("UNMATCHED_STATE", "variant state '" + s.id + "' has no counterpart in the base model");
        }
        out[s.id] = {s.id};
    }
    return out;
}

RobustnessSeries structure_robustness(const ModelHandle& base, const ModelHandle& variant, const Scenario& scenario,
                                      const StateCorrespondence& correspondence) {
    const auto& bs = base->spec();
    const auto& vs = variant->spec();
    if (bs.observables != vs.observables) {
        throw Error("OBSERVABLE_MISMATCH", "base and variant models must declare the same observables");
    }
    RobustnessSeries series;
    std::vector<std::size_t> group_index;
    std::vector<std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < vs.num_states(); ++i) {
        auto it = correspondence.find(vs.states[i].id);
        if (it == correspondence.end()) {
            throw Error("UNMATCHED_STATE", "variant state '" + vs.states[i].id + "' has no mapping");
        }
        series.groups.push_back(vs.states[i].id);
        group_index.push_back(i);
        std::vector<std::size_t> m;
        for (const auto& id : it->second) m.push_back(bs.state_index(id));
        members.push_back(std::move(m));
    }

    const auto base_tl = run_scenario(base, scenario);
    const auto var_tl = run_scenario(variant, scenario);

    auto add_row = [&](std::int64_t t, const StateDistribution& b, const StateDistribution& v) {
        std::vector<double> row;
        for (std::size_t g = 0; g < group_index.size(); ++g) {
            double fine = 0.0;
            for (auto m : members[g]) fine += b[m];
            row.push_back(v[group_index[g]] - fine);
        }
        series.t.push_back(t);
        series.diff.push_back(std::move(row));
    };
    add_row(base_tl.initial_t, base_tl.initial, var_tl.initial);
    for (std::size_t p = 0; p < base_tl.entries.size(); ++p) {
        add_row(base_tl.entries[p].t, base_tl.entries[p].posterior, var_tl.entries[p].posterior);
    }
    return series;
}

NeutralRateSweep parse_neutral_rate_sweep(const std::string& text) {
    NeutralRateSweep sweep;
    const auto a = text.find(':');
    const auto b = a == std::string::npos ? a : text.find(':', a + 1);
    if (b == std::string::npos) throw Error("INVALID_SWEEP", "neutral-rate sweep must look like lo:hi:steps");
    try {
        std::size_t used = 0;
        sweep.lo = std::stod(text.substr(0, a), &used);
        if (used != a) throw std::invalid_argument("lo");
        const auto hi = text.substr(a + 1, b - a - 1);
        sweep.hi = std::stod(hi, &used);
        if (used != hi.size()) throw std::invalid_argument("hi");
        const auto steps = text.substr(b + 1);
        const long long n = std::stoll(steps, &used);
        if (used != steps.size() || n < 1) throw std::invalid_argument("steps");
        sweep.steps = static_cast<std::size_t>(n);
    } catch (const std::logic_error&) {
        throw Error("INVALID_SWEEP", "cannot parse neutral-rate sweep '" + text + "'");
    }
    if (!(sweep.lo >= 0.0) || !(sweep.hi <= 1.0) || sweep.lo > sweep.hi) {
        throw Error("INVALID_SWEEP", "neutral-rate sweep needs 0 <= lo <= hi <= 1");
    }
    return sweep;
}

TransitionMatrix longrun_matrix(const CompiledModel& model, LongrunVariant variant, std::size_t mobilised_state) {
    TransitionMatrix m = model.step_matrix();
    if (variant == LongrunVariant::mobilised_absorbing) {
        const std::size_t target = mobilised_state == 0 ? model.num_states() - 1 : mobilised_state;
        m = make_absorbing(m, target);
    }
    return m;
}

LongrunReport longrun_report(const CompiledModel& model, const LongrunOptions& options, std::size_t workers) {
    if (options.horizon < 1) throw Error("INVALID_ARGUMENT", "horizon must be at least 1");
    LongrunReport report;
    report.mobilised_state = options.mobilised_state == 0 ? model.num_states() - 1 : options.mobilised_state;
    if (report.mobilised_state >= model.num_states()) throw Error("UNKNOWN_STATE", "mobilised state out of range");

    const auto m = longrun_matrix(model, options.variant, report.mobilised_state);
    const std::size_t stride = options.stride ? options.stride : std::max<std::size_t>(1, options.horizon / 1000);

    StateDistribution current = model.prior();
    report.periods.push_back(0);
    report.trajectory.push_back(current);
    std::size_t period = 0;
    while (period < options.horizon) {
        auto next = propagate(current, m);
        double change = 0.0;
        for (std::size_t i = 0; i < next.size(); ++i) change = std::max(change, std::abs(next[i] - current[i]));
        current = std::move(next);
        ++period;
        const bool done = change < options.tolerance;
        if (period % stride == 0 || done || period == options.horizon) {
            report.periods.push_back(period);
            report.trajectory.push_back(current);
        }
        if (done) {
            report.converged = true;
            break;
        }
    }
    report.terminal = current;
    report.terminal_period = period;

    if (options.sweep) {
        const auto& sw = *options.sweep;
        if (sw.steps < 1 || !(sw.lo >= 0.0) || !(sw.hi <= 1.0) || sw.lo > sw.hi) {
            throw Error("INVALID_SWEEP", "neutral-rate sweep needs 0 <= lo <= hi <= 1 and at least one step");
        }
        std::function<LongrunSweepPoint(std::size_t)> fn = [&](std::size_t i) {
            const double rate = sw.steps == 1 ? sw.lo
                                              : sw.lo + (sw.hi - sw.lo) * static_cast<double>(i) /
                                                            static_cast<double>(sw.steps - 1);
            const auto conv = evolve_to_convergence(model.prior(), with_neutral_rate(m, rate), options.tolerance,
                                                    options.horizon);
            return LongrunSweepPoint{rate, conv.terminal[kNeutral], conv.terminal[report.mobilised_state], conv.periods,
                                     conv.converged};
        };
        report.sweep = parallel_map<LongrunSweepPoint>(sw.steps, fn, workers);
    }
    return report;
}

}  // namespace escalate
