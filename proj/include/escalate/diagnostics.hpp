#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "escalate/engine.hpp"
#include "escalate/scenario.hpp"

namespace escalate {

/// Runs fn(0..count-1) on at most `workers` threads and returns results in
/// index order. fn must not touch shared mutable state.
template <typename R>
std::vector<R> parallel_map(std::size_t count, const std::function<R(std::size_t)>& fn, std::size_t workers = 0) {
    if (workers == 0) workers = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    workers = std::min(workers, std::max<std::size_t>(count, 1));
    std::vector<std::optional<R>> slots(count);
    std::vector<std::exception_ptr> errors(count);
    auto run = [&](std::size_t start) {
        for (std::size_t i = start; i < count; i += workers) {
            try {
                slots[i].emplace(fn(i));
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        run(0);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    std::vector<R> out;
    out.reserve(count);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

/// Add `delta` to one state's prior, then rescale every prior so they sum to one.
std::vector<double> shift_prior(const std::vector<double>& priors, std::size_t state, double delta);
/// Set one state's prior to `value`; the rest share 1 - value equally.
std::vector<double> set_prior(const std::vector<double>& priors, std::size_t state, double value);

enum class SweepTarget { prior, equal_priors, zeta, zeta_state };
enum class PriorRule { shift, set };

struct SweepSpec {
    SweepTarget target = SweepTarget::prior;
    std::size_t state = 0;  // for prior and zeta_state
    std::vector<double> values;
    PriorRule rule = PriorRule::shift;
};

/// Parses "prior:<state>", "equal", "zeta" or "zeta:<state>".
SweepSpec parse_sweep_target(const std::string& target, const ModelSpec& spec);

struct SweepPoint {
    std::string label;
    double value = 0.0;
    ModelSpec spec;
    PosteriorTimeline timeline;
};

/// Variant spec for one setting of the sweep.
ModelSpec apply_setting(const ModelSpec& spec, const SweepSpec& sweep, double value);

std::vector<SweepPoint> run_sweep(const ModelSpec& spec, const Scenario& scenario, const SweepSpec& sweep,
                                  std::size_t workers = 0);
std::vector<SweepPoint> prior_sensitivity(const ModelSpec& spec, const Scenario& scenario, const SweepSpec& sweep,
                                          std::size_t workers = 0);
std::vector<SweepPoint> zeta_sensitivity(const ModelSpec& spec, const Scenario& scenario,
                                         const std::vector<double>& settings, std::size_t workers = 0);

inline const std::vector<std::int64_t> kDefaultCheckpoints = {0, 5, 10, 15, 20, 26};

/// Distribution in force at time c: the latest entry with t <= c, or the
/// initial distribution if none.
const StateDistribution& at_checkpoint(const PosteriorTimeline& timeline, std::int64_t c);

/// Variant state id -> base state ids it is compared against.
using StateCorrespondence = std::map<std::string, std::vector<std::string>>;

/// Identity by id for every variant state, with `overrides` taking precedence.
StateCorrespondence default_correspondence(const ModelSpec& base, const ModelSpec& variant,
                                           const StateCorrespondence& overrides = {});

struct RobustnessSeries {
    std::vector<std::string> groups;        // variant state ids
    std::vector<std::int64_t> t;            // initial time, then every period
    std::vector<std::vector<double>> diff;  // [period][group], variant - base
};

RobustnessSeries structure_robustness(const ModelHandle& base, const ModelHandle& variant, const Scenario& scenario,
                                      const StateCorrespondence& correspondence);

enum class LongrunVariant { single_absorbing, mobilised_absorbing };

struct NeutralRateSweep {
    double lo = 0.01;
    double hi = 0.99;
    std::size_t steps = 99;
};

/// Parses "lo:hi:steps".
NeutralRateSweep parse_neutral_rate_sweep(const std::string& text);

struct LongrunOptions {
    std::size_t horizon = 1'000'000;
    LongrunVariant variant = LongrunVariant::single_absorbing;
    std::size_t mobilised_state = 0;  // 0 means the last declared state
    std::size_t stride = 0;           // trajectory sampling; 0 picks horizon / 1000
    std::optional<NeutralRateSweep> sweep;
    double tolerance = 1e-12;
};

struct LongrunSweepPoint {
    double rate = 0.0;
    double neutral = 0.0;
    double mobilised = 0.0;
    std::size_t periods = 0;
    bool converged = false;
};

struct LongrunReport {
    std::size_t mobilised_state = 0;
    std::vector<std::size_t> periods;            // sampled period numbers
    std::vector<StateDistribution> trajectory;   // sampled distributions
    StateDistribution terminal;
    std::size_t terminal_period = 0;
    bool converged = false;
    std::vector<LongrunSweepPoint> sweep;
};

TransitionMatrix longrun_matrix(const CompiledModel& model, LongrunVariant variant, std::size_t mobilised_state);
LongrunReport longrun_report(const CompiledModel& model, const LongrunOptions& options, std::size_t workers = 0);

}  // namespace escalate
