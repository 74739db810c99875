#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "escalate/model_spec.hpp"

namespace escalate {

/// Relevant tasks of one active state. `tasks` lists the positive indicators
/// first, then the negative ones; bit b of a configuration mask refers to
/// tasks[b] and is set when that task is enacted.
struct TaskIndexSets {
    std::size_t state = 0;
    std::vector<std::size_t> positive;
    std::vector<std::size_t> negative;
    std::vector<std::size_t> tasks;

    std::size_t r_plus() const noexcept { return positive.size(); }
    std::size_t r_minus() const noexcept { return negative.size(); }
    std::size_t size() const noexcept { return tasks.size(); }
    std::uint32_t num_configs() const noexcept { return std::uint32_t{1} << tasks.size(); }
    /// Mask of the configuration with every positive task enacted and no
    /// negative task enacted.
    std::uint32_t target_mask() const noexcept { return (std::uint32_t{1} << positive.size()) - 1; }
};

TaskIndexSets index_sets(const ModelSpec& spec, std::size_t state);

/// K = |A| + r_minus - |B|.
std::size_t k_statistic(std::size_t a, std::size_t b, std::size_t r_plus, std::size_t r_minus);
/// Throws Error("MEMBERSHIP") if A or B is not a subset of the matching index set.
std::size_t k_statistic(const TaskIndexSets& sets, const std::vector<std::size_t>& enacted_positive,
                        const std::vector<std::size_t>& enacted_negative);
std::size_t k_statistic(const TaskIndexSets& sets, std::uint32_t mask);

/// Naive-Bayes probability of a configuration under the neutral state.
double neutral_joint(const ModelSpec& spec, const std::vector<std::size_t>& tasks, std::uint32_t mask);
/// Same, keyed by task id; throws Error("UNKNOWN_TASK").
double neutral_joint(const ModelSpec& spec, const std::map<std::string, bool>& config);

/// Total probability of the interpolated table over all 2^r configurations.
double interpolation_mass(double p_plus, double p_zero, std::size_t r, double xi);

/// Exponent xi making the interpolated table sum to one. `neutral_probs`
/// lists the positive tasks first, then the negative ones. Throws
/// Error("NO_ROOT") when no xi in [1e-6, 1e3] normalizes the table.
double solve_xi(double p_plus, const std::vector<double>& neutral_probs, std::size_t r_plus, std::size_t r_minus);

/// p(theta over I*(w) | w) for every configuration of one active state.
struct TaskConditionalTable {
    TaskIndexSets sets;
    std::vector<double> probability;  // indexed by configuration mask
    double xi = 0.0;                  // NaN for explicitly supplied tables
    double p_plus = 0.0;
    double p_zero = 0.0;

    double operator()(std::uint32_t mask) const { return probability.at(mask); }
    double total() const;
};

TaskConditionalTable conditional_table(const ModelSpec& spec, std::size_t state);
TaskConditionalTable conditional_table(const ModelSpec& spec, const std::string& state_id);

/// Table taken verbatim from the caller (entries in [0,1] summing to one
/// within 1e-9), for states whose elicited table is not an interpolation.
TaskConditionalTable explicit_table(const ModelSpec& spec, std::size_t state, std::vector<double> probability);

/// lambda_i(theta) = log p(theta | w_i) - log p(theta | w_0).
double task_loglikelihood_ratio(const TaskConditionalTable& table, const ModelSpec& spec, std::uint32_t mask);

/// lambda split over positive and negative indicators: `positive` compares
/// the marginal over I+ with the neutral, `negative` the remaining
/// conditional over I- given I+.
struct LambdaSplit {
    double positive = 0.0;
    double negative = 0.0;
    double total = 0.0;
};
LambdaSplit split_loglikelihood_ratio(const TaskConditionalTable& table, const ModelSpec& spec, std::uint32_t mask);

}  // namespace escalate
