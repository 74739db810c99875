#include "escalate/task_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <sstream>

#include "escalate/error.hpp"

namespace escalate {

namespace {

constexpr double kXiLow = 1e-6;
constexpr double kXiHigh = 1e3;
constexpr int kMaxBisections = 200;
constexpr double kMassTolerance = 1e-10;

double logit(double p) { return std::log(p) - std::log1p(-p); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double binomial(std::size_t n, std::size_t k) {
    double c = 1.0;
    for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    return c;
}

// Interpolated probability for a configuration with statistic K out of r.
double interpolated(double phi_plus, double phi_zero, std::size_t k, std::size_t r, double xi) {
    const double alpha = std::pow(static_cast<double>(k) / static_cast<double>(r), xi);
    return sigmoid(alpha * phi_plus + (1.0 - alpha) * phi_zero);
}

double endpoint_value(double p_plus, double p_zero, std::size_t k, std::size_t r, double xi) {
    if (k == r) return p_plus;
    if (k == 0) return p_zero;
    return interpolated(logit(p_plus), logit(p_zero), k, r, xi);
}

}  // namespace

TaskIndexSets index_sets(const ModelSpec& spec, std::size_t state) {
    if (state == kNeutral || state >= spec.num_states()) {
        throw Error("UNKNOWN_STATE", "task index sets exist only for active states");
    }
    TaskIndexSets sets;
    sets.state = state;
    for (std::size_t k = 0; k < spec.num_tasks(); ++k) {
        if (spec.task_state_incidence[state][k] == Polarity::positive) sets.positive.push_back(k);
        if (spec.task_state_incidence[state][k] == Polarity::negative) sets.negative.push_back(k);
    }
    sets.tasks = sets.positive;
    sets.tasks.insert(sets.tasks.end(), sets.negative.begin(), sets.negative.end());
    if (sets.tasks.empty()) {
        throw Error("STATE_NO_TASKS", "state '" + spec.states[state].id + "' has no relevant tasks");
    }
    if (sets.tasks.size() > 20) {
        throw Error("TASK_LIMIT", "state '" + spec.states[state].id + "' has more than 20 relevant tasks");
    }
    return sets;
}

std::size_t k_statistic(std::size_t a, std::size_t b, std::size_t r_plus, std::size_t r_minus) {
    if (a > r_plus || b > r_minus) throw Error("MEMBERSHIP", "enacted subset larger than its index set");
    return a + r_minus - b;
}

std::size_t k_statistic(const TaskIndexSets& sets, const std::vector<std::size_t>& enacted_positive,
                        const std::vector<std::size_t>& enacted_negative) {
    auto check = [](const std::vector<std::size_t>& subset, const std::vector<std::size_t>& set) {
        for (auto t : subset) {
            if (std::find(set.begin(), set.end(), t) == set.end()) {
                throw Error("MEMBERSHIP", "task index " + std::to_string(t) + " is not in the index set");
            }
        }
    };
    check(enacted_positive, sets.positive);
    check(enacted_negative, sets.negative);
    return k_statistic(enacted_positive.size(), enacted_negative.size(), sets.r_plus(), sets.r_minus());
}

std::size_t k_statistic(const TaskIndexSets& sets, std::uint32_t mask) {
    const std::uint32_t pos_bits = sets.target_mask();
    const auto a = static_cast<std::size_t>(std::popcount(mask & pos_bits));
    const auto b = static_cast<std::size_t>(std::popcount(mask & ~pos_bits & (sets.num_configs() - 1)));
    return k_statistic(a, b, sets.r_plus(), sets.r_minus());
}

double neutral_joint(const ModelSpec& spec, const std::vector<std::size_t>& tasks, std::uint32_t mask) {
    double p = 1.0;
    for (std::size_t b = 0; b < tasks.size(); ++b) {
        const double q = spec.neutral_task_probs.at(tasks[b]);
        p *= (mask >> b) & 1U ? q : 1.0 - q;
    }
    return p;
}

double neutral_joint(const ModelSpec& spec, const std::map<std::string, bool>& config) {
    double p = 1.0;
    for (const auto& [id, enacted] : config) {
        const double q = spec.neutral_task_probs[spec.task_index(id)];
        p *= enacted ? q : 1.0 - q;
    }
    return p;
}

double interpolation_mass(double p_plus, double p_zero, std::size_t r, double xi) {
    double mass = 0.0;
    for (std::size_t k = 0; k <= r; ++k) mass += binomial(r, k) * endpoint_value(p_plus, p_zero, k, r, xi);
    return mass;
}

double solve_xi(double p_plus, const std::vector<double>& neutral_probs, std::size_t r_plus, std::size_t r_minus) {
    const std::size_t r = r_plus + r_minus;
    if (neutral_probs.size() != r || r == 0) {
        throw Error("INVALID_ARGUMENT", "solve_xi needs one neutral probability per relevant task");
    }
    if (!(p_plus > 0.0 && p_plus < 1.0)) throw Error("INVALID_ARGUMENT", "p_plus must lie in (0,1)");
    double p_zero = 1.0;
    for (std::size_t b = 0; b < r; ++b) {
        const double q = neutral_probs[b];
        if (!(q > 0.0 && q < 1.0)) throw Error("INVALID_ARGUMENT", "neutral probabilities must lie in (0,1)");
        p_zero *= b < r_plus ? q : 1.0 - q;
    }

    const double m_low = interpolation_mass(p_plus, p_zero, r, kXiLow);
    const double m_high = interpolation_mass(p_plus, p_zero, r, kXiHigh);
    auto no_root = [&] {
        std::ostringstream msg;
        msg.precision(6);
        msg << "no exponent normalizes the table: mass " << m_low << " at xi=" << kXiLow << ", " << m_high
            << " at xi=" << kXiHigh;
        return Error("NO_ROOT", msg.str());
    };

    if (r == 1) {
        // Only the two endpoints exist; the mass does not depend on xi.
        if (std::abs(m_low - 1.0) <= kMassTolerance) return 1.0;
        throw no_root();
    }
    if ((m_low - 1.0) * (m_high - 1.0) > 0.0) throw no_root();

    // The mass is monotone in xi; keep the endpoint above one on the `above` side.
    const bool decreasing = m_low > m_high;
    double lo = kXiLow;
    double hi = kXiHigh;
    double mid = 0.5 * (lo + hi);
    for (int it = 0; it < kMaxBisections; ++it) {
        mid = 0.5 * (lo + hi);
        const double m = interpolation_mass(p_plus, p_zero, r, mid);
        if (m == 1.0) break;
        if ((m > 1.0) == decreasing) {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo <= std::numeric_limits<double>::epsilon() * mid) break;
    }
    if (!(std::abs(interpolation_mass(p_plus, p_zero, r, mid) - 1.0) <= kMassTolerance)) throw no_root();
    return mid;
}

double TaskConditionalTable::total() const {
    double s = 0.0;
    for (double p : probability) s += p;
    return s;
}

TaskConditionalTable conditional_table(const ModelSpec& spec, std::size_t state) {
    TaskConditionalTable table;
    table.sets = index_sets(spec, state);
    const auto& sets = table.sets;
    std::vector<double> probs;
    for (auto k : sets.tasks) probs.push_back(spec.neutral_task_probs[k]);

    table.p_plus = spec.p_plus[state];
    table.p_zero = neutral_joint(spec, sets.tasks, sets.target_mask());
    try {
        table.xi = solve_xi(table.p_plus, probs, sets.r_plus(), sets.r_minus());
    } catch (const Error& e) {
        throw Error(e.code(), "state '" + spec.states[state].id + "': " + e.what(), "/p_plus/" + spec.states[state].id);
    }

    const std::size_t r = sets.size();
    std::vector<double> by_k(r + 1);
    for (std::size_t k = 0; k <= r; ++k) by_k[k] = endpoint_value(table.p_plus, table.p_zero, k, r, table.xi);
    table.probability.resize(sets.num_configs());
    for (std::uint32_t mask = 0; mask < sets.num_configs(); ++mask) {
        table.probability[mask] = by_k[k_statistic(sets, mask)];
    }
    return table;
}

TaskConditionalTable conditional_table(const ModelSpec& spec, const std::string& state_id) {
    return conditional_table(spec, spec.state_index(state_id));
}

TaskConditionalTable explicit_table(const ModelSpec& spec, std::size_t state, std::vector<double> probability) {
    TaskConditionalTable table;
    table.sets = index_sets(spec, state);
    if (probability.size() != table.sets.num_configs()) {
        throw Error("INVALID_ARGUMENT", "explicit table needs one entry per configuration");
    }
    double total = 0.0;
    for (double p : probability) {
        if (!(p >= 0.0 && p <= 1.0)) throw Error("INVALID_ARGUMENT", "explicit table entries must lie in [0,1]");
        total += p;
    }
    if (!(std::abs(total - 1.0) <= 1e-9)) throw Error("INVALID_ARGUMENT", "explicit table does not sum to 1");
    table.probability = std::move(probability);
    table.xi = std::numeric_limits<double>::quiet_NaN();
    table.p_plus = table.probability[table.sets.target_mask()];
    table.p_zero = neutral_joint(spec, table.sets.tasks, table.sets.target_mask());
    return table;
}

double task_loglikelihood_ratio(const TaskConditionalTable& table, const ModelSpec& spec, std::uint32_t mask) {
    return std::log(table(mask)) - std::log(neutral_joint(spec, table.sets.tasks, mask));
}

LambdaSplit split_loglikelihood_ratio(const TaskConditionalTable& table, const ModelSpec& spec, std::uint32_t mask) {
    const auto& sets = table.sets;
    const std::uint32_t pos_bits = sets.target_mask();
    double marginal = 0.0;
    for (std::uint32_t other = 0; other < sets.num_configs(); ++other) {
        if ((other & pos_bits) == (mask & pos_bits)) marginal += table(other);
    }
    const double log_joint = std::log(table(mask));
    const double neutral_pos = neutral_joint(spec, sets.positive, mask & pos_bits);
    const double neutral_neg = neutral_joint(spec, sets.negative, mask >> sets.r_plus());

    LambdaSplit split;
    split.positive = std::log(marginal) - std::log(neutral_pos);
    split.negative = (log_joint - std::log(marginal)) - std::log(neutral_neg);
    split.total = task_loglikelihood_ratio(table, spec, mask);
    return split;
}

}  // namespace escalate
