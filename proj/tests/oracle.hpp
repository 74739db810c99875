#pragma once

// Reference computations written directly from the model definition, kept
// free of the engine's code paths so tests can compare the two.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "escalate/engine.hpp"
#include "escalate/error.hpp"

namespace oracle {

using escalate::ModelSpec;
using Matrix = std::vector<std::vector<double>>;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Table mass for a given exponent, summed by K level with binomial counts.
inline double interp_mass(double p_plus, double p_zero, int r, double xi) {
    double total = 0.0;
    double binom = 1.0;
    for (int k = 0; k <= r; ++k) {
        double v;
        if (k == 0) v = p_zero;
        else if (k == r) v = p_plus;
        else {
            const double a = std::pow(static_cast<double>(k) / r, xi);
            v = sigmoid(a * logit(p_plus) + (1.0 - a) * logit(p_zero));
        }
        total += binom * v;
        binom = binom * (r - k) / (k + 1);
    }
    return total;
}

/// Plain bisection over [1e-6, 1e3]; mass decreases in xi.
inline double solve_xi(double p_plus, double p_zero, int r) {
    double lo = 1e-6, hi = 1e3;
    for (int i = 0; i < 400; ++i) {
        const double mid = 0.5 * (lo + hi);
        (interp_mass(p_plus, p_zero, r, mid) > 1.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// M_ii = 1 - zeta_i, M_ij = zeta_i m_ij, remainder to neutral; neutral absorbing.
inline Matrix transition(const ModelSpec& spec) {
    const std::size_t n = spec.num_states();
    Matrix m(n, std::vector<double>(n, 0.0));
    m[0][0] = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double z = spec.holding_params[i];
        double explicit_mass = 0.0;
        for (const auto& e : spec.edges) {
            if (e.from != i) continue;
            m[i][e.to] += z * e.probability;
            explicit_mass += e.probability;
        }
        m[i][i] = 1.0 - z;
        m[i][0] = z * std::max(0.0, 1.0 - explicit_mass);
    }
    return m;
}

inline std::vector<double> step(const std::vector<double>& d, const Matrix& m) {
    std::vector<double> out(d.size(), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t j = 0; j < d.size(); ++j) out[j] += d[i] * m[i][j];
    return out;
}

inline double g(double x, bool enacted, const escalate::LogisticParams& p) {
    const double k = x < p.x0 ? p.k0 : p.k1;
    const double up = 1.0 / (1.0 + std::exp(-k * (x - p.x0)));
    return enacted ? up : 1.0 - up;
}

/// Z per task: mean of present standardized observables incident on it.
inline std::vector<std::optional<double>> intensity(const ModelSpec& spec, const escalate::ObservationRecord& rec) {
    std::vector<std::optional<double>> z(spec.num_tasks());
    for (std::size_t k = 0; k < spec.num_tasks(); ++k) {
        double sum = 0.0;
        int count = 0;
        for (std::size_t o = 0; o < spec.num_observables(); ++o) {
            if (!spec.observable_task_incidence[o][k] || !rec.values[o]) continue;
            sum += (*rec.values[o] - spec.observables[o].mean) / spec.observables[o].sd;
            ++count;
        }
        if (count) z[k] = sum / count;
    }
    return z;
}

/// One filter period by enumerating the joint lattice of (state, tasks in
/// the union of all index sets). Tasks outside a state's index set follow
/// the neutral independent model; the observation factor is the product of
/// per-task g values (pure filter), with clamped tasks pinned and their
/// intensities ignored.
inline std::vector<double> joint_update(const escalate::CompiledModel& model, const std::vector<double>& predicted,
                                        const std::optional<escalate::ObservationRecord>& rec,
                                        const std::map<std::size_t, int>& clamps) {
    const auto& spec = model.spec();
    std::set<std::size_t> uset;
    for (std::size_t i = 1; i < spec.num_states(); ++i)
        for (auto k : model.table(i).sets.tasks) uset.insert(k);
    const std::vector<std::size_t> u(uset.begin(), uset.end());
    std::vector<std::optional<double>> z(spec.num_tasks());
    if (rec) z = intensity(spec, *rec);

    std::vector<double> post(spec.num_states(), 0.0);
    for (std::uint32_t cfg = 0; cfg < (1U << u.size()); ++cfg) {
        std::map<std::size_t, bool> theta;
        for (std::size_t b = 0; b < u.size(); ++b) theta[u[b]] = (cfg >> b) & 1U;
        bool consistent = true;
        double like = 1.0;
        for (auto k : u) {
            if (auto c = clamps.find(k); c != clamps.end()) {
                consistent = consistent && (theta[k] == (c->second == 1));
                continue;
            }
            like *= z[k] ? g(*z[k], theta[k], spec.likelihood_params[k]) : 0.5;
        }
        if (!consistent) continue;
        for (std::size_t w = 0; w < spec.num_states(); ++w) {
            double p = 1.0;
            std::set<std::size_t> covered;
            if (w != 0) {
                const auto& table = model.table(w);
                std::uint32_t mask = 0;
                for (std::size_t b = 0; b < table.sets.tasks.size(); ++b) {
                    if (theta[table.sets.tasks[b]]) mask |= 1U << b;
                    covered.insert(table.sets.tasks[b]);
                }
                p = table.probability[mask];
            }
            for (auto k : u) {
                if (covered.contains(k)) continue;
                const double q = spec.neutral_task_probs[k];
                p *= theta[k] ? q : 1.0 - q;
            }
            post[w] += predicted[w] * p * like;
        }
    }
    double total = 0.0;
    for (double v : post) total += v;
    for (auto& v : post) v /= total;
    return post;
}

struct Period {
    std::int64_t t = 0;
    std::optional<escalate::ObservationRecord> record;
    std::map<std::size_t, int> clamps;
};

/// Brute-force filter over a sequence of periods; returns posteriors.
inline std::vector<std::vector<double>> run(const escalate::CompiledModel& model, const std::vector<Period>& periods) {
    const auto& spec = model.spec();
    const auto m = transition(spec);
    std::vector<double> d = spec.priors;
    std::int64_t last = 0;
    bool first = true;
    std::vector<std::vector<double>> out;
    for (const auto& p : periods) {
        const std::int64_t gap = first ? 1 : p.t - last;
        for (std::int64_t s = 0; s < gap * spec.substeps_k; ++s) d = step(d, m);
        d = joint_update(model, d, p.record, p.clamps);
        out.push_back(d);
        last = p.t;
        first = false;
    }
    return out;
}

/// Random valid model document: up to 3 active states, up to 3 tasks.
inline nlohmann::json random_model(std::mt19937_64& rng, const char* mode = "product") {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    auto uni = [&](double a, double b) { return a + (b - a) * u01(rng); };
    const int active = 1 + static_cast<int>(rng() % 3);
    const int tasks = 1 + static_cast<int>(rng() % 3);
    const int obs = 1 + static_cast<int>(rng() % 3);

    nlohmann::json doc;
    doc["format"] = 1;
    doc["states"] = nlohmann::json::array({{{"id", "N"}, {"name", "neutral"}}});
    for (int i = 1; i <= active; ++i) doc["states"].push_back({{"id", "S" + std::to_string(i)}, {"name", "s"}});
    for (int k = 0; k < tasks; ++k) doc["tasks"].push_back({{"id", "t" + std::to_string(k)}, {"name", "t"}});
    for (int o = 0; o < obs; ++o)
        doc["observables"].push_back(
            {{"id", "o" + std::to_string(o)}, {"name", "o"}, {"mean", uni(-1, 1)}, {"sd", uni(0.5, 2)}});

    std::vector<double> pri(active + 1);
    double sum = 0.0;
    for (auto& p : pri) sum += (p = uni(0.05, 1));
    doc["priors"]["N"] = pri[0] / sum;
    for (int i = 1; i <= active; ++i) doc["priors"]["S" + std::to_string(i)] = pri[i] / sum;

    doc["edges"] = nlohmann::json::array();
    for (int i = 1; i <= active; ++i) {
        std::vector<std::pair<int, double>> out;
        double w = 0.0;
        for (int j = 1; j <= active; ++j) {
            if (i == j || u01(rng) < 0.4) continue;
            out.emplace_back(j, uni(0.1, 1));
            w += out.back().second;
        }
        const double budget = uni(0.3, 0.95);
        for (auto& [j, v] : out)
            doc["edges"].push_back(
                {{"from", "S" + std::to_string(i)}, {"to", "S" + std::to_string(j)}, {"probability", v / w * budget}});
        doc["holding_params"]["S" + std::to_string(i)] = uni(0.05, 0.95);
        doc["p_plus"]["S" + std::to_string(i)] = uni(0.2, 0.8);

        nlohmann::json pos = nlohmann::json::array(), neg = nlohmann::json::array();
        for (int k = 0; k < tasks; ++k) {
            const double c = u01(rng);
            if (c < 0.45) pos.push_back("t" + std::to_string(k));
            else if (c < 0.7) neg.push_back("t" + std::to_string(k));
        }
        if (pos.empty() && neg.empty()) pos.push_back("t" + std::to_string(rng() % tasks));
        doc["task_state_incidence"]["S" + std::to_string(i)] = {{"positive", pos}, {"negative", neg}};
    }
    for (int k = 0; k < tasks; ++k) {
        const auto id = "t" + std::to_string(k);
        doc["neutral_task_probs"][id] = uni(0.02, 0.6);
        doc["likelihood_params"][id] = {{"x0", uni(-1, 1)}, {"k0", uni(0.5, 5)}, {"k1", uni(0.5, 5)}};
    }
    for (int o = 0; o < obs; ++o) doc["observable_task_incidence"]["o" + std::to_string(o)] = nlohmann::json::array();
    for (int k = 0; k < tasks; ++k) {
        const auto id = "t" + std::to_string(k);
        bool any = false;
        for (int o = 0; o < obs; ++o) {
            if (u01(rng) < 0.5) {
                doc["observable_task_incidence"]["o" + std::to_string(o)].push_back(id);
                any = true;
            }
        }
        if (!any) doc["observable_task_incidence"]["o" + std::to_string(rng() % obs)].push_back(id);
    }
    doc["likelihood_mode"] = mode;
    doc["substeps_k"] = 1 + static_cast<int>(rng() % 2);
    return doc;
}

/// Explicit random tables for states that cannot be interpolated (a single
/// relevant task, or no normalizing exponent) and for a random half of the
/// others.
inline escalate::ModelHandle compile_random(const ModelSpec& spec, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::map<std::size_t, std::vector<double>> tables;
    for (std::size_t i = 1; i < spec.num_states(); ++i) {
        bool interpolate = u01(rng) < 0.5;
        if (interpolate) {
            try {
                escalate::conditional_table(spec, i);
            } catch (const escalate::Error&) {
                interpolate = false;
            }
        }
        if (interpolate) continue;
        const auto sets = escalate::index_sets(spec, i);
        std::vector<double> t(sets.num_configs());
        double sum = 0.0;
        for (auto& v : t) sum += (v = 0.02 + u01(rng));
        for (auto& v : t) v /= sum;
        tables[i] = t;
    }
    return escalate::CompiledModel::compile(spec, tables);
}

/// Random periods with gaps of 1 or 2, missing values, and occasional clamps.
inline std::vector<Period> random_periods(const ModelSpec& spec, std::mt19937_64& rng, int count) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<Period> out;
    std::int64_t t = 0;
    for (int p = 0; p < count; ++p) {
        Period period;
        t += 1 + static_cast<std::int64_t>(rng() % 2);
        period.t = t;
        if (u01(rng) < 0.9) {
            escalate::ObservationRecord rec{t, {}};
            for (std::size_t o = 0; o < spec.num_observables(); ++o) {
                if (u01(rng) < 0.15) rec.values.emplace_back(std::nullopt);
                else rec.values.emplace_back(spec.observables[o].mean + spec.observables[o].sd * (4.0 * u01(rng) - 2.0));
            }
            period.record = rec;
        }
        if (!period.record || u01(rng) < 0.2) {
            for (std::size_t k = 0; k < spec.num_tasks(); ++k) {
                if (u01(rng) < 0.5) period.clamps[k] = static_cast<int>(rng() % 2);
            }
            if (period.clamps.empty()) period.clamps[rng() % spec.num_tasks()] = static_cast<int>(rng() % 2);
        }
        out.push_back(std::move(period));
    }
    return out;
}

inline escalate::StepInput to_step(const Period& p) {
    escalate::StepInput in;
    in.t = p.t;
    in.record = p.record;
    if (!p.clamps.empty()) in.evidence = escalate::EvidenceEvent{p.t, p.clamps, ""};
    return in;
}

}  // namespace oracle
