#include "escalate/rdceg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "escalate/error.hpp"

namespace escalate {

StateDistribution StateDistribution::checked(std::vector<double> values) {
    double total = 0.0;
    for (double v : values) {
        if (!(v >= 0.0)) throw Error("INVALID_DISTRIBUTION", "distribution has a negative or NaN entry");
        total += v;
    }
    if (!(std::abs(total - 1.0) <= 1e-9)) {
        throw Error("INVALID_DISTRIBUTION", "distribution sums to " + std::to_string(total));
    }
    return StateDistribution(std::move(values));
}

StateDistribution StateDistribution::point_mass(std::size_t n, std::size_t state) {
    std::vector<double> v(n, 0.0);
    v.at(state) = 1.0;
    return StateDistribution(std::move(v));
}

double StateDistribution::sum() const noexcept {
    return std::accumulate(p_.begin(), p_.end(), 0.0);
}

TransitionMatrix TransitionMatrix::identity(std::size_t n) {
    TransitionMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double TransitionMatrix::row_sum(std::size_t i) const {
    double s = 0.0;
    for (std::size_t j = 0; j < n_; ++j) s += (*this)(i, j);
    return s;
}

double TransitionMatrix::max_row_defect() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < n_; ++i) worst = std::max(worst, std::abs(row_sum(i) - 1.0));
    return worst;
}

bool TransitionMatrix::is_absorbing(std::size_t i) const {
    return (*this)(i, i) == 1.0;
}

TransitionMatrix jump_matrix(const ModelSpec& spec) {
    const std::size_t n = spec.num_states();
    TransitionMatrix m(n);
    m(kNeutral, kNeutral) = 1.0;
    for (const auto& e : spec.edges) m(e.from, e.to) = e.probability;
    for (std::size_t i = 1; i < n; ++i) {
        // Rounding in the declared edges can leave a remainder of -1e-17.
        m(i, kNeutral) = std::max(0.0, spec.implied_neutral_edge(i));
    }
    return m;
}

TransitionMatrix build_transition_matrix(const ModelSpec& spec) {
    const auto jump = jump_matrix(spec);
    const std::size_t n = spec.num_states();
    TransitionMatrix m(n);
    m(kNeutral, kNeutral) = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double zeta = spec.holding_params[i];
        for (std::size_t j = 0; j < n; ++j) {
            m(i, j) = i == j ? 1.0 - zeta : zeta * jump(i, j);
        }
    }
    return m;
}

TransitionMatrix multiply(const TransitionMatrix& a, const TransitionMatrix& b) {
    if (a.size() != b.size()) throw Error("DIMENSION_MISMATCH", "matrix sizes differ");
    const std::size_t n = a.size();
    TransitionMatrix out(n, a.periods() + b.periods());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t l = 0; l < n; ++l) {
            const double ail = a(i, l);
            if (ail == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) out(i, j) += ail * b(l, j);
        }
    }
    return out;
}

TransitionMatrix matrix_power(const TransitionMatrix& m, int k) {
    if (k < 1) throw Error("INVALID_ARGUMENT", "matrix power needs k >= 1");
    TransitionMatrix out = m;
    for (int i = 1; i < k; ++i) out = multiply(out, m);
    return out;
}

StateDistribution propagate(const StateDistribution& dist, const TransitionMatrix& m) {
    if (dist.size() != m.size()) throw Error("DIMENSION_MISMATCH", "distribution and matrix sizes differ");
    const std::size_t n = m.size();
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double pi = dist[i];
        if (pi == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) out[j] += pi * m(i, j);
    }
    return StateDistribution(std::move(out));
}

std::vector<StateDistribution> evolve(const StateDistribution& dist, const TransitionMatrix& m, std::size_t n) {
    if (dist.size() != m.size()) throw Error("DIMENSION_MISMATCH", "distribution and matrix sizes differ");
    std::vector<StateDistribution> path;
    path.reserve(n + 1);
    path.push_back(dist);
    for (std::size_t t = 0; t < n; ++t) path.push_back(propagate(path.back(), m));
    return path;
}

TransitionMatrix make_absorbing(const TransitionMatrix& m, std::size_t state) {
    if (state >= m.size()) throw Error("UNKNOWN_STATE", "state index out of range");
    TransitionMatrix out = m;
    for (std::size_t j = 0; j < m.size(); ++j) out(state, j) = j == state ? 1.0 : 0.0;
    return out;
}

TransitionMatrix with_neutral_rate(const TransitionMatrix& m, double rate) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw Error("INVALID_ARGUMENT", "neutral rate must lie in [0,1]");
    TransitionMatrix out = m;
    for (std::size_t i = 1; i < m.size(); ++i) {
        if (m.is_absorbing(i)) continue;
        const double rest = 1.0 - m(i, kNeutral);
        for (std::size_t j = 1; j < m.size(); ++j) {
            out(i, j) = rest > 0.0 ? m(i, j) * (1.0 - rate) / rest : (j == i ? 1.0 - rate : 0.0);
        }
        out(i, kNeutral) = rate;
    }
    return out;
}

Convergence evolve_to_convergence(const StateDistribution& dist, const TransitionMatrix& m, double tolerance,
                                  std::size_t cap) {
    Convergence result{dist, 0, false};
    while (result.periods < cap) {
        auto next = propagate(result.terminal, m);
        double change = 0.0;
        for (std::size_t i = 0; i < next.size(); ++i) change = std::max(change, std::abs(next[i] - result.terminal[i]));
        result.terminal = std::move(next);
        ++result.periods;
        if (change < tolerance) {
            result.converged = true;
            break;
        }
    }
    return result;
}

}  // namespace escalate
