#pragma once

#include <cstddef>
#include <vector>

#include "escalate/model_spec.hpp"

namespace escalate {

/// Probability per state, aligned with ModelSpec::states.
class StateDistribution {
public:
    StateDistribution() = default;
    explicit StateDistribution(std::vector<double> values) : p_(std::move(values)) {}

    /// Throws Error("INVALID_DISTRIBUTION") unless entries are >= 0 and sum
    /// to 1 within 1e-9.
    static StateDistribution checked(std::vector<double> values);
    static StateDistribution point_mass(std::size_t n, std::size_t state);

    std::size_t size() const noexcept { return p_.size(); }
    double operator[](std::size_t i) const { return p_[i]; }
    double& operator[](std::size_t i) { return p_[i]; }
    const std::vector<double>& values() const noexcept { return p_; }
    double sum() const noexcept;

    bool operator==(const StateDistribution&) const = default;

private:
    std::vector<double> p_;
};

/// Dense row-stochastic matrix. `periods` is the number of base transition
/// intervals the matrix spans (1 for M itself, k for M^k).
class TransitionMatrix {
public:
    TransitionMatrix() = default;
    TransitionMatrix(std::size_t n, int periods = 1) : n_(n), periods_(periods), a_(n * n, 0.0) {}

    static TransitionMatrix identity(std::size_t n);

    std::size_t size() const noexcept { return n_; }
    int periods() const noexcept { return periods_; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * n_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return a_[i * n_ + j]; }
    const std::vector<double>& data() const noexcept { return a_; }

    double row_sum(std::size_t i) const;
    /// Largest |row sum - 1| over all rows.
    double max_row_defect() const;
    bool is_absorbing(std::size_t i) const;

    bool operator==(const TransitionMatrix&) const = default;

private:
    std::size_t n_ = 0;
    int periods_ = 1;
    std::vector<double> a_;
};

/// Embedded jump chain M0: zero diagonal, neutral row absorbing, neutral
/// column holding the implied remainder of each active row.
TransitionMatrix jump_matrix(const ModelSpec& spec);

/// Single-period semi-Markov matrix: 1 - zeta_i on the diagonal and
/// zeta_i * M0(i, j) off it.
TransitionMatrix build_transition_matrix(const ModelSpec& spec);

TransitionMatrix multiply(const TransitionMatrix& a, const TransitionMatrix& b);

/// Repeated product M * M * ... * M (k factors). k < 1 throws.
TransitionMatrix matrix_power(const TransitionMatrix& m, int k);

/// One step: dist * M.
StateDistribution propagate(const StateDistribution& dist, const TransitionMatrix& m);

/// Trajectory of length n + 1 starting with `dist`.
std::vector<StateDistribution> evolve(const StateDistribution& dist, const TransitionMatrix& m, std::size_t n);

/// Row `state` replaced by its unit vector.
TransitionMatrix make_absorbing(const TransitionMatrix& m, std::size_t state);

/// Every non-absorbing row other than neutral gets exactly `rate` on the
/// neutral column; the rest of the row is rescaled to keep it stochastic.
TransitionMatrix with_neutral_rate(const TransitionMatrix& m, double rate);

struct Convergence {
    StateDistribution terminal;
    std::size_t periods = 0;
    bool converged = false;
};

/// Steps until the L-infinity change between successive distributions drops
/// below `tolerance` or `cap` steps have been taken.
Convergence evolve_to_convergence(const StateDistribution& dist, const TransitionMatrix& m, double tolerance = 1e-12,
                                  std::size_t cap = 1'000'000);

}  // namespace escalate
