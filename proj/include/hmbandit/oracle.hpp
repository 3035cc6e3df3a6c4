#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "hmbandit/common.hpp"
#include "hmbandit/env.hpp"

namespace hmbandit {

// A deterministic stationary policy: one (arm, action) per previous state.
struct StatePolicy {
    std::vector<ArmId> arm;
    std::vector<Vec> action;
};

// Exact per-state maximiser of the expected one-step reward under the true
// model, together with the full tie set (every (arm, vertex) pair whose value
// is within 1e-12 of the maximum).
struct OptimalPolicy {
    std::vector<ArmId> arm;     // chosen arm per previous state
    std::vector<int> vertex;    // chosen vertex index per previous state
    std::vector<Vec> action;    // the chosen vertex itself
    Vec value;                  // attained expected reward per previous state
    std::vector<std::vector<std::pair<ArmId, int>>> ties;  // per state: all maximisers

    StatePolicy policy() const { return {arm, action}; }
};

struct ModelConstants {
    double t_m;         // max expected first-passage time over all ordered state pairs
    double t_s;         // inverse of the smallest positive transition probability
    double r_max;       // width of the reachable reward range
    int c_theta_max;    // largest family cardinality
    // Largest perturbation magnitude that provably preserves every per-state
    // argmax set (see argmax_stability_gap); absent when the instance is too
    // large for the exhaustive corner search.
    std::optional<double> delta;
};

// Unique stationary distribution of the chain, found by replacing one balance
// equation with the normalisation constraint. The result is a fixed point of
// the chain to within 1e-12.
Vec stationary_distribution(const TransitionMatrix& transition);

// Expected first-passage times h[from][to]: the mean number of steps to first
// reach `to` when starting from `from`. Diagonal entries are expected return
// times (first revisit), which equal 1/mu(state) for the stationary mu.
Mat hitting_times(const TransitionMatrix& transition);

// Expected per-step reward of a policy under the stationary state law:
//   sum_s mu(s) * sum_s' P(s,s') * sum_theta P_Theta(theta) <action(s), theta>.
double average_reward(const EnvironmentSpec& spec, const StatePolicy& policy);

// Exhaustive argmax over (arm, vertex) per previous state.
OptimalPolicy optimal_policy(const EnvironmentSpec& spec);

// Largest perturbation magnitude delta such that moving every transition
// probability and every family probability by at most delta (entrywise corner
// patterns, clamped to [0,1] and renormalised) leaves every per-state argmax
// set unchanged. Returns 0 when the optimum is tied in a way any perturbation
// breaks, 1 (the full probability range) when no perturbation can break it,
// and nullopt when |S| > 4, |B| > 4, or a family exceeds 3 vectors.
std::optional<double> argmax_stability_gap(const EnvironmentSpec& spec);

// All constants bundled; delta comes from argmax_stability_gap.
ModelConstants compute_constants(const EnvironmentSpec& spec);

// Cumulative regret after each step: entry i is (i+1)*rho_star minus the
// rewards accumulated through step i.
Vec regret_curve(const Vec& rewards, double rho_star);

}  // namespace hmbandit
