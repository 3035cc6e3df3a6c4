#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>

#include "hmbandit/common.hpp"
#include "hmbandit/geometry.hpp"

namespace hmbandit {

using StateId = int;
using ArmId = int;

// Row-stochastic matrix over hidden states. Construction validates shape,
// row sums, and that the chain is irreducible and aperiodic (all entries of
// P^(S*S) strictly positive).
class TransitionMatrix {
public:
    explicit TransitionMatrix(Mat rows);

    int num_states() const { return static_cast<int>(rows_.size()); }
    double operator()(int from, int to) const { return rows_[from][to]; }
    const Vec& row(int from) const { return rows_[from]; }
    const Mat& rows() const { return rows_; }

private:
    Mat rows_;
};

// Finite reward-vector families: for each (arm, state) a list of vectors and
// a matching draw distribution. Families of the same arm must be pairwise
// disjoint across states (L_inf separation > 1e-9) so a recovered vector
// identifies the state; vectors within one family are distinct for the same
// reason (index-based counting).
class ThetaFamily {
public:
    // vectors[arm][state] -> list of reward vectors;
    // probs[arm][state] -> distribution over that list.
    ThetaFamily(std::vector<std::vector<std::vector<Vec>>> vectors,
                std::vector<std::vector<Vec>> probs);

    int num_arms() const { return static_cast<int>(vectors_.size()); }
    int num_states() const { return static_cast<int>(vectors_[0].size()); }
    int dimension() const { return static_cast<int>(vectors_[0][0][0].size()); }
    int family_size(ArmId arm, StateId state) const {
        return static_cast<int>(vectors_[arm][state].size());
    }
    const std::vector<Vec>& vectors(ArmId arm, StateId state) const {
        return vectors_[arm][state];
    }
    const Vec& probs(ArmId arm, StateId state) const { return probs_[arm][state]; }

    // Largest L1 norm over every vector of every family.
    double max_l1_norm() const { return max_l1_; }

private:
    std::vector<std::vector<std::vector<Vec>>> vectors_;
    std::vector<std::vector<Vec>> probs_;
    double max_l1_ = 0.0;
};

// What a learner is allowed to know: the reward-vector families (without
// their draw distributions) and the action set. No transition matrix, no
// probabilities, no hidden state.
struct ModelSets {
    int num_states;
    int num_arms;
    int dimension;
    std::vector<std::vector<std::vector<Vec>>> thetas;  // [arm][state][index]
    Polytope actions;
    double theta_l1_max;

    const std::vector<Vec>& family(ArmId arm, StateId state) const {
        return thetas[arm][state];
    }
};

// Full simulation model: hidden chain, reward families, action polytope.
class EnvironmentSpec {
public:
    EnvironmentSpec(TransitionMatrix transition, ThetaFamily thetas, Polytope actions);

    int num_states() const { return transition_.num_states(); }
    int num_arms() const { return thetas_.num_arms(); }
    int dimension() const { return actions_.dimension(); }
    const TransitionMatrix& transition() const { return transition_; }
    const ThetaFamily& thetas() const { return thetas_; }
    const Polytope& actions() const { return actions_; }

    ModelSets known_sets() const;

private:
    TransitionMatrix transition_;
    ThetaFamily thetas_;
    Polytope actions_;
};

struct StepResult {
    double reward;
    StateId state;    // hidden state the chain moved to (it generated the reward)
    int theta_index;  // index of the drawn vector within its family
    Vec theta;        // the drawn vector itself
};

// The simulator. One step: the chain advances first, then a reward vector is
// drawn from the family of (arm, arrived state) and the reward is its inner
// product with the played action. Identical seeds give identical trajectories.
class Environment {
public:
    // initial_state: fixed state, or nullopt to draw from the stationary
    // distribution of the chain.
    Environment(std::shared_ptr<const EnvironmentSpec> spec, std::uint64_t seed,
                std::optional<StateId> initial_state);

    StepResult step(ArmId arm, const Vec& action);

    StateId current_state() const { return state_; }
    std::int64_t steps_taken() const { return steps_; }
    const EnvironmentSpec& spec() const { return *spec_; }

private:
    std::shared_ptr<const EnvironmentSpec> spec_;
    std::mt19937_64 rng_;
    StateId state_;
    std::int64_t steps_ = 0;
};

}  // namespace hmbandit
