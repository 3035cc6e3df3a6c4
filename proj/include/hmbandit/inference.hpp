#pragma once

#include <cstdint>
#include <vector>

#include "hmbandit/common.hpp"
#include "hmbandit/env.hpp"

namespace hmbandit {

struct ConfidenceParams {
    // The confidence lengths below are only valid for alpha > 3; construction
    // rejects anything else.
    explicit ConfidenceParams(double alpha);
    double alpha;
};

// Running counts of recovered transitions and reward-vector draws. The time
// index t starts at 0; the first step of a run contributes no counts (call
// advance_empty), every later step records one transition. Counts therefore
// always sum to max(t - 1, 0).
class CountTables {
public:
    CountTables(int num_states, int num_arms,
                std::vector<std::vector<int>> family_sizes);
    static CountTables for_sets(const ModelSets& sets);

    // One observed step: previous recovered state, new recovered state, the
    // arm played, and the recovered vector's index within family(arm, s_next).
    // Only valid from t >= 1 on; advances t.
    void record_transition(StateId s_prev, StateId s_next, ArmId arm,
                           int theta_index);
    // The t = 0 step: advances t without recording anything.
    void advance_empty();

    std::int64_t time() const { return t_; }
    std::int64_t visits(StateId s) const { return n_state_[s]; }
    std::int64_t transitions(StateId from, StateId to) const {
        return n_trans_[from][to];
    }
    std::int64_t arm_state_visits(ArmId arm, StateId s) const {
        return n_arm_state_[arm][s];
    }
    std::int64_t theta_draws(ArmId arm, StateId s, int index) const {
        return n_theta_[arm][s][index];
    }

    int num_states() const { return static_cast<int>(n_state_.size()); }
    int num_arms() const { return static_cast<int>(n_arm_state_.size()); }
    int family_size(ArmId arm, StateId s) const {
        return static_cast<int>(n_theta_[arm][s].size());
    }

    // Empirical transition matrix; rows with no data fall back to uniform.
    Mat transition_estimate() const;
    // Empirical draw distribution of family (arm, s); uniform without data.
    Vec theta_estimate(ArmId arm, StateId s) const;

private:
    std::vector<std::int64_t> n_state_;
    std::vector<std::vector<std::int64_t>> n_trans_;
    std::vector<std::vector<std::int64_t>> n_arm_state_;
    std::vector<std::vector<std::vector<std::int64_t>>> n_theta_;
    std::int64_t t_ = 0;
};

// Hoeffding-style half-width min{1, sqrt(ln(4 (t-1)^alpha * cardinality) / (2n))},
// and 1 whenever t <= 1 or n == 0. `cardinality` is the union-bound factor of
// the quantity being covered.
double confidence_length(std::int64_t t, std::int64_t n, double alpha,
                         double cardinality);

// Half-width for one row entry of the transition estimate
// (cardinality |S|^2).
double state_confidence(const CountTables& counts, const ConfidenceParams& params,
                        StateId s);

// Half-width for one entry of the family-draw estimate of (arm, s)
// (cardinality |family| * |B| * |S|).
double theta_confidence(const CountTables& counts, const ConfidenceParams& params,
                        ArmId arm, StateId s);

}  // namespace hmbandit
