#pragma once

#include <cstdint>
#include <random>
#include <utility>

#include "hmbandit/common.hpp"
#include "hmbandit/env.hpp"

namespace hmbandit {

// Outcome of matching an observed reward back to a reward vector.
struct RecoveryResult {
    StateId state;     // state whose family holds the best-matching vector
    int theta_index;   // its index within that family
    double residual;   // |reward - <action, matched vector>|
    bool residual_miss;  // best residual above 1e-6: nothing really matched
    bool ambiguous;      // runner-up residual within 1e-9 of the best
    bool flagged() const { return residual_miss || ambiguous; }
};

// Match `reward` against every vector the played arm could have produced and
// return the best match. Perturbed actions make the minimizer almost surely
// unique; the two flags report numerically degenerate cases (the best match
// is still returned and used).
RecoveryResult recover_state(const ModelSets& sets, ArmId arm, const Vec& action,
                             double reward);

// What every learning agent exposes to the run loop. An agent only ever sees
// its own action/reward stream — never the hidden state.
class Learner {
public:
    virtual ~Learner() = default;

    // Choose the arm and the (perturbed) action for the current step.
    virtual std::pair<ArmId, Vec> act(std::mt19937_64& rng) = 0;

    // Digest the reward of the step that `act` opened. `arm` and `action`
    // must be exactly what `act` returned.
    virtual RecoveryResult observe(double reward, ArmId arm, const Vec& action) = 0;

    // Completed policy recomputations so far.
    virtual std::int64_t round_index() const = 0;

    // Total flagged recoveries so far.
    virtual std::int64_t diagnostic_count() const = 0;
};

}  // namespace hmbandit
