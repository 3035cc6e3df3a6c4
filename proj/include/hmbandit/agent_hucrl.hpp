#pragma once

#include <cstdint>
#include <memory>

#include "hmbandit/common.hpp"
#include "hmbandit/geometry.hpp"
#include "hmbandit/inference.hpp"
#include "hmbandit/learner.hpp"

namespace hmbandit {

// One box-constrained simplex problem: maximize sum_i p_i * values[i] over
// distributions p with |p - center|_inf <= half_width.
struct OptimisticBox {
    Vec center;         // a probability distribution
    double half_width;  // >= 0
    Vec values;         // same length as center
};

struct OptimisticChoice {
    Vec dist;
    double value;
};

// Exact greedy solution: start every coordinate at its lower bound
// max(0, center - half_width) and hand the remaining mass to coordinates in
// descending value order (ties: lower index first), capping each at
// min(1, center + half_width).
OptimisticChoice optimistic_expectation(const OptimisticBox& box);

// A frozen decision rule: per source state the chosen (arm, vertex) and its
// optimistic value, plus the confidence half-widths at freeze time. The rule
// stays in force until some half-width falls to half its frozen value.
struct RoundPolicy {
    std::int64_t started_at = 0;       // table time when the round opened
    std::vector<ArmId> arm;            // per source state
    std::vector<Vec> action;           // per source state, a polytope vertex
    Vec value;                         // per source state
    Vec state_conf_snapshot;           // per state
    Mat theta_conf_snapshot;           // [arm][state]
};

// Optimistic values of every (arm, vertex) pair for one source state:
// sum over next states of P̂(source, next) * optimistic_expectation over that
// (arm, next) family box. Rows are arms, columns follow actions.vertices().
Mat policy_value_table(const CountTables& counts, const ModelSets& sets,
                       const ConfidenceParams& params, StateId source);

// Freeze a new decision rule from the current estimates: per source state the
// argmax of policy_value_table (ties: smaller arm index, then
// lexicographically smaller vertex). Transition estimates enter as plain
// estimates; only the family distributions are treated optimistically.
RoundPolicy compute_policy(const CountTables& counts, const ModelSets& sets,
                           const ConfidenceParams& params);

// True once any state or family half-width has fallen to half its value at
// the round start.
bool round_should_end(const CountTables& counts, const ConfidenceParams& params,
                      const RoundPolicy& policy);

// The optimistic hidden-state learner: recovers the hidden state from each
// reward, maintains counts over recovered quantities, and replays a frozen
// optimistic policy between confidence-halving round boundaries. Actions are
// perturbed within a decaying radius so recovery stays well-posed.
class HucrlAgent : public Learner {
public:
    HucrlAgent(std::shared_ptr<const ModelSets> sets, ConfidenceParams params,
               PerturbationSchedule schedule);

    std::pair<ArmId, Vec> act(std::mt19937_64& rng) override;
    RecoveryResult observe(double reward, ArmId arm, const Vec& action) override;
    std::int64_t round_index() const override { return round_index_; }
    std::int64_t diagnostic_count() const override { return diagnostics_; }

    const RoundPolicy& policy() const { return policy_; }
    const CountTables& counts() const { return counts_; }
    StateId recovered_state() const { return s_prev_; }

private:
    std::shared_ptr<const ModelSets> sets_;
    ConfidenceParams params_;
    PerturbationSchedule schedule_;
    CountTables counts_;
    RoundPolicy policy_;
    StateId s_prev_ = 0;  // recovered state of the previous step
    std::int64_t round_index_ = 0;
    std::int64_t diagnostics_ = 0;
};

}  // namespace hmbandit
