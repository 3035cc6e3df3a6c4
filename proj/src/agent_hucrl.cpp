#include "hmbandit/agent_hucrl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hmbandit {

RecoveryResult recover_state(const ModelSets& sets, ArmId arm, const Vec& action,
                             double reward) {
    if (arm < 0 || arm >= sets.num_arms) throw ContractError("arm index out of range");
    RecoveryResult best{0, 0, std::numeric_limits<double>::infinity(), false, false};
    double second = std::numeric_limits<double>::infinity();
    for (StateId s = 0; s < sets.num_states; ++s) {
        const auto& family = sets.family(arm, s);
        for (std::size_t i = 0; i < family.size(); ++i) {
            const double res = std::fabs(reward - dot(action, family[i]));
            if (res < best.residual) {
                second = best.residual;
                best.state = s;
                best.theta_index = static_cast<int>(i);
                best.residual = res;
            } else if (res < second) {
                second = res;
            }
        }
    }
    best.residual_miss = best.residual > 1e-6;
    best.ambiguous = second - best.residual <= 1e-9;
    return best;
}

OptimisticChoice optimistic_expectation(const OptimisticBox& box) {
    const std::size_t n = box.center.size();
    if (n == 0 || box.values.size() != n)
        throw ContractError("box center and values must be non-empty and equal-sized");
    if (box.half_width < 0.0) throw ContractError("half width must be >= 0");

    Vec p(n);
    double remaining = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = std::max(0.0, box.center[i] - box.half_width);
        remaining -= p[i];
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return box.values[a] > box.values[b]; });
    for (int i : order) {
        if (remaining <= 0.0) break;
        const double cap = std::min(1.0, box.center[i] + box.half_width);
        const double add = std::min(cap - p[i], remaining);
        p[i] += add;
        remaining -= add;
    }
    const double value = dot(p, box.values);
    return {std::move(p), value};
}

namespace {

// Optimistic value of every (arm, vertex, next-state) triple at the current
// counts: out[arm][vertex][next].
std::vector<Mat> optimistic_value_cube(const CountTables& counts,
                                       const ModelSets& sets,
                                       const ConfidenceParams& params) {
    const auto& verts = sets.actions.vertices();
    std::vector<Mat> cube(sets.num_arms,
                          Mat(verts.size(), Vec(sets.num_states)));
    for (ArmId b = 0; b < sets.num_arms; ++b) {
        for (StateId s = 0; s < sets.num_states; ++s) {
            const Vec center = counts.theta_estimate(b, s);
            const double width = theta_confidence(counts, params, b, s);
            const auto& family = sets.family(b, s);
            for (std::size_t a = 0; a < verts.size(); ++a) {
                Vec values(family.size());
                for (std::size_t i = 0; i < family.size(); ++i)
                    values[i] = dot(verts[a], family[i]);
                cube[b][a][s] =
                    optimistic_expectation({center, width, std::move(values)}).value;
            }
        }
    }
    return cube;
}

}  // namespace

Mat policy_value_table(const CountTables& counts, const ModelSets& sets,
                       const ConfidenceParams& params, StateId source) {
    const auto cube = optimistic_value_cube(counts, sets, params);
    const Mat trans = counts.transition_estimate();
    const std::size_t nv = sets.actions.vertices().size();
    Mat table(sets.num_arms, Vec(nv));
    for (ArmId b = 0; b < sets.num_arms; ++b)
        for (std::size_t a = 0; a < nv; ++a)
            table[b][a] = dot(trans[source], cube[b][a]);
    return table;
}

RoundPolicy compute_policy(const CountTables& counts, const ModelSets& sets,
                           const ConfidenceParams& params) {
    const auto cube = optimistic_value_cube(counts, sets, params);
    const Mat trans = counts.transition_estimate();
    const auto& verts = sets.actions.vertices();

    RoundPolicy policy;
    policy.started_at = counts.time();
    policy.arm.resize(sets.num_states);
    policy.action.resize(sets.num_states);
    policy.value.resize(sets.num_states);
    for (StateId src = 0; src < sets.num_states; ++src) {
        ArmId best_arm = 0;
        std::size_t best_vertex = 0;
        double best = -std::numeric_limits<double>::infinity();
        for (ArmId b = 0; b < sets.num_arms; ++b) {
            for (std::size_t a = 0; a < verts.size(); ++a) {
                const double v = dot(trans[src], cube[b][a]);
                const bool better =
                    v > best || (v == best && b == best_arm &&
                                 lex_less(verts[a], verts[best_vertex]));
                if (better) {
                    best = v;
                    best_arm = b;
                    best_vertex = a;
                }
            }
        }
        policy.arm[src] = best_arm;
        policy.action[src] = verts[best_vertex];
        policy.value[src] = best;
    }

    policy.state_conf_snapshot.resize(sets.num_states);
    for (StateId s = 0; s < sets.num_states; ++s)
        policy.state_conf_snapshot[s] = state_confidence(counts, params, s);
    policy.theta_conf_snapshot.assign(sets.num_arms, Vec(sets.num_states));
    for (ArmId b = 0; b < sets.num_arms; ++b)
        for (StateId s = 0; s < sets.num_states; ++s)
            policy.theta_conf_snapshot[b][s] = theta_confidence(counts, params, b, s);
    return policy;
}

bool round_should_end(const CountTables& counts, const ConfidenceParams& params,
                      const RoundPolicy& policy) {
    for (StateId s = 0; s < counts.num_states(); ++s)
        if (state_confidence(counts, params, s) <=
            0.5 * policy.state_conf_snapshot[s])
            return true;
    for (ArmId b = 0; b < counts.num_arms(); ++b)
        for (StateId s = 0; s < counts.num_states(); ++s)
            if (theta_confidence(counts, params, b, s) <=
                0.5 * policy.theta_conf_snapshot[b][s])
                return true;
    return false;
}

HucrlAgent::HucrlAgent(std::shared_ptr<const ModelSets> sets,
                       ConfidenceParams params, PerturbationSchedule schedule)
    : sets_(std::move(sets)), params_(params), schedule_(schedule),
      counts_(CountTables::for_sets(*sets_)),
      policy_(compute_policy(counts_, *sets_, params_)) {}

std::pair<ArmId, Vec> HucrlAgent::act(std::mt19937_64& rng) {
    const std::int64_t t = std::max<std::int64_t>(1, counts_.time());
    const ArmId arm = policy_.arm[s_prev_];
    Vec action = sample_perturbed_action(sets_->actions, policy_.action[s_prev_],
                                         schedule_.at(t), rng);
    return {arm, std::move(action)};
}

RecoveryResult HucrlAgent::observe(double reward, ArmId arm, const Vec& action) {
    const RecoveryResult rec = recover_state(*sets_, arm, action, reward);
    if (rec.flagged()) ++diagnostics_;

    const StateId s_before = s_prev_;
    const bool counted = counts_.time() >= 1;
    if (counted)
        counts_.record_transition(s_before, rec.state, arm, rec.theta_index);
    else
        counts_.advance_empty();
    s_prev_ = rec.state;

    // Half-widths are nondecreasing in t at fixed counts, so only the two
    // cells this step incremented can newly cross the halving threshold.
    if (counted &&
        (state_confidence(counts_, params_, s_before) <=
             0.5 * policy_.state_conf_snapshot[s_before] ||
         theta_confidence(counts_, params_, arm, rec.state) <=
             0.5 * policy_.theta_conf_snapshot[arm][rec.state])) {
        ++round_index_;
        policy_ = compute_policy(counts_, *sets_, params_);
    }
    return rec;
}

}  // namespace hmbandit
