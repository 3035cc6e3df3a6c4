#pragma once

#include <cstdint>
#include <memory>

#include "hmbandit/common.hpp"
#include "hmbandit/geometry.hpp"
#include "hmbandit/inference.hpp"
#include "hmbandit/learner.hpp"

namespace hmbandit {

// Baseline that ignores the linear reward structure: it treats every
// (arm, vertex) pair as an opaque cell and runs optimistic estimation over
// per-cell transition counts and per-cell mean rewards. Rounds, recovery and
// action perturbation mirror the main agent; plays are attributed to the
// intended vertex while the perturbed action is what is physically played.
class FlatUcrlAgent : public Learner {
public:
    FlatUcrlAgent(std::shared_ptr<const ModelSets> sets, ConfidenceParams params,
                  PerturbationSchedule schedule);

    std::pair<ArmId, Vec> act(std::mt19937_64& rng) override;
    RecoveryResult observe(double reward, ArmId arm, const Vec& action) override;
    std::int64_t round_index() const override { return round_index_; }
    std::int64_t diagnostic_count() const override { return diagnostics_; }

    // Optimistic cell values for one source state (rows: arms, columns:
    // vertices); exposed for oracle comparisons in tests.
    Mat value_table(StateId source) const;

    std::int64_t time() const { return t_; }
    StateId recovered_state() const { return s_prev_; }

private:
    double conf_p(StateId src, ArmId b, int a) const;
    double conf_r(ArmId b, int a, StateId next) const;
    double cell_value(StateId src, ArmId b, int a) const;
    void recompute_policy();

    std::shared_ptr<const ModelSets> sets_;
    ConfidenceParams params_;
    PerturbationSchedule schedule_;
    int S_, B_, nv_;
    std::vector<std::int64_t> n4_;   // [src][arm][vertex][next]
    std::vector<std::int64_t> n3_;   // [src][arm][vertex]
    std::vector<double> rsum_;       // [arm][vertex][next]
    std::vector<std::int64_t> nr_;   // [arm][vertex][next]
    std::int64_t t_ = 0;
    std::vector<ArmId> arm_;         // policy: per source state
    std::vector<int> vertex_;        // policy: vertex index per source state
    std::vector<double> snap_p_, snap_r_;
    StateId s_prev_ = 0;
    std::int64_t round_index_ = 0;
    std::int64_t diagnostics_ = 0;
};

// Baseline that estimates, per (source state, arm), the joint distribution
// over (next state, family index) with a single confidence box, instead of
// splitting it into a shared transition estimate and per-family estimates.
class JointConfAgent : public Learner {
public:
    JointConfAgent(std::shared_ptr<const ModelSets> sets, ConfidenceParams params,
                   PerturbationSchedule schedule);

    std::pair<ArmId, Vec> act(std::mt19937_64& rng) override;
    RecoveryResult observe(double reward, ArmId arm, const Vec& action) override;
    std::int64_t round_index() const override { return round_index_; }
    std::int64_t diagnostic_count() const override { return diagnostics_; }

    Mat value_table(StateId source) const;

    std::int64_t time() const { return t_; }
    StateId recovered_state() const { return s_prev_; }

private:
    double conf_joint(StateId src, ArmId b) const;
    double cell_value(StateId src, ArmId b, int a) const;
    void recompute_policy();

    std::shared_ptr<const ModelSets> sets_;
    ConfidenceParams params_;
    PerturbationSchedule schedule_;
    int S_, B_, nv_;
    std::vector<std::vector<int>> offset_;  // [arm][next]: family start in the joint alphabet
    std::vector<int> joint_size_;           // [arm]
    std::vector<std::vector<Vec>> values_;  // [arm][vertex]: <vertex, theta_j> per alphabet entry
    std::vector<std::vector<std::int64_t>> njoint_;  // [src*B+arm][alphabet entry]
    std::vector<std::int64_t> n2_;                   // [src*B+arm]
    std::int64_t t_ = 0;
    std::vector<ArmId> arm_;
    std::vector<int> vertex_;
    std::vector<double> snap_;  // conf per (src, arm)
    StateId s_prev_ = 0;
    std::int64_t round_index_ = 0;
    std::int64_t diagnostics_ = 0;
};

}  // namespace hmbandit
