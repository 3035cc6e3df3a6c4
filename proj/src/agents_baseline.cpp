#include "hmbandit/agents_baseline.hpp"

#include <cmath>

#include "hmbandit/agent_hucrl.hpp"
#include "hmbandit/inference.hpp"

namespace hmbandit {

namespace {

// Shared argmax over (arm, vertex) cells: ties prefer the smaller arm index,
// then the lexicographically smaller vertex.
void pick_cell(const Mat& table, const std::vector<Vec>& verts, ArmId& arm_out,
               int& vertex_out) {
    ArmId best_arm = 0;
    int best_vertex = 0;
    double best = table[0][0];
    for (ArmId b = 0; b < static_cast<ArmId>(table.size()); ++b) {
        for (int a = 0; a < static_cast<int>(table[b].size()); ++a) {
            const double v = table[b][a];
            if (v > best ||
                (v == best && b == best_arm && lex_less(verts[a], verts[best_vertex]))) {
                best = v;
                best_arm = b;
                best_vertex = a;
            }
        }
    }
    arm_out = best_arm;
    vertex_out = best_vertex;
}

}  // namespace

// ---------------------------------------------------------------------------
// FlatUcrlAgent

FlatUcrlAgent::FlatUcrlAgent(std::shared_ptr<const ModelSets> sets,
                             ConfidenceParams params, PerturbationSchedule schedule)
    : sets_(std::move(sets)),
      params_(params),
      schedule_(schedule),
      S_(sets_->num_states),
      B_(sets_->num_arms),
      nv_(static_cast<int>(sets_->actions.vertices().size())) {
    n4_.assign(static_cast<std::size_t>(S_) * B_ * nv_ * S_, 0);
    n3_.assign(static_cast<std::size_t>(S_) * B_ * nv_, 0);
    rsum_.assign(static_cast<std::size_t>(B_) * nv_ * S_, 0.0);
    nr_.assign(static_cast<std::size_t>(B_) * nv_ * S_, 0);
    arm_.assign(S_, 0);
    vertex_.assign(S_, 0);
    snap_p_.assign(n3_.size(), 1.0);
    snap_r_.assign(nr_.size(), 1.0);
    recompute_policy();
}

double FlatUcrlAgent::conf_p(StateId src, ArmId b, int a) const {
    const std::size_t cell = (static_cast<std::size_t>(src) * B_ + b) * nv_ + a;
    const double card = static_cast<double>(S_) * S_ * B_ * nv_;
    return confidence_length(t_, n3_[cell], params_.alpha, card);
}

double FlatUcrlAgent::conf_r(ArmId b, int a, StateId next) const {
    const std::size_t cell = (static_cast<std::size_t>(b) * nv_ + a) * S_ + next;
    const double card = static_cast<double>(S_) * B_ * nv_;
    return confidence_length(t_, nr_[cell], params_.alpha, card);
}

double FlatUcrlAgent::cell_value(StateId src, ArmId b, int a) const {
    const std::size_t base = (static_cast<std::size_t>(src) * B_ + b) * nv_ + a;
    const std::int64_t n = n3_[base];
    OptimisticBox box;
    box.half_width = conf_p(src, b, a);
    box.center.resize(S_);
    box.values.resize(S_);
    for (StateId next = 0; next < S_; ++next) {
        box.center[next] =
            n > 0 ? static_cast<double>(n4_[base * S_ + next]) / static_cast<double>(n)
                  : 1.0 / S_;
        const std::size_t rcell = (static_cast<std::size_t>(b) * nv_ + a) * S_ + next;
        const double rhat = nr_[rcell] > 0 ? rsum_[rcell] / static_cast<double>(nr_[rcell]) : 0.0;
        box.values[next] = rhat + conf_r(b, a, next);
    }
    return optimistic_expectation(box).value;
}

Mat FlatUcrlAgent::value_table(StateId source) const {
    Mat table(B_, Vec(nv_));
    for (ArmId b = 0; b < B_; ++b)
        for (int a = 0; a < nv_; ++a) table[b][a] = cell_value(source, b, a);
    return table;
}

void FlatUcrlAgent::recompute_policy() {
    const auto& verts = sets_->actions.vertices();
    for (StateId src = 0; src < S_; ++src) {
        const Mat table = value_table(src);
        pick_cell(table, verts, arm_[src], vertex_[src]);
    }
    for (StateId src = 0; src < S_; ++src)
        for (ArmId b = 0; b < B_; ++b)
            for (int a = 0; a < nv_; ++a)
                snap_p_[(static_cast<std::size_t>(src) * B_ + b) * nv_ + a] =
                    conf_p(src, b, a);
    for (ArmId b = 0; b < B_; ++b)
        for (int a = 0; a < nv_; ++a)
            for (StateId next = 0; next < S_; ++next)
                snap_r_[(static_cast<std::size_t>(b) * nv_ + a) * S_ + next] =
                    conf_r(b, a, next);
}

std::pair<ArmId, Vec> FlatUcrlAgent::act(std::mt19937_64& rng) {
    const ArmId b = arm_[s_prev_];
    const Vec& center = sets_->actions.vertices()[vertex_[s_prev_]];
    const double radius = schedule_.at(std::max<std::int64_t>(1, t_));
    return {b, sample_perturbed_action(sets_->actions, center, radius, rng)};
}

RecoveryResult FlatUcrlAgent::observe(double reward, ArmId arm, const Vec& action) {
    const RecoveryResult rec = recover_state(*sets_, arm, action, reward);
    if (rec.flagged()) ++diagnostics_;
    const StateId src = s_prev_;
    const int a = vertex_[src];  // plays count toward the intended vertex
    s_prev_ = rec.state;
    if (t_ >= 1) {
        const std::size_t pcell = (static_cast<std::size_t>(src) * B_ + arm) * nv_ + a;
        const std::size_t rcell =
            (static_cast<std::size_t>(arm) * nv_ + a) * S_ + rec.state;
        ++n4_[pcell * S_ + rec.state];
        ++n3_[pcell];
        rsum_[rcell] += reward;
        ++nr_[rcell];
        ++t_;
        // Only the two updated cells can have halved; confidence lengths grow
        // with t when counts are fixed, so untouched cells never trigger.
        if (conf_p(src, arm, a) <= 0.5 * snap_p_[pcell] ||
            conf_r(arm, a, rec.state) <= 0.5 * snap_r_[rcell]) {
            ++round_index_;
            recompute_policy();
        }
    } else {
        ++t_;
    }
    return rec;
}

// ---------------------------------------------------------------------------
// JointConfAgent

JointConfAgent::JointConfAgent(std::shared_ptr<const ModelSets> sets,
                               ConfidenceParams params, PerturbationSchedule schedule)
    : sets_(std::move(sets)),
      params_(params),
      schedule_(schedule),
      S_(sets_->num_states),
      B_(sets_->num_arms),
      nv_(static_cast<int>(sets_->actions.vertices().size())) {
    offset_.assign(B_, std::vector<int>(S_, 0));
    joint_size_.assign(B_, 0);
    for (ArmId b = 0; b < B_; ++b) {
        int off = 0;
        for (StateId s = 0; s < S_; ++s) {
            offset_[b][s] = off;
            off += static_cast<int>(sets_->family(b, s).size());
        }
        joint_size_[b] = off;
    }
    const auto& verts = sets_->actions.vertices();
    values_.assign(B_, std::vector<Vec>(nv_));
    for (ArmId b = 0; b < B_; ++b)
        for (int a = 0; a < nv_; ++a) {
            Vec& row = values_[b][a];
            row.resize(joint_size_[b]);
            for (StateId s = 0; s < S_; ++s) {
                const auto& family = sets_->family(b, s);
                for (std::size_t i = 0; i < family.size(); ++i)
                    row[offset_[b][s] + static_cast<int>(i)] = dot(verts[a], family[i]);
            }
        }
    njoint_.resize(static_cast<std::size_t>(S_) * B_);
    for (StateId src = 0; src < S_; ++src)
        for (ArmId b = 0; b < B_; ++b)
            njoint_[static_cast<std::size_t>(src) * B_ + b].assign(joint_size_[b], 0);
    n2_.assign(static_cast<std::size_t>(S_) * B_, 0);
    arm_.assign(S_, 0);
    vertex_.assign(S_, 0);
    snap_.assign(n2_.size(), 1.0);
    recompute_policy();
}

double JointConfAgent::conf_joint(StateId src, ArmId b) const {
    const std::size_t cell = static_cast<std::size_t>(src) * B_ + b;
    const double card = static_cast<double>(S_) * S_ * B_ * joint_size_[b];
    return confidence_length(t_, n2_[cell], params_.alpha, card);
}

double JointConfAgent::cell_value(StateId src, ArmId b, int a) const {
    const std::size_t cell = static_cast<std::size_t>(src) * B_ + b;
    const std::int64_t n = n2_[cell];
    OptimisticBox box;
    box.half_width = conf_joint(src, b);
    box.values = values_[b][a];
    box.center.resize(joint_size_[b]);
    for (int j = 0; j < joint_size_[b]; ++j)
        box.center[j] = n > 0 ? static_cast<double>(njoint_[cell][j]) / static_cast<double>(n)
                              : 1.0 / joint_size_[b];
    return optimistic_expectation(box).value;
}

Mat JointConfAgent::value_table(StateId source) const {
    Mat table(B_, Vec(nv_));
    for (ArmId b = 0; b < B_; ++b)
        for (int a = 0; a < nv_; ++a) table[b][a] = cell_value(source, b, a);
    return table;
}

void JointConfAgent::recompute_policy() {
    const auto& verts = sets_->actions.vertices();
    for (StateId src = 0; src < S_; ++src) {
        const Mat table = value_table(src);
        pick_cell(table, verts, arm_[src], vertex_[src]);
    }
    for (StateId src = 0; src < S_; ++src)
        for (ArmId b = 0; b < B_; ++b)
            snap_[static_cast<std::size_t>(src) * B_ + b] = conf_joint(src, b);
}

std::pair<ArmId, Vec> JointConfAgent::act(std::mt19937_64& rng) {
    const ArmId b = arm_[s_prev_];
    const Vec& center = sets_->actions.vertices()[vertex_[s_prev_]];
    const double radius = schedule_.at(std::max<std::int64_t>(1, t_));
    return {b, sample_perturbed_action(sets_->actions, center, radius, rng)};
}

RecoveryResult JointConfAgent::observe(double reward, ArmId arm, const Vec& action) {
    const RecoveryResult rec = recover_state(*sets_, arm, action, reward);
    if (rec.flagged()) ++diagnostics_;
    const StateId src = s_prev_;
    s_prev_ = rec.state;
    if (t_ >= 1) {
        const std::size_t cell = static_cast<std::size_t>(src) * B_ + arm;
        ++njoint_[cell][offset_[arm][rec.state] + rec.theta_index];
        ++n2_[cell];
        ++t_;
        if (conf_joint(src, arm) <= 0.5 * snap_[cell]) {
            ++round_index_;
            recompute_policy();
        }
    } else {
        ++t_;
    }
    return rec;
}

}  // namespace hmbandit
