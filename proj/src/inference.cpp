#include "hmbandit/inference.hpp"

#include <cmath>
#include <string>

namespace hmbandit {

ConfidenceParams::ConfidenceParams(double a) : alpha(a) {
    if (!(a > 3.0))
        throw ConfigError("confidence parameter alpha must be greater than 3 (got " +
                          std::to_string(a) + ")");
}

CountTables::CountTables(int num_states, int num_arms,
                         std::vector<std::vector<int>> family_sizes) {
    if (num_states < 1 || num_arms < 1)
        throw ConfigError("count tables need at least one state and one arm");
    if (static_cast<int>(family_sizes.size()) != num_arms)
        throw ConfigError("family size table must cover every arm");
    n_state_.assign(num_states, 0);
    n_trans_.assign(num_states, std::vector<std::int64_t>(num_states, 0));
    n_arm_state_.assign(num_arms, std::vector<std::int64_t>(num_states, 0));
    n_theta_.resize(num_arms);
    for (int b = 0; b < num_arms; ++b) {
        if (static_cast<int>(family_sizes[b].size()) != num_states)
            throw ConfigError("family size table must cover every state");
        n_theta_[b].resize(num_states);
        for (int s = 0; s < num_states; ++s) {
            if (family_sizes[b][s] < 1)
                throw ConfigError("families must be non-empty");
            n_theta_[b][s].assign(family_sizes[b][s], 0);
        }
    }
}

CountTables CountTables::for_sets(const ModelSets& sets) {
    std::vector<std::vector<int>> sizes(sets.num_arms,
                                        std::vector<int>(sets.num_states));
    for (int b = 0; b < sets.num_arms; ++b)
        for (int s = 0; s < sets.num_states; ++s)
            sizes[b][s] = static_cast<int>(sets.family(b, s).size());
    return CountTables(sets.num_states, sets.num_arms, std::move(sizes));
}

void CountTables::record_transition(StateId s_prev, StateId s_next, ArmId arm,
                                    int theta_index) {
    if (t_ < 1)
        throw ContractError("the first step carries no counts; call advance_empty");
    if (s_prev < 0 || s_prev >= num_states() || s_next < 0 || s_next >= num_states())
        throw ContractError("state index out of range");
    if (arm < 0 || arm >= num_arms()) throw ContractError("arm index out of range");
    if (theta_index < 0 || theta_index >= family_size(arm, s_next))
        throw ContractError("family index out of range");
    ++n_state_[s_prev];
    ++n_trans_[s_prev][s_next];
    ++n_arm_state_[arm][s_next];
    ++n_theta_[arm][s_next][theta_index];
    ++t_;
}

void CountTables::advance_empty() { ++t_; }

Mat CountTables::transition_estimate() const {
    const int n = num_states();
    Mat est(n, Vec(n));
    for (int i = 0; i < n; ++i) {
        if (n_state_[i] == 0) {
            for (int j = 0; j < n; ++j) est[i][j] = 1.0 / n;
        } else {
            for (int j = 0; j < n; ++j)
                est[i][j] = static_cast<double>(n_trans_[i][j]) /
                            static_cast<double>(n_state_[i]);
        }
    }
    return est;
}

Vec CountTables::theta_estimate(ArmId arm, StateId s) const {
    const auto& counts = n_theta_[arm][s];
    Vec est(counts.size());
    if (n_arm_state_[arm][s] == 0) {
        for (double& p : est) p = 1.0 / static_cast<double>(counts.size());
    } else {
        for (std::size_t i = 0; i < counts.size(); ++i)
            est[i] = static_cast<double>(counts[i]) /
                     static_cast<double>(n_arm_state_[arm][s]);
    }
    return est;
}

double confidence_length(std::int64_t t, std::int64_t n, double alpha,
                         double cardinality) {
    if (t <= 1 || n <= 0) return 1.0;
    const double log_arg = std::log(4.0) +
                           alpha * std::log(static_cast<double>(t - 1)) +
                           std::log(cardinality);
    return std::min(1.0, std::sqrt(log_arg / (2.0 * static_cast<double>(n))));
}

double state_confidence(const CountTables& counts, const ConfidenceParams& params,
                        StateId s) {
    const double ns = static_cast<double>(counts.num_states());
    return confidence_length(counts.time(), counts.visits(s), params.alpha, ns * ns);
}

double theta_confidence(const CountTables& counts, const ConfidenceParams& params,
                        ArmId arm, StateId s) {
    const double card = static_cast<double>(counts.family_size(arm, s)) *
                        static_cast<double>(counts.num_arms()) *
                        static_cast<double>(counts.num_states());
    return confidence_length(counts.time(), counts.arm_state_visits(arm, s),
                             params.alpha, card);
}

}  // namespace hmbandit
