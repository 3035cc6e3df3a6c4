#include "hmbandit/env.hpp"

#include <cmath>
#include <string>

#include "hmbandit/oracle.hpp"

namespace hmbandit {

namespace {

Mat matrix_multiply(const Mat& a, const Mat& b) {
    const std::size_t n = a.size();
    Mat c(n, Vec(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < n; ++k)
            for (std::size_t j = 0; j < n; ++j) c[i][j] += a[i][k] * b[k][j];
    return c;
}

}  // namespace

TransitionMatrix::TransitionMatrix(Mat rows) : rows_(std::move(rows)) {
    const std::size_t n = rows_.size();
    if (n == 0) throw ConfigError("transition matrix must have at least one state");
    for (std::size_t i = 0; i < n; ++i) {
        if (rows_[i].size() != n) throw ConfigError("transition matrix must be square");
        double sum = 0.0;
        for (double p : rows_[i]) {
            if (p < 0.0 || p > 1.0 + 1e-9)
                throw ConfigError("transition probabilities must lie in [0, 1]");
            sum += p;
        }
        if (std::fabs(sum - 1.0) > 1e-9)
            throw ConfigError("transition row " + std::to_string(i) +
                              " does not sum to 1");
    }
    // Irreducible + aperiodic <=> P^(n^2) is strictly positive.
    Mat power = rows_;
    for (std::size_t k = 1; k < n * n; ++k) power = matrix_multiply(power, rows_);
    for (const Vec& row : power)
        for (double p : row)
            if (!(p > 0.0))
                throw ConfigError("transition matrix must be irreducible and aperiodic");
}

ThetaFamily::ThetaFamily(std::vector<std::vector<std::vector<Vec>>> vectors,
                         std::vector<std::vector<Vec>> probs)
    : vectors_(std::move(vectors)), probs_(std::move(probs)) {
    if (vectors_.empty()) throw ConfigError("need at least one arm");
    const std::size_t num_states = vectors_[0].size();
    if (num_states == 0) throw ConfigError("need at least one state");
    if (probs_.size() != vectors_.size())
        throw ConfigError("family probabilities must match family vectors in shape");

    std::size_t dim = 0;
    for (std::size_t b = 0; b < vectors_.size(); ++b) {
        if (vectors_[b].size() != num_states || probs_[b].size() != num_states)
            throw ConfigError("every arm needs a family for every state");
        for (std::size_t s = 0; s < num_states; ++s) {
            const auto& fam = vectors_[b][s];
            const Vec& p = probs_[b][s];
            if (fam.empty()) throw ConfigError("families must be non-empty");
            if (p.size() != fam.size())
                throw ConfigError("family distribution size mismatch");
            double sum = 0.0;
            for (double q : p) {
                if (q < 0.0 || q > 1.0 + 1e-9)
                    throw ConfigError("family probabilities must lie in [0, 1]");
                sum += q;
            }
            if (std::fabs(sum - 1.0) > 1e-9)
                throw ConfigError("family distribution does not sum to 1");
            for (const Vec& v : fam) {
                if (dim == 0) dim = v.size();
                if (v.size() != dim || dim == 0)
                    throw ConfigError("reward vectors must share one dimension >= 1");
                double l1 = 0.0;
                for (double x : v) l1 += std::fabs(x);
                max_l1_ = std::max(max_l1_, l1);
            }
        }
        // All vectors of one arm must be pairwise separated: across states so
        // a vector identifies its state, within a state so indices resolve.
        std::vector<const Vec*> all;
        for (std::size_t s = 0; s < num_states; ++s)
            for (const Vec& v : vectors_[b][s]) all.push_back(&v);
        for (std::size_t i = 0; i < all.size(); ++i)
            for (std::size_t j = i + 1; j < all.size(); ++j) {
                double d = 0.0;
                for (std::size_t k = 0; k < dim; ++k)
                    d = std::max(d, std::fabs((*all[i])[k] - (*all[j])[k]));
                if (d <= 1e-9)
                    throw ConfigError("reward vectors of arm " + std::to_string(b) +
                                      " are not pairwise separated");
            }
    }
}

EnvironmentSpec::EnvironmentSpec(TransitionMatrix transition, ThetaFamily thetas,
                                 Polytope actions)
    : transition_(std::move(transition)), thetas_(std::move(thetas)),
      actions_(std::move(actions)) {
    if (thetas_.num_states() != transition_.num_states())
        throw ConfigError("reward families and transition matrix disagree on state count");
    if (thetas_.dimension() != actions_.dimension())
        throw ConfigError("reward vectors and action set disagree on dimension");
}

ModelSets EnvironmentSpec::known_sets() const {
    ModelSets sets{num_states(), num_arms(), dimension(), {}, actions_,
                   thetas_.max_l1_norm()};
    sets.thetas.resize(num_arms());
    for (int b = 0; b < num_arms(); ++b) {
        sets.thetas[b].resize(num_states());
        for (int s = 0; s < num_states(); ++s)
            sets.thetas[b][s] = thetas_.vectors(b, s);
    }
    return sets;
}

Environment::Environment(std::shared_ptr<const EnvironmentSpec> spec,
                         std::uint64_t seed, std::optional<StateId> initial_state)
    : spec_(std::move(spec)), rng_(seed) {
    if (initial_state) {
        if (*initial_state < 0 || *initial_state >= spec_->num_states())
            throw ContractError("initial state out of range");
        state_ = *initial_state;
    } else {
        state_ = sample_discrete(stationary_distribution(spec_->transition()), rng_);
    }
}

StepResult Environment::step(ArmId arm, const Vec& action) {
    if (arm < 0 || arm >= spec_->num_arms())
        throw ContractError("arm index out of range");
    if (!spec_->actions().contains(action, 1e-9))
        throw ContractError("action lies outside the action set");

    state_ = sample_discrete(spec_->transition().row(state_), rng_);
    const int idx = sample_discrete(spec_->thetas().probs(arm, state_), rng_);
    const Vec& theta = spec_->thetas().vectors(arm, state_)[idx];
    ++steps_;
    return {dot(action, theta), state_, idx, theta};
}

}  // namespace hmbandit
