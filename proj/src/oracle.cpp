#include "hmbandit/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace hmbandit {

namespace {

// Gaussian elimination with partial pivoting; nullopt when the system is
// numerically singular. The systems here are tiny (|S| rows).
std::optional<Vec> solve_linear(Mat a, Vec b) {
    const int n = static_cast<int>(b.size());
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (std::abs(a[pivot][col]) < 1e-13) return std::nullopt;
        std::swap(a[pivot], a[col]);
        std::swap(b[pivot], b[col]);
        for (int r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r][col] / a[col][col];
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = b[i] / a[i][i];
    return x;
}

// Mean reward of playing (arm, action) given the arrived state:
// sum_i P_Theta(i) * <action, theta_i>.
double arrived_state_value(const ThetaFamily& thetas, ArmId arm, StateId state,
                           const Vec& action) {
    const auto& family = thetas.vectors(arm, state);
    const Vec& p = thetas.probs(arm, state);
    double v = 0.0;
    for (std::size_t i = 0; i < family.size(); ++i) v += p[i] * dot(action, family[i]);
    return v;
}

}  // namespace

Vec stationary_distribution(const TransitionMatrix& transition) {
    const int n = transition.num_states();
    // mu^T P = mu^T with the last balance equation replaced by sum(mu) = 1.
    Mat a(n, Vec(n, 0.0));
    Vec b(n, 0.0);
    for (int col = 0; col < n - 1; ++col) {
        for (int row = 0; row < n; ++row) a[col][row] = transition(row, col);
        a[col][col] -= 1.0;
    }
    for (int row = 0; row < n; ++row) a[n - 1][row] = 1.0;
    b[n - 1] = 1.0;
    auto mu = solve_linear(std::move(a), std::move(b));
    if (!mu)
        throw ConfigError("transition matrix has no unique stationary distribution");
    for (double& x : *mu)
        if (x < 0.0 && x > -1e-12) x = 0.0;
    double residual = 0.0;
    for (int col = 0; col < n; ++col) {
        double y = -(*mu)[col];
        for (int row = 0; row < n; ++row) y += (*mu)[row] * transition(row, col);
        residual = std::max(residual, std::abs(y));
    }
    if (residual > 1e-12)
        throw ConfigError("transition matrix has no unique stationary distribution");
    return *mu;
}

Mat hitting_times(const TransitionMatrix& transition) {
    const int n = transition.num_states();
    Mat h(n, Vec(n, 0.0));
    for (int target = 0; target < n; ++target) {
        // h(i) = 1 + sum_{k != target} P(i,k) h(k) for i != target.
        std::vector<int> others;
        for (int i = 0; i < n; ++i)
            if (i != target) others.push_back(i);
        const int m = static_cast<int>(others.size());
        Vec sol;
        if (m > 0) {
            Mat a(m, Vec(m, 0.0));
            Vec b(m, 1.0);
            for (int r = 0; r < m; ++r)
                for (int c = 0; c < m; ++c)
                    a[r][c] = (r == c ? 1.0 : 0.0) - transition(others[r], others[c]);
            auto s = solve_linear(std::move(a), std::move(b));
            if (!s) throw ConfigError("transition matrix is not irreducible");
            sol = std::move(*s);
        }
        for (int r = 0; r < m; ++r) h[others[r]][target] = sol[r];
        // Return time: one step, then first arrival from wherever it lands.
        double ret = 1.0;
        for (int r = 0; r < m; ++r) ret += transition(target, others[r]) * sol[r];
        h[target][target] = ret;
    }
    return h;
}

double average_reward(const EnvironmentSpec& spec, const StatePolicy& policy) {
    const int n = spec.num_states();
    if (static_cast<int>(policy.arm.size()) != n ||
        static_cast<int>(policy.action.size()) != n)
        throw ContractError("policy must assign one (arm, action) per state");
    for (int s = 0; s < n; ++s) {
        if (policy.arm[s] < 0 || policy.arm[s] >= spec.num_arms())
            throw ContractError("policy arm out of range");
        if (!spec.actions().contains(policy.action[s], 1e-9))
            throw ContractError("policy action lies outside the action set");
    }
    const Vec mu = stationary_distribution(spec.transition());
    double rho = 0.0;
    for (int prev = 0; prev < n; ++prev) {
        double inner = 0.0;
        for (int next = 0; next < n; ++next)
            inner += spec.transition()(prev, next) *
                     arrived_state_value(spec.thetas(), policy.arm[prev], next,
                                         policy.action[prev]);
        rho += mu[prev] * inner;
    }
    return rho;
}

OptimalPolicy optimal_policy(const EnvironmentSpec& spec) {
    const int S = spec.num_states();
    const int B = spec.num_arms();
    const auto& verts = spec.actions().vertices();
    const int nv = static_cast<int>(verts.size());

    // mean_value[b][next][v] = expected reward of vertex v from arm b given
    // the chain arrived at `next`.
    std::vector<Mat> mean_value(B, Mat(S, Vec(nv)));
    for (ArmId b = 0; b < B; ++b)
        for (StateId next = 0; next < S; ++next)
            for (int v = 0; v < nv; ++v)
                mean_value[b][next][v] =
                    arrived_state_value(spec.thetas(), b, next, verts[v]);

    OptimalPolicy out;
    out.arm.resize(S);
    out.vertex.resize(S);
    out.action.resize(S);
    out.value.resize(S);
    out.ties.resize(S);
    for (StateId prev = 0; prev < S; ++prev) {
        ArmId best_arm = 0;
        int best_vertex = 0;
        double best = -std::numeric_limits<double>::infinity();
        for (ArmId b = 0; b < B; ++b)
            for (int v = 0; v < nv; ++v) {
                double q = 0.0;
                for (StateId next = 0; next < S; ++next)
                    q += spec.transition()(prev, next) * mean_value[b][next][v];
                if (q > best ||
                    (q == best && b == best_arm &&
                     lex_less(verts[v], verts[best_vertex]))) {
                    best = q;
                    best_arm = b;
                    best_vertex = v;
                }
            }
        for (ArmId b = 0; b < B; ++b)
            for (int v = 0; v < nv; ++v) {
                double q = 0.0;
                for (StateId next = 0; next < S; ++next)
                    q += spec.transition()(prev, next) * mean_value[b][next][v];
                if (q >= best - 1e-12) out.ties[prev].emplace_back(b, v);
            }
        out.arm[prev] = best_arm;
        out.vertex[prev] = best_vertex;
        out.action[prev] = verts[best_vertex];
        out.value[prev] = best;
    }
    return out;
}

namespace {

// All corner patterns of the box {q : |q - p| <= delta entrywise} clamped to
// [0,1] and renormalised to sum 1; patterns that clamp to all-zero mass are
// not distributions and are skipped.
std::vector<Vec> corner_distributions(const Vec& p, double delta) {
    const int n = static_cast<int>(p.size());
    std::vector<Vec> out;
    out.reserve(std::size_t{1} << n);
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        Vec q(n);
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            q[i] = std::clamp(p[i] + ((mask >> i) & 1u ? delta : -delta), 0.0, 1.0);
            sum += q[i];
        }
        if (sum <= 1e-15) continue;
        for (double& x : q) x /= sum;
        out.push_back(std::move(q));
    }
    return out;
}

}  // namespace

std::optional<double> argmax_stability_gap(const EnvironmentSpec& spec) {
    const int S = spec.num_states();
    const int B = spec.num_arms();
    for (ArmId b = 0; b < B; ++b)
        for (StateId s = 0; s < S; ++s)
            if (spec.thetas().family_size(b, s) > 3) return std::nullopt;
    if (S > 4 || B > 4) return std::nullopt;

    const auto& verts = spec.actions().vertices();
    const int nv = static_cast<int>(verts.size());

    // val[b][next][v][i] = <vertex v, theta_i> for family (b, next).
    std::vector<std::vector<Mat>> val(B, std::vector<Mat>(S));
    for (ArmId b = 0; b < B; ++b)
        for (StateId next = 0; next < S; ++next) {
            const auto& family = spec.thetas().vectors(b, next);
            val[b][next].assign(nv, Vec(family.size()));
            for (int v = 0; v < nv; ++v)
                for (std::size_t i = 0; i < family.size(); ++i)
                    val[b][next][v][i] = dot(verts[v], family[i]);
        }

    // True per-state argmax sets with exact value equality (the tie set of
    // the mathematical argmax, not a tolerance band).
    auto q_value = [&](StateId prev, ArmId b, int v) {
        double q = 0.0;
        for (StateId next = 0; next < S; ++next)
            q += spec.transition()(prev, next) *
                 dot(spec.thetas().probs(b, next), val[b][next][v]);
        return q;
    };
    std::vector<std::vector<std::pair<ArmId, int>>> argmax_sets(S);
    for (StateId prev = 0; prev < S; ++prev) {
        double best = -std::numeric_limits<double>::infinity();
        for (ArmId b = 0; b < B; ++b)
            for (int v = 0; v < nv; ++v) best = std::max(best, q_value(prev, b, v));
        for (ArmId b = 0; b < B; ++b)
            for (int v = 0; v < nv; ++v)
                if (q_value(prev, b, v) == best) argmax_sets[prev].emplace_back(b, v);
    }

    // A tied optimum survives perturbation only when the tied pairs are
    // indistinguishable (same arm, identical value vectors for every state);
    // any other tie is broken by an arbitrarily small perturbation.
    for (StateId prev = 0; prev < S; ++prev) {
        const auto& set = argmax_sets[prev];
        for (std::size_t i = 1; i < set.size(); ++i) {
            if (set[i].first != set[0].first) return 0.0;
            for (StateId next = 0; next < S; ++next)
                if (val[set[0].first][next][set[0].second] !=
                    val[set[i].first][next][set[i].second])
                    return 0.0;
        }
    }

    // Worst-case margin of the optimum against one competitor, minimised over
    // every corner pattern. Corner choices decompose: family corners for
    // different states are independent and enter with nonnegative transition
    // weights, so each state's contribution is minimised separately, and the
    // transition row corner is minimised last.
    auto preserved_at = [&](double delta) {
        for (StateId prev = 0; prev < S; ++prev) {
            const auto [opt_arm, opt_vertex] = argmax_sets[prev][0];
            // Corner sets, built lazily and flattened (corner k of family
            // (b, next) occupies entries [k*C, (k+1)*C) of its slot).
            std::vector<std::vector<Vec>> family_corners(B, std::vector<Vec>(S));
            const auto row_corners =
                corner_distributions(spec.transition().row(prev), delta);
            auto corners_of = [&](ArmId b, StateId next) -> const Vec& {
                auto& slot = family_corners[b][next];
                if (slot.empty()) {
                    auto cs = corner_distributions(spec.thetas().probs(b, next), delta);
                    const int C = spec.thetas().family_size(b, next);
                    slot.resize(cs.size() * C);
                    for (std::size_t k = 0; k < cs.size(); ++k)
                        for (int i = 0; i < C; ++i) slot[k * C + i] = cs[k][i];
                }
                return family_corners[b][next];
            };
            auto extreme_value = [&](ArmId b, StateId next, const Vec& values,
                                     bool want_max) {
                const auto& flat = corners_of(b, next);
                const int C = static_cast<int>(values.size());
                const std::size_t k = flat.size() / C;
                double best = want_max ? -std::numeric_limits<double>::infinity()
                                       : std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < k; ++j) {
                    double s = 0.0;
                    for (int i = 0; i < C; ++i) s += flat[j * C + i] * values[i];
                    best = want_max ? std::max(best, s) : std::min(best, s);
                }
                return best;
            };
            for (ArmId b = 0; b < B; ++b)
                for (int v = 0; v < nv; ++v) {
                    bool member = false;
                    for (const auto& [ob, ov] : argmax_sets[prev])
                        if (ob == b && ov == v) member = true;
                    if (member) continue;
                    Vec dmin(S);
                    for (StateId next = 0; next < S; ++next) {
                        if (b == opt_arm) {
                            Vec diff(val[b][next][opt_vertex]);
                            for (std::size_t i = 0; i < diff.size(); ++i)
                                diff[i] -= val[b][next][v][i];
                            dmin[next] = extreme_value(b, next, diff, false);
                        } else {
                            dmin[next] =
                                extreme_value(opt_arm, next, val[opt_arm][next][opt_vertex],
                                              false) -
                                extreme_value(b, next, val[b][next][v], true);
                        }
                    }
                    for (const Vec& row : row_corners) {
                        double margin = 0.0;
                        for (StateId next = 0; next < S; ++next)
                            margin += row[next] * dmin[next];
                        if (margin <= 0.0) return false;
                    }
                }
        }
        return true;
    };

    // Probabilities live in [0,1], so a gap of 1 already covers every valid
    // estimate; nothing larger is meaningful.
    if (preserved_at(1.0)) return 1.0;
    double lo = 0.0, hi = 1.0;
    for (int iter = 0; iter < 100 && hi - lo > 1e-13; ++iter) {
        const double mid = 0.5 * (lo + hi);
        (preserved_at(mid) ? lo : hi) = mid;
    }
    return lo;
}

ModelConstants compute_constants(const EnvironmentSpec& spec) {
    ModelConstants out{};
    const Mat h = hitting_times(spec.transition());
    out.t_m = 0.0;
    for (const Vec& row : h)
        for (double x : row) out.t_m = std::max(out.t_m, x);
    double min_positive = 1.0;
    for (int r = 0; r < spec.num_states(); ++r)
        for (int c = 0; c < spec.num_states(); ++c) {
            const double p = spec.transition()(r, c);
            if (p > 0.0) min_positive = std::min(min_positive, p);
        }
    out.t_s = 1.0 / min_positive;
    double hi = -std::numeric_limits<double>::infinity();
    double lo = std::numeric_limits<double>::infinity();
    out.c_theta_max = 0;
    for (ArmId b = 0; b < spec.num_arms(); ++b)
        for (StateId s = 0; s < spec.num_states(); ++s) {
            out.c_theta_max =
                std::max(out.c_theta_max, spec.thetas().family_size(b, s));
            for (const Vec& theta : spec.thetas().vectors(b, s)) {
                hi = std::max(hi, spec.actions().argmax_linear(theta).second);
                Vec neg(theta);
                for (double& x : neg) x = -x;
                lo = std::min(lo, -spec.actions().argmax_linear(neg).second);
            }
        }
    out.r_max = hi - lo;
    out.delta = argmax_stability_gap(spec);
    return out;
}

Vec regret_curve(const Vec& rewards, double rho_star) {
    Vec out(rewards.size());
    double cum = 0.0;
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        cum += rewards[i];
        out[i] = static_cast<double>(i + 1) * rho_star - cum;
    }
    return out;
}

}  // namespace hmbandit
