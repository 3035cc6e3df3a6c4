#include "hmbandit/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

namespace hmbandit {

namespace {

// Phase-1 dense simplex: does w >= 0 exist with sum(w) = 1 and
// |sum_j w_j pts[j] - x|_inf <= tol?  `skip` excludes one point (used for
// extreme-point validation). Bland's rule, so termination is guaranteed.
bool convex_combination_feasible(const std::vector<Vec>& pts, const Vec& x,
                                 double tol, int skip = -1) {
    const int dim = static_cast<int>(x.size());
    std::vector<int> used;
    for (int j = 0; j < static_cast<int>(pts.size()); ++j)
        if (j != skip) used.push_back(j);
    const int nv = static_cast<int>(used.size());
    if (nv == 0) return false;

    const int m = 2 * dim + 1;       // <= rows, >= rows, sum-to-one row
    const int nstruct = nv + 2 * dim;  // weights, slacks, surpluses
    const int art0 = nstruct;          // artificial block
    const int ncols = nstruct + m + 1; // + rhs
    const int rhs = ncols - 1;

    std::vector<Vec> t(m + 1, Vec(ncols, 0.0));  // last row = reduced costs
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < nv; ++j) {
            t[i][j] = pts[used[j]][i];
            t[dim + i][j] = pts[used[j]][i];
        }
        t[i][nv + i] = 1.0;              // slack:  P w + sp = x + tol
        t[dim + i][nv + dim + i] = -1.0; // surplus: P w - sm = x - tol
        t[i][rhs] = x[i] + tol;
        t[dim + i][rhs] = x[i] - tol;
    }
    for (int j = 0; j < nv; ++j) t[2 * dim][j] = 1.0;
    t[2 * dim][rhs] = 1.0;

    std::vector<int> basis(m);
    for (int r = 0; r < m; ++r) {
        if (t[r][rhs] < 0.0)
            for (int j = 0; j < ncols; ++j) t[r][j] = -t[r][j];
        t[r][art0 + r] = 1.0;
        basis[r] = art0 + r;
    }
    // Price out the all-artificial basis: cost row = -(sum of constraint rows)
    // on structural columns, 0 on artificials.
    for (int j = 0; j < ncols; ++j) {
        double s = 0.0;
        for (int r = 0; r < m; ++r) s += t[r][j];
        t[m][j] = (j >= art0 && j < art0 + m) ? 0.0 : -s;
    }

    const double piv_eps = 1e-11;
    const int max_iter = 200 * (ncols + m);
    for (int iter = 0; iter < max_iter; ++iter) {
        int enter = -1;
        for (int j = 0; j < nstruct + m; ++j)
            if (t[m][j] < -piv_eps) { enter = j; break; }
        if (enter < 0) break;

        int leave = -1;
        double best_ratio = 0.0;
        for (int r = 0; r < m; ++r) {
            if (t[r][enter] > piv_eps) {
                const double ratio = t[r][rhs] / t[r][enter];
                if (leave < 0 || ratio < best_ratio - piv_eps ||
                    (ratio < best_ratio + piv_eps && basis[r] < basis[leave])) {
                    leave = r;
                    best_ratio = ratio;
                }
            }
        }
        if (leave < 0) break;  // cannot happen: phase-1 objective is bounded

        const double pv = t[leave][enter];
        for (int j = 0; j < ncols; ++j) t[leave][j] /= pv;
        for (int r = 0; r <= m; ++r) {
            if (r == leave) continue;
            const double f = t[r][enter];
            if (f == 0.0) continue;
            for (int j = 0; j < ncols; ++j) t[r][j] -= f * t[leave][j];
        }
        basis[leave] = enter;
    }

    double infeas = 0.0;
    for (int r = 0; r < m; ++r)
        if (basis[r] >= art0) infeas += t[r][rhs];
    double scale = 1.0;
    for (double xi : x) scale = std::max(scale, std::fabs(xi));
    return infeas <= 1e-9 * scale;
}

}  // namespace

struct Polytope::Impl {
    bool hypercube = false;
    int dim = 0;
    Vec lo, hi;                // hypercube bounds
    std::vector<Vec> points;   // explicit vertex list
    mutable std::once_flag vertex_once;
    mutable std::vector<Vec> vertex_cache;
};

Polytope Polytope::hypercube(Vec lower, Vec upper) {
    if (lower.empty() || lower.size() != upper.size())
        throw ConfigError("hypercube bounds must be non-empty and of equal dimension");
    for (std::size_t i = 0; i < lower.size(); ++i)
        if (!(lower[i] < upper[i]))
            throw ConfigError("hypercube requires lower < upper in every coordinate");
    auto impl = std::make_shared<Impl>();
    impl->hypercube = true;
    impl->dim = static_cast<int>(lower.size());
    impl->lo = std::move(lower);
    impl->hi = std::move(upper);
    return Polytope(std::move(impl));
}

Polytope Polytope::explicit_vertices(std::vector<Vec> points) {
    if (points.empty()) throw ConfigError("vertex list must be non-empty");
    const std::size_t dim = points[0].size();
    if (dim == 0) throw ConfigError("vertices must have dimension >= 1");
    for (const Vec& p : points)
        if (p.size() != dim) throw ConfigError("vertices must share one dimension");
    for (std::size_t a = 0; a < points.size(); ++a)
        for (std::size_t b = a + 1; b < points.size(); ++b) {
            double d = 0.0;
            for (std::size_t i = 0; i < dim; ++i)
                d = std::max(d, std::fabs(points[a][i] - points[b][i]));
            if (d < 1e-12) throw ConfigError("duplicate vertex in vertex list");
        }
    if (points.size() <= 64) {
        for (std::size_t k = 0; k < points.size(); ++k)
            if (convex_combination_feasible(points, points[k], 1e-9,
                                            static_cast<int>(k)))
                throw ConfigError("vertex list contains a non-extreme point");
    }
    auto impl = std::make_shared<Impl>();
    impl->hypercube = false;
    impl->dim = static_cast<int>(dim);
    impl->points = std::move(points);
    return Polytope(std::move(impl));
}

int Polytope::dimension() const { return impl_->dim; }
bool Polytope::is_hypercube() const { return impl_->hypercube; }

const Vec& Polytope::lower() const {
    if (!impl_->hypercube) throw ContractError("lower(): not a hypercube");
    return impl_->lo;
}

const Vec& Polytope::upper() const {
    if (!impl_->hypercube) throw ContractError("upper(): not a hypercube");
    return impl_->hi;
}

const std::vector<Vec>& Polytope::vertices() const {
    if (!impl_->hypercube) return impl_->points;
    if (impl_->dim > 25)
        throw ContractError("refusing to enumerate 2^" + std::to_string(impl_->dim) +
                            " hypercube vertices");
    std::call_once(impl_->vertex_once, [this] {
        const int n = impl_->dim;
        const std::size_t count = std::size_t{1} << n;
        impl_->vertex_cache.reserve(count);
        for (std::size_t k = 0; k < count; ++k) {
            Vec v(n);
            // Coordinate 0 on the top bit: the list comes out lexicographic.
            for (int i = 0; i < n; ++i)
                v[i] = (k >> (n - 1 - i)) & 1 ? impl_->hi[i] : impl_->lo[i];
            impl_->vertex_cache.push_back(std::move(v));
        }
    });
    return impl_->vertex_cache;
}

std::pair<Vec, double> Polytope::argmax_linear(const Vec& direction) const {
    if (static_cast<int>(direction.size()) != impl_->dim)
        throw ContractError("argmax_linear: direction dimension mismatch");
    if (impl_->hypercube) {
        Vec best(impl_->dim);
        double value = 0.0;
        for (int i = 0; i < impl_->dim; ++i) {
            // Zero coefficients take the lower bound, which also makes the
            // result the lexicographically smallest maximizer.
            best[i] = direction[i] > 0.0 ? impl_->hi[i] : impl_->lo[i];
            value += direction[i] * best[i];
        }
        return {std::move(best), value};
    }
    const Vec* best = nullptr;
    double value = 0.0;
    for (const Vec& v : impl_->points) {
        const double s = dot(v, direction);
        if (!best || s > value || (s == value && lex_less(v, *best))) {
            best = &v;
            value = s;
        }
    }
    return {*best, value};
}

bool Polytope::contains(const Vec& x, double tol) const {
    if (static_cast<int>(x.size()) != impl_->dim)
        throw ContractError("contains: point dimension mismatch");
    if (impl_->hypercube) {
        for (int i = 0; i < impl_->dim; ++i)
            if (x[i] < impl_->lo[i] - tol || x[i] > impl_->hi[i] + tol) return false;
        return true;
    }
    return convex_combination_feasible(impl_->points, x, tol);
}

namespace {

// Uniform point in the euclidean ball(center, radius).
Vec ball_point(const Vec& center, double radius, std::mt19937_64& rng) {
    const int n = static_cast<int>(center.size());
    Vec d(n);
    double norm2 = 0.0;
    do {
        norm2 = 0.0;
        for (int i = 0; i < n; ++i) {
            d[i] = standard_normal(rng);
            norm2 += d[i] * d[i];
        }
    } while (norm2 == 0.0);
    const double r = radius * std::pow(uniform01(rng), 1.0 / n) / std::sqrt(norm2);
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = center[i] + r * d[i];
    return x;
}

}  // namespace

Vec sample_perturbed_action(const Polytope& p, const Vec& center, double radius,
                            std::mt19937_64& rng, RejectionStats* stats) {
    if (!(radius > 0.0)) throw ContractError("perturbation radius must be positive");
    if (!p.contains(center, 1e-9))
        throw ContractError("perturbation center lies outside the polytope");

    const double member_tol = p.is_hypercube() ? 0.0 : 1e-12;
    for (int attempt = 0; attempt < 64; ++attempt) {
        Vec x = ball_point(center, radius, rng);
        if (stats) ++stats->attempts;
        if (p.contains(x, member_tol)) {
            if (stats) ++stats->accepted;
            return x;
        }
    }
    if (stats) ++stats->fallbacks;

    // Fallback: walk from the center toward an absolutely-continuous interior
    // point, stopping inside the ball. Stays in the polytope by convexity.
    const int n = p.dimension();
    Vec q(n);
    if (p.is_hypercube()) {
        for (int i = 0; i < n; ++i)
            q[i] = p.lower()[i] + (p.upper()[i] - p.lower()[i]) * uniform01(rng);
    } else {
        const auto& verts = p.vertices();
        Vec w(verts.size());
        double wsum = 0.0;
        for (std::size_t j = 0; j < verts.size(); ++j) {
            w[j] = -std::log(1.0 - uniform01(rng));
            wsum += w[j];
        }
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < verts.size(); ++j) s += w[j] * verts[j][i];
            q[i] = s / wsum;
        }
    }
    double dist2 = 0.0;
    for (int i = 0; i < n; ++i) dist2 += (q[i] - center[i]) * (q[i] - center[i]);
    const double dist = std::sqrt(dist2);
    if (dist == 0.0) return center;
    const double lambda = uniform01(rng) * std::min(1.0, radius / dist);
    Vec x(n);
    for (int i = 0; i < n; ++i) x[i] = center[i] + lambda * (q[i] - center[i]);
    return x;
}

PerturbationSchedule::PerturbationSchedule(double epsilon, double alpha_eps,
                                           double gamma, double theta_norm_max)
    : epsilon_(epsilon), alpha_eps_(alpha_eps), gamma_(gamma),
      theta_norm_max_(theta_norm_max) {
    if (!(epsilon > 0.0)) throw ConfigError("perturbation epsilon must be positive");
    if (!(alpha_eps > 0.0)) throw ConfigError("perturbation alpha_eps must be positive");
    if (!(gamma > 0.0)) throw ConfigError("perturbation gamma must be positive");
    if (!(theta_norm_max > 0.0))
        throw ConfigError("perturbation schedule needs a positive max reward-vector norm");
}

double PerturbationSchedule::at(std::int64_t t) const {
    if (t < 1) throw ContractError("perturbation schedule is defined for t >= 1");
    return epsilon_ / (gamma_ * std::pow(static_cast<double>(t), alpha_eps_) *
                       theta_norm_max_);
}

}  // namespace hmbandit
