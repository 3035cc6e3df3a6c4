#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <utility>

#include "hmbandit/common.hpp"

namespace hmbandit {

// Convex action set. Two representations:
//  - axis-aligned hypercube given by per-coordinate bounds (lower < upper),
//  - an explicit finite vertex list (each point must be an extreme point of
//    the hull; validated at construction when the list has at most 64 points).
// Immutable and cheap to copy (copies share state); safe to use from several
// threads.
class Polytope {
public:
    static Polytope hypercube(Vec lower, Vec upper);
    static Polytope explicit_vertices(std::vector<Vec> points);

    int dimension() const;
    bool is_hypercube() const;
    const Vec& lower() const;  // hypercube only
    const Vec& upper() const;  // hypercube only

    // All vertices. Hypercube vertices come out in lexicographic order
    // (2^dim of them); enumeration is refused above dimension 25.
    // Thread-safe lazy cache.
    const std::vector<Vec>& vertices() const;

    // Maximize <direction, x> over the polytope. Hypercube: O(dim) sign rule
    // (upper bound where the coefficient is positive, lower otherwise).
    // Explicit list: scan. Ties resolve to the lexicographically smallest
    // maximizing vertex.
    std::pair<Vec, double> argmax_linear(const Vec& direction) const;

    // Membership within `tol`. Hypercube: bound checks. Explicit list:
    // feasibility of expressing x as a convex combination of the vertices
    // (small dense phase-1 simplex).
    bool contains(const Vec& x, double tol) const;

private:
    struct Impl;
    explicit Polytope(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<const Impl> impl_;
};

// Counters for sample_perturbed_action: how many ball draws were attempted,
// how many were accepted, how many calls fell back to the interior-point
// path after exhausting the attempt budget.
struct RejectionStats {
    std::int64_t attempts = 0;
    std::int64_t accepted = 0;
    std::int64_t fallbacks = 0;
};

// Uniform draw from ball(center, radius) ∩ polytope by rejection (up to 64
// attempts), falling back to a segment draw toward a random interior point.
// The result always lies in the polytope (within 1e-9) and within `radius`
// of `center`, and its distribution is absolutely continuous.
Vec sample_perturbed_action(const Polytope& p, const Vec& center, double radius,
                            std::mt19937_64& rng, RejectionStats* stats = nullptr);

// Decaying perturbation radius: at(t) = epsilon / (gamma * t^alpha_eps * theta_norm_max),
// defined for t >= 1; strictly decreasing and positive.
class PerturbationSchedule {
public:
    PerturbationSchedule(double epsilon, double alpha_eps, double gamma,
                         double theta_norm_max);

    double at(std::int64_t t) const;

    double epsilon() const { return epsilon_; }
    double alpha_eps() const { return alpha_eps_; }
    double gamma() const { return gamma_; }
    double theta_norm_max() const { return theta_norm_max_; }

private:
    double epsilon_;
    double alpha_eps_;
    double gamma_;
    double theta_norm_max_;
};

}  // namespace hmbandit
