#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hmbandit {

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;

// Invalid model/configuration data (bad probabilities, dimension mismatches,
// out-of-range parameters). Reported to users as `error: <what>`.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A caller broke an API precondition (action outside the action set, index
// out of range, schedule queried at t < 1). Programming error, not user data.
struct ContractError : std::logic_error {
    explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

double dot(const Vec& a, const Vec& b);

// Strict lexicographic order on coordinate vectors (used for tie-breaking).
bool lex_less(const Vec& a, const Vec& b);

// --- deterministic RNG helpers -------------------------------------------
//
// All randomness flows through std::mt19937_64 (bit-exact across platforms).
// Distribution sampling is hand-rolled so trajectories are reproducible
// independent of standard-library internals.

std::uint64_t splitmix64(std::uint64_t x);

// Collapse a list of words into one seed. Used for the documented child-seed
// scheme: child = seed_mix({master, realization, trajectory, agent_tag}).
std::uint64_t seed_mix(std::initializer_list<std::uint64_t> words);

// Uniform on [0, 1) with 53 random bits.
double uniform01(std::mt19937_64& rng);

// Standard normal via Marsaglia's polar method.
double standard_normal(std::mt19937_64& rng);

// Index i with probability probs[i] (probs need not be exactly normalized;
// the remainder lands on the last index).
int sample_discrete(const Vec& probs, std::mt19937_64& rng);

}  // namespace hmbandit
