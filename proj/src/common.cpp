#include "hmbandit/common.hpp"

#include <cassert>
#include <cmath>

namespace hmbandit {

double dot(const Vec& a, const Vec& b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

bool lex_less(const Vec& a, const Vec& b) {
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] < b[i]) return true;
        if (a[i] > b[i]) return false;
    }
    return a.size() < b.size();
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t seed_mix(std::initializer_list<std::uint64_t> words) {
    // Sponge-style: absorb each word through the splitmix64 finalizer with a
    // position-dependent constant so permuted tuples map to different seeds.
    std::uint64_t h = 0x243f6a8885a308d3ULL;  // pi
    std::uint64_t k = 1;
    for (std::uint64_t w : words) {
        h = splitmix64(h ^ splitmix64(w + k * 0x9e3779b97f4a7c15ULL));
        ++k;
    }
    return h;
}

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(std::mt19937_64& rng) {
    // Polar method; draw count varies but is fully determined by the stream.
    while (true) {
        const double u = 2.0 * uniform01(rng) - 1.0;
        const double v = 2.0 * uniform01(rng) - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
}

int sample_discrete(const Vec& probs, std::mt19937_64& rng) {
    assert(!probs.empty());
    const double u = uniform01(rng);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

}  // namespace hmbandit
