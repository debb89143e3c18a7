#pragma once

#include <cassert>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

#include "gridrl/common.hpp"

namespace gridrl {

using Rng = std::mt19937_64;

// Every random consumer gets its own stream, derived as hash(seed, role-name).
// Roles are stable strings ("init", "scenario", "action.0", ...), so a single
// root seed pins the whole run.
inline std::uint64_t stream_seed(std::uint64_t root, std::string_view role) {
    std::uint64_t h = fnv1a64(root, 0xcbf29ce484222325ull);
    h = fnv1a64(role, h);
    // splitmix64 finalizer to spread low-entropy roles
    h += 0x9e3779b97f4a7c15ull;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
    return h ^ (h >> 31);
}

inline Rng make_stream(std::uint64_t root, std::string_view role) {
    return Rng(stream_seed(root, role));
}

// Stateless draw helpers. std::*_distribution objects carry hidden state and
// unspecified algorithms; these consume engine words directly so a serialized
// engine resumes bit-exactly.

inline double uniform_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0,1)
}

inline double uniform_real(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_unit(rng);
}

// Inclusive on both ends; unbiased via rejection.
inline std::int64_t uniform_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
    assert(lo <= hi);
    std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(rng());  // full 64-bit span
    std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % range;
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return lo + static_cast<std::int64_t>(v % range);
}

inline bool bernoulli(Rng& rng, double p) { return uniform_unit(rng) < p; }

inline std::string save_rng(const Rng& rng) {
    std::ostringstream ss;
    ss << rng;
    return ss.str();
}

inline void load_rng(Rng& rng, const std::string& state) {
    std::istringstream ss(state);
    ss >> rng;
    if (!ss) throw std::runtime_error("corrupt rng state");
}

}  // namespace gridrl
