#pragma once

#include <initializer_list>
#include <random>

#include "fedsysid/core.hpp"

namespace fedsysid {

using Rng = std::mt19937_64;

/// Tags that keep independent random streams apart when derived from one
/// master seed.
enum class Stream : std::uint64_t {
    nominal = 1,
    perturbation = 2,
    gamma = 3,
    data = 4,
    trajectory = 5,
    federation = 6,
    minibatch = 7,
    directions = 8,
};

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z) noexcept;

/// Derives a child seed from `parent` and a path of integer labels. The result
/// depends only on its arguments, never on call order, so substreams can be
/// created in any order or from any thread.
Seed derive_seed(Seed parent, std::initializer_list<std::uint64_t> path) noexcept;

inline Seed derive_seed(Seed parent, Stream stream, std::initializer_list<std::uint64_t> path = {}) noexcept {
    const Seed s = derive_seed(parent, {static_cast<std::uint64_t>(stream)});
    return path.size() == 0 ? s : derive_seed(s, path);
}

inline Rng make_rng(Seed seed) { return Rng(seed); }

/// Matrix with i.i.d. standard normal entries.
Matrix standard_normal(Index rows, Index cols, Rng& rng);

}  // namespace fedsysid
