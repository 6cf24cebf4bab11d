#include "fedsysid/rng.hpp"

namespace fedsysid {

std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Seed derive_seed(Seed parent, std::initializer_list<std::uint64_t> path) noexcept {
    std::uint64_t h = mix64(parent);
    for (std::uint64_t label : path) {
        h = mix64(h ^ mix64(label + 0x632be59bd9b4e019ULL));
    }
    return h;
}

Matrix standard_normal(Index rows, Index cols, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    // Column-major fill order is part of the determinism contract.
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
}

}  // namespace fedsysid
