#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "voila/common.hpp"

namespace voila {

// All randomness in the project flows from one root seed. Substreams are
// derived by name so that adding a consumer never perturbs the others.
class Rng {
  public:
    explicit Rng(uint64_t seed) : seed_(seed), gen_(mix(seed)) {}

    Rng fork(std::string_view tag) const {
        return Rng(seed_ ^ fnv1a64(tag));
    }
    Rng fork(std::string_view tag, uint64_t index) const {
        return Rng(seed_ ^ fnv1a64(tag) ^ mix(index * 0x9e3779b97f4a7c15ull + 1));
    }

    uint64_t next_u64() { return gen_(); }

    double uniform() {  // [0, 1)
        return double(gen_() >> 11) * 0x1.0p-53;
    }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [lo, hi] inclusive
    int64_t uniform_int(int64_t lo, int64_t hi) {
        uint64_t span = uint64_t(hi - lo) + 1;
        return lo + int64_t(gen_() % span);
    }

    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    template <class T>
    void shuffle(std::vector<T> &v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = size_t(gen_() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    static uint64_t mix(uint64_t x) {
        // splitmix64 finalizer
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

    uint64_t seed_ = 0;
    std::mt19937_64 gen_;
};

}  // namespace voila
