#pragma once

// Deterministic random primitives. The standard distributions and
// std::shuffle are implementation-defined, so everything that feeds
// dataset construction goes through these fixed algorithms instead.

#include <algorithm>
#include <cstdint>
#include <string_view>
#include <vector>

namespace maskbench::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t hash64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t state = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    return splitmix64(state);
}

class Stream {
public:
    explicit Stream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() { return splitmix64(state_); }

    // Uniform integer in [0, bound) by rejection sampling, bound > 0.
    std::uint64_t below(std::uint64_t bound) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
        std::uint64_t v = next();
        while (v >= limit) v = next();
        return v % bound;
    }

    // Uniform integer in [lo, hi], inclusive.
    std::uint64_t between(std::uint64_t lo, std::uint64_t hi) {
        return lo + below(hi - lo + 1);
    }

    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

template <typename T>
void shuffle(std::vector<T>& items, Stream& stream) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(stream.below(i));
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

// k distinct indices from [0, n), returned in ascending order.
inline std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Stream& stream) {
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    if (k > n) k = n;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(stream.below(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace maskbench::rng
