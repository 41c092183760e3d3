#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace mpr {

// Counter-based splittable RNG (splitmix64 core). Streams are identified by
// (seed, purpose tag, ordinal), so forks taken in any order yield the same
// sequences and parallel generation stays reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(seed), state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, n); n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    // Uniform in [0, 1).
    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Child stream derived from the construction key, not the draw position.
    Rng fork(std::string_view tag, std::uint64_t ordinal = 0) const {
        std::uint64_t h = 0xcbf29ce484222325ULL ^ key_;
        for (char c : tag) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        h ^= ordinal + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
        Rng child(h);
        child.next();  // decorrelate adjacent keys
        return child;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t key_;
    std::uint64_t state_;
};

}  // namespace mpr
