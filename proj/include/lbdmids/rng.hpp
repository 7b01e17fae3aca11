#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace lbdmids {

// mt19937_64 wrapper with fixed bit-to-double mappings. The std::
// distributions are implementation-defined, so shuffles, uniforms and
// normals are hand-rolled here to keep seeded streams reproducible
// across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1) with 53 random bits
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller; the second deviate of each pair is cached
    double normal(double mean = 0.0, double stddev = 1.0) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1 = 1.0 - uniform01(); // (0, 1], keeps log() finite
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return mean + stddev * r * std::cos(theta);
    }

    // [0, n); modulo bias is negligible for n << 2^64
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }

    // Fisher-Yates
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace lbdmids
