#pragma once

#include <cstdint>
#include <vector>

namespace ecgnn {

// xoshiro256++ seeded through splitmix64. Self-contained so that streams
// are reproducible byte-for-byte across platforms and standard libraries
// (std:: distributions are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // uniform in [0, 1), 53-bit resolution
    double uniform();
    double uniform(double lo, double hi);

    // standard normal via Box-Muller (no cached spare, one draw per call)
    double normal();
    double normal(double mean, double stddev);

    // uniform integer in [0, n), n >= 1, rejection-sampled (unbiased)
    std::uint64_t below(std::uint64_t n);

    // derive an independent stream; fork(k) is a pure function of (state seed, k)
    Rng fork(std::uint64_t stream) const;

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    Rng() = default;
    std::uint64_t s_[4];
    std::uint64_t seed_;
};

}  // namespace ecgnn
