#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace popsan {

inline uint64_t splitmix64(uint64_t& s) {
    s += 0x9e3779b97f4a7c15ULL;
    uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Seeded random stream. Every stream in the program derives from the single
// run seed plus a stream id, so overriding the seed re-keys all of them
// coherently. Mappings from raw bits to uniform/normal are done by hand:
// std:: distributions are implementation-defined and would break run-to-run
// reproducibility across standard libraries.
class RngStream {
public:
    RngStream() : RngStream(0, 0) {}
    RngStream(uint64_t seed, uint64_t stream_id) {
        uint64_t s = stream_id;
        uint64_t mixed = seed ^ splitmix64(s);
        gen_.seed(splitmix64(mixed));
    }

    uint64_t next_u64() { return gen_(); }

    // Uniform on [0, 1) with 53 bits of precision.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    bool bernoulli(double p) { return uniform01() < p; }

    // Standard normal via Box-Muller; caches the paired draw.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Unbiased integer in [0, n) by rejection.
    uint64_t uniform_int(uint64_t n) {
        const uint64_t bound = n * ((~uint64_t{0}) / n);
        uint64_t x;
        do {
            x = gen_();
        } while (x >= bound);
        return x % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Stream id layout (documented so independent re-simulations can line up):
//   0            network/actor initialization
//   1            critic initialization
//   10 + e       training environment e (reset draws)
//   1000 + e     rollout sampling for env e (encoder spikes, action noise)
//   2000 + iter  parameter-update stream for one iteration (re-eval spikes,
//                minibatch shuffling)
//   3000 + k     evaluation harness streams
namespace stream_id {
constexpr uint64_t kActorInit = 0;
constexpr uint64_t kCriticInit = 1;
constexpr uint64_t kEnvBase = 10;
constexpr uint64_t kRolloutBase = 1000;
constexpr uint64_t kUpdateBase = 2000;
constexpr uint64_t kEvalBase = 3000;
}  // namespace stream_id

}  // namespace popsan
