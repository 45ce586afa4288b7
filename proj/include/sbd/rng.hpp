#ifndef SBD_RNG_HPP
#define SBD_RNG_HPP

#include <cstdint>
#include <cmath>

namespace sbd {

// Counter-based deterministic generator. Each draw is a hash of
// (key, counter), so a stream is fully determined by its key and the
// number of variates consumed before it.  Keys are derived from
// (seed, replica) which makes replica results independent of thread
// scheduling and replayable from the event counter alone.
//
// The mix is the SplitMix64 finalizer, which is statistically solid for
// Monte Carlo use and trivially portable.
inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class CounterRng {
  public:
    CounterRng() : key_(0), counter_(0) {}
    explicit CounterRng(uint64_t key) : key_(key), counter_(0) {}

    uint64_t next_u64() {
        uint64_t v = mix64(key_ ^ mix64(counter_));
        ++counter_;
        return v;
    }

    // uniform in [0,1), 53-bit resolution
    double uniform01() {
        return double(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // inverse-CDF exponential; rate > 0
    double exponential(double rate) {
        double u = uniform01();
        return -std::log1p(-u) / rate;
    }

    // unbiased integer in [0, n)
    uint64_t below(uint64_t n) {
        // rejection from the top block to avoid modulo bias
        uint64_t lim = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do { v = next_u64(); } while (v >= lim);
        return v % n;
    }

    // Poisson by inversion (product of uniforms); split large means so the
    // running product never underflows.
    long poisson(double mean) {
        long total = 0;
        while (mean > 30.0) {
            total += poisson_small(30.0);
            mean -= 30.0;
        }
        return total + poisson_small(mean);
    }

    uint64_t key() const { return key_; }
    uint64_t counter() const { return counter_; }

  private:
    long poisson_small(double mean) {
        if (mean <= 0.0) return 0;
        double limit = std::exp(-mean), prod = uniform01();
        long n = 0;
        while (prod > limit) {
            ++n;
            prod *= uniform01();
        }
        return n;
    }

    uint64_t key_;
    uint64_t counter_;
};

// Stream for one replica of a seeded experiment.  Sub-streams (distinct
// purposes inside one replica) get their own salt.
inline CounterRng replica_stream(uint64_t seed, uint64_t replica, uint64_t salt = 0) {
    uint64_t key = mix64(seed);
    key = mix64(key ^ mix64(replica ^ 0x5851f42d4c957f2dULL));
    if (salt) key = mix64(key ^ mix64(salt));
    return CounterRng(key);
}

} // namespace sbd

#endif
