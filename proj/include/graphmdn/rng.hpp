#pragma once

#include <cstdint>
#include <vector>

namespace graphmdn {

/// Counter-based pseudorandom generator. Output i is a pure hash of
/// (key, i), so equal seeds give bitwise-identical sequences and
/// independent streams are derived by index instead of by jumping.
class Rng {
  public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64();

    /// Uniform in [0, 1).
    double uniform();
    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);
    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n);
    /// Standard normal via Box-Muller; caches the spare draw.
    double normal();

    /// Derived generator whose sequence is independent of this one
    /// and of any other stream index.
    Rng stream(std::uint64_t idx) const;

    template <typename T>
    void shuffle(std::vector<T>& v) {
        if (v.empty()) return;
        for (std::uint64_t i = v.size() - 1; i > 0; --i) {
            std::uint64_t j = uniform_int(i + 1);
            std::swap(v[i], v[j]);
        }
    }

    std::uint64_t seed() const { return seed_; }

  private:
    Rng() = default;
    std::uint64_t seed_ = 0;
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Stream indices used by training and data generation. Kept in one place
// so replay from a checkpoint derives the same streams.
namespace rng_streams {
constexpr std::uint64_t kWeightInit = 1;
constexpr std::uint64_t kShuffle = 2;    // then .stream(epoch)
constexpr std::uint64_t kDropout = 3;    // then .stream(global_step)
constexpr std::uint64_t kGenerator = 4;  // data synthesis
} // namespace rng_streams

} // namespace graphmdn
