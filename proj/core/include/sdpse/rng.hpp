#pragma once

#include <cstdint>
#include <string_view>

namespace sdpse {

/// Counter-based generator: draw k is SplitMix64(seed + k·golden). Streams
/// are reproducible from (seed, counter) alone on any platform.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64();
    /// Uniform on the open interval (0, 1).
    double uniform();
    /// Standard normal by inverse CDF of one uniform draw.
    double gaussian();

    std::uint64_t counter() const { return counter_; }

  private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

/// Sub-seed for a named purpose: FNV-1a over the seed bytes then the name.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose);

/// Inverse of the standard normal CDF (Wichura, algorithm AS241, PPND16).
double normal_quantile(double p);

}  // namespace sdpse
