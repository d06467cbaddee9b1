#pragma once

#include <cstdint>
#include <initializer_list>

namespace fedpoe {

/// Purposes that own an independent substream of the run seed.
enum class StreamPurpose : std::uint64_t {
    FeatureMap = 1,
    Data = 2,
    Selection = 3,
    Participation = 4,
    Partition = 5,
};

/// Counter-based random stream.
///
/// Every value is a pure function of (key, counter): output i is the
/// SplitMix64 finalizer applied to key + (i + 1) * golden-gamma. Streams are
/// derived from a root seed by hashing a path of integers, so substreams for
/// different purposes, clients, and steps never share state and are stable
/// across platforms (no std:: distributions are involved).
class Stream {
public:
    explicit Stream(std::uint64_t key) : key_(key) {}

    static Stream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path);
    static Stream derive(std::uint64_t seed, StreamPurpose purpose,
                         std::initializer_list<std::uint64_t> path = {});

    std::uint64_t next_u64();
    /// Uniform on [0, 1) with 53 bits of resolution.
    double uniform();
    /// Uniform on (0, 1).
    double uniform_open();
    /// Standard normal via Box-Muller; both variates of a pair are used.
    double normal();
    /// Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace fedpoe
