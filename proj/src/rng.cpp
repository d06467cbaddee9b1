#include "fedpoe/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fedpoe {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) {
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

Stream Stream::derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t key = mix64(seed + kGamma);
    for (std::uint64_t p : path) {
        key = mix64(key ^ mix64(p + 0x632BE59BD9B4E019ULL));
    }
    return Stream(key);
}

Stream Stream::derive(std::uint64_t seed, StreamPurpose purpose,
                      std::initializer_list<std::uint64_t> path) {
    std::uint64_t key = mix64(seed + kGamma);
    key = mix64(key ^ mix64(static_cast<std::uint64_t>(purpose) + 0x632BE59BD9B4E019ULL));
    for (std::uint64_t p : path) {
        key = mix64(key ^ mix64(p + 0x632BE59BD9B4E019ULL));
    }
    return Stream(key);
}

std::uint64_t Stream::next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * kGamma);
}

double Stream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Stream::uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_normal_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
}

std::uint64_t Stream::below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Stream::below: bound must be positive");
    // Rejection keeps the result exactly uniform.
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % bound);
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % bound;
}

}  // namespace fedpoe
