#include "revdiff/random_stream.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace revdiff {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, c[0], hi0, lo0);
        mulhilo(kPhiloxM1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kPhiloxW0;
        k[1] += kPhiloxW1;
    }
    return c;
}

void Substream::refill() {
    const auto out = philox4x32({static_cast<std::uint32_t>(trajectory_),
                                 static_cast<std::uint32_t>(trajectory_ >> 32), step_, block_++},
                                key_);
    buffer_[0] = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
    buffer_[1] = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
    buffered_ = 2;
}

Substream::result_type Substream::operator()() {
    if (buffered_ == 0) refill();
    return buffer_[2 - buffered_--];
}

double Substream::uniform() {
    // 53 random bits, shifted by half an ulp so 0 is never returned.
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double Substream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_normal_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_normal_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

void Substream::fill_normal(std::span<double> out) {
    for (double& v : out) v = normal();
}

std::size_t Substream::categorical(std::span<const double> cumulative) {
    const double u = uniform() * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto idx = static_cast<std::size_t>(it - cumulative.begin());
    return std::min(idx, cumulative.size() - 1);
}

Substream RandomStream::substream(Purpose purpose, std::uint64_t trajectory,
                                  std::uint32_t step) const {
    const std::uint64_t mixed =
        splitmix64(master_seed_ ^ splitmix64(static_cast<std::uint64_t>(purpose)));
    const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(mixed),
                                           static_cast<std::uint32_t>(mixed >> 32)};
    return Substream(key, trajectory, step);
}

}  // namespace revdiff
