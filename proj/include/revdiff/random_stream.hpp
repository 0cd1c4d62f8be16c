#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>

namespace revdiff {

/// Purpose tags separating the random substreams of an experiment.
enum class Purpose : std::uint32_t {
    InitialDraw = 1,
    ForwardNoise = 2,
    ReverseNoise = 3,
    AtomChoice = 4,
    LossTime = 5,
    LossAtom = 6,
    LossNoise = 7,
    Projection = 8,
    Predictor = 9,
    DataGenerator = 10,
    MonteCarlo = 11,
    Test = 100,
};

/// Philox4x32-10 block: maps (counter, key) to 128 pseudo-random bits.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Generator for a single (purpose, trajectory, step) key. Draws are a pure
/// function of the key and the draw index, never of thread scheduling.
class Substream {
public:
    using result_type = std::uint64_t;

    Substream(std::array<std::uint32_t, 2> key, std::uint64_t trajectory, std::uint32_t step)
        : key_(key), trajectory_(trajectory), step_(step) {}

    /// Uniform in the open interval (0, 1).
    double uniform();
    double normal();
    void fill_normal(std::span<double> out);

    /// Index drawn from a discrete distribution given as cumulative weights
    /// (last entry is the total mass).
    std::size_t categorical(std::span<const double> cumulative);

    // UniformRandomBitGenerator interface
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()();

private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::uint64_t trajectory_;
    std::uint32_t step_;
    std::uint32_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int buffered_ = 0;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

/// Reproducible random streams keyed by value.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t master_seed) : master_seed_(master_seed) {}

    std::uint64_t master_seed() const { return master_seed_; }

    Substream substream(Purpose purpose, std::uint64_t trajectory, std::uint32_t step = 0) const;

private:
    std::uint64_t master_seed_;
};

/// SplitMix64 finalizer, used for key derivation.
std::uint64_t splitmix64(std::uint64_t x);

}  // namespace revdiff
