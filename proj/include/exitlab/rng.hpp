// Copyright 2026 The exitlab Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>

namespace exitlab {

//---------------------------------------------------------------------------//
/*!
 * SplitMix64 finalizer, used to turn user seeds into Philox keys and to
 * derive child seeds.
 */
constexpr std::uint64_t splitmix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Child seed for (parent, tag, index); used for replications and ε levels.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag,
                                    std::uint64_t index)
{
    return splitmix64(splitmix64(parent ^ splitmix64(tag)) + index);
}

/// Substream identifiers. A trajectory owns one stream per purpose, so the
/// chain path never consumes Wiener increments and vice versa.
enum class Substream : std::uint32_t
{
    wiener = 0,
    chain = 1,
    sampling = 2,
};

//---------------------------------------------------------------------------//
/*!
 * Philox4x32-10 counter-based generator.
 *
 * Counter layout: words 0-1 hold the block index within the stream, word 2
 * the trajectory index, word 3 the substream id. The key is derived from the
 * experiment seed. Any (seed, trajectory, substream) triple therefore names
 * an independent, reproducible stream with no shared state.
 */
class Philox4x32
{
  public:
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Block generate(Block counter, Key key)
    {
        for (int round = 0; round < 10; ++round)
        {
            counter = single_round(counter, key);
            key[0] += kW32A;
            key[1] += kW32B;
        }
        return counter;
    }

  private:
    static constexpr std::uint32_t kW32A = 0x9E3779B9;
    static constexpr std::uint32_t kW32B = 0xBB67AE85;
    static constexpr std::uint32_t kM4x32A = 0xD2511F53;
    static constexpr std::uint32_t kM4x32B = 0xCD9E8D57;

    static Block single_round(Block const& ctr, Key const& key)
    {
        std::uint64_t const p0 = std::uint64_t{kM4x32A} * ctr[0];
        std::uint64_t const p1 = std::uint64_t{kM4x32B} * ctr[2];
        auto const hi0 = static_cast<std::uint32_t>(p0 >> 32);
        auto const lo0 = static_cast<std::uint32_t>(p0);
        auto const hi1 = static_cast<std::uint32_t>(p1 >> 32);
        auto const lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
};

//---------------------------------------------------------------------------//
/*!
 * Sequential view of one Philox stream: uniforms on (0,1), standard normals
 * (ziggurat) and exponentials. Also a UniformRandomBitGenerator.
 */
class RandomStream
{
  public:
    RandomStream(std::uint64_t seed, std::uint64_t trajectory, Substream stream)
    {
        std::uint64_t const k = splitmix64(seed);
        key_ = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
        trajectory_ = static_cast<std::uint32_t>(trajectory);
        stream_ = static_cast<std::uint32_t>(stream)
                  | (static_cast<std::uint32_t>(trajectory >> 32) << 8);
    }

    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()() { return next_u64(); }

    std::uint64_t next_u64()
    {
        if (cursor_ >= 4)
        {
            refill();
        }
        std::uint64_t const lo = buffer_[cursor_];
        std::uint64_t const hi = buffer_[cursor_ + 1];
        cursor_ += 2;
        return (hi << 32) | lo;
    }

    /// Uniform on the open interval (0, 1) with 53-bit resolution.
    double uniform()
    {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal();

    /// Exponential with the given rate; rate must be positive.
    double exponential(double rate);

  private:
    void refill()
    {
        Philox4x32::Block const ctr{static_cast<std::uint32_t>(block_),
                                    static_cast<std::uint32_t>(block_ >> 32),
                                    trajectory_, stream_};
        buffer_ = Philox4x32::generate(ctr, key_);
        ++block_;
        cursor_ = 0;
    }

    Philox4x32::Key key_{};
    std::uint32_t trajectory_ = 0;
    std::uint32_t stream_ = 0;
    std::uint64_t block_ = 0;
    Philox4x32::Block buffer_{};
    int cursor_ = 4;
};

}  // namespace exitlab
