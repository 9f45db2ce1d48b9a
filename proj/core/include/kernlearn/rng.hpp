#ifndef KERNLEARN_RNG_HPP
#define KERNLEARN_RNG_HPP

#include <array>
#include <cstdint>
#include <string_view>

namespace kernlearn {

/// Counter-based Philox4x32-10 generator (Salmon et al., Random123).
///
/// The output stream is a pure function of (seed, stream, position), so every
/// sampled design is reproducible across compilers and platforms. All derived
/// variates (uniform doubles, bounded integers) are produced by the member
/// functions below rather than by <random> distributions, whose algorithms
/// are implementation-defined.
class Philox4x32 {
public:
    static constexpr std::string_view kName = "philox4x32-10/kernlearn-v1";

    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    explicit Philox4x32(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

    /// One raw block: the bijection applied to `counter` under `key`.
    [[nodiscard]] static Counter block(Counter counter, Key key) noexcept;

    std::uint32_t nextU32() noexcept;
    std::uint64_t nextU64() noexcept;

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept;

    /// Uniform double in the open interval (0, 1).
    double uniformOpen() noexcept;

    /// Unbiased integer in [0, n) (Lemire rejection); n must be > 0.
    std::uint64_t below(std::uint64_t n) noexcept;

private:
    void refill() noexcept;

    Key key_{};
    Counter counter_{};
    Counter buffer_{};
    int used_ = 4;
};

/// Derives an independent child seed; used to give each replicate and each
/// sampling stage its own stream.
[[nodiscard]] std::uint64_t deriveSeed(std::uint64_t seed, std::uint64_t tag) noexcept;

} // namespace kernlearn

#endif // KERNLEARN_RNG_HPP
