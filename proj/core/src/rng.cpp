#include "kernlearn/rng.hpp"

namespace kernlearn {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t &hi, std::uint32_t &lo) noexcept {
    const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(product >> 32);
    lo = static_cast<std::uint32_t>(product);
}

__extension__ typedef unsigned __int128 UInt128;

} // namespace

Philox4x32::Philox4x32(std::uint64_t seed, std::uint64_t stream) noexcept {
    key_ = {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    counter_ = {0u, 0u, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
}

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

void Philox4x32::refill() noexcept {
    buffer_ = block(counter_, key_);
    // 64-bit position counter in the two low words.
    if (++counter_[0] == 0) {
        ++counter_[1];
    }
    used_ = 0;
}

std::uint32_t Philox4x32::nextU32() noexcept {
    if (used_ == 4) {
        refill();
    }
    return buffer_[used_++];
}

std::uint64_t Philox4x32::nextU64() noexcept {
    const std::uint64_t hi = nextU32();
    const std::uint64_t lo = nextU32();
    return (hi << 32) | lo;
}

double Philox4x32::uniform() noexcept {
    return static_cast<double>(nextU64() >> 11) * 0x1.0p-53;
}

double Philox4x32::uniformOpen() noexcept {
    return (static_cast<double>(nextU64() >> 12) + 0.5) * 0x1.0p-52;
}

std::uint64_t Philox4x32::below(std::uint64_t n) noexcept {
    // Lemire's multiply-shift with rejection on the low word.
    std::uint64_t x = nextU64();
    UInt128 m = static_cast<UInt128>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
        const std::uint64_t threshold = (0 - n) % n;
        while (low < threshold) {
            x = nextU64();
            m = static_cast<UInt128>(x) * n;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

std::uint64_t deriveSeed(std::uint64_t seed, std::uint64_t tag) noexcept {
    const auto out = Philox4x32::block(
        {static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32), 0x5eedu, 0xc0ffeeu},
        {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

} // namespace kernlearn
