#include "gatenet/ndcore.hpp"

namespace gatenet {

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes)
{
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const std::uint8_t byte : bytes) {
        hash ^= byte;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::uint64_t fnv1a64(std::string_view text)
{
    return fnv1a64(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

RngStream RngStream::child(std::string_view label) const
{
    return RngStream(splitmix64(seed_ ^ splitmix64(fnv1a64(label))));
}

std::uint64_t RngStream::next_below(std::uint64_t bound)
{
    if (bound == 0)
        throw ArgumentError("next_below: bound must be positive");
    // Largest multiple of bound representable in 64 bits; draws at or above it are rejected.
    const std::uint64_t limit = std::uint64_t(0) - (std::uint64_t(0) - bound) % bound;
    for (;;) {
        const std::uint64_t draw = engine_();
        if (limit == 0 || draw < limit)
            return draw % bound;
    }
}

}  // namespace gatenet
