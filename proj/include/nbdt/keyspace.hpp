#pragma once

#include "nbdt/geometry.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace nbdt
{
    using Key = std::uint64_t;

    struct KeyRange
    {
        Key lo = 0;
        Key hi = 0;

        constexpr bool contains(Key k) const noexcept { return k >= lo && k <= hi; }
        constexpr std::uint64_t size() const noexcept { return hi - lo + 1; }

        friend constexpr bool operator==(const KeyRange &, const KeyRange &) = default;
    };

    /// Keys per peer for a w-bit universe: round(ln 2^w), at least 1.
    inline Key bucket_width_for_bits(unsigned bits)
    {
        if (bits == 0 || bits > 63)
        {
            throw std::invalid_argument("key width must be in [1, 63] bits");
        }
        const auto b = static_cast<Key>(std::llround(static_cast<double>(bits) * std::log(2.0)));
        return b < 1 ? 1 : b;
    }

    /// Partition of the key line into equal buckets, one per peer. Peer i
    /// owns [(i-1)*b, i*b - 1].
    struct KeySpace
    {
        unsigned bits = 20;
        Key bucket = 14;
        NodeId nodes = 0;

        static KeySpace for_bits(unsigned bits, NodeId nodes) { return {bits, bucket_width_for_bits(bits), nodes}; }

        std::uint64_t universe() const noexcept { return std::uint64_t{1} << bits; }
        std::uint64_t capacity() const noexcept { return nodes * bucket; }

        /// Keys currently addressable: [0, N*b - 1]. Requires N >= 1.
        KeyRange key_range() const
        {
            if (nodes == 0)
            {
                throw std::logic_error("empty network has no key range");
            }
            return {0, capacity() - 1};
        }

        KeyRange range_of(NodeId id) const noexcept { return {(id - 1) * bucket, id * bucket - 1}; }
    };

    /// Label of the peer whose bucket holds key. May exceed the current N;
    /// such keys belong to peers that have not joined yet.
    constexpr NodeId responsible_node(Key key, Key bucket) noexcept { return key / bucket + 1; }

    inline NodeId responsible_node(Key key, const KeySpace &ks) noexcept { return responsible_node(key, ks.bucket); }
} // namespace nbdt
