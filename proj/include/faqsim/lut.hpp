#pragma once

// Nearest-reproducible-value lookup table.
//
// Row i of the table belongs to fault pattern i (ternary index, digit j for
// bit j). Column v + 2^(b-1) holds the reachable value of pattern i closest
// to v; on a tie the smaller reachable value wins. The table is stored flat,
// pattern-major, with 16-bit entries.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "errors.hpp"
#include "faultmodel.hpp"
#include "numfmt.hpp"

namespace faqsim {

inline constexpr int max_lut_bitwidth = 12;

class LookupTable {
public:
    LookupTable() = default;

    LookupTable(int bitwidth, std::vector<Code> entries)
        : bitwidth_(bitwidth), entries_(std::move(entries))
    {
        numfmt::check_bitwidth(bitwidth);
        if (entries_.size() != std::size_t(pattern_count()) * std::size_t(value_count()))
            throw ShapeError("lookup table entry count does not match 3^b * 2^b");
    }

    int bitwidth() const noexcept { return bitwidth_; }
    std::uint32_t pattern_count() const noexcept { return pow3(bitwidth_); }
    std::uint32_t value_count() const noexcept { return 1u << bitwidth_; }
    int min_value() const noexcept { return -(1 << (bitwidth_ - 1)); }
    int max_value() const noexcept { return (1 << (bitwidth_ - 1)) - 1; }

    const std::vector<Code>& entries() const noexcept { return entries_; }

    std::span<const Code> row(std::uint32_t pattern_index) const
    {
        if (pattern_index >= pattern_count())
            throw IndexError("pattern index " + std::to_string(pattern_index) + " out of range");
        return {entries_.data() + std::size_t(pattern_index) * value_count(), value_count()};
    }

    int nearest_valid(std::uint32_t pattern_index, int value) const
    {
        if (pattern_index >= pattern_count())
            throw IndexError("pattern index " + std::to_string(pattern_index) + " out of range");
        if (value < min_value() || value > max_value())
            throw IndexError("value " + std::to_string(value) + " outside the table range");
        return at_unchecked(pattern_index, value);
    }

    int at_unchecked(std::uint32_t pattern_index, int value) const noexcept
    {
        return entries_[std::size_t(pattern_index) * value_count() +
                        static_cast<std::size_t>(value - min_value())];
    }

    // Structural checks used after loading: entries in range, row 0 identity.
    void validate() const
    {
        for (Code e : entries_)
            if (e < min_value() || e > max_value())
                throw RangeError("lookup table entry outside the representable range");
        const auto identity = row(0);
        for (std::uint32_t k = 0; k < value_count(); ++k)
            if (identity[k] != static_cast<int>(k) + min_value())
                throw RangeError("lookup table row 0 is not the identity mapping");
    }

    friend bool operator==(const LookupTable&, const LookupTable&) = default;

private:
    int bitwidth_ = 8;
    std::vector<Code> entries_;
};

namespace lut_detail {

// Bits forced low / high by ternary pattern `index`.
struct ForceMasks {
    std::uint32_t clear = 0;
    std::uint32_t set = 0;
};

inline ForceMasks ternary_masks(std::uint32_t index, int bitwidth)
{
    ForceMasks m;
    for (int j = 0; j < bitwidth; ++j, index /= 3) {
        const auto digit = index % 3;
        if (digit > 0) m.clear |= 1u << j;
        if (digit == 2) m.set |= 1u << j;
    }
    return m;
}

// Masks every code of the range, collects the distinct results in ascending
// order, and writes the first-argmin nearest value for each code.
inline void fill_row(std::uint32_t index, int bitwidth, std::span<Code> out,
                     std::vector<char>& seen, std::vector<int>& unique)
{
    const int lo = -(1 << (bitwidth - 1));
    const std::uint32_t levels = 1u << bitwidth;
    const std::uint32_t width = levels - 1;
    const std::uint32_t sign = 1u << (bitwidth - 1);
    const auto masks = ternary_masks(index, bitwidth);

    std::fill(seen.begin(), seen.end(), 0);
    for (std::uint32_t k = 0; k < levels; ++k) {
        const auto raw = static_cast<std::uint32_t>(lo + static_cast<int>(k)) & width;
        const auto masked = (raw & ~masks.clear) | masks.set;
        const int value = static_cast<int>(masked ^ sign) - static_cast<int>(sign);
        seen[static_cast<std::size_t>(value - lo)] = 1;
    }
    unique.clear();
    for (std::uint32_t k = 0; k < levels; ++k)
        if (seen[k]) unique.push_back(lo + static_cast<int>(k));

    // Query values ascend, so the nearest index never moves backwards.
    std::size_t best = 0;
    for (std::uint32_t k = 0; k < levels; ++k) {
        const int v = lo + static_cast<int>(k);
        while (best + 1 < unique.size() &&
               std::abs(unique[best + 1] - v) < std::abs(unique[best] - v))
            ++best;
        out[k] = static_cast<Code>(unique[best]);
    }
}

}  // namespace lut_detail

// Values that read back unchanged under `pattern`, ascending.
inline std::vector<int> reachable_set(const FaultPattern& pattern)
{
    const int b = pattern.bitwidth();
    const int lo = -(1 << (b - 1));
    const std::uint32_t width = BitPattern::width_mask(b);
    std::vector<int> out;
    for (int v = lo; v < -lo; ++v) {
        const auto bits = static_cast<std::uint32_t>(v) & width;
        if ((bits & pattern.sa0_mask()) == 0 && (bits & pattern.sa1_mask()) == pattern.sa1_mask())
            out.push_back(v);
    }
    return out;
}

inline std::size_t lut_entry_count(int bitwidth)
{
    return std::size_t(pow3(bitwidth)) << bitwidth;
}

// `threads` > 1 splits pattern rows across workers; rows are independent so
// the result does not depend on the split.
inline LookupTable build_lut(const QuantSpec& spec, unsigned threads = 1)
{
    spec.validate();
    if (spec.bitwidth > max_lut_bitwidth)
        throw CapacityError("lookup table for " + std::to_string(spec.bitwidth) +
                            " bits exceeds the supported maximum of " +
                            std::to_string(max_lut_bitwidth));
    const int b = spec.bitwidth;
    const std::uint32_t patterns = pow3(b);
    const std::uint32_t levels = 1u << b;
    std::vector<Code> entries(lut_entry_count(b));

    auto work = [&](std::uint32_t first, std::uint32_t last) {
        std::vector<char> seen(levels);
        std::vector<int> unique;
        unique.reserve(levels);
        for (std::uint32_t i = first; i < last; ++i)
            lut_detail::fill_row(i, b, {entries.data() + std::size_t(i) * levels, levels}, seen, unique);
    };

    threads = std::max(1u, std::min<unsigned>(threads, patterns));
    if (threads == 1) {
        work(0, patterns);
    } else {
        std::vector<std::jthread> pool;
        const std::uint32_t chunk = (patterns + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::uint32_t first = t * chunk;
            const std::uint32_t last = std::min(patterns, first + chunk);
            if (first < last) pool.emplace_back(work, first, last);
        }
    }
    return LookupTable(b, std::move(entries));
}

inline int nearest_valid(const LookupTable& lut, std::uint32_t pattern_index, int value)
{
    return lut.nearest_valid(pattern_index, value);
}

}  // namespace faqsim
