#pragma once

// Stuck-at fault maps over a rows x cols weight buffer of bitwidth-bit cells.

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"
#include "numfmt.hpp"
#include "random.hpp"

namespace faqsim {

enum class StuckAt : std::uint8_t { none = 0, zero = 1, one = 2 };

inline std::uint32_t pow3(int n) noexcept
{
    std::uint32_t r = 1;
    while (n-- > 0) r *= 3;
    return r;
}

// Defect configuration of one cell. Ternary digit j describes bit j
// (0 none, 1 stuck-at-0, 2 stuck-at-1); digit 0 is least significant.
class FaultPattern {
public:
    FaultPattern() = default;

    static FaultPattern from_masks(std::uint32_t sa0, std::uint32_t sa1, int bitwidth)
    {
        numfmt::check_bitwidth(bitwidth);
        const std::uint32_t width = BitPattern::width_mask(bitwidth);
        if ((sa0 & sa1) != 0 || (sa0 & ~width) != 0 || (sa1 & ~width) != 0)
            throw RangeError("fault pattern masks overlap or exceed the bitwidth");
        FaultPattern p;
        p.bitwidth_ = bitwidth;
        p.sa0_ = sa0;
        p.sa1_ = sa1;
        std::uint32_t place = 1;
        for (int j = 0; j < bitwidth; ++j, place *= 3) {
            if ((sa0 >> j) & 1u) p.index_ += place;
            if ((sa1 >> j) & 1u) p.index_ += 2 * place;
        }
        return p;
    }

    static FaultPattern from_index(std::uint32_t index, int bitwidth)
    {
        numfmt::check_bitwidth(bitwidth);
        if (index >= pow3(bitwidth))
            throw IndexError("pattern index " + std::to_string(index) + " >= 3^" + std::to_string(bitwidth));
        FaultPattern p;
        p.bitwidth_ = bitwidth;
        p.index_ = index;
        for (int j = 0; j < bitwidth; ++j, index /= 3) {
            const auto digit = index % 3;
            if (digit == 1) p.sa0_ |= 1u << j;
            if (digit == 2) p.sa1_ |= 1u << j;
        }
        return p;
    }

    static FaultPattern from_digits(const std::vector<StuckAt>& digits)
    {
        std::uint32_t sa0 = 0, sa1 = 0;
        for (std::size_t j = 0; j < digits.size(); ++j) {
            if (digits[j] == StuckAt::zero) sa0 |= 1u << j;
            if (digits[j] == StuckAt::one) sa1 |= 1u << j;
        }
        return from_masks(sa0, sa1, static_cast<int>(digits.size()));
    }

    static FaultPattern single(int bit, StuckAt kind, int bitwidth)
    {
        const std::uint32_t m = 1u << bit;
        return kind == StuckAt::zero ? from_masks(m, 0, bitwidth)
             : kind == StuckAt::one  ? from_masks(0, m, bitwidth)
                                     : from_masks(0, 0, bitwidth);
    }

    std::uint32_t index() const noexcept { return index_; }
    int bitwidth() const noexcept { return bitwidth_; }
    std::uint32_t sa0_mask() const noexcept { return sa0_; }
    std::uint32_t sa1_mask() const noexcept { return sa1_; }
    bool fault_free() const noexcept { return index_ == 0; }

    StuckAt digit(int bit) const noexcept
    {
        if ((sa0_ >> bit) & 1u) return StuckAt::zero;
        if ((sa1_ >> bit) & 1u) return StuckAt::one;
        return StuckAt::none;
    }

    std::vector<StuckAt> digits() const
    {
        std::vector<StuckAt> d(bitwidth_);
        for (int j = 0; j < bitwidth_; ++j) d[j] = digit(j);
        return d;
    }

    friend bool operator==(const FaultPattern&, const FaultPattern&) = default;

private:
    int bitwidth_ = 8;
    std::uint32_t index_ = 0;
    std::uint32_t sa0_ = 0;
    std::uint32_t sa1_ = 0;
};

// Value read back from a cell holding `code` under `pattern`.
inline int apply_faults(int code, const FaultPattern& pattern)
{
    const auto bits = numfmt::encode_twos_complement(code, pattern.bitwidth()).bits();
    const auto read = (bits & ~pattern.sa0_mask()) | pattern.sa1_mask();
    return numfmt::decode_twos_complement(BitPattern(read, pattern.bitwidth()));
}

struct CellCoord {
    std::size_t row = 0;
    std::size_t col = 0;
    friend bool operator==(const CellCoord&, const CellCoord&) = default;
};

class FaultMap {
public:
    FaultMap() = default;

    FaultMap(std::size_t rows, std::size_t cols, int bitwidth, double fault_rate = 0.0,
             std::uint64_t seed = 0)
        : rows_(rows), cols_(cols), bitwidth_(bitwidth), fault_rate_(fault_rate), seed_(seed),
          sa0_(rows * cols, 0), sa1_(rows * cols, 0)
    {
        numfmt::check_bitwidth(bitwidth);
        if (rows == 0 || cols == 0) throw ShapeError("fault map needs at least one cell");
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    int bitwidth() const noexcept { return bitwidth_; }
    double fault_rate() const noexcept { return fault_rate_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t cell_count() const noexcept { return rows_ * cols_; }

    std::uint16_t sa0_mask(std::size_t row, std::size_t col) const { return sa0_[offset(row, col)]; }
    std::uint16_t sa1_mask(std::size_t row, std::size_t col) const { return sa1_[offset(row, col)]; }

    bool stuck_at_0(std::size_t row, std::size_t col, int bit) const
    {
        return ((sa0_mask(row, col) >> checked_bit(bit)) & 1u) != 0;
    }
    bool stuck_at_1(std::size_t row, std::size_t col, int bit) const
    {
        return ((sa1_mask(row, col) >> checked_bit(bit)) & 1u) != 0;
    }

    void set_fault(std::size_t row, std::size_t col, int bit, StuckAt kind)
    {
        const auto i = offset(row, col);
        const auto m = static_cast<std::uint16_t>(1u << checked_bit(bit));
        sa0_[i] &= static_cast<std::uint16_t>(~m);
        sa1_[i] &= static_cast<std::uint16_t>(~m);
        if (kind == StuckAt::zero) sa0_[i] |= m;
        if (kind == StuckAt::one) sa1_[i] |= m;
    }

    FaultPattern pattern_at(std::size_t row, std::size_t col) const
    {
        const auto i = offset(row, col);
        return FaultPattern::from_masks(sa0_[i], sa1_[i], bitwidth_);
    }
    FaultPattern pattern_at(CellCoord cell) const { return pattern_at(cell.row, cell.col); }

    // Pattern index of every cell, row-major.
    std::vector<std::uint32_t> pattern_indices() const
    {
        std::vector<std::uint32_t> out(cell_count());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = FaultPattern::from_masks(sa0_[i], sa1_[i], bitwidth_).index();
        return out;
    }

    const std::vector<std::uint16_t>& sa0_cells() const noexcept { return sa0_; }
    const std::vector<std::uint16_t>& sa1_cells() const noexcept { return sa1_; }

    // Throws if any bit is marked stuck at both polarities or lies above the bitwidth.
    void validate() const
    {
        const auto width = BitPattern::width_mask(bitwidth_);
        for (std::size_t i = 0; i < sa0_.size(); ++i) {
            if ((sa0_[i] & sa1_[i]) != 0)
                throw RangeError("fault map cell " + std::to_string(i) + " is stuck at both 0 and 1");
            if (((sa0_[i] | sa1_[i]) & ~width) != 0)
                throw RangeError("fault map cell " + std::to_string(i) + " has faults above the bitwidth");
        }
    }

    // Raw mask access for deserialization; call validate() afterwards.
    std::vector<std::uint16_t>& mutable_sa0() noexcept { return sa0_; }
    std::vector<std::uint16_t>& mutable_sa1() noexcept { return sa1_; }

    friend bool operator==(const FaultMap& a, const FaultMap& b)
    {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.bitwidth_ == b.bitwidth_ &&
               std::bit_cast<std::uint64_t>(a.fault_rate_) == std::bit_cast<std::uint64_t>(b.fault_rate_) &&
               a.seed_ == b.seed_ && a.sa0_ == b.sa0_ && a.sa1_ == b.sa1_;
    }

private:
    std::size_t offset(std::size_t row, std::size_t col) const
    {
        if (row >= rows_ || col >= cols_)
            throw IndexError("cell (" + std::to_string(row) + ", " + std::to_string(col) +
                             ") outside " + std::to_string(rows_) + "x" + std::to_string(cols_) + " map");
        return row * cols_ + col;
    }
    int checked_bit(int bit) const
    {
        if (bit < 0 || bit >= bitwidth_) throw IndexError("bit " + std::to_string(bit) + " out of range");
        return bit;
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    int bitwidth_ = 8;
    double fault_rate_ = 0.0;
    std::uint64_t seed_ = 0;
    std::vector<std::uint16_t> sa0_;
    std::vector<std::uint16_t> sa1_;
};

// Each bit cell is faulty with probability fault_rate; polarity is a fair
// coin. Row r draws from Rng(derive_seed(seed, r)), columns then bits in
// ascending order: one uniform per bit, plus one coin when it is faulty.
inline FaultMap generate_fault_map(std::size_t rows, std::size_t cols, int bitwidth,
                                   double fault_rate, std::uint64_t seed)
{
    if (!(fault_rate >= 0.0 && fault_rate <= 1.0))
        throw RangeError("fault rate must lie in [0, 1]");
    FaultMap map(rows, cols, bitwidth, fault_rate, seed);
    auto& sa0 = map.mutable_sa0();
    auto& sa1 = map.mutable_sa1();
    for (std::size_t r = 0; r < rows; ++r) {
        Rng rng(derive_seed(seed, r));
        for (std::size_t c = 0; c < cols; ++c) {
            std::uint16_t m0 = 0, m1 = 0;
            for (int b = 0; b < bitwidth; ++b) {
                if (rng.uniform() < fault_rate) {
                    if (rng.coin())
                        m1 |= static_cast<std::uint16_t>(1u << b);
                    else
                        m0 |= static_cast<std::uint16_t>(1u << b);
                }
            }
            sa0[r * cols + c] = m0;
            sa1[r * cols + c] = m1;
        }
    }
    return map;
}

struct FaultStatistics {
    std::uint64_t bit_cells = 0;
    std::uint64_t faulty_bits = 0;
    std::uint64_t stuck_at_0 = 0;
    std::uint64_t stuck_at_1 = 0;
    std::uint64_t faulty_cells = 0;        // cells with at least one faulty bit
    std::vector<std::uint64_t> per_bit;    // faulty count by bit position

    double rate() const noexcept { return bit_cells ? double(faulty_bits) / double(bit_cells) : 0.0; }
    double sa1_fraction() const noexcept
    {
        return faulty_bits ? double(stuck_at_1) / double(faulty_bits) : 0.0;
    }
};

inline FaultStatistics fault_statistics(const FaultMap& map)
{
    FaultStatistics s;
    s.per_bit.assign(map.bitwidth(), 0);
    s.bit_cells = std::uint64_t(map.cell_count()) * map.bitwidth();
    const auto& sa0 = map.sa0_cells();
    const auto& sa1 = map.sa1_cells();
    for (std::size_t i = 0; i < sa0.size(); ++i) {
        s.stuck_at_0 += std::popcount(sa0[i]);
        s.stuck_at_1 += std::popcount(sa1[i]);
        const unsigned any = sa0[i] | sa1[i];
        if (any) ++s.faulty_cells;
        for (int b = 0; b < map.bitwidth(); ++b)
            if ((any >> b) & 1u) ++s.per_bit[b];
    }
    s.faulty_bits = s.stuck_at_0 + s.stuck_at_1;
    return s;
}

}  // namespace faqsim
