#pragma once

// Two's-complement fixed-point codes and symmetric per-tensor quantization.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace faqsim {

using Code = std::int16_t;

enum class Rounding { nearest_even };

struct QuantSpec {
    int bitwidth = 8;
    Rounding rounding = Rounding::nearest_even;

    int min_code() const noexcept { return -(1 << (bitwidth - 1)); }
    int max_code() const noexcept { return (1 << (bitwidth - 1)) - 1; }
    int levels() const noexcept { return 1 << bitwidth; }

    void validate() const
    {
        if (bitwidth < 2 || bitwidth > 16)
            throw RangeError("bitwidth must be in [2, 16], got " + std::to_string(bitwidth));
    }

    friend bool operator==(const QuantSpec&, const QuantSpec&) = default;
};

struct ScaleFactor {
    double scale = 1.0;
    std::string tensor_id;

    friend bool operator==(const ScaleFactor&, const ScaleFactor&) = default;
};

// Fixed-width bit pattern; bit 0 is the least significant.
class BitPattern {
public:
    constexpr BitPattern(std::uint32_t bits, int width) noexcept
        : bits_(bits & width_mask(width)), width_(width)
    {}

    constexpr std::uint32_t bits() const noexcept { return bits_; }
    constexpr int width() const noexcept { return width_; }
    constexpr bool operator[](int bit) const noexcept { return ((bits_ >> bit) & 1u) != 0; }

    static constexpr std::uint32_t width_mask(int width) noexcept
    {
        return width >= 32 ? 0xFFFFFFFFu : ((1u << width) - 1u);
    }

    friend constexpr bool operator==(BitPattern, BitPattern) = default;

private:
    std::uint32_t bits_;
    int width_;
};

namespace numfmt {

inline void check_bitwidth(int bitwidth)
{
    QuantSpec{bitwidth}.validate();
}

inline BitPattern encode_twos_complement(int value, int bitwidth)
{
    check_bitwidth(bitwidth);
    const QuantSpec spec{bitwidth};
    if (value < spec.min_code() || value > spec.max_code())
        throw RangeError("value " + std::to_string(value) + " not representable in " +
                         std::to_string(bitwidth) + " bits");
    return BitPattern(static_cast<std::uint32_t>(value), bitwidth);
}

inline int decode_twos_complement(BitPattern bits) noexcept
{
    const int width = bits.width();
    const auto raw = static_cast<std::int32_t>(bits.bits());
    const std::int32_t sign = std::int32_t{1} << (width - 1);
    return (raw ^ sign) - sign;
}

inline ScaleFactor compute_scale(std::span<const double> tensor, const QuantSpec& spec,
                                 std::string tensor_id = {})
{
    spec.validate();
    if (tensor.empty()) throw ShapeError("compute_scale: empty tensor");
    double max_abs = 0.0;
    for (double x : tensor) max_abs = std::max(max_abs, std::abs(x));
    if (max_abs == 0.0) return {1.0, std::move(tensor_id)};
    return {max_abs / spec.max_code(), std::move(tensor_id)};
}

inline int quantize_value(double x, double scale, const QuantSpec& spec) noexcept
{
    const double q = std::nearbyint(x / scale);  // default FE_TONEAREST: ties to even
    return static_cast<int>(std::clamp(q, double(spec.min_code()), double(spec.max_code())));
}

inline std::vector<Code> quantize(std::span<const double> tensor, const ScaleFactor& scale,
                                  const QuantSpec& spec)
{
    spec.validate();
    if (!(scale.scale > 0.0)) throw RangeError("quantize: scale must be positive");
    std::vector<Code> codes(tensor.size());
    std::transform(tensor.begin(), tensor.end(), codes.begin(),
                   [&](double x) { return static_cast<Code>(quantize_value(x, scale.scale, spec)); });
    return codes;
}

inline std::vector<double> dequantize(std::span<const Code> codes, const ScaleFactor& scale)
{
    std::vector<double> out(codes.size());
    std::transform(codes.begin(), codes.end(), out.begin(),
                   [&](Code c) { return static_cast<double>(c) * scale.scale; });
    return out;
}

// Quantize-dequantize in one step (activation fake quantization).
inline double fake_quantize(double x, double scale, const QuantSpec& spec) noexcept
{
    return quantize_value(x, scale, spec) * scale;
}

}  // namespace numfmt
}  // namespace faqsim
