#pragma once

// Fault-aware conversion of a quantized model, faulty-read simulation, and
// weight-space error metrics.

#include <algorithm>
#include <cmath>
#include <vector>

#include "errors.hpp"
#include "faultmodel.hpp"
#include "lut.hpp"
#include "mapper.hpp"
#include "model.hpp"

namespace faqsim {

// Replaces every weight code by the nearest value its cell reproduces
// correctly. Scales, biases and topology are untouched.
inline QuantizedModel faq_convert(const QuantizedModel& model, const ErrorMask& mask, const LookupTable& lut)
{
    check_mask_matches(model, mask);
    if (lut.bitwidth() != model.quant.bitwidth)
        throw ConfigError("lookup table bitwidth does not match the model");
    const auto patterns = lut.pattern_count();
    const int lo = model.quant.min_code();
    const int hi = model.quant.max_code();

    QuantizedModel out = model;
    for (std::size_t li = 0; li < out.layers.size(); ++li) {
        auto& codes = out.layers[li].codes;
        const auto& idx = mask.layers[li];
        for (std::size_t w = 0; w < codes.size(); ++w) {
            const int c = codes[w];
            if (idx[w] >= patterns || c < lo || c > hi)
                throw RangeError("pattern index or code out of range in layer " + std::to_string(li));
            codes[w] = static_cast<Code>(lut.at_unchecked(idx[w], c));
        }
    }
    return out;
}

// Codes as read back through the faulty buffer, without mitigation.
inline QuantizedModel inject(const QuantizedModel& model, const ErrorMask& mask)
{
    check_mask_matches(model, mask);
    const int b = model.quant.bitwidth;
    QuantizedModel out = model;
    for (std::size_t li = 0; li < out.layers.size(); ++li) {
        auto& codes = out.layers[li].codes;
        const auto& idx = mask.layers[li];
        for (std::size_t w = 0; w < codes.size(); ++w)
            if (idx[w] != 0)
                codes[w] = static_cast<Code>(apply_faults(codes[w], FaultPattern::from_index(idx[w], b)));
    }
    return out;
}

struct LayerErrorMetrics {
    std::size_t weights = 0;
    double mse = 0.0;
    double max_abs = 0.0;
};

struct WeightErrorMetrics {
    std::vector<LayerErrorMetrics> layers;  // aligned with model layers
    std::size_t weights = 0;
    double mse = 0.0;      // mean over all weights of (scale * delta_code)^2
    double max_abs = 0.0;  // max |scale * delta_code|
};

inline WeightErrorMetrics weight_error_metrics(const QuantizedModel& reference, const QuantizedModel& other)
{
    if (reference.layers.size() != other.layers.size())
        throw ConfigError("models have different layer counts");
    WeightErrorMetrics m;
    m.layers.resize(reference.layers.size());
    double total_sq = 0.0;
    for (std::size_t li = 0; li < reference.layers.size(); ++li) {
        const auto& a = reference.layers[li];
        const auto& b = other.layers[li];
        if (a.spec != b.spec || a.codes.size() != b.codes.size())
            throw ConfigError("layer " + std::to_string(li) + " differs in shape");
        if (a.spec.has_weights() && a.scale.scale != b.scale.scale)
            throw ConfigError("layer " + std::to_string(li) + " differs in scale");
        auto& lm = m.layers[li];
        lm.weights = a.codes.size();
        double sq = 0.0;
        for (std::size_t w = 0; w < a.codes.size(); ++w) {
            const double d = a.scale.scale * (double(b.codes[w]) - double(a.codes[w]));
            sq += d * d;
            lm.max_abs = std::max(lm.max_abs, std::abs(d));
        }
        lm.mse = lm.weights ? sq / double(lm.weights) : 0.0;
        total_sq += sq;
        m.weights += lm.weights;
        m.max_abs = std::max(m.max_abs, lm.max_abs);
    }
    m.mse = m.weights ? total_sq / double(m.weights) : 0.0;
    return m;
}

}  // namespace faqsim
