#pragma once

// Fault-aware retraining with or without FAQ in the loop.
//
// Every SGD step sees the weights as the faulty buffer returns them:
// real weights are quantized with the model's fixed scales, optionally
// projected through the lookup table, then read through the fault mask.
// Gradients at those weights update the real weights (straight-through).

#include <cstdint>
#include <optional>
#include <vector>

#include "faq.hpp"
#include "nn.hpp"

namespace faqsim::nn {

struct RetrainOptions {
    int epochs = 5;
    double learning_rate = 0.02;
    int batch_size = 16;
    std::uint64_t seed = 1;
    bool use_faq = true;
};

struct RetrainResult {
    QuantizedModel model;        // codes to store in the faulty buffer
    std::vector<double> trace;   // accuracy after 0..epochs epochs, as read through the faults
};

namespace retrain_detail {

struct LayerFaults {
    std::vector<std::uint32_t> index;
    std::vector<std::uint32_t> sa0;
    std::vector<std::uint32_t> sa1;
};

inline std::vector<LayerFaults> expand_mask(const ErrorMask& mask, int bitwidth)
{
    std::vector<LayerFaults> out(mask.layers.size());
    for (std::size_t li = 0; li < mask.layers.size(); ++li) {
        auto& lf = out[li];
        lf.index = mask.layers[li];
        lf.sa0.resize(lf.index.size());
        lf.sa1.resize(lf.index.size());
        for (std::size_t w = 0; w < lf.index.size(); ++w) {
            const auto p = FaultPattern::from_index(lf.index[w], bitwidth);
            lf.sa0[w] = p.sa0_mask();
            lf.sa1[w] = p.sa1_mask();
        }
    }
    return out;
}

}  // namespace retrain_detail

inline RetrainResult retrain_with_faq(const QuantizedModel& model, const ErrorMask& mask, const LookupTable& lut,
                                      const Dataset& train, const Dataset& eval, const RetrainOptions& opt)
{
    model.validate();
    check_mask_matches(model, mask);
    if (lut.bitwidth() != model.quant.bitwidth) throw ConfigError("lookup table bitwidth does not match the model");
    if (opt.epochs < 0) throw InputError("epochs must be >= 0");

    const auto& q = model.quant;
    const auto faults = retrain_detail::expand_mask(mask, q.bitwidth);
    const std::uint32_t width = BitPattern::width_mask(q.bitwidth);
    const std::uint32_t sign = 1u << (q.bitwidth - 1);

    // Code the buffer should hold for a real weight, and the code it returns.
    auto stored_code = [&](double w, std::size_t li, std::size_t j) {
        int c = numfmt::quantize_value(w, model.layers[li].scale.scale, q);
        if (opt.use_faq) c = lut.at_unchecked(faults[li].index[j], c);
        return c;
    };
    auto read_code = [&](int c, std::size_t li, std::size_t j) {
        const auto bits = ((static_cast<std::uint32_t>(c) & width) & ~faults[li].sa0[j]) | faults[li].sa1[j];
        return static_cast<int>(bits ^ sign) - static_cast<int>(sign);
    };
    const WeightView view = [&](const Network& real, Network& eff) {
        for (std::size_t li = 0; li < real.layers.size(); ++li) {
            const auto& rl = real.layers[li];
            auto& el = eff.layers[li];
            if (!rl.spec.has_weights()) continue;
            const double scale = model.layers[li].scale.scale;
            for (std::size_t j = 0; j < rl.weights.size(); ++j)
                el.weights[j] = read_code(stored_code(rl.weights[j], li, j), li, j) * scale;
            el.bias = rl.bias;
        }
    };

    Network real = dequantize_model(model);
    Network effective = real;
    RetrainResult result;
    auto record = [&] {
        view(real, effective);
        result.trace.push_back(evaluate(effective, eval));
    };
    record();
    Rng rng(derive_seed(opt.seed, seed_stream::data));
    for (int e = 0; e < opt.epochs; ++e) {
        sgd_epoch(real, train, opt.learning_rate, opt.batch_size, rng, view);
        record();
    }

    result.model = model;
    for (std::size_t li = 0; li < real.layers.size(); ++li) {
        auto& ql = result.model.layers[li];
        if (!ql.spec.has_weights()) continue;
        if (opt.epochs > 0) ql.bias = real.layers[li].bias;
        // At epoch 0 the real weights are exactly code * scale, so this
        // reproduces the input codes (projected when FAQ is on).
        for (std::size_t j = 0; j < ql.codes.size(); ++j)
            ql.codes[j] = static_cast<Code>(stored_code(real.layers[li].weights[j], li, j));
    }
    return result;
}

}  // namespace faqsim::nn
