#pragma once

// Layer topology plus the two parameterisations used throughout:
// QuantizedModel (integer codes + per-tensor scale) and Network (reals,
// used by the inference engine and the trainer).

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "numfmt.hpp"

namespace faqsim {

enum class LayerKind { conv2d, fc, relu, maxpool2x2, flatten };
enum class Activation { linear, relu };

inline std::string_view to_string(LayerKind k) noexcept
{
    switch (k) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::fc: return "fc";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2x2: return "maxpool2x2";
    case LayerKind::flatten: return "flatten";
    }
    return "?";
}

inline LayerKind layer_kind_from_string(std::string_view s)
{
    for (auto k : {LayerKind::conv2d, LayerKind::fc, LayerKind::relu, LayerKind::maxpool2x2, LayerKind::flatten})
        if (to_string(k) == s) return k;
    throw KindError("unknown layer kind '" + std::string(s) + "'");
}

inline std::string_view to_string(Activation a) noexcept
{
    return a == Activation::relu ? "relu" : "linear";
}

inline Activation activation_from_string(std::string_view s)
{
    if (s == "relu") return Activation::relu;
    if (s == "linear") return Activation::linear;
    throw KindError("unknown activation '" + std::string(s) + "'");
}

using Shape = std::vector<int>;

inline std::size_t shape_size(const Shape& s)
{
    return std::accumulate(s.begin(), s.end(), std::size_t{1},
                           [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
}

inline std::string shape_string(const Shape& s)
{
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
    return out + ")";
}

struct LayerSpec {
    LayerKind kind = LayerKind::fc;
    // conv2d
    int in_channels = 0;
    int out_channels = 0;
    int kernel_h = 0;
    int kernel_w = 0;
    int stride = 1;
    int padding = 0;
    int groups = 1;
    // fc
    int in_features = 0;
    int out_features = 0;
    // F applied to the weighted sum
    Activation activation = Activation::linear;

    static LayerSpec conv(int in_c, int out_c, int kernel, int stride = 1, int padding = 0,
                          Activation act = Activation::linear, int groups = 1)
    {
        LayerSpec s;
        s.kind = LayerKind::conv2d;
        s.in_channels = in_c;
        s.out_channels = out_c;
        s.kernel_h = s.kernel_w = kernel;
        s.stride = stride;
        s.padding = padding;
        s.groups = groups;
        s.activation = act;
        return s;
    }
    static LayerSpec fc(int in, int out, Activation act = Activation::linear)
    {
        LayerSpec s;
        s.kind = LayerKind::fc;
        s.in_features = in;
        s.out_features = out;
        s.activation = act;
        return s;
    }
    static LayerSpec of(LayerKind k)
    {
        LayerSpec s;
        s.kind = k;
        return s;
    }

    bool has_weights() const noexcept { return kind == LayerKind::conv2d || kind == LayerKind::fc; }

    // Weights feeding one output filter/neuron (one buffer column).
    std::size_t fan_in() const noexcept
    {
        if (kind == LayerKind::conv2d)
            return std::size_t(in_channels / groups) * kernel_h * kernel_w;
        if (kind == LayerKind::fc) return std::size_t(in_features);
        return 0;
    }
    std::size_t outputs() const noexcept
    {
        if (kind == LayerKind::conv2d) return std::size_t(out_channels);
        if (kind == LayerKind::fc) return std::size_t(out_features);
        return 0;
    }
    std::size_t weight_count() const noexcept { return fan_in() * outputs(); }

    // conv: (K, C/groups, R, S); fc: (out, in).
    Shape weight_shape() const
    {
        if (kind == LayerKind::conv2d) return {out_channels, in_channels / groups, kernel_h, kernel_w};
        if (kind == LayerKind::fc) return {out_features, in_features};
        return {};
    }

    void validate() const
    {
        if (kind == LayerKind::conv2d) {
            if (in_channels <= 0 || out_channels <= 0 || kernel_h <= 0 || kernel_w <= 0 || stride <= 0 ||
                padding < 0 || groups <= 0 || in_channels % groups != 0 || out_channels % groups != 0)
                throw ShapeError("invalid conv2d hyperparameters");
        } else if (kind == LayerKind::fc) {
            if (in_features <= 0 || out_features <= 0) throw ShapeError("invalid fc dimensions");
        }
    }

    Shape output_shape(const Shape& in) const
    {
        validate();
        switch (kind) {
        case LayerKind::conv2d: {
            if (in.size() != 3 || in[0] != in_channels)
                throw ShapeError("conv2d expects (" + std::to_string(in_channels) + ",H,W) input, got " +
                                 shape_string(in));
            const int oh = (in[1] + 2 * padding - kernel_h) / stride + 1;
            const int ow = (in[2] + 2 * padding - kernel_w) / stride + 1;
            if (in[1] + 2 * padding < kernel_h || in[2] + 2 * padding < kernel_w)
                throw ShapeError("conv2d kernel larger than padded input");
            return {out_channels, oh, ow};
        }
        case LayerKind::fc:
            if (in.size() != 1 || in[0] != in_features)
                throw ShapeError("fc expects (" + std::to_string(in_features) + ") input, got " + shape_string(in));
            return {out_features};
        case LayerKind::relu:
            return in;
        case LayerKind::maxpool2x2:
            if (in.size() != 3 || in[1] < 2 || in[2] < 2)
                throw ShapeError("maxpool2x2 expects (C,H>=2,W>=2) input, got " + shape_string(in));
            return {in[0], in[1] / 2, in[2] / 2};
        case LayerKind::flatten:
            return {static_cast<int>(shape_size(in))};
        }
        throw KindError("unknown layer kind");
    }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct QuantizedLayer {
    LayerSpec spec;
    std::vector<Code> codes;   // weight codes, laid out per spec.weight_shape()
    ScaleFactor scale;
    std::vector<double> bias;  // one per output; stays real-valued

    friend bool operator==(const QuantizedLayer&, const QuantizedLayer&) = default;
};

struct QuantizedModel {
    QuantSpec quant;
    Shape input_shape;
    std::vector<QuantizedLayer> layers;
    // Optional per-activation-tensor scales: index 0 is the network input,
    // index i + 1 the output of layer i.
    std::vector<ScaleFactor> activation_scales;
    std::optional<double> baseline_accuracy;

    std::vector<std::size_t> weighted_layers() const
    {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < layers.size(); ++i)
            if (layers[i].spec.has_weights()) out.push_back(i);
        return out;
    }

    std::size_t weight_count() const noexcept
    {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.codes.size();
        return n;
    }

    Shape output_shape() const
    {
        Shape s = input_shape;
        for (const auto& l : layers) s = l.spec.output_shape(s);
        return s;
    }

    void validate() const
    {
        quant.validate();
        if (input_shape.empty() || shape_size(input_shape) == 0)
            throw ShapeError("model input shape is empty");
        Shape s = input_shape;
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& l = layers[i];
            s = l.spec.output_shape(s);
            const std::string where = "layer " + std::to_string(i) + ": ";
            if (!l.spec.has_weights()) {
                if (!l.codes.empty() || !l.bias.empty())
                    throw ShapeError(where + "parameter-free layer carries parameters");
                continue;
            }
            if (l.codes.size() != l.spec.weight_count())
                throw ShapeError(where + "weight count does not match layer shape");
            if (!l.bias.empty() && l.bias.size() != l.spec.outputs())
                throw ShapeError(where + "bias length does not match outputs");
            if (!(std::isfinite(l.scale.scale) && l.scale.scale > 0.0))
                throw RangeError(where + "scale must be positive and finite");
            for (Code c : l.codes)
                if (c < quant.min_code() || c > quant.max_code())
                    throw RangeError(where + "weight code outside the representable range");
            for (double b : l.bias)
                if (!std::isfinite(b)) throw RangeError(where + "non-finite bias");
        }
        for (const auto& a : activation_scales)
            if (!(std::isfinite(a.scale) && a.scale > 0.0))
                throw RangeError("activation scale must be positive and finite");
        if (!activation_scales.empty() && activation_scales.size() != layers.size() + 1)
            throw ShapeError("activation scale count must be layers + 1");
    }

    friend bool operator==(const QuantizedModel&, const QuantizedModel&) = default;
};

struct RealLayer {
    LayerSpec spec;
    std::vector<double> weights;
    std::vector<double> bias;

    friend bool operator==(const RealLayer&, const RealLayer&) = default;
};

struct Network {
    Shape input_shape;
    std::vector<RealLayer> layers;

    friend bool operator==(const Network&, const Network&) = default;
};

inline Network dequantize_model(const QuantizedModel& model)
{
    Network net;
    net.input_shape = model.input_shape;
    net.layers.reserve(model.layers.size());
    for (const auto& l : model.layers) {
        RealLayer r{l.spec, {}, l.bias};
        if (l.spec.has_weights()) {
            r.weights = numfmt::dequantize(l.codes, l.scale);
            if (r.bias.empty()) r.bias.assign(l.spec.outputs(), 0.0);
        }
        net.layers.push_back(std::move(r));
    }
    return net;
}

// Per-tensor max-abs scale per weighted layer, then quantize.
inline QuantizedModel quantize_network(const Network& net, const QuantSpec& quant)
{
    QuantizedModel m;
    m.quant = quant;
    m.input_shape = net.input_shape;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& r = net.layers[i];
        QuantizedLayer q{r.spec, {}, {}, {}};
        if (r.spec.has_weights()) {
            q.scale = numfmt::compute_scale(r.weights, quant, "layer" + std::to_string(i) + ".weight");
            q.codes = numfmt::quantize(r.weights, q.scale, quant);
            q.bias = r.bias;
        }
        m.layers.push_back(std::move(q));
    }
    return m;
}

// Re-quantize with the scales of `reference` (used when retraining keeps
// the deployed scale factors fixed).
inline void requantize_into(const Network& net, QuantizedModel& model)
{
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& q = model.layers[i];
        if (!q.spec.has_weights()) continue;
        q.codes = numfmt::quantize(net.layers[i].weights, q.scale, model.quant);
        q.bias = net.layers[i].bias;
    }
}

}  // namespace faqsim
