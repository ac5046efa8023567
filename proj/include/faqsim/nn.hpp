#pragma once

// Desk-scale inference engine and manual-gradient SGD trainer.
//
// Networks run one sample at a time in double precision. Quantized models
// are dequantized (code * scale) before execution; activations stay real
// unless fake quantization is requested.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dataset.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "numfmt.hpp"
#include "random.hpp"

namespace faqsim::nn {

struct Tensor {
    Shape shape;
    std::vector<double> data;

    std::size_t size() const { return shape_size(shape); }
    friend bool operator==(const Tensor&, const Tensor&) = default;
};

// Per-activation-tensor fake quantization: scales[0] for the input,
// scales[i + 1] for the output of layer i.
struct ActivationQuant {
    QuantSpec quant;
    std::vector<double> scales;
};

namespace detail {

inline void conv_forward(const LayerSpec& s, const Shape& in_shape, const Shape& out_shape, const double* in,
                         const double* w, const double* b, double* out)
{
    const int H = in_shape[1], W = in_shape[2];
    const int OH = out_shape[1], OW = out_shape[2];
    const int cg = s.in_channels / s.groups;
    const int kg = s.out_channels / s.groups;
    for (int k = 0; k < s.out_channels; ++k) {
        const int c0 = (k / kg) * cg;
        const double* wk = w + std::size_t(k) * cg * s.kernel_h * s.kernel_w;
        for (int oy = 0; oy < OH; ++oy)
            for (int ox = 0; ox < OW; ++ox) {
                double acc = b[k];
                for (int c = 0; c < cg; ++c) {
                    const double* plane = in + std::size_t(c0 + c) * H * W;
                    const double* wc = wk + std::size_t(c) * s.kernel_h * s.kernel_w;
                    for (int r = 0; r < s.kernel_h; ++r) {
                        const int iy = oy * s.stride - s.padding + r;
                        if (iy < 0 || iy >= H) continue;
                        for (int q = 0; q < s.kernel_w; ++q) {
                            const int ix = ox * s.stride - s.padding + q;
                            if (ix < 0 || ix >= W) continue;
                            acc += wc[r * s.kernel_w + q] * plane[iy * W + ix];
                        }
                    }
                }
                out[(std::size_t(k) * OH + oy) * OW + ox] = acc;
            }
    }
}

inline void conv_backward(const LayerSpec& s, const Shape& in_shape, const Shape& out_shape, const double* in,
                          const double* w, const double* grad_out, double* grad_in, double* grad_w,
                          double* grad_b)
{
    const int H = in_shape[1], W = in_shape[2];
    const int OH = out_shape[1], OW = out_shape[2];
    const int cg = s.in_channels / s.groups;
    const int kg = s.out_channels / s.groups;
    for (int k = 0; k < s.out_channels; ++k) {
        const int c0 = (k / kg) * cg;
        const std::size_t wk = std::size_t(k) * cg * s.kernel_h * s.kernel_w;
        for (int oy = 0; oy < OH; ++oy)
            for (int ox = 0; ox < OW; ++ox) {
                const double g = grad_out[(std::size_t(k) * OH + oy) * OW + ox];
                if (g == 0.0) continue;
                grad_b[k] += g;
                for (int c = 0; c < cg; ++c) {
                    const std::size_t plane = std::size_t(c0 + c) * H * W;
                    const std::size_t wc = wk + std::size_t(c) * s.kernel_h * s.kernel_w;
                    for (int r = 0; r < s.kernel_h; ++r) {
                        const int iy = oy * s.stride - s.padding + r;
                        if (iy < 0 || iy >= H) continue;
                        for (int q = 0; q < s.kernel_w; ++q) {
                            const int ix = ox * s.stride - s.padding + q;
                            if (ix < 0 || ix >= W) continue;
                            const std::size_t wi = wc + r * s.kernel_w + q;
                            const std::size_t ii = plane + iy * W + ix;
                            grad_w[wi] += g * in[ii];
                            grad_in[ii] += g * w[wi];
                        }
                    }
                }
            }
    }
}

inline void fc_forward(const LayerSpec& s, const double* in, const double* w, const double* b, double* out)
{
    for (int o = 0; o < s.out_features; ++o) {
        const double* row = w + std::size_t(o) * s.in_features;
        double acc = b[o];
        for (int i = 0; i < s.in_features; ++i) acc += row[i] * in[i];
        out[o] = acc;
    }
}

inline void fc_backward(const LayerSpec& s, const double* in, const double* w, const double* grad_out,
                        double* grad_in, double* grad_w, double* grad_b)
{
    for (int o = 0; o < s.out_features; ++o) {
        const double g = grad_out[o];
        if (g == 0.0) continue;
        grad_b[o] += g;
        const std::size_t row = std::size_t(o) * s.in_features;
        for (int i = 0; i < s.in_features; ++i) {
            grad_w[row + i] += g * in[i];
            grad_in[i] += g * w[row + i];
        }
    }
}

// Index into `in` of the maximum of the 2x2 window (first in scan order).
inline std::size_t pool_argmax(const Shape& in_shape, const double* in, int c, int oy, int ox)
{
    const int H = in_shape[1], W = in_shape[2];
    std::size_t best = (std::size_t(c) * H + 2 * oy) * W + 2 * ox;
    for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
            const std::size_t i = (std::size_t(c) * H + 2 * oy + dy) * W + 2 * ox + dx;
            if (in[i] > in[best]) best = i;
        }
    return best;
}

}  // namespace detail

// Activation shapes: [0] the input, [i + 1] the output of layer i.
inline std::vector<Shape> activation_shapes(const Network& net)
{
    std::vector<Shape> shapes{net.input_shape};
    for (const auto& l : net.layers) shapes.push_back(l.spec.output_shape(shapes.back()));
    return shapes;
}

struct ForwardTrace {
    std::vector<Shape> shapes;
    std::vector<std::vector<double>> acts;

    const std::vector<double>& output() const { return acts.back(); }
};

inline void run_forward(const Network& net, std::span<const double> x, ForwardTrace& t,
                        const ActivationQuant* aq = nullptr)
{
    if (t.shapes.size() != net.layers.size() + 1) t.shapes = activation_shapes(net);
    if (x.size() != shape_size(net.input_shape))
        throw ShapeError("input has " + std::to_string(x.size()) + " elements, network expects " +
                         shape_string(net.input_shape));
    if (aq && aq->scales.size() != net.layers.size() + 1)
        throw ConfigError("activation scales do not match the network");
    t.acts.resize(net.layers.size() + 1);
    t.acts[0].assign(x.begin(), x.end());
    auto fake_quant = [&](std::vector<double>& a, std::size_t i) {
        if (!aq) return;
        for (auto& v : a) v = numfmt::fake_quantize(v, aq->scales[i], aq->quant);
    };
    fake_quant(t.acts[0], 0);

    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const auto& layer = net.layers[li];
        const auto& s = layer.spec;
        const auto& in = t.acts[li];
        auto& out = t.acts[li + 1];
        out.assign(shape_size(t.shapes[li + 1]), 0.0);
        switch (s.kind) {
        case LayerKind::conv2d:
            detail::conv_forward(s, t.shapes[li], t.shapes[li + 1], in.data(), layer.weights.data(),
                                 layer.bias.data(), out.data());
            break;
        case LayerKind::fc:
            detail::fc_forward(s, in.data(), layer.weights.data(), layer.bias.data(), out.data());
            break;
        case LayerKind::relu:
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, in[i]);
            break;
        case LayerKind::maxpool2x2: {
            const auto& os = t.shapes[li + 1];
            for (int c = 0; c < os[0]; ++c)
                for (int oy = 0; oy < os[1]; ++oy)
                    for (int ox = 0; ox < os[2]; ++ox)
                        out[(std::size_t(c) * os[1] + oy) * os[2] + ox] =
                            in[detail::pool_argmax(t.shapes[li], in.data(), c, oy, ox)];
            break;
        }
        case LayerKind::flatten:
            out = in;
            break;
        }
        if (s.has_weights() && s.activation == Activation::relu)
            for (auto& v : out) v = std::max(0.0, v);
        fake_quant(out, li + 1);
    }
}

struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> bias;

    static Gradients zeros_like(const Network& net)
    {
        Gradients g;
        for (const auto& l : net.layers) {
            g.weights.emplace_back(l.weights.size(), 0.0);
            g.bias.emplace_back(l.bias.size(), 0.0);
        }
        return g;
    }
    void clear()
    {
        for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
        for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
    }
};

// Accumulates d(loss)/d(params) into `g` given d(loss)/d(output).
inline void run_backward(const Network& net, const ForwardTrace& t, std::vector<double> grad, Gradients& g)
{
    std::vector<double> grad_in;
    for (std::size_t li = net.layers.size(); li-- > 0;) {
        const auto& layer = net.layers[li];
        const auto& s = layer.spec;
        const auto& in = t.acts[li];
        const auto& out = t.acts[li + 1];
        grad_in.assign(in.size(), 0.0);
        if (s.has_weights() && s.activation == Activation::relu)
            for (std::size_t i = 0; i < grad.size(); ++i)
                if (out[i] <= 0.0) grad[i] = 0.0;
        switch (s.kind) {
        case LayerKind::conv2d:
            detail::conv_backward(s, t.shapes[li], t.shapes[li + 1], in.data(), layer.weights.data(), grad.data(),
                                  grad_in.data(), g.weights[li].data(), g.bias[li].data());
            break;
        case LayerKind::fc:
            detail::fc_backward(s, in.data(), layer.weights.data(), grad.data(), grad_in.data(),
                                g.weights[li].data(), g.bias[li].data());
            break;
        case LayerKind::relu:
            for (std::size_t i = 0; i < in.size(); ++i) grad_in[i] = in[i] > 0.0 ? grad[i] : 0.0;
            break;
        case LayerKind::maxpool2x2: {
            const auto& os = t.shapes[li + 1];
            for (int c = 0; c < os[0]; ++c)
                for (int oy = 0; oy < os[1]; ++oy)
                    for (int ox = 0; ox < os[2]; ++ox)
                        grad_in[detail::pool_argmax(t.shapes[li], in.data(), c, oy, ox)] +=
                            grad[(std::size_t(c) * os[1] + oy) * os[2] + ox];
            break;
        }
        case LayerKind::flatten:
            grad_in = grad;
            break;
        }
        grad.swap(grad_in);
    }
}

// Softmax cross-entropy; writes d(loss)/d(logits) into `grad`.
inline double softmax_cross_entropy(std::span<const double> logits, int label, std::vector<double>& grad)
{
    const double m = *std::max_element(logits.begin(), logits.end());
    grad.resize(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) z += (grad[i] = std::exp(logits[i] - m));
    for (auto& p : grad) p /= z;
    const double loss = -std::log(std::max(grad[label], std::numeric_limits<double>::min()));
    grad[label] -= 1.0;
    return loss;
}

// Lowest index wins on ties.
inline int argmax(std::span<const double> v) noexcept
{
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline double loss_and_gradients(const Network& net, std::span<const double> x, int label, Gradients& g)
{
    ForwardTrace t;
    run_forward(net, x, t);
    std::vector<double> grad;
    const double loss = softmax_cross_entropy(t.output(), label, grad);
    run_backward(net, t, std::move(grad), g);
    return loss;
}

inline ActivationQuant activation_quant_of(const QuantizedModel& model)
{
    if (model.activation_scales.size() != model.layers.size() + 1)
        throw ConfigError("model has no calibrated activation scales");
    ActivationQuant aq{model.quant, {}};
    for (const auto& s : model.activation_scales) aq.scales.push_back(s.scale);
    return aq;
}

// Logits for a batch (N, ...) or a single sample shaped like the model input.
inline Tensor forward(const Network& net, const Tensor& input, const ActivationQuant* aq = nullptr)
{
    const auto sample = shape_size(net.input_shape);
    std::size_t n = 0;
    if (input.shape == net.input_shape) {
        n = 1;
    } else if (input.shape.size() == net.input_shape.size() + 1 &&
               std::equal(net.input_shape.begin(), net.input_shape.end(), input.shape.begin() + 1)) {
        n = static_cast<std::size_t>(input.shape[0]);
    } else {
        throw ShapeError("input shape " + shape_string(input.shape) + " does not match network input " +
                         shape_string(net.input_shape));
    }
    if (input.data.size() != n * sample) throw ShapeError("input element count does not match its shape");
    ForwardTrace t;
    Tensor out;
    for (std::size_t i = 0; i < n; ++i) {
        run_forward(net, {input.data.data() + i * sample, sample}, t, aq);
        out.data.insert(out.data.end(), t.output().begin(), t.output().end());
    }
    out.shape = {static_cast<int>(n), static_cast<int>(shape_size(activation_shapes(net).back()))};
    return out;
}

inline Tensor forward(const QuantizedModel& model, const Tensor& input, bool fake_quant_activations = false)
{
    model.validate();
    const auto net = dequantize_model(model);
    if (!fake_quant_activations) return forward(net, input);
    const auto aq = activation_quant_of(model);
    return forward(net, input, &aq);
}

inline double evaluate(const Network& net, const Dataset& ds, const ActivationQuant* aq = nullptr)
{
    if (ds.size() == 0) throw InputError("cannot evaluate on an empty dataset");
    if (ds.sample_shape != net.input_shape)
        throw ShapeError("dataset samples " + shape_string(ds.sample_shape) + " do not match network input " +
                         shape_string(net.input_shape));
    ForwardTrace t;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        run_forward(net, ds.sample(i), t, aq);
        if (argmax(t.output()) == ds.labels[i]) ++correct;
    }
    return double(correct) / double(ds.size());
}

inline double evaluate(const QuantizedModel& model, const Dataset& ds, bool fake_quant_activations = false)
{
    model.validate();
    const auto net = dequantize_model(model);
    if (!fake_quant_activations) return evaluate(net, ds);
    const auto aq = activation_quant_of(model);
    return evaluate(net, ds, &aq);
}

// Max-abs scale of every activation tensor over one pass of `batch`.
inline std::vector<ScaleFactor> calibrate_activation_scales(const QuantizedModel& model, const Dataset& batch)
{
    if (batch.size() == 0) throw InputError("calibration batch is empty");
    model.validate();
    const auto net = dequantize_model(model);
    std::vector<double> max_abs(net.layers.size() + 1, 0.0);
    ForwardTrace t;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        run_forward(net, batch.sample(i), t);
        for (std::size_t a = 0; a < t.acts.size(); ++a)
            for (double v : t.acts[a]) max_abs[a] = std::max(max_abs[a], std::abs(v));
    }
    std::vector<ScaleFactor> scales;
    for (std::size_t a = 0; a < max_abs.size(); ++a) {
        const double m = max_abs[a];
        scales.push_back({m == 0.0 ? 1.0 : m / model.quant.max_code(), "act" + std::to_string(a)});
    }
    return scales;
}

// ---------------------------------------------------------------------------
// Training

enum class Architecture { mlp2, smallcnn };

inline Architecture architecture_from_string(std::string_view s)
{
    if (s == "mlp2") return Architecture::mlp2;
    if (s == "smallcnn") return Architecture::smallcnn;
    throw KindError("unsupported architecture '" + std::string(s) + "' (expected mlp2 or smallcnn)");
}

inline std::string_view to_string(Architecture a) noexcept
{
    return a == Architecture::mlp2 ? "mlp2" : "smallcnn";
}

struct TrainOptions {
    int epochs = 20;
    double learning_rate = 0.05;
    int batch_size = 16;
    std::uint64_t seed = 1;
    int hidden1 = 64;   // mlp2 hidden widths
    int hidden2 = 32;
    int channels1 = 8;  // smallcnn conv widths
    int channels2 = 16;
    QuantSpec quant{};
};

inline constexpr std::size_t max_fixture_parameters = 100'000;

// mlp2: [flatten] fc-relu, fc-relu, fc.
// smallcnn: conv3x3-relu, pool, conv3x3-relu, pool, flatten, fc.
inline std::vector<LayerSpec> make_architecture(Architecture arch, const Shape& input, int classes,
                                                const TrainOptions& opt = {})
{
    std::vector<LayerSpec> layers;
    if (arch == Architecture::mlp2) {
        if (input.size() != 1) layers.push_back(LayerSpec::of(LayerKind::flatten));
        const int d = static_cast<int>(shape_size(input));
        layers.push_back(LayerSpec::fc(d, opt.hidden1, Activation::relu));
        layers.push_back(LayerSpec::fc(opt.hidden1, opt.hidden2, Activation::relu));
        layers.push_back(LayerSpec::fc(opt.hidden2, classes));
    } else {
        if (input.size() != 3 || input[1] < 4 || input[2] < 4)
            throw ShapeError("smallcnn needs (C,H>=4,W>=4) input");
        layers.push_back(LayerSpec::conv(input[0], opt.channels1, 3, 1, 1, Activation::relu));
        layers.push_back(LayerSpec::of(LayerKind::maxpool2x2));
        layers.push_back(LayerSpec::conv(opt.channels1, opt.channels2, 3, 1, 1, Activation::relu));
        layers.push_back(LayerSpec::of(LayerKind::maxpool2x2));
        layers.push_back(LayerSpec::of(LayerKind::flatten));
        layers.push_back(LayerSpec::fc(opt.channels2 * (input[1] / 4) * (input[2] / 4), classes));
    }
    std::size_t params = 0;
    for (const auto& l : layers) params += l.weight_count() + l.outputs();
    if (params > max_fixture_parameters) throw KindError("fixture architecture exceeds 100k parameters");
    return layers;
}

// He-uniform weights, zero biases.
inline Network init_network(const Shape& input, const std::vector<LayerSpec>& layers, std::uint64_t seed)
{
    Network net{input, {}};
    Rng rng(derive_seed(seed, seed_stream::init));
    Shape s = input;
    for (const auto& spec : layers) {
        s = spec.output_shape(s);
        RealLayer l{spec, {}, {}};
        if (spec.has_weights()) {
            const double bound = std::sqrt(6.0 / double(spec.fan_in()));
            l.weights.resize(spec.weight_count());
            for (auto& w : l.weights) w = rng.uniform(-bound, bound);
            l.bias.assign(spec.outputs(), 0.0);
        }
        net.layers.push_back(std::move(l));
    }
    return net;
}

// Writes the weights the forward pass should see, given the trained ones.
using WeightView = std::function<void(const Network& real, Network& effective)>;

// One epoch of minibatch SGD. With a view, gradients are taken at the
// effective weights and applied to the real ones (straight-through).
inline double sgd_epoch(Network& net, const Dataset& ds, double learning_rate, int batch_size, Rng& rng,
                        const WeightView& view = {})
{
    if (ds.size() == 0) throw InputError("cannot train on an empty dataset");
    if (batch_size < 1) throw InputError("batch size must be >= 1");
    std::vector<std::size_t> order(ds.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order.begin(), order.end());

    Network effective = net;
    auto grads = Gradients::zeros_like(net);
    ForwardTrace t;
    std::vector<double> grad_out;
    double total_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + std::size_t(batch_size));
        if (view) view(net, effective);
        const Network& used = view ? effective : net;
        grads.clear();
        for (std::size_t k = start; k < end; ++k) {
            const auto i = order[k];
            run_forward(used, ds.sample(i), t);
            total_loss += softmax_cross_entropy(t.output(), ds.labels[i], grad_out);
            run_backward(used, t, grad_out, grads);
        }
        const double step = learning_rate / double(end - start);
        for (std::size_t li = 0; li < net.layers.size(); ++li) {
            auto& l = net.layers[li];
            for (std::size_t j = 0; j < l.weights.size(); ++j) l.weights[j] -= step * grads.weights[li][j];
            for (std::size_t j = 0; j < l.bias.size(); ++j) l.bias[j] -= step * grads.bias[li][j];
        }
    }
    return total_loss / double(ds.size());
}

inline Network train_network(const Dataset& ds, Architecture arch, const TrainOptions& opt)
{
    ds.validate();
    auto net = init_network(ds.sample_shape, make_architecture(arch, ds.sample_shape, ds.classes, opt), opt.seed);
    Rng rng(derive_seed(opt.seed, seed_stream::data));
    for (int e = 0; e < opt.epochs; ++e) sgd_epoch(net, ds, opt.learning_rate, opt.batch_size, rng);
    return net;
}

inline QuantizedModel train_fixture(const Dataset& ds, Architecture arch, const TrainOptions& opt)
{
    return quantize_network(train_network(ds, arch, opt), opt.quant);
}

}  // namespace faqsim::nn
