#pragma once

// Weight-stationary placement of model weights onto the physical weight
// buffer, and the per-weight error mask that results from a fault map.
//
// Every weighted layer is viewed as a matrix with one filter (conv) or
// neuron (fc) per column; a filter is flattened channel-major, then kernel
// row, then kernel column. The matrix is cut into buffer-sized blocks that
// are loaded one after another into the same buffer, so logical cell (r, c)
// lives in physical cell (r mod rows, c mod cols).

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "faultmodel.hpp"
#include "model.hpp"

namespace faqsim {

struct DataflowConfig {
    std::size_t buffer_rows = 256;
    std::size_t buffer_cols = 256;
    int bitwidth = 8;
    bool pfll = false;  // first and last weighted layers run on fault-free memory

    void validate() const
    {
        if (buffer_rows < 1 || buffer_cols < 1) throw ConfigError("buffer dimensions must be >= 1");
        numfmt::check_bitwidth(bitwidth);
    }

    friend bool operator==(const DataflowConfig&, const DataflowConfig&) = default;
};

struct MatrixCoord {
    std::size_t row = 0;
    std::size_t col = 0;
    friend bool operator==(const MatrixCoord&, const MatrixCoord&) = default;
};

// Logical matrix of one weighted layer. Weight tensors are stored with the
// output index outermost, so flat index w sits at (w mod fan_in, w / fan_in).
class LayerMatrix {
public:
    explicit LayerMatrix(const LayerSpec& spec)
    {
        if (!spec.has_weights())
            throw KindError("layer kind " + std::string(to_string(spec.kind)) + " has no weight matrix");
        spec.validate();
        rows_ = spec.fan_in();
        cols_ = spec.outputs();
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return rows_ * cols_; }

    MatrixCoord coord_of(std::size_t flat_weight) const
    {
        if (flat_weight >= size()) throw IndexError("weight index outside layer");
        return {flat_weight % rows_, flat_weight / rows_};
    }

    std::size_t weight_at(MatrixCoord m) const
    {
        if (m.row >= rows_ || m.col >= cols_) throw IndexError("matrix coordinate outside layer");
        return m.col * rows_ + m.row;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
};

inline LayerMatrix layer_to_matrix(const LayerSpec& spec)
{
    return LayerMatrix(spec);
}

// Convolution weight (k, c, r, s) -> matrix coordinate.
inline MatrixCoord conv_weight_coord(const LayerSpec& spec, int k, int c, int r, int s)
{
    const auto w = ((std::size_t(k) * (spec.in_channels / spec.groups) + c) * spec.kernel_h + r) * spec.kernel_w + s;
    return LayerMatrix(spec).coord_of(w);
}

inline CellCoord map_to_memory(MatrixCoord m, const DataflowConfig& config)
{
    return {m.row % config.buffer_rows, m.col % config.buffer_cols};
}

struct ErrorMask {
    DataflowConfig config;
    std::uint64_t fault_seed = 0;
    double fault_rate = 0.0;
    // Aligned with model layers; empty for parameter-free layers.
    std::vector<std::vector<std::uint32_t>> layers;

    std::size_t weight_count() const noexcept
    {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.size();
        return n;
    }

    friend bool operator==(const ErrorMask&, const ErrorMask&) = default;
};

inline ErrorMask build_error_mask(const QuantizedModel& model, const FaultMap& map, const DataflowConfig& config)
{
    config.validate();
    if (map.bitwidth() != model.quant.bitwidth || config.bitwidth != model.quant.bitwidth)
        throw ConfigError("fault map / dataflow bitwidth does not match the model bitwidth");
    if (map.rows() != config.buffer_rows || map.cols() != config.buffer_cols)
        throw ConfigError("fault map dimensions do not match the dataflow buffer");

    ErrorMask mask;
    mask.config = config;
    mask.fault_seed = map.seed();
    mask.fault_rate = map.fault_rate();
    mask.layers.resize(model.layers.size());

    const auto cell_index = map.pattern_indices();
    const auto weighted = model.weighted_layers();
    for (std::size_t li : weighted) {
        const auto& layer = model.layers[li];
        auto& out = mask.layers[li];
        out.assign(layer.codes.size(), 0);
        const bool is_protected = config.pfll && (li == weighted.front() || li == weighted.back());
        if (is_protected) continue;
        const LayerMatrix mat(layer.spec);
        // Column-major walk over the matrix = sequential walk over weights.
        std::size_t w = 0;
        for (std::size_t c = 0; c < mat.cols(); ++c) {
            const std::size_t base = (c % config.buffer_cols);
            for (std::size_t r = 0; r < mat.rows(); ++r, ++w)
                out[w] = cell_index[(r % config.buffer_rows) * config.buffer_cols + base];
        }
    }
    return mask;
}

inline void check_mask_matches(const QuantizedModel& model, const ErrorMask& mask)
{
    if (mask.layers.size() != model.layers.size())
        throw ConfigError("error mask layer count does not match the model");
    for (std::size_t i = 0; i < model.layers.size(); ++i)
        if (mask.layers[i].size() != model.layers[i].codes.size())
            throw ConfigError("error mask shape does not match layer " + std::to_string(i));
    if (mask.config.bitwidth != model.quant.bitwidth)
        throw ConfigError("error mask bitwidth does not match the model");
}

// Audit dump: one line per weight, "layer weight row col -> cell_row cell_col pattern".
// Blocks are traversed row-major over the block grid, then row-major inside a block.
inline void write_mapping_trace(std::ostream& os, const QuantizedModel& model, const ErrorMask& mask)
{
    check_mask_matches(model, mask);
    const auto& cfg = mask.config;
    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        if (!model.layers[li].spec.has_weights()) continue;
        const LayerMatrix mat(model.layers[li].spec);
        for (std::size_t br = 0; br < mat.rows(); br += cfg.buffer_rows)
            for (std::size_t bc = 0; bc < mat.cols(); bc += cfg.buffer_cols)
                for (std::size_t r = br; r < std::min(mat.rows(), br + cfg.buffer_rows); ++r)
                    for (std::size_t c = bc; c < std::min(mat.cols(), bc + cfg.buffer_cols); ++c) {
                        const auto w = mat.weight_at({r, c});
                        const auto cell = map_to_memory({r, c}, cfg);
                        os << li << ' ' << w << ' ' << r << ' ' << c << " -> " << cell.row << ' '
                           << cell.col << ' ' << mask.layers[li][w] << '\n';
                    }
    }
}

}  // namespace faqsim
