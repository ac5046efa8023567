#pragma once

// Binary artifact formats and dataset ingestion.
//
// Every artifact starts with: 4-byte ASCII magic, u16 version, u16
// bitwidth, then a magic-specific number of u32 payload dimensions. All
// multi-byte fields are little-endian; bit planes are packed LSB-first.
// See docs/file_formats.md for the byte-level layout.

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dataset.hpp"
#include "errors.hpp"
#include "faultmodel.hpp"
#include "lut.hpp"
#include "mapper.hpp"
#include "model.hpp"

namespace faqsim::io {

inline constexpr std::uint16_t format_version = 1;

namespace magic {
inline constexpr std::string_view fault_map = "FQFM";
inline constexpr std::string_view lut = "FQLT";
inline constexpr std::string_view model = "FQMD";
inline constexpr std::string_view mask = "FQEM";
}  // namespace magic

using Bytes = std::vector<std::uint8_t>;

class ByteWriter {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) { put(v, 2); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void i16(std::int16_t v) { u16(static_cast<std::uint16_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
    void raw(const Bytes& b) { out_.insert(out_.end(), b.begin(), b.end()); }

    void header(std::string_view mg, int bitwidth, std::initializer_list<std::uint32_t> dims)
    {
        raw(mg);
        u16(format_version);
        u16(static_cast<std::uint16_t>(bitwidth));
        for (auto d : dims) u32(d);
    }

    Bytes take() { return std::move(out_); }
    const Bytes& bytes() const noexcept { return out_; }

private:
    void put(std::uint64_t v, int n)
    {
        for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    Bytes out_;
};

class ByteReader {
public:
    explicit ByteReader(const Bytes& data, std::string what) : data_(data), what_(std::move(what)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    std::int16_t i16() { return static_cast<std::int16_t>(u16()); }
    std::int8_t i8() { return static_cast<std::int8_t>(u8()); }
    double f64() { return std::bit_cast<double>(u64()); }

    std::string_view raw(std::size_t n)
    {
        need(n);
        std::string_view s(reinterpret_cast<const char*>(data_.data()) + pos_, n);
        pos_ += n;
        return s;
    }

    struct Header {
        int bitwidth = 0;
        std::vector<std::uint32_t> dims;
    };

    Header header(std::string_view expected_magic, std::size_t dim_count)
    {
        const auto mg = raw(4);
        if (mg != expected_magic)
            throw FormatError(what_ + ": bad magic (expected " + std::string(expected_magic) + ")");
        const auto version = u16();
        if (version != format_version)
            throw FormatError(what_ + ": unsupported version " + std::to_string(version));
        Header h;
        h.bitwidth = u16();
        if (h.bitwidth < 2 || h.bitwidth > 16) throw FormatError(what_ + ": invalid bitwidth");
        for (std::size_t i = 0; i < dim_count; ++i) h.dims.push_back(u32());
        return h;
    }

    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    std::size_t offset() const noexcept { return pos_; }

    void expect_end() const
    {
        if (remaining() != 0) throw FormatError(what_ + ": " + std::to_string(remaining()) + " trailing bytes");
    }

    [[noreturn]] void fail(const std::string& msg) const { throw FormatError(what_ + ": " + msg); }

private:
    void need(std::size_t n) const
    {
        if (remaining() < n)
            throw FormatError(what_ + ": truncated at offset " + std::to_string(pos_));
    }
    std::uint64_t get(int n)
    {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= std::uint64_t(data_[pos_ + i]) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    const Bytes& data_;
    std::string what_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Files

inline Bytes read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// Writes to "<path>.tmp" and renames on commit(); the temporary is removed
// if the object dies uncommitted, so failures never leave partial files.
class AtomicFile {
public:
    explicit AtomicFile(std::filesystem::path path) : path_(std::move(path)), tmp_(path_.string() + ".tmp")
    {
        out_.open(tmp_, std::ios::binary | std::ios::trunc);
        if (!out_) throw FormatError("cannot write " + path_.string());
    }
    AtomicFile(const AtomicFile&) = delete;
    AtomicFile& operator=(const AtomicFile&) = delete;
    ~AtomicFile()
    {
        if (!committed_) {
            out_.close();
            std::error_code ec;
            std::filesystem::remove(tmp_, ec);
        }
    }

    std::ostream& stream() noexcept { return out_; }

    void commit()
    {
        out_.close();
        if (!out_) throw FormatError("failed writing " + path_.string());
        std::filesystem::rename(tmp_, path_);
        committed_ = true;
    }

private:
    std::filesystem::path path_;
    std::filesystem::path tmp_;
    std::ofstream out_;
    bool committed_ = false;
};

inline void write_file(const std::filesystem::path& path, const Bytes& bytes)
{
    AtomicFile f(path);
    f.stream().write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    f.commit();
}

// ---------------------------------------------------------------------------
// Fault map

inline std::size_t plane_bytes(std::size_t bit_cells) { return (bit_cells + 7) / 8; }

inline Bytes encode_fault_map(const FaultMap& map)
{
    map.validate();
    ByteWriter w;
    w.header(magic::fault_map, map.bitwidth(),
             {static_cast<std::uint32_t>(map.rows()), static_cast<std::uint32_t>(map.cols())});
    w.f64(map.fault_rate());
    w.u64(map.seed());
    const int b = map.bitwidth();
    for (const auto* plane : {&map.sa0_cells(), &map.sa1_cells()}) {
        Bytes packed(plane_bytes(plane->size() * b), 0);
        std::size_t bit = 0;
        for (auto cell : *plane)
            for (int j = 0; j < b; ++j, ++bit)
                if ((cell >> j) & 1u) packed[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
        w.raw(packed);
    }
    return w.take();
}

inline FaultMap decode_fault_map(const Bytes& bytes)
{
    ByteReader r(bytes, "fault map");
    const auto h = r.header(magic::fault_map, 2);
    const std::size_t rows = h.dims[0], cols = h.dims[1];
    if (rows == 0 || cols == 0) r.fail("empty dimensions");
    const double rate = r.f64();
    const auto seed = r.u64();
    if (!(rate >= 0.0 && rate <= 1.0)) r.fail("fault rate outside [0, 1]");
    if (double(rows) * double(cols) * h.bitwidth > 8.0 * double(r.remaining())) r.fail("truncated planes");
    const std::size_t cells = rows * cols;
    const std::size_t nbytes = plane_bytes(cells * h.bitwidth);
    if (r.remaining() != 2 * nbytes) r.fail(r.remaining() < 2 * nbytes ? "truncated planes" : "trailing bytes");

    FaultMap map(rows, cols, h.bitwidth, rate, seed);
    for (auto* plane : {&map.mutable_sa0(), &map.mutable_sa1()}) {
        const auto packed = r.raw(nbytes);
        std::size_t bit = 0;
        for (std::size_t c = 0; c < cells; ++c) {
            std::uint16_t m = 0;
            for (int j = 0; j < h.bitwidth; ++j, ++bit)
                if ((static_cast<std::uint8_t>(packed[bit / 8]) >> (bit % 8)) & 1u)
                    m |= static_cast<std::uint16_t>(1u << j);
            (*plane)[c] = m;
        }
        // padding bits of the final byte must be clear
        for (; bit < nbytes * 8; ++bit)
            if ((static_cast<std::uint8_t>(packed[bit / 8]) >> (bit % 8)) & 1u) r.fail("non-zero padding bits");
    }
    try {
        map.validate();
    } catch (const Error& e) {
        throw FormatError(std::string("fault map validation failed: ") + e.what());
    }
    return map;
}

inline void save_fault_map(const std::filesystem::path& path, const FaultMap& map)
{
    write_file(path, encode_fault_map(map));
}
inline FaultMap load_fault_map(const std::filesystem::path& path) { return decode_fault_map(read_file(path)); }

// ---------------------------------------------------------------------------
// Lookup table

inline Bytes encode_lut(const LookupTable& lut)
{
    ByteWriter w;
    w.header(magic::lut, lut.bitwidth(), {lut.pattern_count(), lut.value_count()});
    for (Code e : lut.entries()) w.i16(e);
    return w.take();
}

inline LookupTable decode_lut(const Bytes& bytes)
{
    ByteReader r(bytes, "lookup table");
    const auto h = r.header(magic::lut, 2);
    if (h.bitwidth > max_lut_bitwidth) r.fail("bitwidth exceeds the supported maximum");
    if (h.dims[0] != pow3(h.bitwidth) || h.dims[1] != (1u << h.bitwidth)) r.fail("dimensions do not match bitwidth");
    const std::size_t n = std::size_t(h.dims[0]) * h.dims[1];
    if (r.remaining() != 2 * n) r.fail(r.remaining() < 2 * n ? "truncated entries" : "trailing bytes");
    std::vector<Code> entries(n);
    for (auto& e : entries) e = r.i16();
    LookupTable lut(h.bitwidth, std::move(entries));
    try {
        lut.validate();
    } catch (const Error& e) {
        throw FormatError(std::string("lookup table validation failed: ") + e.what());
    }
    return lut;
}

inline void save_lut(const std::filesystem::path& path, const LookupTable& lut) { write_file(path, encode_lut(lut)); }
inline LookupTable load_lut(const std::filesystem::path& path) { return decode_lut(read_file(path)); }

// ---------------------------------------------------------------------------
// Model: JSON manifest + binary blob of codes (i8 for b <= 8, else i16) and
// biases (f64), weighted layers in order.

inline nlohmann::json layer_manifest(const QuantizedLayer& l)
{
    const auto& s = l.spec;
    nlohmann::json j{{"kind", to_string(s.kind)}};
    if (s.kind == LayerKind::conv2d) {
        j["in_channels"] = s.in_channels;
        j["out_channels"] = s.out_channels;
        j["kernel_h"] = s.kernel_h;
        j["kernel_w"] = s.kernel_w;
        j["stride"] = s.stride;
        j["padding"] = s.padding;
        j["groups"] = s.groups;
    } else if (s.kind == LayerKind::fc) {
        j["in_features"] = s.in_features;
        j["out_features"] = s.out_features;
    }
    if (s.has_weights()) {
        j["activation"] = to_string(s.activation);
        j["scale"] = l.scale.scale;
        j["scale_id"] = l.scale.tensor_id;
        j["weights"] = l.codes.size();
        j["bias"] = l.bias.size();
    }
    return j;
}

inline Bytes encode_model(const QuantizedModel& model)
{
    model.validate();
    nlohmann::json manifest;
    manifest["bitwidth"] = model.quant.bitwidth;
    manifest["input_shape"] = model.input_shape;
    manifest["layers"] = nlohmann::json::array();
    for (const auto& l : model.layers) manifest["layers"].push_back(layer_manifest(l));
    manifest["activation_scales"] = nlohmann::json::array();
    for (const auto& a : model.activation_scales)
        manifest["activation_scales"].push_back({{"scale", a.scale}, {"id", a.tensor_id}});
    if (model.baseline_accuracy) manifest["baseline_accuracy"] = *model.baseline_accuracy;
    const std::string text = manifest.dump(1);

    ByteWriter blob;
    const bool wide = model.quant.bitwidth > 8;
    for (const auto& l : model.layers) {
        for (Code c : l.codes) wide ? blob.i16(c) : blob.u8(static_cast<std::uint8_t>(static_cast<std::int8_t>(c)));
        for (double b : l.bias) blob.f64(b);
    }
    ByteWriter w;
    w.header(magic::model, model.quant.bitwidth,
             {static_cast<std::uint32_t>(text.size()), static_cast<std::uint32_t>(blob.bytes().size())});
    w.raw(text);
    w.raw(blob.bytes());
    return w.take();
}

inline QuantizedModel decode_model(const Bytes& bytes)
{
    ByteReader r(bytes, "model");
    const auto h = r.header(magic::model, 2);
    const std::size_t manifest_len = h.dims[0], blob_len = h.dims[1];
    if (r.remaining() < manifest_len) r.fail("truncated manifest");
    const auto text = r.raw(manifest_len);
    if (r.remaining() < blob_len) r.fail("weight blob missing or truncated");
    if (r.remaining() > blob_len) r.fail("trailing bytes after blob");

    QuantizedModel m;
    try {
        const auto j = nlohmann::json::parse(text);
        m.quant.bitwidth = j.at("bitwidth").get<int>();
        if (m.quant.bitwidth != h.bitwidth) r.fail("manifest bitwidth disagrees with header");
        m.input_shape = j.at("input_shape").get<Shape>();
        const bool wide = m.quant.bitwidth > 8;
        std::size_t expected_blob = 0;
        for (const auto& lj : j.at("layers")) {
            QuantizedLayer l;
            l.spec.kind = layer_kind_from_string(lj.at("kind").get<std::string>());
            if (l.spec.kind == LayerKind::conv2d) {
                l.spec.in_channels = lj.at("in_channels");
                l.spec.out_channels = lj.at("out_channels");
                l.spec.kernel_h = lj.at("kernel_h");
                l.spec.kernel_w = lj.at("kernel_w");
                l.spec.stride = lj.at("stride");
                l.spec.padding = lj.at("padding");
                l.spec.groups = lj.at("groups");
            } else if (l.spec.kind == LayerKind::fc) {
                l.spec.in_features = lj.at("in_features");
                l.spec.out_features = lj.at("out_features");
            }
            if (l.spec.has_weights()) {
                l.spec.activation = activation_from_string(lj.at("activation").get<std::string>());
                if (!lj.at("scale").is_number()) r.fail("scale is not a number");
                l.scale.scale = lj.at("scale").get<double>();
                l.scale.tensor_id = lj.value("scale_id", "");
                const auto n_weights = lj.at("weights").get<std::size_t>();
                const auto n_bias = lj.at("bias").get<std::size_t>();
                if (n_weights > blob_len || n_bias > blob_len) r.fail("manifest and blob sizes disagree");
                l.codes.resize(n_weights);
                l.bias.resize(n_bias);
                expected_blob += l.codes.size() * (wide ? 2 : 1) + l.bias.size() * 8;
            }
            m.layers.push_back(std::move(l));
        }
        for (const auto& aj : j.at("activation_scales")) {
            if (!aj.at("scale").is_number()) r.fail("activation scale is not a number");
            m.activation_scales.push_back({aj.at("scale").get<double>(), aj.value("id", "")});
        }
        if (j.contains("baseline_accuracy")) m.baseline_accuracy = j.at("baseline_accuracy").get<double>();
        if (expected_blob != blob_len) r.fail("manifest and blob sizes disagree");
    } catch (const nlohmann::json::exception& e) {
        r.fail(std::string("bad manifest: ") + e.what());
    } catch (const KindError& e) {
        r.fail(std::string("bad manifest: ") + e.what());
    }
    for (auto& l : m.layers) {
        for (auto& c : l.codes) c = m.quant.bitwidth > 8 ? r.i16() : static_cast<Code>(r.i8());
        for (auto& b : l.bias) b = r.f64();
    }
    r.expect_end();
    try {
        m.validate();
    } catch (const FormatError&) {
        throw;
    } catch (const Error& e) {
        throw FormatError(std::string("model validation failed: ") + e.what());
    }
    return m;
}

inline void save_model(const std::filesystem::path& path, const QuantizedModel& m) { write_file(path, encode_model(m)); }
inline QuantizedModel load_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

// ---------------------------------------------------------------------------
// Error mask

inline Bytes encode_mask(const ErrorMask& mask)
{
    ByteWriter w;
    w.header(magic::mask, mask.config.bitwidth, {static_cast<std::uint32_t>(mask.layers.size())});
    w.u32(static_cast<std::uint32_t>(mask.config.buffer_rows));
    w.u32(static_cast<std::uint32_t>(mask.config.buffer_cols));
    w.u8(mask.config.pfll ? 1 : 0);
    w.u64(mask.fault_seed);
    w.f64(mask.fault_rate);
    for (const auto& l : mask.layers) {
        w.u32(static_cast<std::uint32_t>(l.size()));
        for (auto i : l) w.u32(i);
    }
    return w.take();
}

inline ErrorMask decode_mask(const Bytes& bytes)
{
    ByteReader r(bytes, "error mask");
    const auto h = r.header(magic::mask, 1);
    ErrorMask m;
    m.config.bitwidth = h.bitwidth;
    m.config.buffer_rows = r.u32();
    m.config.buffer_cols = r.u32();
    const auto pfll = r.u8();
    if (pfll > 1) r.fail("invalid pfll flag");
    m.config.pfll = pfll == 1;
    if (m.config.buffer_rows == 0 || m.config.buffer_cols == 0) r.fail("empty buffer dimensions");
    m.fault_seed = r.u64();
    m.fault_rate = r.f64();
    if (!(m.fault_rate >= 0.0 && m.fault_rate <= 1.0)) r.fail("fault rate outside [0, 1]");
    const auto limit = pow3(h.bitwidth);
    if (h.dims[0] > r.remaining() / 4) r.fail("truncated layer table");
    m.layers.resize(h.dims[0]);
    for (auto& l : m.layers) {
        const auto n = r.u32();
        if (r.remaining() < std::size_t(n) * 4) r.fail("truncated layer");
        l.resize(n);
        for (auto& i : l) {
            i = r.u32();
            if (i >= limit) r.fail("pattern index out of range");
        }
    }
    r.expect_end();
    return m;
}

inline void save_mask(const std::filesystem::path& path, const ErrorMask& m) { write_file(path, encode_mask(m)); }
inline ErrorMask load_mask(const std::filesystem::path& path) { return decode_mask(read_file(path)); }

// ---------------------------------------------------------------------------
// Datasets

enum class DatasetFormat { idx, csv, synthetic };

inline SyntheticSpec parse_synthetic_spec(const nlohmann::json& j)
{
    SyntheticSpec s;
    s.seed = j.value("seed", s.seed);
    s.sample_seed = j.value("sample_seed", s.sample_seed);
    s.classes = j.value("classes", s.classes);
    s.samples_per_class = j.value("samples_per_class", s.samples_per_class);
    s.shape = j.value("shape", s.shape);
    s.noise = j.value("noise", s.noise);
    return s;
}

inline nlohmann::json synthetic_spec_json(const SyntheticSpec& s)
{
    return {{"seed", s.seed},         {"sample_seed", s.sample_seed},
            {"classes", s.classes},   {"samples_per_class", s.samples_per_class},
            {"shape", s.shape},       {"noise", s.noise}};
}

namespace idx_detail {

inline std::uint32_t be32(ByteReader& r)
{
    const auto b = r.raw(4);
    std::uint32_t v = 0;
    for (char c : b) v = (v << 8) | static_cast<std::uint8_t>(c);
    return v;
}

struct IdxArray {
    std::vector<std::uint32_t> dims;
    std::string_view payload;
};

inline IdxArray read_idx(const Bytes& bytes, const std::string& what)
{
    ByteReader r(bytes, what);
    const auto mg = be32(r);
    if ((mg >> 8) != 0x08 || (mg & 0xFF) == 0 || (mg & 0xFF) > 4)
        r.fail("idx magic mismatch (only unsigned-byte arrays are supported)");
    IdxArray a;
    std::size_t n = 1;
    for (std::uint32_t i = 0; i < (mg & 0xFF); ++i) {
        a.dims.push_back(be32(r));
        n *= a.dims.back();
    }
    if (r.remaining() != n) r.fail("payload size mismatch at offset " + std::to_string(r.offset()));
    a.payload = r.raw(n);
    return a;
}

}  // namespace idx_detail

inline Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels)
{
    const auto ib = read_file(images);
    const auto lb = read_file(labels);
    const auto img = idx_detail::read_idx(ib, images.string());
    const auto lab = idx_detail::read_idx(lb, labels.string());
    if (lab.dims.size() != 1 || img.dims.empty() || img.dims[0] != lab.dims[0])
        throw FormatError("idx image and label counts disagree");
    Dataset ds;
    if (img.dims.size() == 3)
        ds.sample_shape = {1, int(img.dims[1]), int(img.dims[2])};
    else
        for (std::size_t i = 1; i < img.dims.size(); ++i) ds.sample_shape.push_back(int(img.dims[i]));
    if (ds.sample_shape.empty()) ds.sample_shape = {1};
    ds.data.reserve(img.payload.size());
    for (char c : img.payload) ds.data.push_back(static_cast<std::uint8_t>(c) / 255.0);
    int max_label = 0;
    for (char c : lab.payload) {
        ds.labels.push_back(static_cast<std::uint8_t>(c));
        max_label = std::max(max_label, ds.labels.back());
    }
    ds.classes = max_label + 1;
    ds.validate();
    return ds;
}

// First column is the integer label; a non-numeric first row is a header.
inline Dataset load_csv(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    Dataset ds;
    std::string line;
    std::size_t line_no = 0;
    int max_label = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
        auto where = [&] { return path.string() + ":" + std::to_string(line_no); };
        std::vector<double> values;
        bool numeric = true;
        for (const auto& f : fields) {
            char* end = nullptr;
            const double v = std::strtod(f.c_str(), &end);
            if (f.empty() || end == f.c_str() || *end != '\0') {
                numeric = false;
                break;
            }
            values.push_back(v);
        }
        if (!numeric) {
            if (ds.labels.empty() && line_no == 1) continue;  // header
            throw FormatError(where() + ": malformed record");
        }
        if (values.size() < 2) throw FormatError(where() + ": need a label and at least one feature");
        if (values[0] != std::floor(values[0]) || values[0] < 0)
            throw FormatError(where() + ": label must be a non-negative integer");
        const auto features = static_cast<int>(values.size() - 1);
        if (ds.sample_shape.empty()) ds.sample_shape = {features};
        if (ds.sample_shape[0] != features)
            throw FormatError(where() + ": expected " + std::to_string(ds.sample_shape[0]) + " features");
        ds.labels.push_back(static_cast<int>(values[0]));
        max_label = std::max(max_label, ds.labels.back());
        ds.data.insert(ds.data.end(), values.begin() + 1, values.end());
    }
    if (ds.labels.empty()) throw FormatError(path.string() + ": no records");
    ds.classes = max_label + 1;
    ds.validate();
    return ds;
}

inline nlohmann::json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

inline Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                            const std::filesystem::path& labels_path = {})
{
    switch (format) {
    case DatasetFormat::idx:
        if (labels_path.empty()) throw UsageError("idx datasets need a labels file");
        return load_idx(path, labels_path);
    case DatasetFormat::csv:
        return load_csv(path);
    case DatasetFormat::synthetic:
        try {
            return make_synthetic(parse_synthetic_spec(read_json(path)));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(path.string() + ": " + e.what());
        }
    }
    throw UsageError("unknown dataset format");
}

// "synthetic:<spec.json>", "csv:<file>", or "idx:<images>,<labels>".
inline Dataset load_dataset_ref(const std::string& ref)
{
    const auto colon = ref.find(':');
    if (colon == std::string::npos) throw UsageError("dataset reference needs a kind prefix: " + ref);
    const auto kind = ref.substr(0, colon);
    const auto rest = ref.substr(colon + 1);
    if (kind == "synthetic") return load_dataset(rest, DatasetFormat::synthetic);
    if (kind == "csv") return load_dataset(rest, DatasetFormat::csv);
    if (kind == "idx") {
        const auto comma = rest.find(',');
        if (comma == std::string::npos) throw UsageError("idx reference must be idx:<images>,<labels>");
        return load_dataset(rest.substr(0, comma), DatasetFormat::idx, rest.substr(comma + 1));
    }
    throw UsageError("unknown dataset kind '" + kind + "'");
}

}  // namespace faqsim::io
