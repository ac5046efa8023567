#pragma once

// Experiment harness: lookup table -> fault map -> error mask -> FAQ ->
// evaluation, for single runs and for rate x seed x mode sweeps.
//
// An experiment seed s feeds independent substreams (random.hpp): the
// fault map of a sweep cell is generated from derive_seed(s, fault_map).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dataset.hpp"
#include "errors.hpp"
#include "faq.hpp"
#include "faultmodel.hpp"
#include "io.hpp"
#include "lut.hpp"
#include "mapper.hpp"
#include "nn.hpp"
#include "random.hpp"

namespace faqsim::harness {

enum class Mode { none, inject, faq, faq_pfll };

inline std::string_view to_string(Mode m) noexcept
{
    switch (m) {
    case Mode::none: return "none";
    case Mode::inject: return "inject";
    case Mode::faq: return "faq";
    case Mode::faq_pfll: return "faq-pfll";
    }
    return "?";
}

inline Mode mode_from_string(std::string_view s)
{
    for (auto m : {Mode::none, Mode::inject, Mode::faq, Mode::faq_pfll})
        if (to_string(m) == s) return m;
    throw UsageError("unknown mode '" + std::string(s) + "' (expected none, inject, faq or faq-pfll)");
}

inline bool mode_needs_lut(Mode m) noexcept { return m == Mode::faq || m == Mode::faq_pfll; }

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point since)
{
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// Model as executed on the faulty chip under `mode`, plus timings.
struct DeployedModel {
    QuantizedModel stored;    // codes written into the buffer
    QuantizedModel executed;  // codes read back through the faults
    double mask_ms = 0.0;
    double convert_ms = 0.0;  // mask generation + FAQ conversion
};

inline DeployedModel deploy(const QuantizedModel& model, const FaultMap& map, const LookupTable* lut, Mode mode)
{
    DeployedModel d;
    if (mode == Mode::none) {
        d.stored = d.executed = model;
        return d;
    }
    if (mode_needs_lut(mode) && !lut) throw UsageError("mode " + std::string(to_string(mode)) + " needs a lookup table");
    DataflowConfig cfg{map.rows(), map.cols(), model.quant.bitwidth, mode == Mode::faq_pfll};
    const auto t0 = Clock::now();
    const auto mask = build_error_mask(model, map, cfg);
    d.mask_ms = elapsed_ms(t0);
    d.stored = mode_needs_lut(mode) ? faq_convert(model, mask, *lut) : model;
    d.convert_ms = elapsed_ms(t0);
    d.executed = inject(d.stored, mask);
    return d;
}

struct SweepConfig {
    std::vector<double> fault_rates;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::vector<Mode> modes{Mode::none, Mode::inject, Mode::faq};
    std::string dataset;  // dataset reference, see io::load_dataset_ref
    std::string model;
    std::string output;
    std::string summary;  // defaults to "<output stem>.summary.csv"
    std::string lut;      // optional; built in memory when empty
    std::size_t buffer_rows = 256;
    std::size_t buffer_cols = 256;
    bool record_timing = true;
    unsigned threads = 0;  // 0: FAQSIM_THREADS or hardware concurrency

    void validate() const
    {
        if (fault_rates.empty()) throw UsageError("config field 'fault_rates' must be non-empty");
        for (double r : fault_rates)
            if (!(r >= 0.0 && r <= 1.0)) throw UsageError("config field 'fault_rates' has a rate outside [0, 1]");
        if (seeds.empty()) throw UsageError("config field 'seeds' must be non-empty");
        if (modes.empty()) throw UsageError("config field 'modes' must be non-empty");
        if (buffer_rows < 1) throw UsageError("config field 'buffer_rows' must be >= 1");
        if (buffer_cols < 1) throw UsageError("config field 'buffer_cols' must be >= 1");
    }
};

// Missing or mistyped fields are reported by name.
inline SweepConfig parse_sweep_config(const nlohmann::json& j)
{
    SweepConfig c;
    auto field = [&](const char* name, auto& out, bool required) {
        if (!j.contains(name)) {
            if (required) throw UsageError(std::string("config field '") + name + "' is required");
            return;
        }
        try {
            j.at(name).get_to(out);
        } catch (const nlohmann::json::exception&) {
            throw UsageError(std::string("config field '") + name + "' has the wrong type");
        }
    };
    if (!j.is_object()) throw UsageError("sweep config must be a JSON object");
    field("fault_rates", c.fault_rates, true);
    field("seeds", c.seeds, false);
    std::vector<std::string> modes;
    field("modes", modes, false);
    if (j.contains("modes")) {
        c.modes.clear();
        for (const auto& m : modes) {
            try {
                c.modes.push_back(mode_from_string(m));
            } catch (const UsageError& e) {
                throw UsageError(std::string("config field 'modes': ") + e.what());
            }
        }
    }
    field("dataset", c.dataset, true);
    field("model", c.model, true);
    field("output", c.output, true);
    field("summary", c.summary, false);
    field("lut", c.lut, false);
    field("buffer_rows", c.buffer_rows, false);
    field("buffer_cols", c.buffer_cols, false);
    field("record_timing", c.record_timing, false);
    field("threads", c.threads, false);
    c.validate();
    return c;
}

inline unsigned worker_count(unsigned requested)
{
    if (requested > 0) return requested;
    if (const char* env = std::getenv("FAQSIM_THREADS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n > 0) return static_cast<unsigned>(n);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

struct SweepRow {
    double rate = 0.0;
    std::uint64_t seed = 0;
    Mode mode = Mode::none;
    double accuracy = 0.0;
    double weight_mse = 0.0;
    double convert_ms = 0.0;
};

struct SummaryRow {
    double rate = 0.0;
    Mode mode = Mode::none;
    std::size_t runs = 0;
    double mean_accuracy = 0.0;
    double min_accuracy = 0.0;
    double max_accuracy = 0.0;
    double mean_weight_mse = 0.0;
};

inline FaultMap sweep_fault_map(double rate, std::uint64_t seed, std::size_t rows, std::size_t cols, int bitwidth)
{
    return generate_fault_map(rows, cols, bitwidth, rate, derive_seed(seed, seed_stream::fault_map));
}

// Rows ordered rate-major, then seed, then mode (config order), regardless
// of how many workers ran them.
inline std::vector<SweepRow> run_sweep(const SweepConfig& cfg, const QuantizedModel& model, const Dataset& data,
                                       const LookupTable* lut)
{
    cfg.validate();
    for (auto m : cfg.modes)
        if (mode_needs_lut(m) && !lut) throw UsageError("sweep modes include FAQ but no lookup table was given");
    const std::size_t units = cfg.fault_rates.size() * cfg.seeds.size();
    std::vector<SweepRow> rows(units * cfg.modes.size());
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(units);

    auto worker = [&] {
        for (std::size_t u; (u = next++) < units;) {
            try {
                const double rate = cfg.fault_rates[u / cfg.seeds.size()];
                const auto seed = cfg.seeds[u % cfg.seeds.size()];
                const auto map = sweep_fault_map(rate, seed, cfg.buffer_rows, cfg.buffer_cols, model.quant.bitwidth);
                for (std::size_t k = 0; k < cfg.modes.size(); ++k) {
                    const auto d = deploy(model, map, lut, cfg.modes[k]);
                    auto& row = rows[u * cfg.modes.size() + k];
                    row.rate = rate;
                    row.seed = seed;
                    row.mode = cfg.modes[k];
                    row.accuracy = nn::evaluate(d.executed, data);
                    row.weight_mse = weight_error_metrics(model, d.executed).mse;
                    row.convert_ms = cfg.record_timing ? d.convert_ms : 0.0;
                }
            } catch (...) {
                errors[u] = std::current_exception();
            }
        }
    };
    const unsigned n = std::min<std::size_t>(worker_count(cfg.threads), units);
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
        worker();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return rows;
}

inline std::vector<SummaryRow> summarize(const std::vector<SweepRow>& rows)
{
    std::map<std::pair<double, int>, SummaryRow> groups;
    std::vector<std::pair<double, int>> order;
    for (const auto& r : rows) {
        const auto key = std::make_pair(r.rate, static_cast<int>(r.mode));
        auto [it, fresh] = groups.try_emplace(key);
        auto& s = it->second;
        if (fresh) {
            order.push_back(key);
            s.rate = r.rate;
            s.mode = r.mode;
            s.min_accuracy = s.max_accuracy = r.accuracy;
        }
        ++s.runs;
        s.mean_accuracy += r.accuracy;
        s.mean_weight_mse += r.weight_mse;
        s.min_accuracy = std::min(s.min_accuracy, r.accuracy);
        s.max_accuracy = std::max(s.max_accuracy, r.accuracy);
    }
    std::vector<SummaryRow> out;
    for (const auto& k : order) {
        auto s = groups.at(k);
        s.mean_accuracy /= double(s.runs);
        s.mean_weight_mse /= double(s.runs);
        out.push_back(s);
    }
    return out;
}

inline std::string format_double(const char* fmt, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

inline void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows)
{
    os << "rate,seed,mode,accuracy,weight_mse,convert_ms\n";
    for (const auto& r : rows)
        os << format_double("%.10g", r.rate) << ',' << r.seed << ',' << to_string(r.mode) << ','
           << format_double("%.6f", r.accuracy) << ',' << format_double("%.10e", r.weight_mse) << ','
           << format_double("%.3f", r.convert_ms) << '\n';
}

inline void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows)
{
    os << "rate,mode,runs,mean_accuracy,min_accuracy,max_accuracy,mean_weight_mse\n";
    for (const auto& s : rows)
        os << format_double("%.10g", s.rate) << ',' << to_string(s.mode) << ',' << s.runs << ','
           << format_double("%.6f", s.mean_accuracy) << ',' << format_double("%.6f", s.min_accuracy) << ','
           << format_double("%.6f", s.max_accuracy) << ',' << format_double("%.10e", s.mean_weight_mse) << '\n';
}

inline std::string default_summary_path(const std::string& output)
{
    std::filesystem::path p(output);
    return (p.parent_path() / (p.stem().string() + ".summary.csv")).string();
}

inline LookupTable load_or_build_lut(const std::string& path, int bitwidth)
{
    if (!path.empty()) {
        auto lut = io::load_lut(path);
        if (lut.bitwidth() != bitwidth) throw ConfigError("lookup table bitwidth does not match the model");
        return lut;
    }
    return build_lut(QuantSpec{bitwidth});
}

// ---------------------------------------------------------------------------
// Retraining

struct RetrainConfig {
    std::string model;
    std::string train_dataset;
    std::string eval_dataset;  // defaults to train_dataset
    std::string lut;
    std::string faultmap;      // optional; generated from rate/seed otherwise
    double fault_rate = 0.1;
    std::uint64_t seed = 1;
    std::size_t buffer_rows = 256;
    std::size_t buffer_cols = 256;
    bool pfll = false;
    nn::RetrainOptions options;
    std::string output;
};

inline RetrainConfig parse_retrain_config(const nlohmann::json& j)
{
    if (!j.is_object()) throw UsageError("retrain config must be a JSON object");
    RetrainConfig c;
    auto field = [&](const char* name, auto& out, bool required) {
        if (!j.contains(name)) {
            if (required) throw UsageError(std::string("config field '") + name + "' is required");
            return;
        }
        try {
            j.at(name).get_to(out);
        } catch (const nlohmann::json::exception&) {
            throw UsageError(std::string("config field '") + name + "' has the wrong type");
        }
    };
    field("model", c.model, true);
    field("train_dataset", c.train_dataset, true);
    field("eval_dataset", c.eval_dataset, false);
    if (c.eval_dataset.empty()) c.eval_dataset = c.train_dataset;
    field("lut", c.lut, false);
    field("faultmap", c.faultmap, false);
    field("fault_rate", c.fault_rate, false);
    field("seed", c.seed, false);
    field("buffer_rows", c.buffer_rows, false);
    field("buffer_cols", c.buffer_cols, false);
    field("pfll", c.pfll, false);
    field("epochs", c.options.epochs, false);
    field("learning_rate", c.options.learning_rate, false);
    field("batch_size", c.options.batch_size, false);
    field("output", c.output, true);
    if (!(c.fault_rate >= 0.0 && c.fault_rate <= 1.0)) throw UsageError("config field 'fault_rate' outside [0, 1]");
    if (c.options.epochs < 0) throw UsageError("config field 'epochs' must be >= 0");
    if (c.options.batch_size < 1) throw UsageError("config field 'batch_size' must be >= 1");
    c.options.seed = c.seed;
    return c;
}

inline void write_trace_csv(std::ostream& os, const std::vector<double>& trace)
{
    os << "epoch,accuracy\n";
    for (std::size_t e = 0; e < trace.size(); ++e) os << e << ',' << format_double("%.6f", trace[e]) << '\n';
}

}  // namespace faqsim::harness
