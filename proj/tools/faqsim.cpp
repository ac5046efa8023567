// faqsim: command-line harness for fault-aware quantization experiments.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <faqsim/faqsim.hpp>

using namespace faqsim;
namespace fs = std::filesystem;

namespace {

void print_stats(const FaultStatistics& s)
{
    std::printf("bit_cells=%llu faulty_bits=%llu rate=%.6f sa0=%llu sa1=%llu sa1_fraction=%.4f faulty_cells=%llu\n",
                (unsigned long long)s.bit_cells, (unsigned long long)s.faulty_bits, s.rate(),
                (unsigned long long)s.stuck_at_0, (unsigned long long)s.stuck_at_1, s.sa1_fraction(),
                (unsigned long long)s.faulty_cells);
    std::printf("per_bit=");
    for (std::size_t b = 0; b < s.per_bit.size(); ++b) std::printf("%s%llu", b ? "," : "", (unsigned long long)s.per_bit[b]);
    std::printf("\n");
}

void write_text(const std::string& path, const std::function<void(std::ostream&)>& fn)
{
    io::AtomicFile f(path);
    fn(f.stream());
    f.commit();
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Fault-aware quantization for DNN accelerator weight buffers"};
    app.require_subcommand(1);

    // gen-lut
    int lut_bits = 8;
    unsigned lut_threads = 1;
    std::string lut_out;
    auto* gen_lut = app.add_subcommand("gen-lut", "Build the nearest-reproducible-value lookup table");
    gen_lut->add_option("--bitwidth", lut_bits, "Bits per weight")->capture_default_str();
    gen_lut->add_option("--threads", lut_threads, "Worker threads")->capture_default_str();
    gen_lut->add_option("--out", lut_out, "Output file")->required();

    // gen-faultmap
    std::size_t fm_rows = 256, fm_cols = 256;
    int fm_bits = 8;
    double fm_rate = 0.0;
    std::uint64_t fm_seed = 1;
    std::string fm_out;
    auto* gen_fm = app.add_subcommand("gen-faultmap", "Generate a random stuck-at fault map");
    gen_fm->add_option("--rows", fm_rows)->capture_default_str();
    gen_fm->add_option("--cols", fm_cols)->capture_default_str();
    gen_fm->add_option("--bitwidth", fm_bits)->capture_default_str();
    gen_fm->add_option("--rate", fm_rate, "Per-bit fault probability")->required()->check(CLI::Range(0.0, 1.0));
    gen_fm->add_option("--seed", fm_seed)->capture_default_str();
    gen_fm->add_option("--out", fm_out)->required();

    // stats
    std::string stats_map;
    auto* stats = app.add_subcommand("stats", "Print fault map statistics");
    stats->add_option("--faultmap", stats_map)->required();

    // gen-mask
    std::string mask_model, mask_map, mask_out, mask_trace;
    bool mask_pfll = false;
    auto* gen_mask = app.add_subcommand("gen-mask", "Map model weights onto the buffer and write the error mask");
    gen_mask->add_option("--model", mask_model)->required();
    gen_mask->add_option("--faultmap", mask_map)->required();
    gen_mask->add_flag("--pfll", mask_pfll, "Protect first and last weighted layers");
    gen_mask->add_option("--out", mask_out)->required();
    gen_mask->add_option("--trace", mask_trace, "Write a weight-to-cell mapping trace");

    // convert
    std::string cv_model, cv_map, cv_lut, cv_out;
    bool cv_pfll = false;
    auto* convert = app.add_subcommand("convert", "Convert a quantized model into its fault-aware variant");
    convert->add_option("--model", cv_model)->required();
    convert->add_option("--faultmap", cv_map)->required();
    convert->add_option("--lut", cv_lut)->required();
    convert->add_flag("--pfll", cv_pfll);
    convert->add_option("--out", cv_out)->required();

    // eval
    std::string ev_model, ev_data, ev_map, ev_lut, ev_mode = "none";
    bool ev_fake_quant = false;
    auto* eval = app.add_subcommand("eval", "Evaluate accuracy, optionally on a faulty buffer");
    eval->add_option("--model", ev_model)->required();
    eval->add_option("--dataset", ev_data, "synthetic:<spec.json> | csv:<file> | idx:<images>,<labels>")->required();
    eval->add_option("--faultmap", ev_map);
    eval->add_option("--lut", ev_lut);
    eval->add_option("--mode", ev_mode, "none | inject | faq | faq-pfll")->capture_default_str();
    eval->add_flag("--fake-quant-activations", ev_fake_quant);

    // train
    std::string tr_data, tr_eval, tr_arch = "mlp2", tr_out;
    nn::TrainOptions tr_opt;
    bool tr_calibrate = false;
    auto* train = app.add_subcommand("train", "Train a fixture model and store it quantized");
    train->add_option("--dataset", tr_data)->required();
    train->add_option("--eval-dataset", tr_eval, "Dataset for the stored baseline accuracy");
    train->add_option("--arch", tr_arch, "mlp2 | smallcnn")->capture_default_str();
    train->add_option("--epochs", tr_opt.epochs)->capture_default_str();
    train->add_option("--lr", tr_opt.learning_rate)->capture_default_str();
    train->add_option("--batch", tr_opt.batch_size)->capture_default_str();
    train->add_option("--seed", tr_opt.seed)->capture_default_str();
    train->add_option("--bitwidth", tr_opt.quant.bitwidth)->capture_default_str();
    train->add_flag("--calibrate", tr_calibrate, "Record activation scales from the training set");
    train->add_option("--out", tr_out)->required();

    // sweep
    std::string sw_config;
    auto* sweep = app.add_subcommand("sweep", "Run a fault-rate x seed x mode sweep");
    sweep->add_option("--config", sw_config)->required();

    // retrain
    std::string rt_config, rt_out;
    bool rt_with = false, rt_without = false;
    auto* retrain = app.add_subcommand("retrain", "Fault-aware retraining with or without FAQ");
    retrain->add_option("--config", rt_config)->required();
    auto* with_flag = retrain->add_flag("--with-faq", rt_with);
    auto* without_flag = retrain->add_flag("--without-faq", rt_without);
    with_flag->excludes(without_flag);
    retrain->add_option("--out", rt_out, "Overrides the config output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // help and version requests exit 0; anything else is a usage error
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*gen_lut) {
            const auto t0 = harness::Clock::now();
            const auto lut = build_lut(QuantSpec{lut_bits}, lut_threads);
            const double ms = harness::elapsed_ms(t0);
            io::save_lut(lut_out, lut);
            std::printf("lut bitwidth=%d entries=%zu generation_ms=%.3f\n", lut_bits, lut.entries().size(), ms);
        } else if (*gen_fm) {
            const auto map = generate_fault_map(fm_rows, fm_cols, fm_bits, fm_rate, fm_seed);
            io::save_fault_map(fm_out, map);
            print_stats(fault_statistics(map));
        } else if (*stats) {
            print_stats(fault_statistics(io::load_fault_map(stats_map)));
        } else if (*gen_mask) {
            const auto model = io::load_model(mask_model);
            const auto map = io::load_fault_map(mask_map);
            const DataflowConfig cfg{map.rows(), map.cols(), model.quant.bitwidth, mask_pfll};
            const auto mask = build_error_mask(model, map, cfg);
            io::save_mask(mask_out, mask);
            if (!mask_trace.empty())
                write_text(mask_trace, [&](std::ostream& os) { write_mapping_trace(os, model, mask); });
            std::printf("mask weights=%zu\n", mask.weight_count());
        } else if (*convert) {
            const auto model = io::load_model(cv_model);
            const auto map = io::load_fault_map(cv_map);
            const auto lut = io::load_lut(cv_lut);
            const DataflowConfig cfg{map.rows(), map.cols(), model.quant.bitwidth, cv_pfll};
            const auto t0 = harness::Clock::now();
            const auto mask = build_error_mask(model, map, cfg);
            const double mask_ms = harness::elapsed_ms(t0);
            const auto t1 = harness::Clock::now();
            const auto converted = faq_convert(model, mask, lut);
            const double faq_ms = harness::elapsed_ms(t1);
            io::save_model(cv_out, converted);
            const double total = mask_ms + faq_ms;
            std::printf("weights=%zu mask_ms=%.3f faq_ms=%.3f total_ms=%.3f weights_per_s=%.0f\n",
                        model.weight_count(), mask_ms, faq_ms, total,
                        total > 0 ? model.weight_count() / (total / 1000.0) : 0.0);
        } else if (*eval) {
            const auto mode = harness::mode_from_string(ev_mode);
            const auto model = io::load_model(ev_model);
            const auto data = io::load_dataset_ref(ev_data);
            QuantizedModel executed = model;
            if (mode != harness::Mode::none) {
                if (ev_map.empty()) throw UsageError("--mode " + ev_mode + " needs --faultmap");
                if (harness::mode_needs_lut(mode) && ev_lut.empty())
                    throw UsageError("--mode " + ev_mode + " needs --lut");
                const auto map = io::load_fault_map(ev_map);
                std::optional<LookupTable> lut;
                if (!ev_lut.empty()) lut = io::load_lut(ev_lut);
                executed = harness::deploy(model, map, lut ? &*lut : nullptr, mode).executed;
            }
            std::printf("accuracy=%.6f mode=%s samples=%zu\n", nn::evaluate(executed, data, ev_fake_quant),
                        ev_mode.c_str(), data.size());
        } else if (*train) {
            const auto data = io::load_dataset_ref(tr_data);
            auto model = nn::train_fixture(data, nn::architecture_from_string(tr_arch), tr_opt);
            const auto eval_data = tr_eval.empty() ? data : io::load_dataset_ref(tr_eval);
            if (tr_calibrate) model.activation_scales = nn::calibrate_activation_scales(model, data);
            model.baseline_accuracy = nn::evaluate(model, eval_data);
            io::save_model(tr_out, model);
            std::printf("trained %s weights=%zu baseline_accuracy=%.6f\n", tr_arch.c_str(), model.weight_count(),
                        *model.baseline_accuracy);
        } else if (*sweep) {
            const auto cfg = harness::parse_sweep_config(io::read_json(sw_config));
            const auto model = io::load_model(cfg.model);
            const auto data = io::load_dataset_ref(cfg.dataset);
            std::optional<LookupTable> lut;
            for (auto m : cfg.modes)
                if (harness::mode_needs_lut(m) && !lut) lut = harness::load_or_build_lut(cfg.lut, model.quant.bitwidth);
            const auto rows = harness::run_sweep(cfg, model, data, lut ? &*lut : nullptr);
            const auto summary = harness::summarize(rows);
            io::AtomicFile out(cfg.output);
            harness::write_sweep_csv(out.stream(), rows);
            io::AtomicFile sum(cfg.summary.empty() ? harness::default_summary_path(cfg.output) : cfg.summary);
            harness::write_summary_csv(sum.stream(), summary);
            out.commit();
            sum.commit();
            std::printf("sweep rows=%zu\n", rows.size());
        } else if (*retrain) {
            if (!rt_with && !rt_without) throw UsageError("retrain needs --with-faq or --without-faq");
            auto cfg = harness::parse_retrain_config(io::read_json(rt_config));
            if (!rt_out.empty()) cfg.output = rt_out;
            cfg.options.use_faq = rt_with;
            const auto model = io::load_model(cfg.model);
            const auto train_data = io::load_dataset_ref(cfg.train_dataset);
            const auto eval_data = io::load_dataset_ref(cfg.eval_dataset);
            const auto map = cfg.faultmap.empty()
                                 ? harness::sweep_fault_map(cfg.fault_rate, cfg.seed, cfg.buffer_rows,
                                                            cfg.buffer_cols, model.quant.bitwidth)
                                 : io::load_fault_map(cfg.faultmap);
            const auto lut = harness::load_or_build_lut(cfg.lut, model.quant.bitwidth);
            const DataflowConfig dcfg{map.rows(), map.cols(), model.quant.bitwidth, cfg.pfll};
            const auto mask = build_error_mask(model, map, dcfg);
            const auto result = nn::retrain_with_faq(model, mask, lut, train_data, eval_data, cfg.options);
            write_text(cfg.output, [&](std::ostream& os) { harness::write_trace_csv(os, result.trace); });
            std::printf("retrain %s final_accuracy=%.6f epochs=%d\n", rt_with ? "with-faq" : "without-faq",
                        result.trace.back(), cfg.options.epochs);
        }
    } catch (const UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
