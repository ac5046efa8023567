// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include <faqsim/faqsim.hpp>

#include "test_support.hpp"

using namespace faqsim;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            if (pass) detail = what;
            pass = false;
        }
    }
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// ---------------------------------------------------------------------------

Outcome bit_examples()
{
    Outcome o;
    const int a = apply_faults(23, FaultPattern::single(6, StuckAt::one, 8));
    const int b = apply_faults(-37, FaultPattern::single(6, StuckAt::zero, 8));
    o.require(a == 87, fmt("(23, SA1@6) -> %d, expected 87", a));
    o.require(b == -101, fmt("(-37, SA0@6) -> %d, expected -101", b));
    if (o.pass) o.detail = "(23,SA1@6)->87 (-37,SA0@6)->-101";
    return o;
}

Outcome oracle_equivalence()
{
    Outcome o;
    const auto t0 = harness::Clock::now();
    std::size_t checked = 0, mismatches = 0;
    for (int b : {4, 5, 6}) {
        const auto lut = build_lut(QuantSpec{b});
        for (std::uint32_t i = 0; i < pow3(b); ++i) {
            const auto p = FaultPattern::from_index(i, b);
            for (int v = -(1 << (b - 1)); v < (1 << (b - 1)); ++v, ++checked)
                if (lut.nearest_valid(i, v) != oracle_nearest(p, v)) ++mismatches;
        }
    }
    const std::size_t exhaustive = checked;
    const auto lut8 = build_lut(QuantSpec{8});
    Rng rng(0xACCE55);
    for (int k = 0; k < 100000; ++k, ++checked) {
        const auto p = fixtures::random_pattern(rng, 8);
        const int v = fixtures::random_value(rng, 8);
        if (lut8.nearest_valid(p.index(), v) != oracle_nearest(p, v)) ++mismatches;
    }
    const double s = harness::elapsed_ms(t0) / 1000.0;
    o.require(exhaustive == 81 * 16 + 243 * 32 + 729 * 64, "exhaustive pair count wrong");
    o.require(mismatches == 0, fmt("%zu mismatches", mismatches));
    o.require(s < 60.0, fmt("took %.1f s", s));
    if (o.pass) o.detail = fmt("%zu pairs, 0 mismatches, %.2f s", checked, s);
    return o;
}

Outcome lut_invariants()
{
    Outcome o;
    std::size_t violations = 0;
    Rng rng(31337);
    for (int b : {4, 8}) {
        const auto lut = build_lut(QuantSpec{b});
        for (int k = 0; k < 1000; ++k) {
            const auto p = fixtures::random_pattern(rng, b);
            const int v = fixtures::random_value(rng, b);
            const int n = lut.nearest_valid(p.index(), v);
            if (apply_faults(n, p) != n) ++violations;
            if (std::abs(n - v) > std::abs(apply_faults(v, p) - v)) ++violations;
        }
    }
    o.require(violations == 0, fmt("%zu violations", violations));
    if (o.pass) o.detail = "2000 pairs, 0 violations";
    return o;
}

Outcome fault_statistics_bounds()
{
    Outcome o;
    double worst_rate = 0, worst_split = 0;  // in units of sigma
    for (double p : {0.01, 0.04, 0.1})
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            const auto s = fault_statistics(harness::sweep_fault_map(p, seed, 256, 256, 8));
            const double n = double(s.bit_cells);
            const double z_rate = std::abs(double(s.faulty_bits) - n * p) / std::sqrt(n * p * (1 - p));
            const double f = double(s.faulty_bits);
            const double z_split = std::abs(double(s.stuck_at_1) - f / 2) / std::sqrt(f / 4);
            worst_rate = std::max(worst_rate, z_rate);
            worst_split = std::max(worst_split, z_split);
            o.require(z_rate <= 3, fmt("p=%g seed=%llu rate %.6f is %.2f sigma off", p, (unsigned long long)seed,
                                       s.rate(), z_rate));
            o.require(z_split <= 3, fmt("p=%g seed=%llu SA1 fraction %.4f is %.2f sigma off", p,
                                        (unsigned long long)seed, s.sa1_fraction(), z_split));
        }
    if (o.pass) o.detail = fmt("15 maps, worst rate %.2f sigma, worst split %.2f sigma", worst_rate, worst_split);
    return o;
}

// ---------------------------------------------------------------------------
// Accuracy trends on the small CNN fixture.

struct TrendResult {
    Outcome faq_vs_inject;
    Outcome pfll_vs_faq;
};

TrendResult cnn_trends()
{
    TrendResult r;
    const auto t0 = harness::Clock::now();
    SyntheticSpec train_spec;  // 10 classes, 1x12x12, noise 0.3
    train_spec.seed = 7;
    train_spec.sample_seed = 100;
    auto test_spec = train_spec;
    test_spec.sample_seed = 200;
    test_spec.samples_per_class = 50;
    const auto train = make_synthetic(train_spec);
    const auto test = make_synthetic(test_spec);
    nn::TrainOptions opt;
    opt.epochs = 15;
    opt.seed = 3;
    const auto model = nn::train_fixture(train, nn::Architecture::smallcnn, opt);
    const double baseline = nn::evaluate(model, test);
    r.faq_vs_inject.require(baseline >= 0.95, fmt("fixture baseline %.3f < 0.95", baseline));

    const auto lut = build_lut(QuantSpec{8});
    const std::vector<double> rates{0.01, 0.02, 0.04, 0.1};
    const int seeds = 10;
    std::string table;
    for (double rate : rates) {
        double inj = 0, faq = 0, pfll = 0;
        for (int seed = 1; seed <= seeds; ++seed) {
            const auto map = harness::sweep_fault_map(rate, seed, 256, 256, 8);
            const auto d_inj = harness::deploy(model, map, &lut, harness::Mode::inject);
            const auto d_faq = harness::deploy(model, map, &lut, harness::Mode::faq);
            const auto d_pfll = harness::deploy(model, map, &lut, harness::Mode::faq_pfll);
            inj += nn::evaluate(d_inj.executed, test) / seeds;
            faq += nn::evaluate(d_faq.executed, test) / seeds;
            pfll += nn::evaluate(d_pfll.executed, test) / seeds;
            const double mse_inj = weight_error_metrics(model, d_inj.executed).mse;
            const double mse_faq = weight_error_metrics(model, d_faq.executed).mse;
            r.faq_vs_inject.require(mse_faq < mse_inj, fmt("rate %g seed %d: weight MSE faq %.3g !< inject %.3g",
                                                           rate, seed, mse_faq, mse_inj));
        }
        r.faq_vs_inject.require(faq >= inj, fmt("rate %g: faq %.4f < inject %.4f", rate, faq, inj));
        if (rate == 0.04)
            r.faq_vs_inject.require(faq - inj >= 0.10, fmt("rate 0.04 gap %.1f pp < 10 pp", 100 * (faq - inj)));
        r.pfll_vs_faq.require(pfll >= faq, fmt("rate %g: faq-pfll %.4f < faq %.4f", rate, pfll, faq));
        table += fmt(" %g:%.3f/%.3f/%.3f", rate, inj, faq, pfll);
    }
    const double minutes = harness::elapsed_ms(t0) / 60000.0;
    r.faq_vs_inject.require(minutes < 10.0, fmt("took %.1f min", minutes));
    if (r.faq_vs_inject.pass)
        r.faq_vs_inject.detail = fmt("baseline %.3f, inject/faq/faq-pfll over 10 seeds:", baseline) + table +
                                 fmt(" (%.1f s)", minutes * 60);
    if (r.pfll_vs_faq.pass) r.pfll_vs_faq.detail = "inject/faq/faq-pfll:" + table;
    return r;
}

Outcome retraining_trend()
{
    Outcome o;
    SyntheticSpec train_spec;
    train_spec.seed = 11;
    train_spec.sample_seed = 100;
    train_spec.shape = {64};
    train_spec.noise = 0.6;
    auto test_spec = train_spec;
    test_spec.sample_seed = 200;
    test_spec.samples_per_class = 50;
    const auto train = make_synthetic(train_spec);
    const auto test = make_synthetic(test_spec);
    nn::TrainOptions opt;
    opt.epochs = 20;
    opt.seed = 3;
    const auto model = nn::train_fixture(train, nn::Architecture::mlp2, opt);
    const double baseline = nn::evaluate(model, test);
    const auto lut = build_lut(QuantSpec{8});

    double inj = 0, with = 0, without = 0;
    const int seeds = 10;
    for (int seed = 1; seed <= seeds; ++seed) {
        const auto map = harness::sweep_fault_map(0.1, seed, 256, 256, 8);
        const auto mask = build_error_mask(model, map, DataflowConfig{});
        inj += nn::evaluate(inject(model, mask), test) / seeds;
        nn::RetrainOptions ro;
        ro.epochs = 5;
        ro.seed = seed;
        with += nn::retrain_with_faq(model, mask, lut, train, test, ro).trace.back() / seeds;
        ro.use_faq = false;
        without += nn::retrain_with_faq(model, mask, lut, train, test, ro).trace.back() / seeds;
    }
    const double recovery = (with - inj) / (baseline - inj);
    o.require(baseline > inj, "fixture shows no fault damage to recover from");
    o.require(recovery >= 0.8, fmt("recovery %.3f < 0.8", recovery));
    o.require(with > without, fmt("with FAQ %.4f does not exceed without %.4f", with, without));
    o.detail = fmt("baseline %.4f inject %.4f retrain+faq %.4f retrain-only %.4f recovery %.3f", baseline, inj, with,
                   without, recovery);
    return o;
}

Outcome performance()
{
    Outcome o;
    auto t0 = harness::Clock::now();
    const auto lut = build_lut(QuantSpec{8}, 1);
    const double lut_s = harness::elapsed_ms(t0) / 1000.0;

    // 10M weights in two fc layers, codes uniform over the full range.
    QuantizedModel model;
    model.input_shape = {4000};
    Rng rng(8);
    for (const auto& spec : {LayerSpec::fc(4000, 2000, Activation::relu), LayerSpec::fc(2000, 1000)}) {
        QuantizedLayer l{spec, std::vector<Code>(spec.weight_count()), {0.01, ""}, std::vector<double>(spec.outputs())};
        for (auto& c : l.codes) c = static_cast<Code>(fixtures::random_value(rng, 8));
        model.layers.push_back(std::move(l));
    }
    const auto map = harness::sweep_fault_map(0.04, 1, 256, 256, 8);
    t0 = harness::Clock::now();
    const auto mask = build_error_mask(model, map, DataflowConfig{});
    const double mask_ms = harness::elapsed_ms(t0);
    t0 = harness::Clock::now();
    const auto converted = faq_convert(model, mask, lut);
    const double faq_ms = harness::elapsed_ms(t0);
    const double rate = double(model.weight_count()) / (faq_ms / 1000.0);

    o.require(model.weight_count() == 10'000'000, "model is not 10M weights");
    o.require(lut_s < 5.0, fmt("8-bit LUT took %.2f s", lut_s));
    o.require(rate >= 1e6, fmt("faq_convert %.0f weights/s < 1e6", rate));
    o.detail = fmt("lut8 %.3f s; 10M weights: mask %.1f ms, faq_convert %.1f ms (%.2e weights/s)", lut_s, mask_ms,
                   faq_ms, rate);
    return o;
}

// ---------------------------------------------------------------------------
// Serialization

template <class T>
bool rejects(const std::function<T(const io::Bytes&)>& decode, const io::Bytes& bytes)
{
    try {
        decode(bytes);
        return false;
    } catch (const FormatError&) {
        return true;
    } catch (...) {
        return false;  // any other exception type is a failure too
    }
}

LookupTable random_lut(Rng& rng)
{
    const int b = 2 + static_cast<int>(rng.below(5));
    auto base = build_lut(QuantSpec{b});
    std::vector<Code> e(base.entries());
    for (std::size_t k = base.value_count(); k < e.size(); ++k)
        e[k] = static_cast<Code>(fixtures::random_value(rng, b));
    return LookupTable(b, std::move(e));
}

ErrorMask random_mask(Rng& rng)
{
    ErrorMask m;
    m.config.bitwidth = 2 + static_cast<int>(rng.below(15));
    m.config.buffer_rows = 1 + rng.below(512);
    m.config.buffer_cols = 1 + rng.below(512);
    m.config.pfll = rng.coin();
    m.fault_seed = rng.next();
    m.fault_rate = rng.uniform();
    m.layers.resize(rng.below(6));
    for (auto& l : m.layers) {
        l.resize(rng.below(300));
        for (auto& i : l) i = static_cast<std::uint32_t>(rng.below(pow3(m.config.bitwidth)));
    }
    return m;
}

QuantizedModel random_model_instance(Rng& rng)
{
    const int b = 2 + static_cast<int>(rng.below(15));
    QuantizedModel m = rng.coin() ? fixtures::small_cnn_model(rng.next())
                                  : fixtures::mlp_model(rng.next(), 1 + int(rng.below(20)), 1 + int(rng.below(20)),
                                                        1 + int(rng.below(10)));
    m = quantize_network(dequantize_model(m), QuantSpec{b});
    if (rng.coin()) m.baseline_accuracy = rng.uniform();
    if (rng.coin())
        for (std::size_t i = 0; i <= m.layers.size(); ++i) m.activation_scales.push_back({rng.uniform(1e-3, 2.0), "a"});
    return m;
}

template <class T>
void fuzz_header(Outcome& o, const char* name, const io::Bytes& good, const std::function<T(const io::Bytes&)>& decode,
                 std::size_t header_len, bool bitwidth_is_structural, std::size_t& cases)
{
    auto expect_reject = [&](const io::Bytes& b, const std::string& what) {
        ++cases;
        o.require(rejects(decode, b), fmt("%s: %s accepted", name, what.c_str()));
    };
    for (std::size_t len = 0; len < header_len; ++len)
        expect_reject(io::Bytes(good.begin(), good.begin() + len), fmt("truncation to %zu bytes", len));
    for (std::size_t pos = 0; pos < header_len; ++pos) {
        const bool bitwidth_field = pos == 6 || pos == 7;
        for (std::uint8_t flip : {0x01, 0x02, 0x10, 0x80, 0xFF}) {
            auto b = good;
            b[pos] ^= flip;
            if (bitwidth_field && !bitwidth_is_structural) {
                const int w = b[6] | (b[7] << 8);
                if (w >= 2 && w <= 16) continue;  // in-range widths are not structural for this format
            }
            expect_reject(b, fmt("byte %zu ^ 0x%02x", pos, flip));
        }
    }
}

Outcome serialization()
{
    Outcome o;
    Rng rng(909);
    int round_trips = 0;
    for (int i = 0; i < 200; ++i, ++round_trips) {
        const auto map = fixtures::random_fault_map(rng);
        const auto bytes = io::encode_fault_map(map);
        const auto back = io::decode_fault_map(bytes);
        o.require(back == map && io::encode_fault_map(back) == bytes, "fault map round trip differs");
    }
    for (int i = 0; i < 200; ++i, ++round_trips) {
        const auto lut = random_lut(rng);
        const auto bytes = io::encode_lut(lut);
        o.require(io::decode_lut(bytes) == lut && io::encode_lut(io::decode_lut(bytes)) == bytes,
                  "lookup table round trip differs");
    }
    for (int i = 0; i < 200; ++i, ++round_trips) {
        const auto model = random_model_instance(rng);
        const auto bytes = io::encode_model(model);
        const auto back = io::decode_model(bytes);
        o.require(back == model && io::encode_model(back) == bytes, "model round trip differs");
    }
    for (int i = 0; i < 200; ++i, ++round_trips) {
        const auto mask = random_mask(rng);
        const auto bytes = io::encode_mask(mask);
        o.require(io::decode_mask(bytes) == mask && io::encode_mask(io::decode_mask(bytes)) == bytes,
                  "mask round trip differs");
    }

    std::size_t cases = 0;
    fuzz_header<FaultMap>(o, "fault map", io::encode_fault_map(generate_fault_map(3, 3, 8, 0.3, 1)),
                          io::decode_fault_map, 16, true, cases);
    fuzz_header<LookupTable>(o, "lookup table", io::encode_lut(build_lut(QuantSpec{3})), io::decode_lut, 16, true,
                             cases);
    fuzz_header<QuantizedModel>(o, "model", io::encode_model(fixtures::mlp_model(4)), io::decode_model, 16, true,
                                cases);
    ErrorMask mask = random_mask(rng);
    mask.layers = {{1, 2, 3}, {}, {4}};
    fuzz_header<ErrorMask>(o, "mask", io::encode_mask(mask), io::decode_mask, 12, false, cases);
    if (o.pass) o.detail = fmt("%d round trips bit-identical, %zu corrupted headers rejected", round_trips, cases);
    return o;
}

}  // namespace

int main()
{
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
    };
    TrendResult trends;
    bool trends_done = false;
    auto trend = [&](bool pfll) {
        if (!trends_done) {
            trends = cnn_trends();
            trends_done = true;
        }
        return pfll ? trends.pfll_vs_faq : trends.faq_vs_inject;
    };
    const std::vector<Criterion> criteria{
        {"bit-example fidelity", bit_examples},
        {"oracle equivalence", oracle_equivalence},
        {"fixed-point and dominance invariants", lut_invariants},
        {"fault-map statistics", fault_statistics_bounds},
        {"accuracy trend faq vs inject", [&] { return trend(false); }},
        {"pfll trend", [&] { return trend(true); }},
        {"retraining trend", retraining_trend},
        {"performance", performance},
        {"serialization", serialization},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        if (!o.pass) ++failures;
        std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", int(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
