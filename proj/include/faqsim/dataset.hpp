#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "model.hpp"
#include "random.hpp"

namespace faqsim {

// Labeled samples stored contiguously, sample-major.
struct Dataset {
    Shape sample_shape;
    int classes = 0;
    std::vector<double> data;
    std::vector<int> labels;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t sample_size() const { return shape_size(sample_shape); }

    std::span<const double> sample(std::size_t i) const
    {
        const auto n = sample_size();
        return {data.data() + i * n, n};
    }

    void validate() const
    {
        if (sample_shape.empty() || sample_size() == 0) throw InputError("dataset sample shape is empty");
        if (data.size() != labels.size() * sample_size())
            throw InputError("dataset payload does not match sample count");
        if (classes <= 0) throw InputError("dataset must declare at least one class");
        for (int y : labels)
            if (y < 0 || y >= classes) throw InputError("dataset label " + std::to_string(y) + " out of range");
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Gaussian-cluster classification data. Class prototypes are drawn
// uniformly in [0,1] from `seed`; samples add N(0, noise^2) per element
// from `sample_seed` and are clamped to [0,1]. Labels cycle 0..classes-1,
// so every prefix of `classes` samples is balanced.
struct SyntheticSpec {
    std::uint64_t seed = 1;
    std::uint64_t sample_seed = 2;
    int classes = 10;
    int samples_per_class = 100;
    Shape shape{1, 12, 12};
    double noise = 0.3;

    friend bool operator==(const SyntheticSpec&, const SyntheticSpec&) = default;
};

inline Dataset make_synthetic(const SyntheticSpec& spec)
{
    if (spec.classes <= 0 || spec.samples_per_class < 0 || spec.shape.empty() || shape_size(spec.shape) == 0 ||
        !(spec.noise >= 0.0))
        throw InputError("invalid synthetic data specification");
    const std::size_t dim = shape_size(spec.shape);
    Rng proto_rng(derive_seed(spec.seed, seed_stream::data));
    std::vector<double> prototypes(dim * spec.classes);
    for (auto& p : prototypes) p = proto_rng.uniform();

    Dataset ds;
    ds.sample_shape = spec.shape;
    ds.classes = spec.classes;
    const std::size_t n = std::size_t(spec.classes) * spec.samples_per_class;
    ds.labels.resize(n);
    ds.data.resize(n * dim);
    Rng rng(derive_seed(spec.sample_seed, seed_stream::data));
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(i % spec.classes);
        ds.labels[i] = y;
        for (std::size_t k = 0; k < dim; ++k)
            ds.data[i * dim + k] = std::clamp(prototypes[y * dim + k] + spec.noise * rng.normal(), 0.0, 1.0);
    }
    return ds;
}

inline Dataset subset(const Dataset& ds, std::size_t first, std::size_t count)
{
    Dataset out;
    out.sample_shape = ds.sample_shape;
    out.classes = ds.classes;
    count = std::min(count, ds.size() - std::min(first, ds.size()));
    const auto n = ds.sample_size();
    out.labels.assign(ds.labels.begin() + first, ds.labels.begin() + first + count);
    out.data.assign(ds.data.begin() + first * n, ds.data.begin() + (first + count) * n);
    return out;
}

}  // namespace faqsim
