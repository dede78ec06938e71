#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>

#include "svdclass/errors.hpp"
#include "svdclass/imgio.hpp"
#include "svdclass/random.hpp"

namespace svdclass {

struct SynthClass {
    std::string label;
    double mean = 0.5;
};

/// Two-class "bright fur vs dark fur" stand-in: each image is its class
/// mean plus a few Gaussian bumps plus uniform noise, clipped to [0,1].
struct SynthSpec {
    std::array<SynthClass, 2> classes = {SynthClass{"dark", 0.2}, SynthClass{"bright", 0.9}};
    double noise = 0.05;  // standard deviation of the zero-mean uniform noise
    std::size_t blobs_min = 0;
    std::size_t blobs_max = 3;
    double radius_min = 3.0;  // pixels
    double radius_max = 10.0;
    double blob_amplitude = 0.1;  // peak |height| of a bump
    std::size_t images_per_class = 40;
    std::size_t size = kDefaultImageSize;
    std::uint64_t seed = 7;
};

inline void validate(const SynthSpec& spec, const WarningSink& warn = warn_to_stderr) {
    for (const auto& c : spec.classes) {
        if (c.label.empty()) throw ConfigError("synthetic class label is empty");
        if (!(c.mean >= 0.0 && c.mean <= 1.0)) throw ConfigError("synthetic class mean must lie in [0, 1]");
    }
    if (spec.classes[0].label == spec.classes[1].label) throw ConfigError("synthetic class labels must differ");
    if (!(spec.noise >= 0.0)) throw ConfigError("noise must be nonnegative");
    if (spec.blobs_min > spec.blobs_max) throw ConfigError("blob count range is inverted");
    if (!(spec.radius_min > 0.0 && spec.radius_min <= spec.radius_max))
        throw ConfigError("blob radius range must be positive and ordered");
    if (!(spec.blob_amplitude >= 0.0)) throw ConfigError("blob amplitude must be nonnegative");
    if (spec.images_per_class == 0) throw ConfigError("need at least one image per class");
    if (spec.size == 0) throw ConfigError("image size must be at least 1");
    if (spec.classes[0].mean == spec.classes[1].mean && spec.noise == 0.0 && warn)
        warn("synthetic classes share the same mean and have no noise");
}

inline GrayMatrix synth_image(const SynthSpec& spec, double mean, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t n = spec.size;
    GrayMatrix img(n, n, mean);

    const std::size_t blobs = spec.blobs_min + static_cast<std::size_t>(uniform_index(rng, spec.blobs_max - spec.blobs_min + 1));
    for (std::size_t b = 0; b < blobs; ++b) {
        const double cy = unit_uniform(rng) * static_cast<double>(n);
        const double cx = unit_uniform(rng) * static_cast<double>(n);
        const double radius = spec.radius_min + unit_uniform(rng) * (spec.radius_max - spec.radius_min);
        const double sign = (rng() & 1) ? 1.0 : -1.0;
        const double height = sign * spec.blob_amplitude * (0.5 + 0.5 * unit_uniform(rng));
        const double inv = 1.0 / (2.0 * radius * radius);
        for (std::size_t i = 0; i < n; ++i) {
            const double dy = static_cast<double>(i) + 0.5 - cy;
            for (std::size_t j = 0; j < n; ++j) {
                const double dx = static_cast<double>(j) + 0.5 - cx;
                img(i, j) += height * std::exp(-(dx * dx + dy * dy) * inv);
            }
        }
    }

    const double half_width = spec.noise * std::sqrt(3.0);
    for (double& v : img.values()) {
        if (half_width > 0.0) v += (2.0 * unit_uniform(rng) - 1.0) * half_width;
        v = std::clamp(v, 0.0, 1.0);
    }
    return img;
}

/// Deterministic for a given spec; every image draws from its own derived seed.
inline LabeledDataset generate(const SynthSpec& spec, const WarningSink& warn = warn_to_stderr) {
    validate(spec, warn);
    // Class order is lexicographic, as for datasets loaded from disk.
    std::array<std::size_t, 2> order = {0, 1};
    if (spec.classes[1].label < spec.classes[0].label) order = {1, 0};

    LabeledDataset ds{{spec.classes[order[0]].label, spec.classes[order[1]].label}, {}};
    for (std::size_t c = 0; c < 2; ++c) {
        const SynthClass& cls = spec.classes[order[c]];
        for (std::size_t i = 0; i < spec.images_per_class; ++i) {
            const std::uint64_t seed = derive_seed(spec.seed, order[c] * 1'000'003ULL + i);
            char name[32];
            std::snprintf(name, sizeof name, "%04zu.pgm", i);
            ds.items.push_back({synth_image(spec, cls.mean, seed), c, cls.label + "/" + cls.label + "_" + name});
        }
    }
    return ds;
}

/// Writes the dataset as `<root>/<label>/*.pgm`, the layout list_dataset() reads.
inline void write_dataset(const LabeledDataset& ds, const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (ds.items.empty()) throw DataError("refusing to write an empty dataset");
    if (ds.labels[0].empty() || ds.labels[1].empty() || ds.labels[0] == ds.labels[1])
        throw DataError("dataset needs two distinct nonempty labels");

    std::error_code ec;
    for (const auto& label : ds.labels) {
        fs::create_directories(root / label, ec);
        if (ec) throw DataError("cannot create " + (root / label).string() + ": " + ec.message());
    }
    std::array<std::size_t, 2> counters = {0, 0};
    for (const auto& item : ds.items) {
        if (item.label > 1) throw DataError("item label index out of range");
        std::string name = fs::path(item.source).filename().string();
        if (name.empty() || fs::path(name).extension() != ".pgm") {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%04zu.pgm", counters[item.label]);
            name = buf;
        }
        ++counters[item.label];
        write_pgm(item.image, root / ds.labels[item.label] / name);
    }
}

}  // namespace svdclass
