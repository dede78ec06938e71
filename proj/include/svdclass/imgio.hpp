#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <jpeglib.h>
#include <jerror.h>
#include <png.h>

#include "svdclass/errors.hpp"
#include "svdclass/matrix.hpp"
#include "svdclass/parallel.hpp"
#include "svdclass/random.hpp"

namespace svdclass {

/// Decoded 8-bit image, row-major, channels interleaved.
struct RawImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;  // 1, 3 or 4
    std::vector<std::uint8_t> data;

    friend bool operator==(const RawImage&, const RawImage&) = default;
};

/// Normalized grayscale image; every entry lies in [0, 1].
using GrayMatrix = Matrix;

/// Luminance weights in units of 1/10000. They sum to exactly 10000, so a
/// constant-colour pixel maps to exactly that constant.
struct LumaWeights {
    static constexpr int red = 2125;
    static constexpr int green = 7154;
    static constexpr int blue = 721;
    static constexpr int scale = 10000;
};
static_assert(LumaWeights::red + LumaWeights::green + LumaWeights::blue == LumaWeights::scale);

inline constexpr std::size_t kDefaultImageSize = 64;

namespace detail {

inline RawImage decode_pgm(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 2;
    auto fail = [&](const std::string& why) -> DecodeError {
        return DecodeError("PGM: " + why + " at offset " + std::to_string(pos));
    };
    auto skip_space_and_comments = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_uint = [&](const char* field) {
        skip_space_and_comments();
        if (pos >= bytes.size() || !std::isdigit(bytes[pos]))
            throw fail(std::string("expected ") + field);
        std::uint64_t v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos++] - '0');
            if (v > (1u << 30)) throw fail(std::string(field) + " too large");
        }
        return static_cast<std::size_t>(v);
    };

    const std::size_t width = read_uint("width");
    const std::size_t height = read_uint("height");
    const std::size_t maxval = read_uint("maxval");
    if (width == 0 || height == 0) throw fail("zero dimension");
    if (maxval == 0 || maxval > 65535) throw fail("maxval outside [1, 65535]");
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw fail("missing separator after header");
    ++pos;

    const std::size_t bytes_per_sample = maxval < 256 ? 1 : 2;
    const std::size_t need = width * height * bytes_per_sample;
    if (bytes.size() - pos < need) {
        pos = bytes.size();
        throw fail("truncated pixel data (expected " + std::to_string(need) + " bytes)");
    }

    RawImage img{width, height, 1, std::vector<std::uint8_t>(width * height)};
    for (std::size_t i = 0; i < width * height; ++i) {
        std::size_t v = bytes[pos + i * bytes_per_sample];
        if (bytes_per_sample == 2) v = (v << 8) | bytes[pos + i * 2 + 1];
        if (v > maxval) {
            pos += i * bytes_per_sample;
            throw fail("sample exceeds maxval");
        }
        img.data[i] = maxval == 255 ? static_cast<std::uint8_t>(v)
                                    : static_cast<std::uint8_t>((v * 255 + maxval / 2) / maxval);
    }
    return img;
}

inline RawImage decode_png(std::span<const std::uint8_t> bytes) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw DecodeError(std::string("PNG: ") + image.message);
    }
    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    const bool alpha = (image.format & PNG_FORMAT_FLAG_ALPHA) != 0;
    std::size_t stored_channels;
    std::size_t out_channels;
    if (color) {
        image.format = alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
        stored_channels = out_channels = alpha ? 4 : 3;
    } else {
        image.format = alpha ? PNG_FORMAT_GA : PNG_FORMAT_GRAY;
        stored_channels = alpha ? 2 : 1;
        out_channels = 1;
    }

    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw DecodeError("PNG: " + msg);
    }

    RawImage img{image.width, image.height, out_channels, {}};
    if (stored_channels == out_channels) {
        img.data = std::move(buffer);
    } else {
        // Gray + alpha: keep the gray sample.
        img.data.resize(img.width * img.height);
        for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = buffer[2 * i];
    }
    return img;
}

struct JpegErrorManager {
    jpeg_error_mgr pub;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX] = {};
    bool premature_end = false;
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

inline void jpeg_emit_message(j_common_ptr cinfo, int level) {
    if (level >= 0) return;
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    ++cinfo->err->num_warnings;
    if (cinfo->err->msg_code == JWRN_JPEG_EOF) err->premature_end = true;
}

inline RawImage decode_jpeg(std::span<const std::uint8_t> bytes) {
    jpeg_decompress_struct cinfo;
    JpegErrorManager jerr;
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = jpeg_error_exit;
    jerr.pub.emit_message = jpeg_emit_message;
    RawImage img;

    if (setjmp(jerr.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw DecodeError(std::string("JPEG: ") + jerr.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);

    img.width = cinfo.output_width;
    img.height = cinfo.output_height;
    img.channels = static_cast<std::size_t>(cinfo.output_components);
    img.data.resize(img.width * img.height * img.channels);
    const std::size_t stride = img.width * img.channels;
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = img.data.data() + cinfo.output_scanline * stride;
        jpeg_read_scanlines(&cinfo, &row, 1);
        if (jerr.premature_end) break;
    }
    const bool truncated = jerr.premature_end;
    if (!truncated) jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    if (truncated || jerr.premature_end) {
        throw DecodeError("JPEG: premature end of data (input is " + std::to_string(bytes.size()) +
                          " bytes)");
    }
    return img;
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

}  // namespace detail

/// Decodes a JPEG, PNG, or binary PGM (P5) stream, chosen by signature.
inline RawImage decode_image(std::span<const std::uint8_t> bytes) {
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF)
        return detail::decode_jpeg(bytes);
    if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return detail::decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return detail::decode_pgm(bytes);
    throw UnsupportedFormatError("unrecognised image signature (expected JPEG, PNG or binary PGM)");
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline RawImage decode_file(const std::filesystem::path& path) {
    const auto bytes = read_file(path);
    try {
        return decode_image(bytes);
    } catch (const DecodeError& e) {
        throw DecodeError(path.string() + ": " + e.what());
    } catch (const UnsupportedFormatError& e) {
        throw UnsupportedFormatError(path.string() + ": " + e.what());
    }
}

/// Converts to a [0,1] grayscale matrix. Three- and four-channel inputs use
/// the 0.2125/0.7154/0.0721 luminance weights; alpha is ignored.
inline GrayMatrix to_grayscale(const RawImage& img) {
    if (img.width == 0 || img.height == 0) throw DataError("image has zero dimension");
    if (img.data.size() != img.width * img.height * img.channels)
        throw DataError("image buffer size does not match its dimensions");
    GrayMatrix out(img.height, img.width);
    auto dst = out.values();
    const std::size_t pixels = img.width * img.height;
    switch (img.channels) {
        case 1:
            for (std::size_t i = 0; i < pixels; ++i) dst[i] = img.data[i] / 255.0;
            break;
        case 3:
        case 4: {
            constexpr double denom = 255.0 * LumaWeights::scale;
            for (std::size_t i = 0; i < pixels; ++i) {
                const std::uint8_t* px = &img.data[i * img.channels];
                const int weighted =
                    LumaWeights::red * px[0] + LumaWeights::green * px[1] + LumaWeights::blue * px[2];
                dst[i] = weighted / denom;
            }
            break;
        }
        default:
            throw DataError("unsupported channel count " + std::to_string(img.channels));
    }
    return out;
}

/// Bilinear resampling with half-pixel centres; samples outside the source
/// grid clamp to the border. Output stays within the input's value range.
inline GrayMatrix resize_bilinear(const GrayMatrix& m, std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) throw ConfigError("resize target must be at least 1");
    if (m.empty()) throw DataError("cannot resize an empty matrix");
    if (m.rows() == rows && m.cols() == cols) return m;

    struct Tap {
        std::size_t lo, hi;
        double t;
    };
    auto taps = [](std::size_t in, std::size_t out) {
        std::vector<Tap> result(out);
        const double scale = static_cast<double>(in) / static_cast<double>(out);
        for (std::size_t i = 0; i < out; ++i) {
            double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
            src = std::clamp(src, 0.0, static_cast<double>(in - 1));
            const auto lo = static_cast<std::size_t>(std::floor(src));
            const std::size_t hi = std::min(lo + 1, in - 1);
            result[i] = {lo, hi, src - static_cast<double>(lo)};
        }
        return result;
    };
    auto lerp = [](double a, double b, double t) {
        return std::clamp(a + t * (b - a), std::min(a, b), std::max(a, b));
    };

    const auto ytaps = taps(m.rows(), rows);
    const auto xtaps = taps(m.cols(), cols);
    GrayMatrix out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const Tap& ty = ytaps[i];
        for (std::size_t j = 0; j < cols; ++j) {
            const Tap& tx = xtaps[j];
            const double top = lerp(m(ty.lo, tx.lo), m(ty.lo, tx.hi), tx.t);
            const double bottom = lerp(m(ty.hi, tx.lo), m(ty.hi, tx.hi), tx.t);
            out(i, j) = lerp(top, bottom, ty.t);
        }
    }
    return out;
}

inline GrayMatrix resize_bilinear(const GrayMatrix& m, std::size_t target) {
    return resize_bilinear(m, target, target);
}

/// Grayscale conversion followed by a square resize.
inline GrayMatrix preprocess(const RawImage& img, std::size_t size) {
    return resize_bilinear(to_grayscale(img), size);
}

/// Writes a binary 8-bit PGM; values are rounded from [0,1] to [0,255].
inline void write_pgm(const GrayMatrix& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "P5\n" << m.cols() << ' ' << m.rows() << "\n255\n";
    std::vector<char> bytes(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double v = std::clamp(m.values()[i], 0.0, 1.0);
        bytes[i] = static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Datasets

using ClassLabels = std::array<std::string, 2>;

struct LabeledImage {
    GrayMatrix image;
    std::size_t label = 0;  // index into LabeledDataset::labels
    std::string source;     // "<class>/<file>" relative to the dataset root, or empty
};

/// Two-class image collection; labels are kept in lexicographic order.
struct LabeledDataset {
    ClassLabels labels;
    std::vector<LabeledImage> items;

    std::size_t count(std::size_t label) const {
        return static_cast<std::size_t>(std::count_if(
            items.begin(), items.end(), [&](const LabeledImage& it) { return it.label == label; }));
    }

    std::vector<GrayMatrix> images_of(std::size_t label) const {
        std::vector<GrayMatrix> out;
        for (const auto& it : items)
            if (it.label == label) out.push_back(it.image);
        return out;
    }

    /// Throws unless both classes are nonempty and all images share a shape.
    void validate() const {
        if (labels[0] == labels[1]) throw DataError("dataset class labels must be distinct");
        for (std::size_t c = 0; c < 2; ++c)
            if (count(c) == 0) throw DataError("class '" + labels[c] + "' has no images");
        for (const auto& it : items) {
            if (it.label > 1) throw DataError("item label index out of range");
            if (!it.image.same_shape(items.front().image))
                throw DataError("dataset images have differing dimensions");
        }
    }
};

/// Image files found under a dataset root, before any decoding.
struct DatasetManifest {
    std::filesystem::path root;
    ClassLabels labels;
    std::array<std::vector<std::string>, 2> files;  // "<class>/<file>", sorted
};

using WarningSink = std::function<void(const std::string&)>;

inline void warn_to_stderr(const std::string& msg) { std::cerr << "warning: " << msg << '\n'; }

inline bool is_image_path(const std::filesystem::path& p) {
    const auto ext = detail::lower(p.extension().string());
    return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".pgm";
}

/// Lists `<root>/<class>/*.{jpg,jpeg,png,pgm}`. Exactly two class
/// subdirectories are required; hidden directories are ignored.
inline DatasetManifest list_dataset(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(root, ec)) throw DataError("dataset root is not a directory: " + root.string());

    std::vector<std::string> classes;
    for (const auto& entry : fs::directory_iterator(root)) {
        const auto name = entry.path().filename().string();
        if (entry.is_directory() && !name.starts_with(".")) classes.push_back(name);
    }
    if (classes.size() != 2) {
        throw DataError("dataset root " + root.string() + " must contain exactly two class directories, found " +
                        std::to_string(classes.size()));
    }
    std::sort(classes.begin(), classes.end());

    DatasetManifest manifest{root, {classes[0], classes[1]}, {}};
    for (std::size_t c = 0; c < 2; ++c) {
        auto& files = manifest.files[c];
        for (const auto& entry : fs::directory_iterator(root / classes[c])) {
            if (entry.is_regular_file() && is_image_path(entry.path()))
                files.push_back(classes[c] + "/" + entry.path().filename().string());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw DataError("class directory '" + classes[c] + "' holds no image files");
    }
    return manifest;
}

/// Decodes and preprocesses every file of a manifest. Undecodable files are
/// reported to `warn` and skipped. `files_read`, when given, receives every
/// path opened, in manifest order.
inline LabeledDataset decode_manifest(const DatasetManifest& manifest, std::size_t size,
                                      const WarningSink& warn = warn_to_stderr, unsigned workers = 1,
                                      std::vector<std::string>* files_read = nullptr) {
    if (size == 0) throw ConfigError("image size must be at least 1");
    struct Job {
        std::size_t label;
        const std::string* rel;
    };
    std::vector<Job> jobs;
    for (std::size_t c = 0; c < 2; ++c)
        for (const auto& f : manifest.files[c]) jobs.push_back({c, &f});

    std::vector<std::optional<GrayMatrix>> decoded(jobs.size());
    std::vector<std::string> failures(jobs.size());
    parallel_for(jobs.size(), workers, [&](std::size_t i) {
        try {
            decoded[i] = preprocess(decode_file(manifest.root / *jobs[i].rel), size);
        } catch (const DataError& e) {
            failures[i] = e.what();
        }
    });

    LabeledDataset ds{manifest.labels, {}};
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        if (files_read) files_read->push_back(*jobs[i].rel);
        if (decoded[i]) {
            ds.items.push_back({std::move(*decoded[i]), jobs[i].label, *jobs[i].rel});
        } else if (warn) {
            warn("skipping " + *jobs[i].rel + ": " + failures[i]);
        }
    }
    return ds;
}

/// decode_manifest() that additionally requires each class to keep at least one image.
inline LabeledDataset load_manifest(const DatasetManifest& manifest, std::size_t size,
                                    const WarningSink& warn = warn_to_stderr, unsigned workers = 1,
                                    std::vector<std::string>* files_read = nullptr) {
    LabeledDataset ds = decode_manifest(manifest, size, warn, workers, files_read);
    for (std::size_t c = 0; c < 2; ++c)
        if (ds.count(c) == 0) throw DataError("class '" + manifest.labels[c] + "' has no decodable images");
    return ds;
}

inline LabeledDataset load_dataset(const std::filesystem::path& root, std::size_t size = kDefaultImageSize,
                                   const WarningSink& warn = warn_to_stderr, unsigned workers = 1) {
    return load_manifest(list_dataset(root), size, warn, workers);
}

// ---------------------------------------------------------------------------
// Train/test splitting

/// Per-class membership of a stratified split: train[c] and test[c] hold
/// positions into class c's item list, each sorted ascending.
struct SplitIndices {
    std::array<std::vector<std::size_t>, 2> train;
    std::array<std::vector<std::size_t>, 2> test;
};

/// Number of items of an N-item class that go to training: ceil(fraction * N).
inline std::size_t train_count(std::size_t n, double fraction) {
    // The small offset keeps products like 0.7 * 10 from rounding up past an integer.
    const double raw = fraction * static_cast<double>(n) - 1e-9;
    return std::min(n, static_cast<std::size_t>(std::max(0.0, std::ceil(raw))));
}

inline SplitIndices split_indices(const std::array<std::size_t, 2>& class_sizes, double fraction,
                                  std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("train fraction must lie in (0, 1)");
    SplitIndices out;
    for (std::size_t c = 0; c < 2; ++c) {
        const std::size_t n = class_sizes[c];
        if (n < 2) throw DataError("each class needs at least 2 items to split");
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Rng rng(derive_seed(seed, c));
        shuffle(std::span(order), rng);
        const std::size_t k = train_count(n, fraction);
        out.train[c].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
        out.test[c].assign(order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
        std::sort(out.train[c].begin(), out.train[c].end());
        std::sort(out.test[c].begin(), out.test[c].end());
    }
    return out;
}

/// Seeded stratified split into (train, test).
inline std::pair<LabeledDataset, LabeledDataset> split_dataset(const LabeledDataset& ds, double fraction,
                                                               std::uint64_t seed) {
    std::array<std::vector<std::size_t>, 2> members;
    for (std::size_t i = 0; i < ds.items.size(); ++i) members[ds.items[i].label].push_back(i);
    const auto idx = split_indices({members[0].size(), members[1].size()}, fraction, seed);

    std::pair<LabeledDataset, LabeledDataset> out{{ds.labels, {}}, {ds.labels, {}}};
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t p : idx.train[c]) out.first.items.push_back(ds.items[members[c][p]]);
        for (std::size_t p : idx.test[c]) out.second.items.push_back(ds.items[members[c][p]]);
    }
    return out;
}

/// The same split applied to file lists, so that held-out files need never be opened.
inline std::pair<DatasetManifest, DatasetManifest> split_manifest(const DatasetManifest& m, double fraction,
                                                                  std::uint64_t seed) {
    const auto idx = split_indices({m.files[0].size(), m.files[1].size()}, fraction, seed);
    std::pair<DatasetManifest, DatasetManifest> out{{m.root, m.labels, {}}, {m.root, m.labels, {}}};
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t p : idx.train[c]) out.first.files[c].push_back(m.files[c][p]);
        for (std::size_t p : idx.test[c]) out.second.files[c].push_back(m.files[c][p]);
    }
    return out;
}

}  // namespace svdclass
