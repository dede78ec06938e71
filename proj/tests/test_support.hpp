#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <jpeglib.h>
#include <png.h>
#include <unistd.h>

#include "svdclass/matrix.hpp"
#include "svdclass/random.hpp"

namespace svdclass::test {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.values()) v = lo + (hi - lo) * unit_uniform(rng);
    return m;
}

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
    return e;
}

/// Singular values as square roots of the eigenvalues of the smaller Gram
/// matrix (A^T A or A A^T), descending. Independent of the Jacobi SVD.
inline std::vector<double> gram_eigen_singular_values(const Matrix& a) {
    const Eigen::MatrixXd e = to_eigen(a);
    const Eigen::MatrixXd g = a.rows() >= a.cols() ? Eigen::MatrixXd(e.transpose() * e)
                                                   : Eigen::MatrixXd(e * e.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g);
    const Eigen::VectorXd lambda = solver.eigenvalues();
    std::vector<double> s(lambda.size());
    for (Eigen::Index i = 0; i < lambda.size(); ++i)
        s[static_cast<std::size_t>(lambda.size() - 1 - i)] = std::sqrt(std::max(lambda(i), 0.0));
    return s;
}

inline double frobenius_distance(const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.values()[i] - b.values()[i];
        s += d * d;
    }
    return std::sqrt(s);
}

/// Unique scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("svdclass_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

inline std::vector<std::uint8_t> encode_png(std::size_t width, std::size_t height, std::size_t channels,
                                            const std::vector<std::uint8_t>& pixels) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = channels == 1 ? PNG_FORMAT_GRAY : channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_RGBA;
    png_alloc_size_t size = 0;
    png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) return {};
    out.resize(size);
    return out;
}

inline std::vector<std::uint8_t> encode_jpeg(std::size_t width, std::size_t height, std::size_t channels,
                                             const std::vector<std::uint8_t>& pixels, int quality = 95) {
    jpeg_compress_struct cinfo;
    jpeg_error_mgr jerr;
    cinfo.err = jpeg_std_error(&jerr);
    jpeg_create_compress(&cinfo);
    unsigned char* buffer = nullptr;
    unsigned long size = 0;
    jpeg_mem_dest(&cinfo, &buffer, &size);
    cinfo.image_width = static_cast<JDIMENSION>(width);
    cinfo.image_height = static_cast<JDIMENSION>(height);
    cinfo.input_components = static_cast<int>(channels);
    cinfo.in_color_space = channels == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        auto* row = const_cast<JSAMPROW>(pixels.data() + cinfo.next_scanline * width * channels);
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    std::vector<std::uint8_t> out(buffer, buffer + size);
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    return out;
}

inline void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    std::fwrite(bytes.data(), 1, bytes.size(), f);
    std::fclose(f);
}

}  // namespace svdclass::test
