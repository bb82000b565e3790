#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace vdl {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles. Small fixed grids throughout, so no
/// expression templates or views; bounds are checked only in debug builds.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    Vec& data() { return data_; }
    const Vec& data() const { return data_; }

    Vec row(std::size_t i) const;
    Vec col(std::size_t j) const;

    double min() const;
    double max() const;
    double mean() const;

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Vec data_;
};

namespace units {
constexpr double pa_per_mmhg = 133.322;
constexpr double m_per_mm = 1e-3;
constexpr double m_per_cm = 1e-2;
constexpr double m3_per_ml = 1e-6;
}  // namespace units

/// Saline defaults; the recordings never carry fluid properties.
struct FluidProps {
    double rho = 1000.0;   // kg/m^3
    double mu = 1.0e-3;    // Pa s
};

constexpr double kContractionSpeed = 0.03;  // m/s, velocity scale c

/// Deterministic RNG. mt19937_64 supplies the bit stream; the distribution
/// transforms are written out explicitly so that identical seeds give
/// identical draws on every platform and standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    /// Independent stream for (seed, index); serial and parallel runs agree.
    Rng stream(std::uint64_t index) const;

    double uniform();                       // [0, 1)
    double uniform(double lo, double hi);   // [lo, hi)
    double normal();                        // standard normal, Box-Muller
    /// Standard normal with |N| < cut, by rejection.
    double truncated_normal(double cut);
    std::uint64_t integer(std::uint64_t n);  // [0, n)
    std::uint64_t raw() { return engine_(); }

private:
    std::uint64_t base_seed_;
    std::mt19937_64 engine_;
};

/// FNV-1a 64-bit, used to tag artifacts so downstream commands can verify
/// their inputs. Integrity check, not cryptography.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::string hash_bytes_hex(const std::string& bytes);
std::string hash_file_hex(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// CSV helpers for plain numeric matrices (no header row).
void write_matrix_csv(const std::string& path, const Matrix& m);
Matrix read_matrix_csv(const std::string& path);

/// Linear interpolation of tabulated (xs, ys) at x; xs strictly increasing,
/// clamped at the ends.
double interp1(const Vec& xs, const Vec& ys, double x);

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace vdl
