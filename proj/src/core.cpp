#include "vdl/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace vdl {

Vec Matrix::row(std::size_t i) const {
    Vec out(cols_);
    for (std::size_t j = 0; j < cols_; ++j) out[j] = (*this)(i, j);
    return out;
}

Vec Matrix::col(std::size_t j) const {
    Vec out(rows_);
    for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, j);
    return out;
}

double Matrix::min() const { return *std::min_element(data_.begin(), data_.end()); }
double Matrix::max() const { return *std::max_element(data_.begin(), data_.end()); }
double Matrix::mean() const {
    return std::accumulate(data_.begin(), data_.end(), 0.0) / static_cast<double>(data_.size());
}

namespace {

// splitmix64; decorrelates derived stream seeds.
std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

Rng::Rng(std::uint64_t seed) : base_seed_(seed), engine_(mix64(seed)) {}

Rng Rng::stream(std::uint64_t index) const {
    return Rng(mix64(base_seed_ ^ mix64(index + 0x517cc1b727220a95ULL)));
}

double Rng::uniform() {
    // 53-bit mantissa in [0, 1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
    // Box-Muller; u1 in (0, 1]
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::truncated_normal(double cut) {
    for (;;) {
        double n = normal();
        if (std::abs(n) < cut) return n;
    }
}

std::uint64_t Rng::integer(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::integer: n must be positive");
    // rejection to remove modulo bias
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    for (;;) {
        std::uint64_t r = engine_();
        if (r < limit) return r % n;
    }
}

std::uint64_t fnv1a64(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_bytes_hex(const std::string& bytes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
    return std::string(buf);
}

std::string hash_file_hex(const std::string& path) { return hash_bytes_hex(read_text_file(path)); }

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
    std::ostringstream ss;
    ss.precision(17);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) ss << ',';
            ss << m(i, j);
        }
        ss << '\n';
    }
    write_text_file(path, ss.str());
}

Matrix read_matrix_csv(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::vector<Vec> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Vec row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error("ragged CSV matrix: " + path);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("empty CSV matrix: " + path);
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

double interp1(const Vec& xs, const Vec& ys, double x) {
    if (xs.size() != ys.size() || xs.empty())
        throw std::invalid_argument("interp1: mismatched or empty tables");
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    std::size_t hi = static_cast<std::size_t>(it - xs.begin());
    std::size_t lo = hi - 1;
    double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] + t * (ys[hi] - ys[lo]);
}

}  // namespace vdl
