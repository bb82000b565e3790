#include "vdl/ingest.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "vdl/calibrate.hpp"

namespace vdl::ingest {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

std::string expected_header() {
    std::string h = "time_s";
    for (std::size_t i = 1; i <= kSensorCount; ++i) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "d%02zu_mm", i);
        h += std::string(",") + buf;
    }
    h += ",p_distal_mmhg,volume_ml";
    return h;
}

std::string strip_cr(std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
}

}  // namespace

double FlipRecording::segment_length_m() const {
    double spacing_m = units == Units::si ? sensor_spacing : sensor_spacing * units::m_per_cm;
    return static_cast<double>(kSensorCount - 1) * spacing_m;
}

FlipRecording parse_recording_text(const std::string& csv, const std::string& origin) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError(origin + ": empty recording file");
    line = strip_cr(line);
    if (line != expected_header())
        throw ValidationError(origin + ": malformed header, expected '" + expected_header() + "'");

    std::vector<Vec> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != kSensorCount + 3)
            throw ValidationError(origin + ":" + std::to_string(line_no) + ": expected " +
                                  std::to_string(kSensorCount + 3) + " columns, got " +
                                  std::to_string(cells.size()));
        Vec row(cells.size());
        for (std::size_t j = 0; j < cells.size(); ++j) {
            try {
                row[j] = std::stod(cells[j]);
            } catch (const std::exception&) {
                throw ValidationError(origin + ":" + std::to_string(line_no) +
                                      ": non-numeric cell '" + cells[j] + "'");
            }
            if (!std::isfinite(row[j]))
                throw ValidationError(origin + ":" + std::to_string(line_no) + ": non-finite cell");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ValidationError(origin + ": recording has no samples");

    FlipRecording rec;
    rec.units = Units::clinical;
    rec.sensor_spacing = 1.0;  // cm; the CSV schema carries no spacing, default applies
    std::size_t t = rows.size();
    rec.time.resize(t);
    rec.diameters = Matrix(kSensorCount, t);
    rec.distal_pressure.resize(t);
    rec.bag_volume.resize(t);
    for (std::size_t k = 0; k < t; ++k) {
        rec.time[k] = rows[k][0];
        if (k > 0 && rec.time[k] <= rec.time[k - 1])
            throw ValidationError(origin + ": time not strictly increasing at sample " +
                                  std::to_string(k));
        for (std::size_t s = 0; s < kSensorCount; ++s) {
            double d = rows[k][1 + s];
            if (d <= 0.0)
                throw ValidationError(origin + ": non-positive diameter at sample " +
                                      std::to_string(k) + ", sensor " + std::to_string(s + 1));
            rec.diameters(s, k) = d;
        }
        rec.distal_pressure[k] = rows[k][1 + kSensorCount];
        rec.bag_volume[k] = rows[k][2 + kSensorCount];
        if (rec.bag_volume[k] <= 0.0)
            throw ValidationError(origin + ": non-positive bag volume at sample " +
                                  std::to_string(k));
    }
    return rec;
}

FlipRecording parse_recording(const std::string& path) {
    return parse_recording_text(read_text_file(path), path);
}

std::string recording_to_csv(const FlipRecording& rec) {
    const FlipRecording& r = rec.units == Units::clinical ? rec : to_clinical(rec);
    std::ostringstream ss;
    ss.precision(17);
    ss << expected_header() << '\n';
    for (std::size_t k = 0; k < r.samples(); ++k) {
        ss << r.time[k];
        for (std::size_t s = 0; s < kSensorCount; ++s) ss << ',' << r.diameters(s, k);
        ss << ',' << r.distal_pressure[k] << ',' << r.bag_volume[k] << '\n';
    }
    return ss.str();
}

void write_recording(const std::string& path, const FlipRecording& rec) {
    write_text_file(path, recording_to_csv(rec));
}

FlipRecording to_si(const FlipRecording& rec) {
    if (rec.units == Units::si) return rec;
    FlipRecording out = rec;
    out.units = Units::si;
    out.sensor_spacing = rec.sensor_spacing * units::m_per_cm;
    for (double& d : out.diameters.data()) d *= units::m_per_mm;
    for (double& p : out.distal_pressure) p *= units::pa_per_mmhg;
    for (double& v : out.bag_volume) v *= units::m3_per_ml;
    return out;
}

FlipRecording to_clinical(const FlipRecording& rec) {
    if (rec.units == Units::clinical) return rec;
    FlipRecording out = rec;
    out.units = Units::clinical;
    out.sensor_spacing = rec.sensor_spacing / units::m_per_cm;
    for (double& d : out.diameters.data()) d /= units::m_per_mm;
    for (double& p : out.distal_pressure) p /= units::pa_per_mmhg;
    for (double& v : out.bag_volume) v /= units::m3_per_ml;
    return out;
}

double reference_area(double volume_m3, double length_m) {
    if (volume_m3 <= 0.0) throw ValidationError("reference_area: volume must be positive");
    if (length_m <= 0.0) throw ValidationError("reference_area: length must be positive");
    return volume_m3 / length_m;
}

Matrix resample_bilinear(const Matrix& field, const Vec& col_coords, std::size_t out_rows,
                         std::size_t out_cols) {
    if (field.cols() != col_coords.size())
        throw std::invalid_argument("resample_bilinear: coordinate count mismatch");
    if (out_rows < 2 || out_cols < 2)
        throw std::invalid_argument("resample_bilinear: output grid too small");

    std::size_t in_rows = field.rows();
    double c0 = col_coords.front(), c1 = col_coords.back();
    Matrix out(out_rows, out_cols);
    for (std::size_t i = 0; i < out_rows; ++i) {
        // row axis: uniform in index space
        double ri = static_cast<double>(i) * static_cast<double>(in_rows - 1) /
                    static_cast<double>(out_rows - 1);
        std::size_t r0 = static_cast<std::size_t>(ri);
        if (r0 >= in_rows - 1) r0 = in_rows - 2;
        double fr = ri - static_cast<double>(r0);
        for (std::size_t j = 0; j < out_cols; ++j) {
            double x = c0 + (c1 - c0) * static_cast<double>(j) / static_cast<double>(out_cols - 1);
            // column axis: physical coordinates, possibly non-uniform
            auto it = std::upper_bound(col_coords.begin(), col_coords.end(), x);
            std::size_t chi = static_cast<std::size_t>(it - col_coords.begin());
            if (chi == 0) chi = 1;
            if (chi >= col_coords.size()) chi = col_coords.size() - 1;
            std::size_t clo = chi - 1;
            double denom = col_coords[chi] - col_coords[clo];
            double fc = denom > 0.0 ? (x - col_coords[clo]) / denom : 0.0;
            fc = std::clamp(fc, 0.0, 1.0);
            double v00 = field(r0, clo), v01 = field(r0, chi);
            double v10 = field(r0 + 1, clo), v11 = field(r0 + 1, chi);
            double top = v00 + fc * (v01 - v00);
            double bot = v10 + fc * (v11 - v10);
            out(i, j) = top + fr * (bot - top);
        }
    }
    return out;
}

AnalysisWindow select_window(const FlipRecording& rec_in, double t_start, double t_end,
                             const calibrate::TubeLawFit& fit) {
    if (t_end <= t_start)
        throw ValidationError("select_window: degenerate window (t_end <= t_start)");
    FlipRecording rec = to_si(rec_in);
    if (t_start < rec.time.front() - 1e-12 || t_end > rec.time.back() + 1e-12)
        throw ValidationError("select_window: window outside recording");

    // native samples covering the window (inclusive ends for interpolation)
    std::size_t lo = 0;
    while (lo + 1 < rec.samples() && rec.time[lo + 1] <= t_start) ++lo;
    std::size_t hi = rec.samples() - 1;
    while (hi > 0 && rec.time[hi - 1] >= t_end) --hi;

    AnalysisWindow w;
    w.t_start = t_start;
    w.t_end = t_end;
    w.duration = t_end - t_start;

    // bag volume should hold steady over an analysis window
    double vol_mean = 0.0, vol_dev = 0.0;
    std::size_t count = 0;
    for (std::size_t k = lo; k <= hi; ++k) {
        if (rec.time[k] < t_start - 1e-12 || rec.time[k] > t_end + 1e-12) continue;
        vol_mean += rec.bag_volume[k];
        ++count;
    }
    if (count == 0) {  // window between two samples
        vol_mean = interp1(rec.time, rec.bag_volume, 0.5 * (t_start + t_end));
        count = 1;
    } else {
        vol_mean /= static_cast<double>(count);
    }
    for (std::size_t k = lo; k <= hi; ++k) {
        if (rec.time[k] < t_start - 1e-12 || rec.time[k] > t_end + 1e-12) continue;
        vol_dev = std::max(vol_dev, std::abs(rec.bag_volume[k] - vol_mean));
    }
    if (vol_dev > 0.02 * vol_mean)
        w.warnings.push_back("bag volume deviates " +
                             std::to_string(100.0 * vol_dev / vol_mean) +
                             "% from its mean over the window");
    w.volume = vol_mean;

    double a_s = fit.area_scale();

    // alpha at the 16 sensor rows x native columns within [t_start, t_end],
    // then resampled onto 16 uniform frames
    Vec frame_times(kGridSize);
    for (std::size_t j = 0; j < kGridSize; ++j)
        frame_times[j] = t_start + w.duration * static_cast<double>(j) /
                                       static_cast<double>(kGridSize - 1);

    Matrix alpha_native(kSensorCount, hi - lo + 1);
    Vec native_times(hi - lo + 1);
    for (std::size_t k = lo; k <= hi; ++k) {
        native_times[k - lo] = rec.time[k];
        for (std::size_t s = 0; s < kSensorCount; ++s) {
            double d = rec.diameters(s, k);
            double area = M_PI * d * d / 4.0;
            alpha_native(s, k - lo) = area / a_s;
        }
    }

    w.alpha_grid = Matrix(kSensorCount, kGridSize);
    w.pd_series.resize(kGridSize);
    for (std::size_t s = 0; s < kSensorCount; ++s) {
        Vec series = alpha_native.row(s);
        for (std::size_t j = 0; j < kGridSize; ++j)
            w.alpha_grid(s, j) = interp1(native_times, series, frame_times[j]);
    }
    for (std::size_t j = 0; j < kGridSize; ++j)
        w.pd_series[j] = interp1(rec.time, rec.distal_pressure, frame_times[j]);

    return w;
}

}  // namespace vdl::ingest
