#pragma once

#include "vdl/core.hpp"

namespace vdl::calibrate {
struct TubeLawFit;
}

namespace vdl::ingest {

constexpr std::size_t kSensorCount = 16;
constexpr std::size_t kGridSize = 16;  // analysis windows are 16x16

enum class Units { clinical, si };

/// One probe recording: 16 diameter channels, distal pressure, bag volume.
/// Clinical units are the CSV units (mm, mmHg, mL); SI is m, Pa, m^3.
struct FlipRecording {
    Vec time;               // s, strictly increasing
    Matrix diameters;       // [16 x T]
    Vec distal_pressure;    // [T]
    Vec bag_volume;         // [T]
    double sensor_spacing;  // cm (clinical) or m (SI)
    Units units = Units::clinical;

    std::size_t samples() const { return time.size(); }
    /// Span of the measured segment: 15 gaps between the 16 sensors.
    double segment_length_m() const;
};

/// One analysis interval resampled onto the solver/VAE grid.
struct AnalysisWindow {
    double t_start = 0.0;  // s
    double t_end = 0.0;    // s
    Matrix alpha_grid;     // [16 sensors x 16 frames], non-dimensional area
    Vec pd_series;         // [16], Pa
    double volume = 0.0;   // m^3
    double duration = 0.0; // s
    std::vector<std::string> warnings;
};

/// Parse the recording CSV (header: time_s,d01_mm,...,d16_mm,p_distal_mmhg,volume_ml).
FlipRecording parse_recording(const std::string& path);
FlipRecording parse_recording_text(const std::string& csv, const std::string& origin = "<string>");

/// Serialize in the same schema parse_recording reads.
std::string recording_to_csv(const FlipRecording& rec);
void write_recording(const std::string& path, const FlipRecording& rec);

FlipRecording to_si(const FlipRecording& rec);
FlipRecording to_clinical(const FlipRecording& rec);

/// Cylinder reference area V/L.
double reference_area(double volume_m3, double length_m);

/// Cut [t_start, t_end], turn diameters into non-dimensional areas via the
/// fit's area scale, and resample everything onto the 16x16 grid.
AnalysisWindow select_window(const FlipRecording& rec, double t_start, double t_end,
                             const calibrate::TubeLawFit& fit);

/// Bilinear resampling of a field sampled at (rows, col_coords) onto
/// out_cols uniformly spaced columns over [col_coords.front(), col_coords.back()]
/// and out_rows uniformly spaced rows over the row index range.
Matrix resample_bilinear(const Matrix& field, const Vec& col_coords, std::size_t out_rows,
                         std::size_t out_cols);

}  // namespace vdl::ingest
