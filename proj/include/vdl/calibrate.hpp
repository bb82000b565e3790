#pragma once

#include "vdl/core.hpp"
#include "vdl/ingest.hpp"

namespace vdl::calibrate {

/// Relaxed-state pressure-area calibration. Only the ratio K/A_o and the
/// intercept P_o-K are identifiable from the probe, so every derived scale
/// is written in terms of them: the area scale is rho c^2 / (K/A_o) and the
/// friction parameter gamma = 8 pi mu L (K/A_o) / (rho^2 c^3).
struct TubeLawFit {
    double k_over_ao = 0.0;    // Pa/m^2, slope
    double po_minus_k = 0.0;   // Pa, intercept
    double r_squared = 0.0;
    std::vector<std::pair<double, double>> support_points;  // (A_r m^2, P_d Pa)

    double c = kContractionSpeed;  // m/s, velocity scale
    double rho = 1000.0;           // kg/m^3
    double mu = 1.0e-3;            // Pa s
    double length = 0.15;          // m, probe segment span
    bool negative_slope = false;   // non-physical stiffness, flagged not rejected

    double area_scale() const { return rho * c * c / k_over_ao; }
    double pressure_scale() const { return rho * c * c; }
    double gamma() const { return 8.0 * M_PI * mu * length * k_over_ao / (rho * rho * c * c * c); }
};

struct PressureMinimum {
    double t = 0.0;    // s
    double a_r = 0.0;  // m^2, V/L for the plateau
    double p_d = 0.0;  // Pa
    double volume = 0.0;  // m^3, plateau volume
};

/// One low-pressure point per constant-volume plateau. Plateaus shorter than
/// 1 s are treated as transients and skipped.
std::vector<PressureMinimum> find_pressure_minima(const ingest::FlipRecording& rec);

struct FitEnvironment {
    double c = kContractionSpeed;
    double rho = 1000.0;
    double mu = 1.0e-3;
    double length = 0.15;
};

/// Ordinary least squares of P on A_r; slope and intercept are the tube-law
/// parameters.
TubeLawFit fit_tube_law(const std::vector<std::pair<double, double>>& points,
                        const FitEnvironment& env = {});

std::string fit_to_json(const TubeLawFit& fit);
TubeLawFit fit_from_json(const std::string& json_text);
void save_fit(const std::string& path, const TubeLawFit& fit);
TubeLawFit load_fit(const std::string& path);

}  // namespace vdl::calibrate
