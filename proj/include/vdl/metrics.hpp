#pragma once

#include <string>
#include <vector>

#include "vdl/calibrate.hpp"
#include "vdl/core.hpp"
#include "vdl/ingest.hpp"
#include "vdl/inverse.hpp"

namespace vdl::metrics {

/// Discrete mechanics parameters attached to one analysis window.
struct PrimaryParams {
    double k_over_ao = 0.0;  // Pa/m^2
    double po_minus_k = 0.0;  // Pa
    double p_max = 0.0;  // Pa, peak distal pressure in the window
    double t_max = 0.0;  // s, contraction duration
    double volume = 0.0;  // m^3
    double theta_max = 0.0;

    std::vector<double> as_vector() const {
        return {k_over_ao, po_minus_k, p_max, t_max, volume, theta_max};
    }
};

struct WorkMetrics {
    double egjw = 0.0;  // J
    double egjrow1 = 0.0;  // J, theta taken at t1
    double egjrow2 = 0.0;  // J, median theta over [t1, t2]
    double egjrow3 = 0.0;  // J, minimum theta over [t1, t2]
};

/// Spatial and temporal bounds of the junction plus the fixed opening areas.
struct EgjRegion {
    double x1 = 0.0, x2 = 0.0;  // m
    double t1 = 0.0, t2 = 0.0;  // s
    double a1 = 0.0, a2 = 0.0;  // m^2, areas at 3 mm and 22 mm diameter
    std::size_t i1 = 0, i2 = 0;  // sensor index bounds (inclusive)
    std::size_t f1 = 0, f2 = 0;  // frame index bounds (inclusive)
    bool manual = false;
};

constexpr double kEgjDiameterRatio = 0.60;  // narrowing threshold vs proximal body
double opening_area_lo();  // pi * (1.5e-3)^2
double opening_area_hi();  // pi * (11e-3)^2

/// Detect the junction as the contiguous distal run of sensors whose
/// time-averaged diameter falls below 60% of the proximal-body average.
EgjRegion locate_egj(const ingest::AnalysisWindow& window, const inverse::MechanicsState& state);

/// Build a region from explicit sensor/frame bounds (manual override).
EgjRegion region_from_bounds(const ingest::AnalysisWindow& window,
                             const calibrate::TubeLawFit& fit, std::size_t i1, std::size_t i2,
                             std::size_t f1, std::size_t f2);

/// Work done while the junction opens: trapezoidal double integral of
/// P * dA/dt over the region.
double compute_egjw(const Matrix& pressure_pa, const Matrix& area_m2, const EgjRegion& region,
                    const ingest::AnalysisWindow& window);

/// Work that would be required to open the junction from a1 to a2 against its
/// tone, for the three theta-aggregation variants.
void compute_egjrow(const Matrix& theta, const EgjRegion& region,
                    const calibrate::TubeLawFit& fit, WorkMetrics& out);

/// Single closed-form evaluation for one scalar theta estimate.
double egjrow_closed_form(double theta_hat, const calibrate::TubeLawFit& fit,
                          const EgjRegion& region);

WorkMetrics compute_work_metrics(const ingest::AnalysisWindow& window,
                                 const inverse::MechanicsState& state, const EgjRegion& region);

PrimaryParams discrete_params(const ingest::AnalysisWindow& window,
                              const inverse::MechanicsState& state,
                              const calibrate::TubeLawFit& fit);

std::string metrics_to_json(const WorkMetrics& work, const PrimaryParams& params);

}  // namespace vdl::metrics
