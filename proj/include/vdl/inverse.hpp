#pragma once

#include <string>
#include <vector>

#include "vdl/calibrate.hpp"
#include "vdl/core.hpp"
#include "vdl/ingest.hpp"

namespace vdl::inverse {

/// Staggered finite-volume grid: sensor locations are cell interfaces (where q
/// and p live), the cells between them carry the averaged cross-section alpha.
struct StaggeredGrid {
    std::size_t n_cells = 15;
    double d_chi = 1.0 / 15.0;
    double d_tau = 0.0;
    std::vector<double> chi_interfaces;  // n_cells + 1 coordinates in [0, 1]
    std::vector<double> chi_cells;       // cell-center coordinates

    StaggeredGrid() : StaggeredGrid(15, 0.0) {}
    StaggeredGrid(std::size_t cells, double dtau);
    std::size_t interfaces() const { return n_cells + 1; }
};

/// Everything the inverse solve produces for a single analysis window.
struct MechanicsState {
    StaggeredGrid grid;
    Matrix alpha;       // cells x frames, non-dimensional cell-average area
    Matrix alpha_node;  // interfaces x frames, measured non-dimensional area
    Matrix q;           // interfaces x frames, non-dimensional flow rate
    Matrix p;           // interfaces x frames, pressure / (rho c^2)
    Matrix theta;       // 16 x 16 activation parameter
    Matrix clamp_mask;  // 16 x 16, 1 where theta was clamped or undefined
    double clamp_fraction = 0.0;
    bool unreliable = false;  // more than 20% of theta cells clamped
    double mass_drift = 0.0;
    calibrate::TubeLawFit fit;

    Matrix pressure_pa() const;  // p unscaled by rho c^2
    Matrix area_node_m2() const;  // alpha_node unscaled by the fit's area scale
};

constexpr double kThetaFloor = 0.05;
constexpr double kThetaCeil = 5.0;

/// Cell averages of an interface-valued field: cell I gets the mean of its two
/// bounding interfaces.
Matrix cell_average(const Matrix& node_field);

/// Flow rate from the second-order continuity form, one tridiagonal solve per
/// frame with q = 0 pinned at both end interfaces. Frame 0 is taken at rest.
Matrix solve_flow_rate(const Matrix& alpha_node, const StaggeredGrid& grid);

/// Scaled pressure from the second-order momentum form: distal Dirichlet value
/// from the pressure sensor, zero proximal gradient. pd_series is in Pa.
Matrix solve_pressure_field(const Matrix& q, const Matrix& alpha_node,
                            const std::vector<double>& pd_series,
                            const calibrate::TubeLawFit& fit, const StaggeredGrid& grid);

struct ActivationField {
    Matrix theta;
    Matrix clamp_mask;
    double clamp_fraction = 0.0;
    bool unreliable = false;
};

/// Invert the tube law for theta given dimensional pressure (Pa) and
/// cross-sectional area (m^2) on matching grids. Values are clamped to
/// [0.05, 5.0]; the mask records clamped or undefined entries.
ActivationField recover_activation(const Matrix& pressure_pa, const Matrix& area_m2,
                                   const calibrate::TubeLawFit& fit);

/// Max relative deviation of the total cell area sum from its initial value.
double check_mass_conservation(const MechanicsState& state);

/// Full inverse pipeline for one analysis window.
MechanicsState solve_window(const ingest::AnalysisWindow& window,
                            const calibrate::TubeLawFit& fit);

/// Directory of CSV matrices plus manifest.json.
void save_state(const std::string& dir, const MechanicsState& state);
MechanicsState load_state(const std::string& dir);

}  // namespace vdl::inverse
