#include "vdl/inverse.hpp"

#include <cmath>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "vdl/linalg.hpp"

namespace vdl::inverse {

StaggeredGrid::StaggeredGrid(std::size_t cells, double dtau) : n_cells(cells), d_tau(dtau) {
    if (cells == 0) throw ValidationError("StaggeredGrid: need at least one cell");
    d_chi = 1.0 / static_cast<double>(cells);
    chi_interfaces.resize(cells + 1);
    chi_cells.resize(cells);
    for (std::size_t i = 0; i <= cells; ++i) chi_interfaces[i] = static_cast<double>(i) * d_chi;
    for (std::size_t i = 0; i < cells; ++i) chi_cells[i] = (static_cast<double>(i) + 0.5) * d_chi;
}

Matrix MechanicsState::pressure_pa() const {
    Matrix out = p;
    double scale = fit.pressure_scale();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= scale;
    return out;
}

Matrix MechanicsState::area_node_m2() const {
    Matrix out = alpha_node;
    double scale = fit.area_scale();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= scale;
    return out;
}

Matrix cell_average(const Matrix& node_field) {
    if (node_field.rows() < 2) throw ValidationError("cell_average: need at least 2 interfaces");
    Matrix cells(node_field.rows() - 1, node_field.cols());
    for (std::size_t r = 0; r + 1 < node_field.rows(); ++r)
        for (std::size_t c = 0; c < node_field.cols(); ++c)
            cells(r, c) = 0.5 * (node_field(r, c) + node_field(r + 1, c));
    return cells;
}

Matrix solve_flow_rate(const Matrix& alpha_node, const StaggeredGrid& grid) {
    std::size_t n = grid.interfaces();
    std::size_t frames = alpha_node.cols();
    if (alpha_node.rows() != n)
        throw ValidationError("solve_flow_rate: alpha row count does not match grid interfaces");
    if (grid.d_tau <= 0.0) throw ValidationError("solve_flow_rate: non-positive time step");

    Matrix alpha = cell_average(alpha_node);
    Matrix q(n, frames);  // frame 0 stays at rest

    double scale = grid.d_chi / (2.0 * grid.d_tau);
    std::size_t m = n - 2;  // interior unknowns; ends are pinned to zero
    std::vector<double> lower(m), diag(m), upper(m), rhs(m);
    for (std::size_t f = 1; f < frames; ++f) {
        for (std::size_t k = 0; k < m; ++k) {
            std::size_t i = k + 1;  // interface index
            lower[k] = k == 0 ? 0.0 : -0.5;
            upper[k] = k == m - 1 ? 0.0 : -0.5;
            diag[k] = 1.0;
            // cell i sits right of interface i, cell i-1 left of it
            double d_right = alpha(i, f) - alpha(i, f - 1);
            double d_left = alpha(i - 1, f) - alpha(i - 1, f - 1);
            rhs[k] = scale * (d_right - d_left);
        }
        std::vector<double> sol = thomas_solve(lower, diag, upper, rhs);
        for (std::size_t k = 0; k < m; ++k) q(k + 1, f) = sol[k];
    }
    return q;
}

Matrix solve_pressure_field(const Matrix& q, const Matrix& alpha_node,
                            const std::vector<double>& pd_series,
                            const calibrate::TubeLawFit& fit, const StaggeredGrid& grid) {
    std::size_t n = grid.interfaces();
    std::size_t frames = alpha_node.cols();
    if (q.rows() != n || q.cols() != frames)
        throw ValidationError("solve_pressure_field: q shape does not match grid");
    if (pd_series.size() != frames)
        throw ValidationError("solve_pressure_field: pd_series length does not match frames");
    if (grid.d_tau <= 0.0) throw ValidationError("solve_pressure_field: non-positive time step");

    Matrix alpha = cell_average(alpha_node);
    double phi = fit.gamma();
    double dchi_over_dtau = grid.d_chi / (2.0 * grid.d_tau);
    double p_scale = fit.pressure_scale();

    Matrix p(n, frames);
    std::vector<double> lower(n), diag(n), upper(n), rhs(n);
    for (std::size_t f = 0; f < frames; ++f) {
        // proximal end: one-sided zero gradient
        diag[0] = 1.0;
        upper[0] = -1.0;
        lower[0] = 0.0;
        rhs[0] = 0.0;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            double a_left = alpha(i - 1, f);
            double a_right = alpha(i, f);
            if (a_left <= 0.0 || a_right <= 0.0)
                throw ValidationError("solve_pressure_field: non-positive area at cell " +
                                      std::to_string(a_left <= 0.0 ? i - 1 : i));
            lower[i] = -a_left;
            diag[i] = a_left + a_right;
            upper[i] = -a_right;

            double qm = q(i - 1, f), qc = q(i, f), qp = q(i + 1, f);
            double qmo = f == 0 ? 0.0 : q(i - 1, f - 1);
            double qpo = f == 0 ? 0.0 : q(i + 1, f - 1);
            double am = alpha_node(i - 1, f), ac = alpha_node(i, f), ap = alpha_node(i + 1, f);
            if (am <= 0.0 || ac <= 0.0 || ap <= 0.0)
                throw ValidationError("solve_pressure_field: non-positive area at interface " +
                                      std::to_string(ac <= 0.0 ? i : (am <= 0.0 ? i - 1 : i + 1)));
            double unsteady = dchi_over_dtau * (qp - qm - qpo + qmo);
            double advect = qp * qp / ap + qm * qm / am - 2.0 * qc * qc / ac;
            double friction = 0.5 * phi * grid.d_chi * (qp / ap - qm / am);
            rhs[i] = unsteady + advect + friction;
        }
        // distal end: Dirichlet from the pressure sensor, rescaled
        lower[n - 1] = 0.0;
        diag[n - 1] = 1.0;
        upper[n - 1] = 0.0;
        rhs[n - 1] = pd_series[f] / p_scale;

        std::vector<double> sol = thomas_solve(lower, diag, upper, rhs);
        for (std::size_t i = 0; i < n; ++i) p(i, f) = sol[i];
    }
    return p;
}

ActivationField recover_activation(const Matrix& pressure_pa, const Matrix& area_m2,
                                   const calibrate::TubeLawFit& fit) {
    if (!pressure_pa.same_shape(area_m2))
        throw ValidationError("recover_activation: pressure and area shapes differ");

    ActivationField out;
    out.theta = Matrix(pressure_pa.rows(), pressure_pa.cols());
    out.clamp_mask = Matrix(pressure_pa.rows(), pressure_pa.cols());
    std::size_t clamped = 0;
    for (std::size_t i = 0; i < pressure_pa.size(); ++i) {
        double denom = pressure_pa[i] - fit.po_minus_k;
        double theta;
        bool bad = false;
        if (denom <= 0.0) {
            // tube law has no positive solution; treat as extreme relaxation
            theta = kThetaCeil;
            bad = true;
        } else {
            theta = fit.k_over_ao * area_m2[i] / denom;
            if (theta < kThetaFloor) {
                theta = kThetaFloor;
                bad = true;
            } else if (theta > kThetaCeil) {
                theta = kThetaCeil;
                bad = true;
            }
        }
        out.theta[i] = theta;
        out.clamp_mask[i] = bad ? 1.0 : 0.0;
        if (bad) ++clamped;
    }
    out.clamp_fraction = static_cast<double>(clamped) / static_cast<double>(pressure_pa.size());
    out.unreliable = out.clamp_fraction > 0.20;
    return out;
}

double check_mass_conservation(const MechanicsState& state) {
    if (state.alpha.cols() == 0) throw ValidationError("check_mass_conservation: empty state");
    double initial = 0.0;
    for (std::size_t r = 0; r < state.alpha.rows(); ++r) initial += state.alpha(r, 0);
    initial *= state.grid.d_chi;
    if (initial <= 0.0) throw ValidationError("check_mass_conservation: non-positive initial mass");

    double drift = 0.0;
    for (std::size_t f = 1; f < state.alpha.cols(); ++f) {
        double total = 0.0;
        for (std::size_t r = 0; r < state.alpha.rows(); ++r) total += state.alpha(r, f);
        total *= state.grid.d_chi;
        drift = std::max(drift, std::abs(total - initial) / initial);
    }
    return drift;
}

MechanicsState solve_window(const ingest::AnalysisWindow& window,
                            const calibrate::TubeLawFit& fit) {
    std::size_t frames = window.alpha_grid.cols();
    if (frames < 2) throw ValidationError("solve_window: need at least 2 frames");
    double duration_tau = window.duration * fit.c / fit.length;
    double d_tau = duration_tau / static_cast<double>(frames - 1);

    MechanicsState state;
    state.grid = StaggeredGrid(window.alpha_grid.rows() - 1, d_tau);
    state.fit = fit;
    state.alpha_node = window.alpha_grid;
    state.alpha = cell_average(state.alpha_node);
    state.q = solve_flow_rate(state.alpha_node, state.grid);
    state.p = solve_pressure_field(state.q, state.alpha_node, window.pd_series, fit, state.grid);

    Matrix pressure = state.pressure_pa();
    Matrix area = state.area_node_m2();
    if (pressure.rows() != ingest::kGridSize || pressure.cols() != ingest::kGridSize) {
        std::vector<double> cols(pressure.cols());
        for (std::size_t c = 0; c < cols.size(); ++c) cols[c] = static_cast<double>(c);
        pressure = ingest::resample_bilinear(pressure, cols, ingest::kGridSize, ingest::kGridSize);
        area = ingest::resample_bilinear(area, cols, ingest::kGridSize, ingest::kGridSize);
    }
    ActivationField act = recover_activation(pressure, area, fit);
    state.theta = act.theta;
    state.clamp_mask = act.clamp_mask;
    state.clamp_fraction = act.clamp_fraction;
    state.unreliable = act.unreliable;
    state.mass_drift = check_mass_conservation(state);
    return state;
}

void save_state(const std::string& dir, const MechanicsState& state) {
    std::filesystem::create_directories(dir);
    write_matrix_csv(dir + "/alpha.csv", state.alpha);
    write_matrix_csv(dir + "/alpha_node.csv", state.alpha_node);
    write_matrix_csv(dir + "/q.csv", state.q);
    write_matrix_csv(dir + "/p.csv", state.p);
    write_matrix_csv(dir + "/theta.csv", state.theta);
    write_matrix_csv(dir + "/clamp_mask.csv", state.clamp_mask);

    nlohmann::json j;
    j["n_cells"] = state.grid.n_cells;
    j["d_chi"] = state.grid.d_chi;
    j["d_tau"] = state.grid.d_tau;
    j["clamp_fraction"] = state.clamp_fraction;
    j["unreliable"] = state.unreliable;
    j["mass_drift"] = state.mass_drift;
    j["fit"] = nlohmann::json::parse(calibrate::fit_to_json(state.fit));
    nlohmann::json hashes;
    for (const char* name :
         {"alpha.csv", "alpha_node.csv", "q.csv", "p.csv", "theta.csv", "clamp_mask.csv"})
        hashes[name] = hash_file_hex(dir + "/" + name);
    j["hashes"] = hashes;
    write_text_file(dir + "/manifest.json", j.dump(2));
}

MechanicsState load_state(const std::string& dir) {
    nlohmann::json manifest = nlohmann::json::parse(read_text_file(dir + "/manifest.json"));
    if (manifest.contains("hashes"))
        for (const auto& [name, expected] : manifest.at("hashes").items())
            if (hash_file_hex(dir + "/" + name) != expected.get<std::string>())
                throw ValidationError("state file " + name + " in " + dir +
                                      " does not match its recorded content hash");
    MechanicsState state;
    state.alpha = read_matrix_csv(dir + "/alpha.csv");
    state.alpha_node = read_matrix_csv(dir + "/alpha_node.csv");
    state.q = read_matrix_csv(dir + "/q.csv");
    state.p = read_matrix_csv(dir + "/p.csv");
    state.theta = read_matrix_csv(dir + "/theta.csv");
    state.clamp_mask = read_matrix_csv(dir + "/clamp_mask.csv");

    const nlohmann::json& j = manifest;
    state.grid = StaggeredGrid(j.at("n_cells").get<std::size_t>(), j.at("d_tau").get<double>());
    state.clamp_fraction = j.at("clamp_fraction").get<double>();
    state.unreliable = j.at("unreliable").get<bool>();
    state.mass_drift = j.at("mass_drift").get<double>();
    state.fit = calibrate::fit_from_json(j.at("fit").dump());
    return state;
}

}  // namespace vdl::inverse
