// Acceptance gate for the esophageal mechanics + virtual disease landscape
// toolkit.  Each criterion prints exactly one line:
//
//   criterion N: PASS - <detail>
//   criterion N: FAIL - <detail>
//
// The process exit code is the number of failed criteria.  Criteria 6 and 7
// train the production networks on a desk-scale cohort; their artifacts feed
// the latent-space checks of criterion 12, so those three run in order.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "vdl/calibrate.hpp"
#include "vdl/cli.hpp"
#include "vdl/core.hpp"
#include "vdl/ingest.hpp"
#include "vdl/inverse.hpp"
#include "vdl/landscape.hpp"
#include "vdl/linalg.hpp"
#include "vdl/metrics.hpp"
#include "vdl/neural.hpp"
#include "vdl/synth.hpp"

using vdl::Matrix;
using vdl::Rng;
using vdl::Vec;

namespace {

/// Thrown by a criterion body to mark the criterion failed with a reason.
struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string text(const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof(buf), fmt, args);
    va_end(args);
    return std::string(buf);
}

void require(bool ok, const std::string& why) {
    if (!ok) throw Failure(why);
}

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

struct Reporter {
    int failures = 0;
    void run(int id, const std::function<std::string()>& body) {
        try {
            std::string detail = body();
            std::printf("criterion %d: PASS - %s\n", id, detail.c_str());
        } catch (const Failure& e) {
            ++failures;
            std::printf("criterion %d: FAIL - %s\n", id, e.what());
        } catch (const std::exception& e) {
            ++failures;
            std::printf("criterion %d: FAIL - unexpected error: %s\n", id, e.what());
        }
        std::fflush(stdout);
    }
};

vdl::calibrate::TubeLawFit make_fit(double k_over_ao, double po_minus_k) {
    vdl::calibrate::TubeLawFit fit;
    fit.k_over_ao = k_over_ao;
    fit.po_minus_k = po_minus_k;
    fit.r_squared = 1.0;
    fit.support_points = {{2.0e-4, po_minus_k + k_over_ao * 2.0e-4},
                          {3.0e-4, po_minus_k + k_over_ao * 3.0e-4}};
    return fit;
}

Matrix random_positive_field(std::size_t rows, std::size_t cols, Rng& rng, double lo = 0.5,
                             double hi = 2.0) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.uniform(lo, hi);
    return m;
}

/// Dense route for the continuity solve: same stencil assembled as a full
/// matrix and factored with a dense LU instead of the tridiagonal recursion.
Matrix dense_flow_rate(const Matrix& alpha_node, const vdl::inverse::StaggeredGrid& grid) {
    std::size_t n = grid.interfaces();
    std::size_t frames = alpha_node.cols();
    Matrix alpha = vdl::inverse::cell_average(alpha_node);
    Matrix q(n, frames);
    std::size_t m = n - 2;
    double scale = grid.d_chi / (2.0 * grid.d_tau);
    for (std::size_t f = 1; f < frames; ++f) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
        Eigen::VectorXd b(m);
        for (std::size_t k = 0; k < m; ++k) {
            std::size_t i = k + 1;
            a(k, k) = 1.0;
            if (k > 0) a(k, k - 1) = -0.5;
            if (k + 1 < m) a(k, k + 1) = -0.5;
            double d_right = alpha(i, f) - alpha(i, f - 1);
            double d_left = alpha(i - 1, f) - alpha(i - 1, f - 1);
            b(static_cast<long>(k)) = scale * (d_right - d_left);
        }
        Eigen::VectorXd sol = a.fullPivLu().solve(b);
        for (std::size_t k = 0; k < m; ++k) q(k + 1, f) = sol(static_cast<long>(k));
    }
    return q;
}

/// Dense route for the momentum solve, mirroring the boundary closures and
/// source terms but going through a full LU factorization.
Matrix dense_pressure_field(const Matrix& q, const Matrix& alpha_node, const Vec& pd_series,
                            const vdl::calibrate::TubeLawFit& fit,
                            const vdl::inverse::StaggeredGrid& grid) {
    std::size_t n = grid.interfaces();
    std::size_t frames = alpha_node.cols();
    Matrix alpha = vdl::inverse::cell_average(alpha_node);
    double phi = fit.gamma();
    double scale = grid.d_chi / (2.0 * grid.d_tau);
    Matrix p(n, frames);
    for (std::size_t f = 0; f < frames; ++f) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
        a(0, 0) = 1.0;
        a(0, 1) = -1.0;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            double a_left = alpha(i - 1, f);
            double a_right = alpha(i, f);
            a(i, i - 1) = -a_left;
            a(i, i) = a_left + a_right;
            a(i, i + 1) = -a_right;
            double qm = q(i - 1, f), qc = q(i, f), qp = q(i + 1, f);
            double qmo = f == 0 ? 0.0 : q(i - 1, f - 1);
            double qpo = f == 0 ? 0.0 : q(i + 1, f - 1);
            double am = alpha_node(i - 1, f), ac = alpha_node(i, f), ap = alpha_node(i + 1, f);
            double unsteady = scale * (qp - qm - qpo + qmo);
            double advect = qp * qp / ap + qm * qm / am - 2.0 * qc * qc / ac;
            double friction = 0.5 * phi * grid.d_chi * (qp / ap - qm / am);
            b(static_cast<long>(i)) = unsteady + advect + friction;
        }
        a(n - 1, n - 1) = 1.0;
        b(static_cast<long>(n - 1)) = pd_series[f] / fit.pressure_scale();
        Eigen::VectorXd sol = a.fullPivLu().solve(b);
        for (std::size_t i = 0; i < n; ++i) p(i, f) = sol(static_cast<long>(i));
    }
    return p;
}

double simpson(double a, double b, std::size_t intervals, const std::function<double(double)>& f) {
    if (intervals % 2 == 1) ++intervals;
    double h = (b - a) / static_cast<double>(intervals);
    double sum = f(a) + f(b);
    for (std::size_t k = 1; k < intervals; ++k)
        sum += f(a + static_cast<double>(k) * h) * (k % 2 == 1 ? 4.0 : 2.0);
    return sum * h / 3.0;
}

/// Physical-units recording rebuilt from a non-dimensional solver window, so
/// the window can be re-entered through the ingest path under another fit.
vdl::ingest::FlipRecording physical_recording(const vdl::ingest::AnalysisWindow& window,
                                              const vdl::calibrate::TubeLawFit& fit,
                                              double volume) {
    std::size_t sensors = window.alpha_grid.rows();
    std::size_t frames = window.alpha_grid.cols();
    vdl::ingest::FlipRecording rec;
    rec.units = vdl::ingest::Units::si;
    rec.sensor_spacing = fit.length / static_cast<double>(sensors - 1);
    rec.diameters = Matrix(sensors, frames);
    for (std::size_t f = 0; f < frames; ++f) {
        double t = window.t_start +
                   window.duration * static_cast<double>(f) / static_cast<double>(frames - 1);
        rec.time.push_back(t);
        rec.distal_pressure.push_back(window.pd_series[f]);
        rec.bag_volume.push_back(volume);
        for (std::size_t i = 0; i < sensors; ++i) {
            double area = window.alpha_grid(i, f) * fit.area_scale();
            rec.diameters(i, f) = 2.0 * std::sqrt(area / M_PI);
        }
    }
    return rec;
}

Vec moving_average(const Vec& values, std::size_t window) {
    Vec out(values.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        acc += values[i];
        if (i >= window) acc -= values[i - window];
        out[i] = acc / static_cast<double>(std::min(i + 1, window));
    }
    return out;
}

std::string temp_dir(const char* tag) {
    auto dir = std::filesystem::temp_directory_path() / (std::string("vdl_accept_") + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(is.good(), "cannot read " + path);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

/// Order-independent digest over every regular file under a directory.
std::string dir_digest(const std::string& dir) {
    std::vector<std::string> rel;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir))
        if (entry.is_regular_file())
            rel.push_back(std::filesystem::relative(entry.path(), dir).string());
    std::sort(rel.begin(), rel.end());
    std::string acc;
    for (const std::string& r : rel) acc += r + ":" + vdl::hash_file_hex(dir + "/" + r) + "\n";
    return vdl::hash_bytes_hex(acc);
}

int run_cli(const std::vector<std::string>& args) {
    std::ostringstream captured;
    std::streambuf* out = std::cout.rdbuf(captured.rdbuf());
    std::streambuf* err = std::cerr.rdbuf(captured.rdbuf());
    int code = -1;
    try {
        code = vdl::cli::dispatch(args);
    } catch (...) {
        std::cout.rdbuf(out);
        std::cerr.rdbuf(err);
        throw;
    }
    std::cout.rdbuf(out);
    std::cerr.rdbuf(err);
    return code;
}

void cli_step(const std::vector<std::string>& args) {
    int code = run_cli(args);
    require(code == 0, text("command '%s' exited with %d", args.front().c_str(), code));
}

/// Artifacts shared between the training criteria and the latent-space one.
struct SharedState {
    std::vector<vdl::synth::CohortSample> cohort;
    std::vector<vdl::neural::ThetaImage> images;
    std::optional<vdl::neural::VaeModel<float>> vae;
    std::vector<vdl::neural::EpochStats> vae_curve;
    Matrix inputs;  // cohort rows in the 30-d landscape, unnormalized
    std::optional<vdl::neural::WorkNetArtifact> worknet;
};

}  // namespace

int main() {
    std::printf("acceptance suite: esophageal mechanics and virtual disease landscape\n");
    Reporter rep;
    SharedState shared;

    // ---------------------------------------------------------------- 1
    // Forward-inverse round trip through the calibration path: prescribed
    // stiffness, intercept and activation all come back from synthetic
    // recordings within tight bounds, for 20 randomized phenotype windows.
    rep.run(1, [&]() -> std::string {
        Timer timer;
        const auto& names = vdl::synth::phenotype_names();
        Rng root(20260101);
        double worst_k = 0.0, worst_po = 0.0, worst_linf = 0.0;
        for (int repn = 0; repn < 20; ++repn) {
            Rng rng = root.stream(static_cast<std::uint64_t>(repn));
            auto ph = vdl::synth::make_phenotype(names[rng.integer(names.size())]);
            double k_true = rng.uniform(2.5e6, 5.5e6);
            double po_true = rng.uniform(600.0, 1400.0);
            auto truth = make_fit(k_true, po_true);

            double base = rng.uniform(1.8e-5, 2.4e-5);
            double step = rng.uniform(0.5e-5, 0.8e-5);
            std::vector<double> volumes;
            for (int j = 0; j < 4; ++j) volumes.push_back(base + static_cast<double>(j) * step);
            auto rec = vdl::synth::synthesize_recording(ph, truth, volumes, 6.0, 8.0);

            auto minima = vdl::calibrate::find_pressure_minima(rec);
            std::vector<std::pair<double, double>> points;
            double p_lo = minima.front().p_d, p_hi = minima.front().p_d;
            for (const auto& m : minima) {
                points.push_back({m.a_r, m.p_d});
                p_lo = std::min(p_lo, m.p_d);
                p_hi = std::max(p_hi, m.p_d);
            }
            auto fit = vdl::calibrate::fit_tube_law(points, {});

            double k_err = std::abs(fit.k_over_ao - k_true) / k_true;
            double span = p_hi - p_lo;
            require(span > 0.0, text("window %d: degenerate pressure span", repn));
            double po_err = std::abs(fit.po_minus_k - po_true) / span;
            require(k_err < 0.02,
                    text("window %d: stiffness error %.3g exceeds 2%%", repn, k_err));
            require(po_err < 0.05,
                    text("window %d: intercept error %.3g of span exceeds 5%%", repn, po_err));

            Matrix theta = vdl::synth::phenotype_theta_field(ph, 8.0, truth.length);
            double volume = rng.uniform(3.0e-5, 4.5e-5);
            auto fwd = vdl::synth::forward_solve(theta, truth, volume, 8.0);
            auto phys = physical_recording(fwd.window, truth, volume);
            auto window =
                vdl::ingest::select_window(phys, phys.time.front(), phys.time.back(), fit);
            auto state = vdl::inverse::solve_window(window, fit);
            require(state.theta.same_shape(theta), "recovered grid shape mismatch");
            double linf = 0.0;
            for (std::size_t i = 0; i < theta.size(); ++i)
                linf = std::max(linf, std::abs(state.theta[i] - theta[i]));
            require(linf < 5.0e-2,
                    text("window %d: activation Linf %.3g exceeds 5e-2", repn, linf));

            worst_k = std::max(worst_k, k_err);
            worst_po = std::max(worst_po, po_err);
            worst_linf = std::max(worst_linf, linf);
        }
        double secs = timer.seconds();
        require(secs < 60.0, text("round trip took %.1f s, budget is 60 s", secs));
        return text("20 windows: stiffness err <= %.2e, intercept err <= %.2e of span, "
                    "theta Linf <= %.2e, %.1f s",
                    worst_k, worst_po, worst_linf, secs);
    });

    // ---------------------------------------------------------------- 2
    // Mass conservation: forward windows drift below 1e-8 relative and the
    // tube stays closed (exactly zero flow at both end interfaces).
    rep.run(2, [&]() -> std::string {
        Rng rng(20260202);
        double worst_fwd = 0.0, worst_inv = 0.0;
        int windows = 0;
        for (const std::string& name : vdl::synth::phenotype_names()) {
            for (int repn = 0; repn < 4; ++repn) {
                auto ph = vdl::synth::make_phenotype(name);
                auto truth = make_fit(rng.uniform(2.5e6, 5.5e6), rng.uniform(600.0, 1400.0));
                Matrix theta = vdl::synth::phenotype_theta_field(ph, 8.0, truth.length);
                auto fwd = vdl::synth::forward_solve(theta, truth,
                                                     rng.uniform(3.0e-5, 4.5e-5), 8.0);
                require(fwd.max_step_drift < 1.0e-8,
                        text("%s: forward drift %.3g", name.c_str(), fwd.max_step_drift));
                auto state = vdl::inverse::solve_window(fwd.window, truth);
                require(state.mass_drift < 1.0e-8,
                        text("%s: inverse drift %.3g", name.c_str(), state.mass_drift));
                std::size_t last = state.q.rows() - 1;
                for (std::size_t f = 0; f < state.q.cols(); ++f) {
                    require(fwd.q(0, f) == 0.0 && fwd.q(fwd.q.rows() - 1, f) == 0.0,
                            text("%s: forward end flow not exactly zero", name.c_str()));
                    require(state.q(0, f) == 0.0 && state.q(last, f) == 0.0,
                            text("%s: recovered end flow not exactly zero", name.c_str()));
                }
                worst_fwd = std::max(worst_fwd, fwd.max_step_drift);
                worst_inv = std::max(worst_inv, state.mass_drift);
                ++windows;
            }
        }
        return text("%d windows: forward drift <= %.2e, inverse drift <= %.2e, "
                    "end interfaces exactly closed",
                    windows, worst_fwd, worst_inv);
    });

    // ---------------------------------------------------------------- 3
    // The tridiagonal continuity and momentum solves agree with dense LU
    // factorizations of the same stencils on 100 randomized instances.
    rep.run(3, [&]() -> std::string {
        Rng rng(20260303);
        double worst = 0.0;
        for (int repn = 0; repn < 100; ++repn) {
            std::size_t cells = 3 + rng.integer(13);  // 4..16 interfaces
            vdl::inverse::StaggeredGrid grid(cells, rng.uniform(0.01, 0.2));
            std::size_t n = grid.interfaces();
            std::size_t frames = 2 + rng.integer(5);
            Matrix alpha_node = random_positive_field(n, frames, rng);

            Matrix fast_q = vdl::inverse::solve_flow_rate(alpha_node, grid);
            Matrix dense_q = dense_flow_rate(alpha_node, grid);
            require(fast_q.same_shape(dense_q), "flow solve shape mismatch");
            for (std::size_t i = 0; i < fast_q.size(); ++i) {
                double err = std::abs(fast_q[i] - dense_q[i]) /
                             (1.0 + std::max(std::abs(fast_q[i]), std::abs(dense_q[i])));
                require(err <= 1.0e-12,
                        text("instance %d: flow deviation %.3g from dense solve", repn, err));
                worst = std::max(worst, err);
            }

            auto fit = make_fit(rng.uniform(1.0e7, 8.0e7), rng.uniform(-400.0, -50.0));
            Matrix q(n, frames);
            for (std::size_t f = 1; f < frames; ++f)
                for (std::size_t i = 1; i + 1 < n; ++i) q(i, f) = rng.uniform(-0.5, 0.5);
            Vec pd(frames);
            for (std::size_t f = 0; f < frames; ++f) pd[f] = rng.uniform(50.0, 400.0);
            Matrix fast_p = vdl::inverse::solve_pressure_field(q, alpha_node, pd, fit, grid);
            Matrix dense_p = dense_pressure_field(q, alpha_node, pd, fit, grid);
            require(fast_p.same_shape(dense_p), "pressure solve shape mismatch");
            for (std::size_t i = 0; i < fast_p.size(); ++i) {
                double err = std::abs(fast_p[i] - dense_p[i]) /
                             (1.0 + std::max(std::abs(fast_p[i]), std::abs(dense_p[i])));
                require(err <= 1.0e-12,
                        text("instance %d: pressure deviation %.3g from dense solve", repn,
                             err));
                worst = std::max(worst, err);
            }
        }
        return text("100 instances, sizes 4..16: worst deviation %.2e (tolerance 1e-12)",
                    worst);
    });

    // ---------------------------------------------------------------- 4
    // The closed-form Gaussian divergence matches a 1e6-draw Monte Carlo
    // estimate within three standard errors and is exactly zero at (0, 1).
    rep.run(4, [&]() -> std::string {
        require(vdl::neural::kld_closed_form(Vec{0.0}, Vec{0.0}) == 0.0,
                "divergence at the standard normal is not exactly zero");
        Rng rng(20260404);
        const std::size_t draws = 1000000;
        double worst = 0.0;
        for (int repn = 0; repn < 50; ++repn) {
            double mu = rng.uniform(-1.5, 1.5);
            double lv = rng.uniform(-1.5, 1.0);
            double closed = vdl::neural::kld_closed_form(Vec{mu}, Vec{lv});
            double sigma = std::exp(0.5 * lv);
            double sum = 0.0, sum_sq = 0.0;
            for (std::size_t d = 0; d < draws; ++d) {
                double n = rng.normal();
                double z = mu + sigma * n;
                double s = 0.5 * (z * z - n * n) - 0.5 * lv;
                sum += s;
                sum_sq += s * s;
            }
            double mean = sum / static_cast<double>(draws);
            double var = (sum_sq - sum * mean) / static_cast<double>(draws - 1);
            double se = std::sqrt(std::max(var, 0.0) / static_cast<double>(draws));
            require(se > 0.0, text("pair %d: degenerate Monte Carlo spread", repn));
            double dev = std::abs(closed - mean) / se;
            require(dev < 3.0,
                    text("pair %d (mu %.2f, log-var %.2f): closed form off by %.2f SE", repn,
                         mu, lv, dev));
            worst = std::max(worst, dev);
        }
        return text("50 pairs x 1e6 draws: worst deviation %.2f SE, exact zero at (0, 1)",
                    worst);
    });

    // ---------------------------------------------------------------- 5
    // Every trainable layer's analytic gradient agrees with double-precision
    // central differences on randomized small models, 20 repetitions each.
    rep.run(5, [&]() -> std::string {
        double worst = 0.0;
        for (int repn = 0; repn < 20; ++repn) {
            std::uint64_t seed = 505000 + static_cast<std::uint64_t>(repn);
            double vae_err = vdl::neural::gradcheck_vae(seed);
            require(vae_err < 1.0e-4,
                    text("rep %d: encoder/decoder gradient error %.3g", repn, vae_err));
            double work_err = vdl::neural::gradcheck_worknet(seed);
            require(work_err < 1.0e-4,
                    text("rep %d: regressor gradient error %.3g", repn, work_err));
            worst = std::max(worst, std::max(vae_err, work_err));
        }
        return text("20 repetitions: worst relative gradient error %.2e (tolerance 1e-4)",
                    worst);
    });

    // ---------------------------------------------------------------- 6
    // Desk-scale variational autoencoder: on a 2000-sample two-family cohort
    // the reconstruction converges, the smoothed loss is monotone over the
    // back half, and the latent means linearly separate peristalsis.
    rep.run(6, [&]() -> std::string {
        Timer timer;
        shared.cohort = vdl::synth::generate_cohort(
            {{"normal-peristaltic", 1000}, {"absent-contractility", 1000}}, 77001);
        shared.images.clear();
        shared.images.reserve(shared.cohort.size());
        for (const auto& sample : shared.cohort)
            shared.images.push_back(vdl::neural::normalize_theta(sample.theta_true, sample.id));

        vdl::neural::TrainConfig config;
        config.seed = 4242;
        shared.vae_curve.clear();
        shared.vae = vdl::neural::train_network1(shared.images, config, shared.vae_curve);

        require(!shared.vae_curve.empty(), "empty training curve");
        double final_mse = shared.vae_curve.back().recon_mse;
        require(final_mse < 1.0e-2,
                text("final reconstruction MSE %.3g exceeds 1e-2", final_mse));

        Vec total;
        for (const auto& epoch : shared.vae_curve) total.push_back(epoch.total);
        Vec smoothed = moving_average(total, 25);
        for (std::size_t i = smoothed.size() / 2; i < smoothed.size(); ++i) {
            if (i == 0) continue;
            double tol = 1.0e-9 * std::max(1.0, std::abs(smoothed[i - 1]));
            require(smoothed[i] <= smoothed[i - 1] + tol,
                    text("smoothed loss rose at epoch %zu: %.6g -> %.6g", i, smoothed[i - 1],
                         smoothed[i]));
        }

        // Linear probe on the latent means, 75/25 split, ridge least squares.
        std::size_t n = shared.cohort.size();
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) order[i] = i;
        Rng shuffle(5150);
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(order[i], order[shuffle.integer(i + 1)]);
        std::size_t n_train = (3 * n) / 4;

        std::size_t dim = vdl::neural::kLatentDim + 1;
        Matrix x(n_train, dim);
        Matrix y(n_train, 1);
        std::vector<Vec> latent(n);
        for (std::size_t i = 0; i < n; ++i)
            latent[i] = vdl::neural::encode_mu(*shared.vae, shared.images[i]);
        for (std::size_t r = 0; r < n_train; ++r) {
            std::size_t i = order[r];
            for (std::size_t c = 0; c < vdl::neural::kLatentDim; ++c) x(r, c) = latent[i][c];
            x(r, dim - 1) = 1.0;
            y(r, 0) = shared.cohort[i].peristalsis == 1 ? 1.0 : -1.0;
        }
        Matrix xt = vdl::transpose(x);
        Matrix gram = vdl::matmul(xt, x);
        for (std::size_t c = 0; c < dim; ++c) gram(c, c) += 1.0e-6;
        Matrix xty = vdl::matmul(xt, y);
        Matrix chol = vdl::cholesky_lower(gram);
        Vec rhs(dim);
        for (std::size_t c = 0; c < dim; ++c) rhs[c] = xty(c, 0);
        Vec w = vdl::backward_substitute_transposed(chol, vdl::forward_substitute(chol, rhs));

        std::size_t correct = 0, held = 0;
        for (std::size_t r = n_train; r < n; ++r) {
            std::size_t i = order[r];
            double score = w[dim - 1];
            for (std::size_t c = 0; c < vdl::neural::kLatentDim; ++c)
                score += w[c] * latent[i][c];
            bool predicted = score > 0.0;
            bool truth = shared.cohort[i].peristalsis == 1;
            correct += predicted == truth ? 1 : 0;
            ++held;
        }
        double accuracy = static_cast<double>(correct) / static_cast<double>(held);
        require(accuracy >= 0.90,
                text("latent probe accuracy %.3f below 0.90 on %zu held-out samples",
                     accuracy, held));

        double secs = timer.seconds();
        require(secs < 600.0, text("training took %.0f s, budget is 600 s", secs));
        return text("2000 samples, %zu epochs: recon MSE %.2e, smoothed loss monotone, "
                    "probe accuracy %.3f, %.0f s",
                    shared.vae_curve.size(), final_mse, accuracy, secs);
    });

    // ---------------------------------------------------------------- 7
    // Work-metric regressor trained on the same cohort reaches a normalized
    // validation MSE below 1e-3 against the analysis-module ground truth.
    rep.run(7, [&]() -> std::string {
        require(shared.vae.has_value(), "depends on criterion 6 artifacts, which are missing");
        Timer timer;
        std::size_t n = shared.cohort.size();

        Matrix params(n, 6);
        for (std::size_t i = 0; i < n; ++i) {
            Vec v = shared.cohort[i].params.as_vector();
            for (std::size_t c = 0; c < 6; ++c) params(i, c) = v[c];
        }
        vdl::neural::NormStats param_stats = vdl::neural::fit_stats(params);

        shared.inputs = Matrix(n, vdl::landscape::kVdlDim);
        for (std::size_t i = 0; i < n; ++i) {
            Vec mu = vdl::neural::encode_mu(*shared.vae, shared.images[i]);
            Vec pn = param_stats.normalize(params.row(i));
            for (std::size_t c = 0; c < vdl::neural::kLatentDim; ++c)
                shared.inputs(i, c) = mu[c];
            for (std::size_t c = 0; c < 6; ++c)
                shared.inputs(i, vdl::neural::kLatentDim + c) = pn[c];
        }

        Matrix targets(n, 4);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& sample = shared.cohort[i];
            auto state = vdl::inverse::solve_window(sample.window, sample.fit);
            std::size_t frames = sample.window.alpha_grid.cols();
            auto region = vdl::metrics::region_from_bounds(
                sample.window, sample.fit, vdl::synth::kEgjSensorStart,
                vdl::ingest::kSensorCount - 1, 0, frames - 1);
            auto work = vdl::metrics::compute_work_metrics(sample.window, state, region);
            targets(i, 0) = work.egjw;
            targets(i, 1) = work.egjrow1;
            targets(i, 2) = work.egjrow2;
            targets(i, 3) = work.egjrow3;
        }

        vdl::neural::NormStats in_stats = vdl::neural::fit_stats(shared.inputs);
        vdl::neural::NormStats out_stats = vdl::neural::fit_stats(targets);
        Matrix xin(n, vdl::landscape::kVdlDim), yout(n, 4);
        for (std::size_t i = 0; i < n; ++i) {
            Vec xr = in_stats.normalize(shared.inputs.row(i));
            Vec yr = out_stats.normalize(targets.row(i));
            for (std::size_t c = 0; c < xr.size(); ++c) xin(i, c) = xr[c];
            for (std::size_t c = 0; c < 4; ++c) yout(i, c) = yr[c];
        }

        vdl::neural::TrainConfig config;
        config.epochs = 1000;
        config.batch = 32;
        config.seed = 1377;
        std::vector<vdl::neural::EpochStats> curve;
        vdl::neural::WorkNet<float> net = vdl::neural::train_network2(xin, yout, config, curve);
        require(!curve.empty(), "empty training curve");
        double val = curve.back().val_mse;
        require(val < 1.0e-3, text("normalized validation MSE %.3g exceeds 1e-3", val));

        shared.worknet = vdl::neural::WorkNetArtifact{net, in_stats, out_stats};
        return text("%zu samples: normalized validation MSE %.2e after %zu epochs, %.0f s", n,
                    val, curve.size(), timer.seconds());
    });

    // ---------------------------------------------------------------- 8
    // Junction work closed forms: the restoration-work expression matches
    // tube-law quadrature at 1e-10 and the opening work reproduces the
    // constant-pressure analytic value at 1e-6.
    rep.run(8, [&]() -> std::string {
        Rng rng(20260808);
        double worst_row = 0.0;
        for (int repn = 0; repn < 100; ++repn) {
            vdl::calibrate::TubeLawFit fit;
            fit.k_over_ao = rng.uniform(1.0e6, 1.0e8);
            fit.po_minus_k = rng.uniform(-500.0, 500.0);
            double theta_hat = rng.uniform(0.05, 5.0);
            vdl::metrics::EgjRegion region;
            region.x1 = 0.0;
            region.x2 = rng.uniform(0.01, 0.05);
            region.a1 = rng.uniform(1.0e-5, 2.0e-4);
            region.a2 = region.a1 + rng.uniform(1.0e-5, 3.0e-4);
            double closed = vdl::metrics::egjrow_closed_form(theta_hat, fit, region);
            double quad = (region.x2 - region.x1) *
                          simpson(region.a1, region.a2, 200, [&](double a) {
                              return fit.po_minus_k + fit.k_over_ao * a / theta_hat;
                          });
            double err = std::abs(closed - quad) / std::max(1.0, std::abs(quad));
            require(err <= 1.0e-10,
                    text("set %d: closed form off by %.3g relative to quadrature", repn, err));
            worst_row = std::max(worst_row, err);
        }

        auto fit = make_fit(4.0e7, -200.0);
        std::size_t sensors = vdl::ingest::kSensorCount, frames = vdl::ingest::kGridSize;
        vdl::ingest::AnalysisWindow window;
        window.t_start = 1.0;
        window.duration = 7.5;
        window.t_end = window.t_start + window.duration;
        window.alpha_grid = Matrix(sensors, frames);
        window.pd_series = Vec(frames, 100.0);
        window.volume = 4.0e-5;
        auto region = vdl::metrics::region_from_bounds(window, fit, 0, 15, 0, 15);
        double p0 = 2000.0, rate = 2.0e-5;
        double dt = window.duration / static_cast<double>(frames - 1);
        Matrix press(sensors, frames), area(sensors, frames);
        for (std::size_t i = 0; i < sensors; ++i)
            for (std::size_t f = 0; f < frames; ++f) {
                double t = window.t_start + static_cast<double>(f) * dt;
                press(i, f) = p0;
                area(i, f) = 1.0e-4 + rate * t;
            }
        double w = vdl::metrics::compute_egjw(press, area, region, window);
        double expected = p0 * rate * (region.x2 - region.x1) * (region.t2 - region.t1);
        double egjw_err = std::abs(w - expected) / std::abs(expected);
        require(egjw_err <= 1.0e-6,
                text("constant-pressure opening work off by %.3g relative", egjw_err));
        return text("100 parameter sets: restoration err <= %.2e; constant-pressure opening "
                    "err %.2e",
                    worst_row, egjw_err);
    });

    // ---------------------------------------------------------------- 9
    // The power-iteration-free PCA matches a dense eigensolver up to sign,
    // and the LDA projection beats 100 random projections on Fisher's
    // criterion for a separable labeled set.
    rep.run(9, [&]() -> std::string {
        Rng rng(20260909);
        std::size_t n = 60, d = vdl::landscape::kVdlDim;
        Matrix rows(n, d);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) {
                double value = rng.normal() * (1.0 + 0.2 * static_cast<double>(c % 5));
                if (c < 3) value += (3.0 + static_cast<double>(c)) * rng.normal();
                rows(r, c) = value;
            }

        auto space = vdl::landscape::pca_reduce(rows, 3);
        require(space.basis.rows() == d && space.basis.cols() == 3, "unexpected basis shape");

        Eigen::MatrixXd centered(n, d);
        Vec mean(d, 0.0);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) mean[c] += rows(r, c);
        for (std::size_t c = 0; c < d; ++c) mean[c] /= static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c)
                centered(static_cast<long>(r), static_cast<long>(c)) = rows(r, c) - mean[c];
        Eigen::MatrixXd cov =
            centered.transpose() * centered / static_cast<double>(n - 1);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigensolver(cov);
        require(eigensolver.info() == Eigen::Success, "dense eigensolver did not converge");
        double trace = cov.trace();

        double worst_axis = 0.0, worst_ratio = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
            long col = static_cast<long>(d - 1 - k);  // ascending order in the oracle
            double dot = 0.0;
            for (std::size_t c = 0; c < d; ++c)
                dot += space.basis(c, k) * eigensolver.eigenvectors()(static_cast<long>(c), col);
            double axis_err = std::abs(std::abs(dot) - 1.0);
            require(axis_err <= 1.0e-8,
                    text("component %zu misaligned with the dense eigenvector: |dot| - 1 = "
                         "%.3g",
                         k, axis_err));
            double ratio = eigensolver.eigenvalues()(col) / trace;
            double ratio_err = std::abs(space.explained[k] - ratio);
            require(ratio_err <= 1.0e-8,
                    text("component %zu variance ratio off by %.3g", k, ratio_err));
            worst_axis = std::max(worst_axis, axis_err);
            worst_ratio = std::max(worst_ratio, ratio_err);
        }

        // Labeled, separable set for the discriminant projection.
        std::size_t groups = 4, per = 200;
        Matrix lrows(groups * per, d);
        std::vector<std::string> labels;
        for (std::size_t g = 0; g < groups; ++g)
            for (std::size_t i = 0; i < per; ++i) {
                std::size_t r = g * per + i;
                for (std::size_t c = 0; c < d; ++c)
                    lrows(r, c) = (c == g ? 5.0 : 0.0) + 0.5 * rng.normal();
                labels.push_back("class-" + std::to_string(g));
            }
        auto lda = vdl::landscape::lda_reduce(lrows, labels, 3);
        double fisher = vdl::landscape::fisher_criterion(
            vdl::landscape::project(lda, lrows), labels);
        double best_random = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            Matrix random_basis(d, 3);
            for (std::size_t i = 0; i < random_basis.size(); ++i)
                random_basis[i] = rng.normal();
            double f = vdl::landscape::fisher_criterion(
                vdl::matmul(lrows, random_basis), labels);
            best_random = std::max(best_random, f);
            require(fisher > f,
                    text("random projection %d scored %.3g vs %.3g for the discriminant",
                         trial, f, fisher));
        }
        return text("axes match to %.2e, variance ratios to %.2e; Fisher %.3g beats best "
                    "random %.3g",
                    worst_axis, worst_ratio, fisher, best_random);
    });

    // ---------------------------------------------------------------- 10
    // Distance matrix: rows are normalized to 100 on a random cohort, and a
    // three-group toy example matches the hand-computed medians exactly.
    rep.run(10, [&]() -> std::string {
        Rng rng(20261010);
        std::size_t groups = 4, per = 25, d = vdl::landscape::kVdlDim;
        Matrix rows(groups * per, d);
        std::vector<std::string> labels;
        for (std::size_t g = 0; g < groups; ++g)
            for (std::size_t i = 0; i < per; ++i) {
                std::size_t r = g * per + i;
                for (std::size_t c = 0; c < d; ++c)
                    rows(r, c) = (c == g ? 4.0 : 0.0) + rng.normal();
                labels.push_back("group-" + std::to_string(g));
            }
        auto dm = vdl::landscape::distance_matrix(rows, labels);
        require(dm.groups.size() == groups, "wrong group count");
        double worst_sum = 0.0;
        for (std::size_t i = 0; i < groups; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < groups; ++j) sum += dm.values(i, j);
            worst_sum = std::max(worst_sum, std::abs(sum - 100.0));
            require(std::abs(sum - 100.0) <= 1.0e-9,
                    text("row %zu sums to %.12f", i, sum));
        }

        // Three groups of five collinear points; medians work out by hand.
        Matrix toy(15, 1);
        std::vector<std::string> toy_labels;
        const char* names[3] = {"a", "b", "c"};
        for (std::size_t g = 0; g < 3; ++g)
            for (std::size_t i = 0; i < 5; ++i) {
                toy(g * 5 + i, 0) = 10.0 * static_cast<double>(g) + static_cast<double>(i);
                toy_labels.push_back(names[g]);
            }
        auto toy_dm = vdl::landscape::distance_matrix(toy, toy_labels, {"a", "b", "c"});
        double expected[3][3] = {{100.0 / 31.0, 1000.0 / 31.0, 2000.0 / 31.0},
                                 {1000.0 / 21.0, 100.0 / 21.0, 1000.0 / 21.0},
                                 {2000.0 / 31.0, 1000.0 / 31.0, 100.0 / 31.0}};
        double worst_toy = 0.0;
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j) {
                double err = std::abs(toy_dm.values(i, j) - expected[i][j]);
                require(err <= 1.0e-12,
                        text("toy entry (%zu, %zu) is %.12f, expected %.12f", i, j,
                             toy_dm.values(i, j), expected[i][j]));
                worst_toy = std::max(worst_toy, err);
            }
        return text("row sums within %.2e of 100; hand-computed toy matches within %.2e",
                    worst_sum, worst_toy);
    });

    // ---------------------------------------------------------------- 11
    // Random forests on a separable five-group cohort: the held-out subset
    // accuracy and Jaccard score clear their bars, and class probabilities
    // always sum to one.
    rep.run(11, [&]() -> std::string {
        Timer timer;
        Rng rng(20261111);
        std::size_t groups = 5, per = 40, d = vdl::landscape::kVdlDim;
        Matrix rows(groups * per, d);
        std::vector<std::string> disease, peristalsis;
        for (std::size_t g = 0; g < groups; ++g)
            for (std::size_t i = 0; i < per; ++i) {
                std::size_t r = g * per + i;
                for (std::size_t c = 0; c < d; ++c)
                    rows(r, c) = (c == g ? 6.0 : 0.0) + 0.5 * rng.normal();
                disease.push_back("group-" + std::to_string(g));
                peristalsis.push_back(g < 2 ? "1" : "0");
            }

        vdl::landscape::ForestConfig config;
        config.n_trees = 1000;
        config.seed = 2026;
        auto disease_model = vdl::landscape::train_forest(rows, disease, "disease", config);
        require(disease_model.trees.size() == 1000, "wrong forest size");
        require(disease_model.holdout_score >= 0.85,
                text("disease subset accuracy %.3f below 0.85 (%zu held out)",
                     disease_model.holdout_score, disease_model.n_holdout));

        auto band_model =
            vdl::landscape::train_forest(rows, peristalsis, "peristalsis", config);
        require(band_model.holdout_score >= 0.90,
                text("peristalsis Jaccard %.3f below 0.90 (%zu held out)",
                     band_model.holdout_score, band_model.n_holdout));

        double worst_sum = 0.0;
        for (std::size_t probe = 0; probe < 10; ++probe) {
            Vec x = rows.row(probe * 17 % rows.rows());
            for (const auto* model : {&disease_model, &band_model}) {
                Vec p = vdl::landscape::forest_probabilities(*model, x);
                double sum = 0.0;
                for (double v : p) {
                    require(v >= 0.0, "negative class probability");
                    sum += v;
                }
                worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
                require(std::abs(sum - 1.0) <= 1.0e-12,
                        text("probabilities sum to %.15f", sum));
            }
        }
        return text("1000 trees: subset accuracy %.3f, Jaccard %.3f, probability sums within "
                    "%.2e of 1, %.0f s",
                    disease_model.holdout_score, band_model.holdout_score, worst_sum,
                    timer.seconds());
    });

    // ---------------------------------------------------------------- 12
    // Latent traversal and trajectory extrapolation: endpoints decode
    // bit-exact, the decoded band contrast decays monotonically from the
    // peristaltic family to the absent one, and a collinear history
    // extrapolates exactly.
    rep.run(12, [&]() -> std::string {
        require(shared.vae.has_value() && shared.worknet.has_value(),
                "depends on criteria 6 and 7 artifacts, which are missing");

        std::size_t d = vdl::landscape::kVdlDim;
        Vec from(d, 0.0), to(d, 0.0);
        std::size_t n_from = 0, n_to = 0;
        for (std::size_t i = 0; i < shared.cohort.size(); ++i) {
            bool peristaltic = shared.cohort[i].phenotype == "normal-peristaltic";
            Vec& acc = peristaltic ? from : to;
            for (std::size_t c = 0; c < d; ++c) acc[c] += shared.inputs(i, c);
            (peristaltic ? n_from : n_to) += 1;
        }
        require(n_from > 0 && n_to > 0, "cohort lost one of its families");
        for (std::size_t c = 0; c < d; ++c) {
            from[c] /= static_cast<double>(n_from);
            to[c] /= static_cast<double>(n_to);
        }

        auto path = vdl::landscape::traverse_latent(from, to, 5, *shared.vae, *shared.worknet);
        require(path.size() == 5, "wrong number of traversal steps");
        for (std::size_t c = 0; c < d; ++c) {
            require(path.front().point[c] == from[c], "start point not taken verbatim");
            require(path.back().point[c] == to[c], "end point not taken verbatim");
        }
        Vec z(from.begin(), from.begin() + vdl::neural::kLatentDim);
        Matrix reference = vdl::neural::decode_latent(*shared.vae, z);
        require(reference.same_shape(path.front().decoded), "decoded shape mismatch");
        for (std::size_t i = 0; i < reference.size(); ++i)
            require(reference[i] == path.front().decoded[i],
                    "endpoint decoding is not bit-exact");

        // Band contrast: mean inside the bright band of the peristaltic
        // endpoint minus mean outside it, tracked along the path.
        std::vector<bool> mask(reference.size());
        std::size_t on = 0;
        for (std::size_t i = 0; i < reference.size(); ++i) {
            mask[i] = reference[i] > 0.5;
            on += mask[i] ? 1 : 0;
        }
        require(on > 0 && on < reference.size(), "degenerate contraction-band mask");
        auto contrast = [&](const Matrix& image) {
            double s_on = 0.0, s_off = 0.0;
            for (std::size_t i = 0; i < image.size(); ++i)
                (mask[i] ? s_on : s_off) += image[i];
            return s_on / static_cast<double>(on) -
                   s_off / static_cast<double>(image.size() - on);
        };
        Vec levels;
        for (const auto& step : path) levels.push_back(contrast(step.decoded));
        for (std::size_t i = 1; i < levels.size(); ++i)
            require(levels[i] <= levels[i - 1] + 1.0e-9,
                    text("band contrast rose at step %zu: %.4f -> %.4f", i, levels[i - 1],
                         levels[i]));
        require(levels.front() > levels.back(), "band contrast failed to decrease overall");

        // Collinear observations extrapolate exactly.
        Rng rng(20261212);
        Vec origin(d), slope(d);
        for (std::size_t c = 0; c < d; ++c) {
            origin[c] = rng.uniform(-1.0, 1.0);
            slope[c] = rng.uniform(-0.5, 0.5);
        }
        std::vector<vdl::landscape::VdlVector> history;
        for (int t = 0; t < 3; ++t) {
            vdl::landscape::VdlVector v;
            v.coords.resize(d);
            for (std::size_t c = 0; c < d; ++c)
                v.coords[c] = origin[c] + static_cast<double>(t) * slope[c];
            v.subject_id = "case-7";
            v.disease_label = "normal";
            v.stats_id = "acceptance-stats";
            v.timestamp = static_cast<double>(t);
            history.push_back(std::move(v));
        }
        auto projected = vdl::landscape::extrapolate_trajectory(history, 5.0, *shared.vae);
        require(projected.extrapolated, "prediction at t=5 not marked as extrapolation");
        double worst = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            double expected = origin[c] + 5.0 * slope[c];
            worst = std::max(worst, std::abs(projected.predicted.coords[c] - expected));
        }
        require(worst <= 1.0e-8,
                text("extrapolated coordinates off by %.3g (tolerance 1e-8)", worst));
        return text("endpoints bit-exact, contrast %.3f -> %.3f monotone over 5 steps, "
                    "extrapolation error %.2e",
                    levels.front(), levels.back(), worst);
    });

    // ---------------------------------------------------------------- 13
    // Determinism: repeating pipeline commands with the same configuration
    // and seed yields byte-identical artifacts.
    rep.run(13, [&]() -> std::string {
        unsetenv("VDL_SEED");
        unsetenv("VDL_CONFIG");
        std::string dir = temp_dir("determinism");
        std::vector<std::string> verified;

        vdl::write_text_file(
            dir + "/spec.json",
            "{\"groups\":[{\"phenotype\":\"tight-egj\",\"count\":2},"
            "{\"phenotype\":\"normal-peristaltic\",\"count\":2}]}\n");
        cli_step({"synth", "--spec", dir + "/spec.json", "--out", dir + "/cohort_a", "--seed",
                  "99"});
        cli_step({"synth", "--spec", dir + "/spec.json", "--out", dir + "/cohort_b", "--seed",
                  "99"});
        require(dir_digest(dir + "/cohort_a") == dir_digest(dir + "/cohort_b"),
                "synth reruns differ");
        verified.push_back("synth");

        auto truth = make_fit(3.5e6, 1000.0);
        auto ph = vdl::synth::make_phenotype("tight-egj");
        auto rec = vdl::synth::synthesize_recording(
            ph, truth, {2.0e-5, 2.8e-5, 3.6e-5, 4.4e-5}, 6.0, 8.0);
        vdl::ingest::write_recording(dir + "/rec.csv", rec);
        cli_step({"ingest", "--in", dir + "/rec.csv", "--out", dir + "/ing_a"});
        cli_step({"ingest", "--in", dir + "/rec.csv", "--out", dir + "/ing_b"});
        require(slurp(dir + "/ing_a/recording.csv") == slurp(dir + "/ing_b/recording.csv"),
                "ingest reruns differ");
        verified.push_back("ingest");

        cli_step({"calibrate", "--in", dir + "/rec.csv", "--out", dir + "/fit_a.json"});
        cli_step({"calibrate", "--in", dir + "/rec.csv", "--out", dir + "/fit_b.json"});
        require(slurp(dir + "/fit_a.json") == slurp(dir + "/fit_b.json"),
                "calibrate reruns differ");
        verified.push_back("calibrate");

        cli_step({"solve", "--in", dir + "/rec.csv", "--fit", dir + "/fit_a.json", "--out",
                  dir + "/state_a"});
        cli_step({"solve", "--in", dir + "/rec.csv", "--fit", dir + "/fit_a.json", "--out",
                  dir + "/state_b"});
        require(dir_digest(dir + "/state_a") == dir_digest(dir + "/state_b"),
                "solve reruns differ");
        verified.push_back("solve");

        cli_step({"metrics", "--state", dir + "/state_a", "--out", dir + "/met_a.json",
                  "--egj", "13,15,0,15"});
        cli_step({"metrics", "--state", dir + "/state_a", "--out", dir + "/met_b.json",
                  "--egj", "13,15,0,15"});
        require(slurp(dir + "/met_a.json") == slurp(dir + "/met_b.json"),
                "metrics reruns differ");
        verified.push_back("metrics");

        cli_step({"train-vae", "--cohort", dir + "/cohort_a", "--out", dir + "/vae_a.ckpt",
                  "--epochs", "2", "--batch", "2", "--seed", "7"});
        cli_step({"train-vae", "--cohort", dir + "/cohort_a", "--out", dir + "/vae_b.ckpt",
                  "--epochs", "2", "--batch", "2", "--seed", "7"});
        require(slurp(dir + "/vae_a.ckpt") == slurp(dir + "/vae_b.ckpt"),
                "checkpoint bytes differ between identical trainings");
        require(slurp(dir + "/vae_a.ckpt.json") == slurp(dir + "/vae_b.ckpt.json"),
                "checkpoint sidecars differ");
        require(slurp(dir + "/vae_a.ckpt.curve.csv") == slurp(dir + "/vae_b.ckpt.curve.csv"),
                "training curves differ");
        verified.push_back("train-vae");

        cli_step({"embed", "--cohort", dir + "/cohort_a", "--vae", dir + "/vae_a.ckpt",
                  "--out", dir + "/vdl_a.csv"});
        cli_step({"embed", "--cohort", dir + "/cohort_a", "--vae", dir + "/vae_a.ckpt",
                  "--out", dir + "/vdl_b.csv"});
        require(slurp(dir + "/vdl_a.csv") == slurp(dir + "/vdl_b.csv"),
                "embed reruns differ");
        require(slurp(dir + "/vdl_a.csv.stats.json") == slurp(dir + "/vdl_b.csv.stats.json"),
                "normalization stats differ");
        verified.push_back("embed");

        cli_step({"train-worknet", "--cohort", dir + "/cohort_a", "--vdl", dir + "/vdl_a.csv",
                  "--stats", dir + "/vdl_a.csv.stats.json", "--out", dir + "/wn_a.ckpt",
                  "--epochs", "2", "--batch", "2", "--seed", "11"});
        cli_step({"train-worknet", "--cohort", dir + "/cohort_a", "--vdl", dir + "/vdl_a.csv",
                  "--stats", dir + "/vdl_a.csv.stats.json", "--out", dir + "/wn_b.ckpt",
                  "--epochs", "2", "--batch", "2", "--seed", "11"});
        require(slurp(dir + "/wn_a.ckpt") == slurp(dir + "/wn_b.ckpt"),
                "regressor checkpoints differ");
        verified.push_back("train-worknet");

        cli_step({"train-forest", "--vdl", dir + "/vdl_a.csv", "--task", "disease", "--out",
                  dir + "/forest_a.json", "--trees", "30", "--seed", "3"});
        cli_step({"train-forest", "--vdl", dir + "/vdl_a.csv", "--task", "disease", "--out",
                  dir + "/forest_b.json", "--trees", "30", "--seed", "3"});
        require(slurp(dir + "/forest_a.json") == slurp(dir + "/forest_b.json"),
                "forest reruns differ");
        verified.push_back("train-forest");

        auto points = vdl::landscape::load_vdl_csv(dir + "/vdl_a.csv");
        require(points.size() >= 2, "embedded landscape lost its points");
        cli_step({"traverse", "--vdl", dir + "/vdl_a.csv", "--from", points[0].subject_id,
                  "--to", points[2].subject_id, "--vae", dir + "/vae_a.ckpt", "--worknet",
                  dir + "/wn_a.ckpt", "--out", dir + "/trav_a", "--steps", "3"});
        cli_step({"traverse", "--vdl", dir + "/vdl_a.csv", "--from", points[0].subject_id,
                  "--to", points[2].subject_id, "--vae", dir + "/vae_a.ckpt", "--worknet",
                  dir + "/wn_a.ckpt", "--out", dir + "/trav_b", "--steps", "3"});
        require(dir_digest(dir + "/trav_a") == dir_digest(dir + "/trav_b"),
                "traverse reruns differ");
        verified.push_back("traverse");

        std::string detail = "byte-identical reruns:";
        for (const auto& name : verified) detail += " " + name;
        std::filesystem::remove_all(dir);
        return detail;
    });

    std::printf("%d/13 criteria passed\n", 13 - rep.failures);
    return rep.failures;
}
