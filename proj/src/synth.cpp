#include "vdl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

#include <nlohmann/json.hpp>

#include "vdl/inverse.hpp"

namespace vdl::synth {

namespace {

constexpr double kCfl = 0.5;
constexpr double kWaveWidth = 0.015;  // m, Gaussian half-width of the contraction band
constexpr std::size_t kMaxSubsteps = 200000;  // per frame interval

/// Linear interpolation of a sensors x frames field in the time index.
double theta_at(const Matrix& theta, std::size_t row, double frame_pos) {
    std::size_t last = theta.cols() - 1;
    if (frame_pos <= 0.0) return theta(row, 0);
    if (frame_pos >= static_cast<double>(last)) return theta(row, last);
    std::size_t f = static_cast<std::size_t>(frame_pos);
    double w = frame_pos - static_cast<double>(f);
    return (1.0 - w) * theta(row, f) + w * theta(row, f + 1);
}

/// Interface values consistent with given cell averages: the family
/// a_i = b_i + s(-1)^i is closed by picking the roughness-minimizing s,
/// projected into the interval keeping every value positive.
std::vector<double> reconstruct_interfaces(const std::vector<double>& cells) {
    std::size_t n = cells.size() + 1;
    std::vector<double> b(n);
    b[0] = cells[0];
    for (std::size_t i = 0; i + 1 < n; ++i) b[i + 1] = 2.0 * cells[i] - b[i];

    double num = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double diff = b[i + 1] - b[i];
        num += (i % 2 == 0 ? diff : -diff);
    }
    double s = num / (2.0 * static_cast<double>(cells.size()));

    // positivity bounds: even interfaces need s > -b_i, odd ones s < b_i
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        if (i % 2 == 0)
            lo = std::max(lo, -b[i]);
        else
            hi = std::min(hi, b[i]);
    }
    if (lo >= hi)
        throw ValidationError("reconstruct_interfaces: no positive interface solution");
    double margin = 1e-9 * (std::abs(lo) + std::abs(hi) + 1.0);
    s = std::clamp(s, lo + margin, hi - margin);

    std::vector<double> a(n);
    for (std::size_t i = 0; i < n; ++i) a[i] = b[i] + (i % 2 == 0 ? s : -s);
    return a;
}

struct ScalarFactors {
    double f_k = 1.0, f_po = 1.0, f_pd = 1.0, f_tmax = 1.0;
};

ScalarFactors draw_factors(const AugmentSpec& spec, Rng& rng) {
    ScalarFactors f;
    f.f_k = 1.0 + spec.scalar_sigma * rng.truncated_normal(spec.normal_clip);
    f.f_po = 1.0 + spec.scalar_sigma * rng.truncated_normal(spec.normal_clip);
    f.f_pd = 1.0 + spec.scalar_sigma * rng.truncated_normal(spec.normal_clip);
    f.f_tmax = 1.0 + spec.scalar_sigma * rng.truncated_normal(spec.normal_clip);
    return f;
}

double sample_clamped(const Matrix& grid, double r, double c) {
    double max_r = static_cast<double>(grid.rows() - 1);
    double max_c = static_cast<double>(grid.cols() - 1);
    r = std::clamp(r, 0.0, max_r);
    c = std::clamp(c, 0.0, max_c);
    std::size_t r0 = static_cast<std::size_t>(r), c0 = static_cast<std::size_t>(c);
    std::size_t r1 = std::min(r0 + 1, grid.rows() - 1);
    std::size_t c1 = std::min(c0 + 1, grid.cols() - 1);
    double fr = r - static_cast<double>(r0), fc = c - static_cast<double>(c0);
    return (1.0 - fr) * ((1.0 - fc) * grid(r0, c0) + fc * grid(r0, c1)) +
           fr * ((1.0 - fc) * grid(r1, c0) + fc * grid(r1, c1));
}

Matrix grid_distort(const Matrix& grid, double max_disp_frac, Rng& rng) {
    constexpr std::size_t kLattice = 4;
    double cell_r = static_cast<double>(grid.rows() - 1) / (kLattice - 1);
    double cell_c = static_cast<double>(grid.cols() - 1) / (kLattice - 1);
    Matrix dr(kLattice, kLattice), dc(kLattice, kLattice);
    for (std::size_t i = 0; i < kLattice * kLattice; ++i) {
        dr[i] = rng.uniform(-max_disp_frac, max_disp_frac) * cell_r;
        dc[i] = rng.uniform(-max_disp_frac, max_disp_frac) * cell_c;
    }
    Matrix out(grid.rows(), grid.cols());
    for (std::size_t r = 0; r < grid.rows(); ++r)
        for (std::size_t c = 0; c < grid.cols(); ++c) {
            double lr = static_cast<double>(r) / cell_r;
            double lc = static_cast<double>(c) / cell_c;
            double disp_r = sample_clamped(dr, lr, lc);
            double disp_c = sample_clamped(dc, lr, lc);
            out(r, c) = sample_clamped(grid, static_cast<double>(r) + disp_r,
                                       static_cast<double>(c) + disp_c);
        }
    return out;
}

Matrix gaussian_smooth(const Matrix& grid, double sigma) {
    int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
        sum += kernel[k + radius];
    }
    for (double& w : kernel) w /= sum;

    auto pass = [&](const Matrix& in, bool rows) {
        Matrix out(in.rows(), in.cols());
        for (std::size_t r = 0; r < in.rows(); ++r)
            for (std::size_t c = 0; c < in.cols(); ++c) {
                double acc = 0.0;
                for (int k = -radius; k <= radius; ++k) {
                    long rr = static_cast<long>(r) + (rows ? k : 0);
                    long cc = static_cast<long>(c) + (rows ? 0 : k);
                    rr = std::clamp(rr, 0L, static_cast<long>(in.rows()) - 1);
                    cc = std::clamp(cc, 0L, static_cast<long>(in.cols()) - 1);
                    acc += kernel[k + radius] * in(rr, cc);
                }
                out(r, c) = acc;
            }
        return out;
    };
    return pass(pass(grid, true), false);
}

Matrix elastic_warp(const Matrix& grid, Rng& rng) {
    constexpr double kSigma = 2.0;
    constexpr double kAmplitude = 2.0;  // pixels
    Matrix dr(grid.rows(), grid.cols()), dc(grid.rows(), grid.cols());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        dr[i] = rng.normal();
        dc[i] = rng.normal();
    }
    dr = gaussian_smooth(dr, kSigma);
    dc = gaussian_smooth(dc, kSigma);
    double peak = 1e-12;
    for (std::size_t i = 0; i < grid.size(); ++i)
        peak = std::max({peak, std::abs(dr[i]), std::abs(dc[i])});
    double scale = kAmplitude / peak;

    Matrix out(grid.rows(), grid.cols());
    for (std::size_t r = 0; r < grid.rows(); ++r)
        for (std::size_t c = 0; c < grid.cols(); ++c)
            out(r, c) = sample_clamped(grid, static_cast<double>(r) + scale * dr(r, c),
                                       static_cast<double>(c) + scale * dc(r, c));
    return out;
}


std::string sample_file_base(const std::string& id) { return "samples/" + id; }

}  // namespace

Matrix temporal_blur(const Matrix& grid, std::size_t width) {
    if (width <= 1) return grid;
    long half_lo = static_cast<long>((width - 1) / 2);
    long half_hi = static_cast<long>(width / 2);
    Matrix out(grid.rows(), grid.cols());
    for (std::size_t r = 0; r < grid.rows(); ++r)
        for (std::size_t c = 0; c < grid.cols(); ++c) {
            double acc = 0.0;
            for (long k = -half_lo; k <= half_hi; ++k) {
                long cc = std::clamp(static_cast<long>(c) + k, 0L,
                                     static_cast<long>(grid.cols()) - 1);
                acc += grid(r, cc);
            }
            out(r, c) = acc / static_cast<double>(width);
        }
    return out;
}

const std::vector<std::string>& phenotype_names() {
    static const std::vector<std::string> names = {
        "normal-peristaltic", "absent-contractility", "tight-egj", "spastic",
        "weak-peristaltic"};
    return names;
}

Phenotype make_phenotype(const std::string& name) {
    Phenotype ph;
    ph.name = name;
    if (name == "normal-peristaltic") {
        ph.contraction_amplitude = 0.60;
        ph.wave_speed = 3.0;
        ph.egj_tone = 0.55;
        ph.relaxation_peak = 1.6;
        ph.peristalsis_label = 1;
    } else if (name == "weak-peristaltic") {
        ph.contraction_amplitude = 0.25;
        ph.wave_speed = 2.5;
        ph.egj_tone = 0.65;
        ph.relaxation_peak = 1.3;
        ph.peristalsis_label = 1;
    } else if (name == "absent-contractility") {
        ph.contraction_amplitude = 0.0;
        ph.wave_speed = 0.0;
        ph.egj_tone = 0.35;
        ph.relaxation_peak = 1.0;
        ph.peristalsis_label = 0;
    } else if (name == "tight-egj") {
        ph.contraction_amplitude = 0.50;
        ph.wave_speed = 3.0;
        ph.egj_tone = 0.30;
        ph.relaxation_peak = 1.0;
        ph.peristalsis_label = 1;  // body wave intact, junction fails to open
    } else if (name == "spastic") {
        ph.contraction_amplitude = 0.55;
        ph.wave_speed = 25.0;  // near-simultaneous
        ph.egj_tone = 0.55;
        ph.relaxation_peak = 1.0;
        ph.peristalsis_label = 0;
    } else {
        throw ValidationError("make_phenotype: unknown phenotype '" + name + "'");
    }
    return ph;
}

ForwardResult forward_solve(const Matrix& theta_field, const calibrate::TubeLawFit& fit,
                            double volume, double duration) {
    std::size_t n = theta_field.rows();
    std::size_t frames = theta_field.cols();
    if (n < 3 || frames < 2) throw ValidationError("forward_solve: grid too small");
    if (volume <= 0.0 || duration <= 0.0)
        throw ValidationError("forward_solve: volume and duration must be positive");
    for (std::size_t i = 0; i < theta_field.size(); ++i)
        if (!(theta_field[i] > 0.0) || !std::isfinite(theta_field[i]))
            throw ValidationError("forward_solve: activation must be positive and finite");

    std::size_t cells = n - 1;
    double dchi = 1.0 / static_cast<double>(cells);
    double total_tau = duration * fit.c / fit.length;
    double dtau_frame = total_tau / static_cast<double>(frames - 1);
    double p0 = fit.po_minus_k / fit.pressure_scale();
    double phi = fit.gamma();
    double mass = volume / (fit.area_scale() * fit.length);  // target sum(alpha) * dchi

    Matrix theta_cell(cells, frames);
    for (std::size_t I = 0; I < cells; ++I)
        for (std::size_t f = 0; f < frames; ++f)
            theta_cell(I, f) = 0.5 * (theta_field(I, f) + theta_field(I + 1, f));

    // equilibrium start: uniform pressure, q = 0
    std::vector<double> alpha(cells), q(n, 0.0), q_new(n, 0.0), p_cell(cells);
    double theta_sum0 = 0.0;
    for (std::size_t I = 0; I < cells; ++I) theta_sum0 += theta_cell(I, 0);
    double stretch = mass / (dchi * theta_sum0);
    for (std::size_t I = 0; I < cells; ++I) alpha[I] = theta_cell(I, 0) * stretch;

    ForwardResult result;
    result.theta = theta_field;
    result.pressure_pa = Matrix(n, frames);
    result.q = Matrix(n, frames);
    ingest::AnalysisWindow& window = result.window;
    window.t_start = 0.0;
    window.t_end = duration;
    window.duration = duration;
    window.volume = volume;
    window.alpha_grid = Matrix(n, frames);
    window.pd_series.assign(frames, 0.0);

    double mass0 = 0.0;
    for (double a : alpha) mass0 += a;
    mass0 *= dchi;

    auto emit = [&](std::size_t f) {
        std::vector<double> nodes = reconstruct_interfaces(alpha);
        for (std::size_t i = 0; i < n; ++i) {
            window.alpha_grid(i, f) = nodes[i];
            result.pressure_pa(i, f) =
                fit.pressure_scale() * (p0 + nodes[i] / theta_field(i, f));
            result.q(i, f) = q[i];
        }
        window.pd_series[f] = result.pressure_pa(n - 1, f);
    };
    emit(0);

    for (std::size_t f = 1; f < frames; ++f) {
        double tau = static_cast<double>(f - 1) * dtau_frame;
        double target = static_cast<double>(f) * dtau_frame;
        std::size_t steps = 0;
        while (tau < target - 1e-15 * total_tau) {
            double frame_pos = tau / dtau_frame;
            double speed = 0.0;
            for (std::size_t I = 0; I < cells; ++I) {
                double th = theta_at(theta_cell, I, frame_pos);
                double u = 0.5 * (q[I] + q[I + 1]) / alpha[I];
                speed = std::max(speed, std::abs(u) + std::sqrt(alpha[I] / th));
            }
            double dt = std::min(kCfl * dchi / speed, target - tau);
            if (++steps > kMaxSubsteps)
                throw ValidationError("forward_solve: stability step " + std::to_string(dt) +
                                      " requires too many substeps; solver diverged");

            for (std::size_t I = 0; I < cells; ++I)
                p_cell[I] = p0 + alpha[I] / theta_at(theta_cell, I, frame_pos);
            for (std::size_t i = 1; i + 1 < n; ++i) {
                double a_node = 0.5 * (alpha[i - 1] + alpha[i]);
                double g_right = 0.25 * (q[i] + q[i + 1]) * (q[i] + q[i + 1]) / alpha[i];
                double g_left = 0.25 * (q[i - 1] + q[i]) * (q[i - 1] + q[i]) / alpha[i - 1];
                double advect = (g_right - g_left) / dchi;
                double pgrad = a_node * (p_cell[i] - p_cell[i - 1]) / dchi;
                q_new[i] = (q[i] - dt * (advect + pgrad)) / (1.0 + dt * phi / a_node);
            }
            q_new[0] = 0.0;
            q_new[n - 1] = 0.0;
            std::swap(q, q_new);

            for (std::size_t I = 0; I < cells; ++I) {
                alpha[I] -= dt * (q[I + 1] - q[I]) / dchi;
                if (!(alpha[I] > 0.0) || !std::isfinite(alpha[I]))
                    throw ValidationError("forward_solve: area collapsed at step size " +
                                          std::to_string(dt) + " (CFL violation)");
            }
            tau += dt;
        }
        double total = 0.0;
        for (double a : alpha) total += a;
        total *= dchi;
        result.max_step_drift = std::max(result.max_step_drift,
                                         std::abs(total - mass0) / mass0);
        emit(f);
    }
    return result;
}

Matrix phenotype_theta_field(const Phenotype& ph, double duration, double length) {
    return phenotype_theta_field(ph, duration, length, ingest::kGridSize);
}

Matrix phenotype_theta_field(const Phenotype& ph, double duration, double length,
                             std::size_t frames) {
    std::size_t sensors = ingest::kSensorCount;
    Matrix theta(sensors, frames);
    double spacing = length / static_cast<double>(sensors - 1);
    double v = ph.wave_speed * units::m_per_cm;  // cm/s to m/s
    bool has_wave = ph.contraction_amplitude > 0.0 && v > 0.0;
    double arrival = has_wave
                         ? (static_cast<double>(kEgjSensorStart) * spacing + 2.0 * kWaveWidth) / v
                         : 0.5 * duration;
    double pulse_width = std::max(0.4, duration / 10.0);

    for (std::size_t f = 0; f < frames; ++f) {
        double t = duration * static_cast<double>(f) / static_cast<double>(frames - 1);
        double x_c = v * t - 2.0 * kWaveWidth;
        for (std::size_t i = 0; i < sensors; ++i) {
            double value;
            if (i >= kEgjSensorStart) {
                value = ph.egj_tone;
                if (has_wave && ph.relaxation_peak > ph.egj_tone) {
                    double bump = std::exp(-std::pow((t - arrival) / pulse_width, 2));
                    value += (ph.relaxation_peak - ph.egj_tone) * bump;
                }
            } else {
                value = 1.0;
                if (has_wave) {
                    double x = static_cast<double>(i) * spacing;
                    value -= ph.contraction_amplitude *
                             std::exp(-std::pow((x - x_c) / kWaveWidth, 2));
                }
            }
            theta(i, f) = std::max(value, 0.08);
        }
    }
    return theta;
}

ingest::FlipRecording synthesize_recording(const Phenotype& ph, const calibrate::TubeLawFit& fit,
                                           const std::vector<double>& volumes_m3,
                                           double seconds_per_fill, double sample_hz) {
    if (volumes_m3.empty()) throw ValidationError("synthesize_recording: no fill volumes");
    if (seconds_per_fill <= 0.0 || sample_hz <= 0.0)
        throw ValidationError("synthesize_recording: non-positive timing");

    std::size_t frames = static_cast<std::size_t>(std::lround(seconds_per_fill * sample_hz)) + 1;
    if (frames < 8) throw ValidationError("synthesize_recording: too few samples per fill");

    double quiet_end = 0.4 * seconds_per_fill;
    double ramp_end = 0.5 * seconds_per_fill;
    double act_duration = seconds_per_fill - ramp_end;
    Matrix activity = phenotype_theta_field(ph, act_duration, fit.length, frames);

    ingest::FlipRecording rec;
    rec.units = ingest::Units::si;
    rec.sensor_spacing = fit.length / static_cast<double>(ingest::kSensorCount - 1);
    std::vector<Vec> diameter_cols;

    double t_base = 0.0;
    for (double volume : volumes_m3) {
        Matrix theta(ingest::kSensorCount, frames);
        for (std::size_t f = 0; f < frames; ++f) {
            double t = seconds_per_fill * static_cast<double>(f) /
                       static_cast<double>(frames - 1);
            double blend;
            if (t <= quiet_end)
                blend = 0.0;
            else if (t >= ramp_end)
                blend = 1.0;
            else
                blend = 0.5 - 0.5 * std::cos(M_PI * (t - quiet_end) / (ramp_end - quiet_end));
            double act_pos = std::clamp(t - ramp_end, 0.0, act_duration) / act_duration *
                             static_cast<double>(frames - 1);
            for (std::size_t i = 0; i < ingest::kSensorCount; ++i) {
                // activity capped at 1 so every pressure minimum sits on the
                // relaxed tube-law line
                double act = std::min(theta_at(activity, i, act_pos), 1.0);
                theta(i, f) = 1.0 + blend * (act - 1.0);
            }
        }
        ForwardResult fwd = forward_solve(theta, fit, volume, seconds_per_fill);
        for (std::size_t f = 0; f < frames; ++f) {
            if (t_base > 0.0 && f == 0) continue;  // avoid duplicate timestamps at the seam
            double t_rec = t_base + seconds_per_fill * static_cast<double>(f) /
                                        static_cast<double>(frames - 1);
            rec.time.push_back(t_rec);
            rec.distal_pressure.push_back(fwd.window.pd_series[f]);
            rec.bag_volume.push_back(volume);
            Vec diam(ingest::kSensorCount);
            for (std::size_t i = 0; i < ingest::kSensorCount; ++i) {
                double area = fwd.window.alpha_grid(i, f) * fit.area_scale();
                diam[i] = 2.0 * std::sqrt(area / M_PI);
            }
            diameter_cols.push_back(std::move(diam));
        }
        t_base += seconds_per_fill + 1.0 / sample_hz;
    }
    rec.diameters = Matrix(ingest::kSensorCount, diameter_cols.size());
    for (std::size_t k = 0; k < diameter_cols.size(); ++k)
        for (std::size_t i = 0; i < ingest::kSensorCount; ++i)
            rec.diameters(i, k) = diameter_cols[k][i];
    return ingest::to_clinical(rec);
}

std::vector<CohortSample> generate_cohort(
    const std::vector<std::pair<std::string, std::size_t>>& spec, std::uint64_t seed) {
    if (spec.empty()) throw ValidationError("generate_cohort: empty phenotype spec");
    for (const auto& [name, count] : spec)
        if (count == 0) throw ValidationError("generate_cohort: zero count for " + name);

    std::vector<CohortSample> cohort;
    Rng root(seed);
    std::uint64_t index = 0;
    for (const auto& [name, count] : spec) {
        Phenotype base = make_phenotype(name);
        for (std::size_t k = 0; k < count; ++k, ++index) {
            Rng rng = root.stream(index);
            Phenotype ph = base;
            ph.contraction_amplitude *= rng.uniform(0.85, 1.15);
            ph.contraction_amplitude = std::min(ph.contraction_amplitude, 0.9);
            ph.egj_tone = std::clamp(ph.egj_tone * rng.uniform(0.9, 1.1), 0.2, 1.0);
            if (ph.wave_speed > 0.0) ph.wave_speed *= rng.uniform(0.9, 1.1);
            if (ph.relaxation_peak > 1.0)
                ph.relaxation_peak = std::max(1.0, ph.relaxation_peak * rng.uniform(0.95, 1.1));

            calibrate::TubeLawFit fit;
            fit.k_over_ao = rng.uniform(2.5e6, 5.5e6);
            fit.po_minus_k = rng.uniform(600.0, 1400.0);
            fit.r_squared = 1.0;
            fit.support_points = {{0.0, fit.po_minus_k},
                                  {1e-4, fit.po_minus_k + fit.k_over_ao * 1e-4}};

            double volume = rng.uniform(3.0e-5, 4.5e-5);
            double v = ph.wave_speed * units::m_per_cm;
            double duration;
            if (ph.contraction_amplitude <= 0.0 || v <= 0.0)
                duration = rng.uniform(6.0, 10.0);
            else if (v >= 0.1)
                duration = rng.uniform(4.0, 6.0);
            else
                duration = (fit.length + 4.0 * kWaveWidth) / v * rng.uniform(0.9, 1.1);

            Matrix theta = phenotype_theta_field(ph, duration, fit.length);
            ForwardResult fwd = forward_solve(theta, fit, volume, duration);

            CohortSample sample;
            char buf[16];
            std::snprintf(buf, sizeof(buf), "s%04llu",
                          static_cast<unsigned long long>(index));
            sample.id = std::string(buf) + "-" + name;
            sample.phenotype = name;
            sample.peristalsis = ph.peristalsis_label;
            sample.window = fwd.window;
            sample.theta_true = theta;
            sample.fit = fit;
            sample.params.k_over_ao = fit.k_over_ao;
            sample.params.po_minus_k = fit.po_minus_k;
            sample.params.p_max = *std::max_element(fwd.window.pd_series.begin(),
                                                    fwd.window.pd_series.end());
            sample.params.t_max = duration;
            sample.params.volume = volume;
            sample.params.theta_max = theta.max();
            cohort.push_back(std::move(sample));
        }
    }
    return cohort;
}

metrics::PrimaryParams augment_scalars(const metrics::PrimaryParams& params,
                                       const AugmentSpec& spec, Rng& rng) {
    ScalarFactors f = draw_factors(spec, rng);
    metrics::PrimaryParams out = params;
    out.k_over_ao *= f.f_k;
    out.po_minus_k *= f.f_po;
    out.p_max *= f.f_pd;
    out.t_max *= f.f_tmax;
    return out;
}

Matrix augment_field(const Matrix& grid, const AugmentSpec& spec, Rng& rng) {
    Matrix out = grid;
    double floor = 1e-6 * grid.mean();
    if (rng.uniform() < spec.p_grid_distort) out = grid_distort(out, spec.max_displacement, rng);
    if (rng.uniform() < spec.p_elastic) out = elastic_warp(out, rng);
    if (rng.uniform() < spec.p_temporal_blur) {
        std::size_t width = 3 + rng.integer(4);  // 3..6 samples
        out = temporal_blur(out, width);
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(out[i], floor);
    return out;
}

std::vector<CohortSample> augment_sample(const CohortSample& sample, const AugmentSpec& spec,
                                         std::uint64_t seed) {
    std::vector<CohortSample> replicas;
    Rng root(seed);
    for (std::size_t r = 0; r < spec.replicas_per_sample; ++r) {
        Rng rng = root.stream(r);
        ScalarFactors f = draw_factors(spec, rng);

        CohortSample rep = sample;
        rep.id = sample.id + "-aug" + std::to_string(r);
        rep.parent_id = sample.id;
        rep.augmented = true;

        rep.fit.k_over_ao *= f.f_k;
        rep.fit.po_minus_k *= f.f_po;
        rep.params.k_over_ao = rep.fit.k_over_ao;
        rep.params.po_minus_k = rep.fit.po_minus_k;
        rep.params.p_max = sample.params.p_max * f.f_pd;
        rep.params.t_max = sample.params.t_max * f.f_tmax;

        rep.window.alpha_grid = augment_field(sample.window.alpha_grid, spec, rng);
        for (double& p : rep.window.pd_series) p *= f.f_pd;
        rep.window.duration = sample.window.duration * f.f_tmax;
        rep.window.t_end = rep.window.t_start + rep.window.duration;

        // re-solve so the activation grid stays tube-law consistent
        inverse::MechanicsState state = inverse::solve_window(rep.window, rep.fit);
        rep.theta_true = state.theta;
        rep.params.theta_max = state.theta.max();
        replicas.push_back(std::move(rep));
    }
    return replicas;
}

void save_cohort(const std::string& dir, const std::vector<CohortSample>& cohort) {
    std::filesystem::create_directories(dir + "/samples");
    nlohmann::json manifest = nlohmann::json::array();
    for (const CohortSample& sample : cohort) {
        std::string base = sample_file_base(sample.id);
        std::string window_csv = base + ".csv";
        std::string theta_csv = base + "_theta.csv";

        ingest::FlipRecording rec;
        rec.units = ingest::Units::si;
        rec.sensor_spacing = sample.fit.length / static_cast<double>(ingest::kSensorCount - 1);
        std::size_t frames = sample.window.alpha_grid.cols();
        rec.diameters = Matrix(ingest::kSensorCount, frames);
        for (std::size_t f = 0; f < frames; ++f) {
            rec.time.push_back(sample.window.t_start +
                               sample.window.duration * static_cast<double>(f) /
                                   static_cast<double>(frames - 1));
            rec.distal_pressure.push_back(sample.window.pd_series[f]);
            rec.bag_volume.push_back(sample.window.volume);
            for (std::size_t i = 0; i < ingest::kSensorCount; ++i) {
                double area = sample.window.alpha_grid(i, f) * sample.fit.area_scale();
                rec.diameters(i, f) = 2.0 * std::sqrt(area / M_PI);
            }
        }
        write_text_file(dir + "/" + window_csv, ingest::recording_to_csv(rec));
        write_matrix_csv(dir + "/" + theta_csv, sample.theta_true);

        nlohmann::json entry;
        entry["id"] = sample.id;
        entry["phenotype"] = sample.phenotype;
        entry["peristalsis"] = sample.peristalsis;
        entry["augmented"] = sample.augmented;
        entry["parent_id"] = sample.parent_id;
        entry["window_csv"] = window_csv;
        entry["theta_csv"] = theta_csv;
        entry["window_hash"] = hash_file_hex(dir + "/" + window_csv);
        entry["theta_hash"] = hash_file_hex(dir + "/" + theta_csv);
        entry["fit"] = nlohmann::json::parse(calibrate::fit_to_json(sample.fit));
        entry["params"] = {{"k_over_ao", sample.params.k_over_ao},
                           {"po_minus_k", sample.params.po_minus_k},
                           {"p_max_pa", sample.params.p_max},
                           {"t_max_s", sample.params.t_max},
                           {"volume_m3", sample.params.volume},
                           {"theta_max", sample.params.theta_max}};
        manifest.push_back(entry);
    }
    write_text_file(dir + "/manifest.json", manifest.dump(2));
}

std::vector<CohortSample> load_cohort(const std::string& dir) {
    nlohmann::json manifest = nlohmann::json::parse(read_text_file(dir + "/manifest.json"));
    std::vector<CohortSample> cohort;
    for (const auto& entry : manifest) {
        CohortSample sample;
        sample.id = entry.at("id").get<std::string>();
        sample.phenotype = entry.at("phenotype").get<std::string>();
        sample.peristalsis = entry.at("peristalsis").get<int>();
        sample.augmented = entry.at("augmented").get<bool>();
        sample.parent_id = entry.at("parent_id").get<std::string>();
        sample.fit = calibrate::fit_from_json(entry.at("fit").dump());

        std::string window_csv = dir + "/" + entry.at("window_csv").get<std::string>();
        std::string theta_csv = dir + "/" + entry.at("theta_csv").get<std::string>();
        std::string expect_window = entry.at("window_hash").get<std::string>();
        std::string expect_theta = entry.at("theta_hash").get<std::string>();
        if (hash_file_hex(window_csv) != expect_window ||
            hash_file_hex(theta_csv) != expect_theta)
            throw ValidationError("load_cohort: content hash mismatch for " + sample.id);

        ingest::FlipRecording rec = ingest::parse_recording(window_csv);
        sample.window = ingest::select_window(rec, rec.time.front(), rec.time.back(), sample.fit);
        sample.theta_true = read_matrix_csv(theta_csv);

        const auto& p = entry.at("params");
        sample.params.k_over_ao = p.at("k_over_ao").get<double>();
        sample.params.po_minus_k = p.at("po_minus_k").get<double>();
        sample.params.p_max = p.at("p_max_pa").get<double>();
        sample.params.t_max = p.at("t_max_s").get<double>();
        sample.params.volume = p.at("volume_m3").get<double>();
        sample.params.theta_max = p.at("theta_max").get<double>();
        cohort.push_back(std::move(sample));
    }
    return cohort;
}

}  // namespace vdl::synth
