#include "vdl/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace vdl::metrics {

namespace {

double median_of(std::vector<double> v) {
    if (v.empty()) throw ValidationError("median_of: empty sample");
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> frame_times(const ingest::AnalysisWindow& window, std::size_t frames) {
    std::vector<double> t(frames);
    double step = frames > 1 ? window.duration / static_cast<double>(frames - 1) : 0.0;
    for (std::size_t f = 0; f < frames; ++f) t[f] = window.t_start + static_cast<double>(f) * step;
    return t;
}

}  // namespace

double opening_area_lo() { return M_PI * 1.5e-3 * 1.5e-3; }
double opening_area_hi() { return M_PI * 11.0e-3 * 11.0e-3; }

EgjRegion locate_egj(const ingest::AnalysisWindow& window, const inverse::MechanicsState& state) {
    Matrix area = state.area_node_m2();
    std::size_t sensors = area.rows();
    std::size_t frames = area.cols();
    if (sensors < 4) throw ValidationError("locate_egj: too few sensors");

    std::vector<double> mean_diam(sensors, 0.0);
    for (std::size_t i = 0; i < sensors; ++i) {
        for (std::size_t f = 0; f < frames; ++f)
            mean_diam[i] += 2.0 * std::sqrt(area(i, f) / M_PI);
        mean_diam[i] /= static_cast<double>(frames);
    }

    std::size_t half = sensors / 2;
    double body = 0.0;
    for (std::size_t i = 0; i < half; ++i) body += mean_diam[i];
    body /= static_cast<double>(half);
    double threshold = kEgjDiameterRatio * body;

    // narrowest distal-half sensor seeds the region
    std::size_t seed = half;
    for (std::size_t i = half; i < sensors; ++i)
        if (mean_diam[i] < mean_diam[seed]) seed = i;
    if (mean_diam[seed] >= threshold)
        throw ValidationError(
            "locate_egj: no distal narrowing below 60% of the proximal body average; "
            "supply manual bounds");

    std::size_t lo = seed, hi = seed;
    while (lo > 0 && mean_diam[lo - 1] < threshold) --lo;
    while (hi + 1 < sensors && mean_diam[hi + 1] < threshold) ++hi;

    double spacing = state.fit.length / static_cast<double>(sensors - 1);
    std::vector<double> times = frame_times(window, frames);

    // the junction opens from its narrowest instant to the following widest one
    std::vector<double> region_mean(frames, 0.0);
    for (std::size_t f = 0; f < frames; ++f) {
        for (std::size_t i = lo; i <= hi; ++i)
            region_mean[f] += 2.0 * std::sqrt(area(i, f) / M_PI);
        region_mean[f] /= static_cast<double>(hi - lo + 1);
    }
    std::size_t f1 = 0;
    for (std::size_t f = 1; f < frames; ++f)
        if (region_mean[f] < region_mean[f1]) f1 = f;
    std::size_t f2 = f1;
    for (std::size_t f = f1; f < frames; ++f)
        if (region_mean[f] > region_mean[f2]) f2 = f;

    EgjRegion region;
    region.i1 = lo;
    region.i2 = hi;
    region.f1 = f1;
    region.f2 = f2;
    region.x1 = static_cast<double>(lo) * spacing;
    region.x2 = static_cast<double>(hi) * spacing;
    region.t1 = times[f1];
    region.t2 = times[f2];
    region.a1 = opening_area_lo();
    region.a2 = opening_area_hi();
    return region;
}

EgjRegion region_from_bounds(const ingest::AnalysisWindow& window,
                             const calibrate::TubeLawFit& fit, std::size_t i1, std::size_t i2,
                             std::size_t f1, std::size_t f2) {
    std::size_t sensors = window.alpha_grid.rows();
    std::size_t frames = window.alpha_grid.cols();
    if (i1 > i2 || i2 >= sensors || f1 > f2 || f2 >= frames)
        throw ValidationError("region_from_bounds: bounds outside the window grid");
    double spacing = fit.length / static_cast<double>(sensors - 1);
    std::vector<double> times = frame_times(window, frames);
    EgjRegion region;
    region.i1 = i1;
    region.i2 = i2;
    region.f1 = f1;
    region.f2 = f2;
    region.x1 = static_cast<double>(i1) * spacing;
    region.x2 = static_cast<double>(i2) * spacing;
    region.t1 = times[f1];
    region.t2 = times[f2];
    region.a1 = opening_area_lo();
    region.a2 = opening_area_hi();
    region.manual = true;
    return region;
}

double compute_egjw(const Matrix& pressure_pa, const Matrix& area_m2, const EgjRegion& region,
                    const ingest::AnalysisWindow& window) {
    std::size_t frames = pressure_pa.cols();
    if (!pressure_pa.same_shape(area_m2))
        throw ValidationError("compute_egjw: pressure and area shapes differ");
    if (region.i2 >= pressure_pa.rows() || region.f2 >= frames)
        throw ValidationError("compute_egjw: region outside the solved domain");
    if (region.f1 == region.f2) return 0.0;

    std::vector<double> times = frame_times(window, frames);

    // dA/dt with central differences inside [f1, f2], one-sided at the ends
    auto dadt = [&](std::size_t i, std::size_t f) {
        std::size_t prev = f > region.f1 ? f - 1 : f;
        std::size_t next = f < region.f2 ? f + 1 : f;
        return (area_m2(i, next) - area_m2(i, prev)) / (times[next] - times[prev]);
    };

    double total = 0.0;
    for (std::size_t f = region.f1; f <= region.f2; ++f) {
        double wt = 0.0;
        if (f > region.f1) wt += 0.5 * (times[f] - times[f - 1]);
        if (f < region.f2) wt += 0.5 * (times[f + 1] - times[f]);
        double slab = 0.0;
        for (std::size_t i = region.i1; i <= region.i2; ++i) {
            double wx = (region.i1 == region.i2)
                            ? 0.0
                            : ((i == region.i1 || i == region.i2) ? 0.5 : 1.0);
            slab += wx * pressure_pa(i, f) * dadt(i, f);
        }
        double spacing = region.i2 > region.i1
                             ? (region.x2 - region.x1) / static_cast<double>(region.i2 - region.i1)
                             : 0.0;
        total += wt * slab * spacing;
    }
    return total;
}

double egjrow_closed_form(double theta_hat, const calibrate::TubeLawFit& fit,
                          const EgjRegion& region) {
    if (theta_hat <= 0.0) throw ValidationError("egjrow_closed_form: non-positive theta");
    double span = region.x2 - region.x1;
    double quad = fit.k_over_ao * (region.a2 * region.a2 - region.a1 * region.a1) /
                  (2.0 * theta_hat);
    double lin = fit.po_minus_k * (region.a2 - region.a1);
    return span * (quad + lin);
}

void compute_egjrow(const Matrix& theta, const EgjRegion& region,
                    const calibrate::TubeLawFit& fit, WorkMetrics& out) {
    if (region.i2 >= theta.rows() || region.f2 >= theta.cols())
        throw ValidationError("compute_egjrow: region outside the theta grid");

    // spatial median across the junction cells at each frame, then the
    // temporal statistic over the opening interval
    std::vector<double> series;
    for (std::size_t f = region.f1; f <= region.f2; ++f) {
        std::vector<double> column;
        for (std::size_t i = region.i1; i <= region.i2; ++i) column.push_back(theta(i, f));
        series.push_back(median_of(column));
    }
    double at_t1 = series.front();
    double med = median_of(series);
    double low = *std::min_element(series.begin(), series.end());

    out.egjrow1 = egjrow_closed_form(at_t1, fit, region);
    out.egjrow2 = egjrow_closed_form(med, fit, region);
    out.egjrow3 = egjrow_closed_form(low, fit, region);
}

WorkMetrics compute_work_metrics(const ingest::AnalysisWindow& window,
                                 const inverse::MechanicsState& state, const EgjRegion& region) {
    WorkMetrics out;
    out.egjw = compute_egjw(state.pressure_pa(), state.area_node_m2(), region, window);
    compute_egjrow(state.theta, region, state.fit, out);
    return out;
}

PrimaryParams discrete_params(const ingest::AnalysisWindow& window,
                              const inverse::MechanicsState& state,
                              const calibrate::TubeLawFit& fit) {
    PrimaryParams params;
    params.k_over_ao = fit.k_over_ao;
    params.po_minus_k = fit.po_minus_k;
    params.p_max = *std::max_element(window.pd_series.begin(), window.pd_series.end());
    params.t_max = window.duration;
    params.volume = window.volume;
    params.theta_max = state.theta.max();
    return params;
}

std::string metrics_to_json(const WorkMetrics& work, const PrimaryParams& params) {
    nlohmann::json j;
    j["egjw_j"] = work.egjw;
    j["egjrow1_j"] = work.egjrow1;
    j["egjrow2_j"] = work.egjrow2;
    j["egjrow3_j"] = work.egjrow3;
    j["p_max_pa"] = params.p_max;
    j["t_max_s"] = params.t_max;
    j["theta_max"] = params.theta_max;
    j["volume_m3"] = params.volume;
    j["k_over_ao"] = params.k_over_ao;
    j["po_minus_k"] = params.po_minus_k;
    return j.dump(2);
}

}  // namespace vdl::metrics
