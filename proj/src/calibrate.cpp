#include "vdl/calibrate.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace vdl::calibrate {

namespace {
constexpr double kMinPlateauSeconds = 1.0;  // shorter runs are fill/withdraw transients
constexpr double kPlateauRelTol = 0.01;
}  // namespace

std::vector<PressureMinimum> find_pressure_minima(const ingest::FlipRecording& rec_in) {
    ingest::FlipRecording rec = ingest::to_si(rec_in);
    std::size_t t = rec.samples();
    double length = rec.segment_length_m();

    struct Run {
        std::size_t begin, end;  // inclusive
        double mean;
    };
    std::vector<Run> runs;
    std::size_t k = 0;
    while (k < t) {
        std::size_t begin = k;
        double mean = rec.bag_volume[k];
        std::size_t n = 1;
        while (k + 1 < t) {
            double v = rec.bag_volume[k + 1];
            double next_mean = (mean * static_cast<double>(n) + v) / static_cast<double>(n + 1);
            if (std::abs(v - next_mean) > kPlateauRelTol * next_mean) break;
            mean = next_mean;
            ++n;
            ++k;
        }
        runs.push_back({begin, k, mean});
        ++k;
    }

    std::vector<PressureMinimum> minima;
    for (const Run& run : runs) {
        if (rec.time[run.end] - rec.time[run.begin] < kMinPlateauSeconds) continue;
        std::size_t arg = run.begin;
        for (std::size_t i = run.begin + 1; i <= run.end; ++i)
            if (rec.distal_pressure[i] < rec.distal_pressure[arg]) arg = i;
        PressureMinimum m;
        m.t = rec.time[arg];
        m.p_d = rec.distal_pressure[arg];
        m.volume = run.mean;
        m.a_r = ingest::reference_area(run.mean, length);
        minima.push_back(m);
    }

    if (minima.size() < 2)
        throw ValidationError("find_pressure_minima: need at least 2 bag-volume plateaus, found " +
                              std::to_string(minima.size()));
    return minima;
}

TubeLawFit fit_tube_law(const std::vector<std::pair<double, double>>& points,
                        const FitEnvironment& env) {
    if (points.size() < 2)
        throw ValidationError("fit_tube_law: need at least 2 support points");

    double n = static_cast<double>(points.size());
    double a_mean = 0.0, p_mean = 0.0;
    for (const auto& [a, p] : points) {
        a_mean += a;
        p_mean += p;
    }
    a_mean /= n;
    p_mean /= n;

    double sxx = 0.0, sxy = 0.0;
    for (const auto& [a, p] : points) {
        sxx += (a - a_mean) * (a - a_mean);
        sxy += (a - a_mean) * (p - p_mean);
    }
    if (sxx == 0.0)
        throw ValidationError("fit_tube_law: all reference areas identical, system rank-deficient");

    TubeLawFit fit;
    fit.k_over_ao = sxy / sxx;
    fit.po_minus_k = p_mean - fit.k_over_ao * a_mean;
    fit.support_points = points;
    fit.c = env.c;
    fit.rho = env.rho;
    fit.mu = env.mu;
    fit.length = env.length;
    fit.negative_slope = fit.k_over_ao <= 0.0;

    double ss_res = 0.0, ss_tot = 0.0;
    for (const auto& [a, p] : points) {
        double pred = fit.k_over_ao * a + fit.po_minus_k;
        ss_res += (p - pred) * (p - pred);
        ss_tot += (p - p_mean) * (p - p_mean);
    }
    fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res < 1e-24 ? 1.0 : 0.0);
    return fit;
}

std::string fit_to_json(const TubeLawFit& fit) {
    nlohmann::json j;
    j["k_over_ao_pa_per_m2"] = fit.k_over_ao;
    j["po_minus_k_pa"] = fit.po_minus_k;
    j["r2"] = fit.r_squared;
    j["c_m_per_s"] = fit.c;
    j["rho"] = fit.rho;
    j["mu"] = fit.mu;
    j["gamma"] = fit.gamma();
    j["length_m"] = fit.length;
    j["negative_slope"] = fit.negative_slope;
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& [a, p] : fit.support_points) pts.push_back({a, p});
    j["support_points"] = pts;
    return j.dump(2);
}

TubeLawFit fit_from_json(const std::string& json_text) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    TubeLawFit fit;
    fit.k_over_ao = j.at("k_over_ao_pa_per_m2").get<double>();
    fit.po_minus_k = j.at("po_minus_k_pa").get<double>();
    fit.r_squared = j.at("r2").get<double>();
    fit.c = j.at("c_m_per_s").get<double>();
    fit.rho = j.at("rho").get<double>();
    fit.mu = j.at("mu").get<double>();
    fit.length = j.at("length_m").get<double>();
    fit.negative_slope = j.value("negative_slope", false);
    if (j.contains("support_points"))
        for (const auto& pt : j["support_points"])
            fit.support_points.emplace_back(pt[0].get<double>(), pt[1].get<double>());
    if (fit.k_over_ao == 0.0)
        throw ValidationError("fit_from_json: k_over_ao must be non-zero");
    return fit;
}

void save_fit(const std::string& path, const TubeLawFit& fit) {
    write_text_file(path, fit_to_json(fit));
}

TubeLawFit load_fit(const std::string& path) { return fit_from_json(read_text_file(path)); }

}  // namespace vdl::calibrate
