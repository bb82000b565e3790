#include "vdl/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vdl/calibrate.hpp"
#include "vdl/ingest.hpp"
#include "vdl/inverse.hpp"
#include "vdl/metrics.hpp"
#include "vdl/synth.hpp"

namespace vdl::cli {

using nlohmann::json;

ProjectConfig::ProjectConfig() : label_set(landscape::default_label_set()) {
    worknet_training.epochs = 1000;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

json parse_json(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ValidationError(origin + ": " + e.what());
    }
}

double config_number(const std::string& value, const std::string& key,
                     const std::string& origin) {
    try {
        std::size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ValidationError(origin + ": key '" + key + "' expects a number, got '" +
                              value + "'");
    }
}

}  // namespace

ProjectConfig parse_config_text(const std::string& text, const std::string& origin) {
    ProjectConfig config;
    std::istringstream is(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        std::string where = origin + ":" + std::to_string(line_no);
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ValidationError(where + ": malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "paths" && section != "physics" && section != "training" &&
                section != "seeds" && section != "labels")
                throw ValidationError(where + ": unknown section [" + section + "]");
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError(where + ": expected 'key = value', got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (section.empty())
            throw ValidationError(where + ": key '" + key + "' appears before any section");

        if (section == "paths") {
            if (key == "data_dir") config.data_dir = value;
            else if (key == "artifacts_dir") config.artifacts_dir = value;
            else throw ValidationError(where + ": unknown key '" + key + "' in [paths]");
        } else if (section == "physics") {
            double v = config_number(value, key, where);
            if (key == "rho") config.rho = v;
            else if (key == "mu") config.mu = v;
            else if (key == "wave_speed") config.wave_speed = v;
            else if (key == "sensor_spacing_cm") config.sensor_spacing_cm = v;
            else throw ValidationError(where + ": unknown key '" + key + "' in [physics]");
        } else if (section == "training") {
            double v = config_number(value, key, where);
            if (key == "vae_epochs") config.vae_training.epochs = static_cast<std::size_t>(v);
            else if (key == "vae_batch") config.vae_training.batch = static_cast<std::size_t>(v);
            else if (key == "beta") config.vae_training.beta = v;
            else if (key == "worknet_epochs")
                config.worknet_training.epochs = static_cast<std::size_t>(v);
            else if (key == "worknet_batch")
                config.worknet_training.batch = static_cast<std::size_t>(v);
            else if (key == "rms_lr") config.worknet_training.rms_lr = v;
            else if (key == "val_fraction") config.worknet_training.val_fraction = v;
            else throw ValidationError(where + ": unknown key '" + key + "' in [training]");
        } else if (section == "seeds") {
            if (key == "master") {
                config.seed = static_cast<std::uint64_t>(config_number(value, key, where));
                config.has_seed = true;
            } else {
                throw ValidationError(where + ": unknown key '" + key + "' in [seeds]");
            }
        } else if (section == "labels") {
            if (key == "set") {
                config.label_set.clear();
                std::istringstream ls(value);
                std::string item;
                while (std::getline(ls, item, ',')) {
                    item = trim(item);
                    if (!item.empty()) config.label_set.push_back(item);
                }
                if (config.label_set.empty())
                    throw ValidationError(where + ": empty label set");
            } else {
                throw ValidationError(where + ": unknown key '" + key + "' in [labels]");
            }
        }
    }
    return config;
}

ProjectConfig load_config(const std::string& path) {
    return parse_config_text(read_text_file(path), path);
}

BoxSummary box_summary(Vec values) {
    if (values.empty()) throw ValidationError("box_summary: empty value set");
    std::sort(values.begin(), values.end());
    BoxSummary box;
    box.count = values.size();
    box.min = values.front();
    box.max = values.back();
    auto median_range = [&](std::size_t lo, std::size_t hi) {  // inclusive bounds
        std::size_t n = hi - lo + 1;
        if (n % 2 == 1) return values[lo + n / 2];
        return 0.5 * (values[lo + n / 2 - 1] + values[lo + n / 2]);
    };
    std::size_t n = values.size();
    box.median = median_range(0, n - 1);
    if (n == 1) {
        box.q1 = box.q3 = values[0];
    } else if (n % 2 == 1) {
        box.q1 = median_range(0, n / 2);        // lower half keeps the median
        box.q3 = median_range(n / 2, n - 1);
    } else {
        box.q1 = median_range(0, n / 2 - 1);
        box.q3 = median_range(n / 2, n - 1);
    }
    return box;
}

void write_box_csv(const std::string& path,
                   const std::map<std::string, std::map<std::string, Vec>>& values_by_group,
                   const std::vector<std::string>& group_order,
                   std::vector<std::string>& warnings) {
    std::ostringstream os;
    os.precision(17);
    os << "group,parameter,count,min,q1,median,q3,max\n";
    for (const std::string& group : group_order) {
        auto it = values_by_group.find(group);
        if (it == values_by_group.end() || it->second.empty()) {
            warnings.push_back("group '" + group + "' has no samples; row omitted");
            continue;
        }
        for (const auto& [param, values] : it->second) {
            BoxSummary box = box_summary(values);
            os << group << ',' << param << ',' << box.count << ',' << box.min << ','
               << box.q1 << ',' << box.median << ',' << box.q3 << ',' << box.max << '\n';
        }
    }
    write_text_file(path, os.str());
}

namespace {

struct GlobalOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed_flag;
    bool json = false;
};

ProjectConfig effective_config(const GlobalOpts& g) {
    ProjectConfig config;
    std::string path = g.config_path;
    if (path.empty()) {
        const char* env = std::getenv("VDL_CONFIG");
        if (env != nullptr && *env != '\0') path = env;
    }
    if (!path.empty()) config = load_config(path);
    const char* env_seed = std::getenv("VDL_SEED");
    if (env_seed != nullptr && *env_seed != '\0') {
        config.seed = static_cast<std::uint64_t>(
            config_number(env_seed, "VDL_SEED", "environment"));
        config.has_seed = true;
    }
    if (g.seed_flag.has_value()) {
        config.seed = *g.seed_flag;
        config.has_seed = true;
    }
    return config;
}

std::uint64_t require_seed(const ProjectConfig& config) {
    if (!config.has_seed)
        throw ValidationError("no seed provided; set [seeds] master in the config, "
                              "VDL_SEED, or --seed");
    return config.seed;
}

calibrate::FitEnvironment fit_environment(const ProjectConfig& config) {
    calibrate::FitEnvironment env;
    env.c = config.wave_speed;
    env.rho = config.rho;
    env.mu = config.mu;
    env.length = 15.0 * config.sensor_spacing_cm * units::m_per_cm;
    return env;
}

void report(const GlobalOpts& g, const json& payload, const std::string& human) {
    if (g.json)
        std::cout << payload.dump(2) << "\n";
    else
        std::cout << human;
}

json window_to_json(const ingest::AnalysisWindow& window) {
    return json{{"t_start", window.t_start},   {"t_end", window.t_end},
                {"volume_m3", window.volume},  {"duration_s", window.duration},
                {"pd_series_pa", window.pd_series}, {"warnings", window.warnings}};
}

ingest::AnalysisWindow window_from_json(const json& j, const Matrix& alpha_grid) {
    ingest::AnalysisWindow window;
    window.t_start = j.at("t_start").get<double>();
    window.t_end = j.at("t_end").get<double>();
    window.volume = j.at("volume_m3").get<double>();
    window.duration = j.at("duration_s").get<double>();
    window.pd_series = j.at("pd_series_pa").get<Vec>();
    window.warnings = j.at("warnings").get<std::vector<std::string>>();
    window.alpha_grid = alpha_grid;
    return window;
}

/// Work-metric targets for a cohort sample over the fixed distal junction
/// region; the automatic detector stays available through `vdl metrics`.
metrics::WorkMetrics sample_work_targets(const synth::CohortSample& sample) {
    inverse::MechanicsState state = inverse::solve_window(sample.window, sample.fit);
    std::size_t frames = sample.window.alpha_grid.cols();
    metrics::EgjRegion region = metrics::region_from_bounds(
        sample.window, sample.fit, synth::kEgjSensorStart, ingest::kSensorCount - 1, 0,
        frames - 1);
    return metrics::compute_work_metrics(sample.window, state, region);
}

const landscape::VdlVector& find_point(const std::vector<landscape::VdlVector>& points,
                                       const std::string& id) {
    const landscape::VdlVector* found = nullptr;
    for (const landscape::VdlVector& p : points) {
        if (p.subject_id == id) {
            if (found != nullptr)
                throw ValidationError("subject id '" + id + "' is not unique in the "
                                      "landscape dataset");
            found = &p;
        }
    }
    if (found == nullptr)
        throw ValidationError("subject id '" + id + "' not found in the landscape dataset");
    return *found;
}

std::vector<neural::ThetaImage> cohort_images(const std::vector<synth::CohortSample>& cohort) {
    std::vector<neural::ThetaImage> images;
    images.reserve(cohort.size());
    for (const synth::CohortSample& sample : cohort)
        images.push_back(neural::normalize_theta(sample.theta_true, sample.id));
    return images;
}

// ---------------------------------------------------------------- commands

struct IngestOpts {
    std::string in, out;
};

void run_ingest(const GlobalOpts& g, const IngestOpts& opt) {
    ingest::FlipRecording rec = ingest::parse_recording(opt.in);
    std::filesystem::create_directories(opt.out);
    std::string canonical = opt.out + "/recording.csv";
    ingest::write_recording(canonical, rec);
    json info{{"command", "ingest"},
              {"source", opt.in},
              {"source_hash", hash_file_hex(opt.in)},
              {"recording", canonical},
              {"recording_hash", hash_file_hex(canonical)},
              {"samples", rec.samples()},
              {"sensors", ingest::kSensorCount},
              {"duration_s", rec.time.empty() ? 0.0 : rec.time.back() - rec.time.front()}};
    write_text_file(opt.out + "/ingest.json", info.dump(2) + "\n");
    std::ostringstream human;
    human << "ingested " << rec.samples() << " samples -> " << canonical << "\n";
    report(g, info, human.str());
}

struct SynthOpts {
    std::string spec, out;
};

void run_synth(const GlobalOpts& g, const SynthOpts& opt) {
    ProjectConfig config = effective_config(g);
    std::uint64_t seed = require_seed(config);
    json spec = parse_json(read_text_file(opt.spec), opt.spec);
    std::vector<std::pair<std::string, std::size_t>> groups;
    for (const json& entry : spec.at("groups"))
        groups.emplace_back(entry.at("phenotype").get<std::string>(),
                            entry.at("count").get<std::size_t>());
    std::vector<synth::CohortSample> cohort = synth::generate_cohort(groups, seed);

    if (spec.contains("augment")) {
        const json& a = spec.at("augment");
        synth::AugmentSpec aug;
        if (a.contains("replicas")) aug.replicas_per_sample = a.at("replicas").get<std::size_t>();
        if (a.contains("scalar_sigma")) aug.scalar_sigma = a.at("scalar_sigma").get<double>();
        if (a.contains("max_displacement"))
            aug.max_displacement = a.at("max_displacement").get<double>();
        if (a.contains("p_grid_distort")) aug.p_grid_distort = a.at("p_grid_distort").get<double>();
        if (a.contains("p_elastic")) aug.p_elastic = a.at("p_elastic").get<double>();
        if (a.contains("p_temporal_blur"))
            aug.p_temporal_blur = a.at("p_temporal_blur").get<double>();
        std::size_t base_count = cohort.size();
        Rng aug_root(seed);
        for (std::size_t i = 0; i < base_count; ++i) {
            std::vector<synth::CohortSample> extra =
                synth::augment_sample(cohort[i], aug, aug_root.stream(i + 1).raw());
            for (synth::CohortSample& s : extra) cohort.push_back(std::move(s));
        }
    }
    synth::save_cohort(opt.out, cohort);
    json info{{"command", "synth"},
              {"cohort", opt.out},
              {"samples", cohort.size()},
              {"seed", seed},
              {"manifest_hash", hash_file_hex(opt.out + "/manifest.json")}};
    std::ostringstream human;
    human << "synthesized " << cohort.size() << " samples -> " << opt.out << "\n";
    report(g, info, human.str());
}

struct CalibrateOpts {
    std::string in, out;
};

void run_calibrate(const GlobalOpts& g, const CalibrateOpts& opt) {
    ProjectConfig config = effective_config(g);
    ingest::FlipRecording rec = ingest::parse_recording(opt.in);
    std::vector<calibrate::PressureMinimum> minima = calibrate::find_pressure_minima(rec);
    std::vector<std::pair<double, double>> points;
    for (const calibrate::PressureMinimum& m : minima) points.emplace_back(m.a_r, m.p_d);
    calibrate::TubeLawFit fit = calibrate::fit_tube_law(points, fit_environment(config));
    json j = json::parse(calibrate::fit_to_json(fit));
    j["source"] = opt.in;
    j["source_hash"] = hash_file_hex(opt.in);
    write_text_file(opt.out, j.dump(2) + "\n");
    json info{{"command", "calibrate"},
              {"fit", opt.out},
              {"k_over_ao_pa_per_m2", fit.k_over_ao},
              {"po_minus_k_pa", fit.po_minus_k},
              {"r2", fit.r_squared},
              {"support_points", points.size()},
              {"negative_slope", fit.negative_slope}};
    std::ostringstream human;
    human.precision(6);
    human << "fit: K/A_o = " << fit.k_over_ao << " Pa/m^2, P_o-K = " << fit.po_minus_k
          << " Pa, R^2 = " << fit.r_squared << " (" << points.size() << " plateaus)\n";
    report(g, info, human.str());
}

struct SolveOpts {
    std::string in, fit, out;
    double t0 = -1.0, t1 = -1.0;
    bool no_verify = false;
};

void run_solve(const GlobalOpts& g, const SolveOpts& opt) {
    json fit_json = parse_json(read_text_file(opt.fit), opt.fit);
    if (!opt.no_verify && fit_json.contains("source_hash") &&
        fit_json.at("source_hash").get<std::string>() != hash_file_hex(opt.in))
        throw ValidationError("fit at " + opt.fit + " was calibrated from a different "
                              "recording than " + opt.in +
                              " (content hash mismatch); pass --no-verify to override");
    calibrate::TubeLawFit fit = calibrate::fit_from_json(fit_json.dump());
    ingest::FlipRecording rec = ingest::parse_recording(opt.in);
    if (rec.samples() == 0) throw ValidationError("recording is empty: " + opt.in);
    double t0 = opt.t0 < 0.0 ? rec.time.front() : opt.t0;
    double t1 = opt.t1 < 0.0 ? rec.time.back() : opt.t1;
    ingest::AnalysisWindow window = ingest::select_window(rec, t0, t1, fit);
    inverse::MechanicsState state = inverse::solve_window(window, fit);
    inverse::save_state(opt.out, state);
    json wj = window_to_json(window);
    wj["source"] = opt.in;
    wj["source_hash"] = hash_file_hex(opt.in);
    wj["fit_hash"] = hash_file_hex(opt.fit);
    write_text_file(opt.out + "/window.json", wj.dump(2) + "\n");
    json info{{"command", "solve"},
              {"state", opt.out},
              {"clamp_fraction", state.clamp_fraction},
              {"unreliable", state.unreliable},
              {"mass_drift", state.mass_drift},
              {"warnings", window.warnings}};
    std::ostringstream human;
    human.precision(6);
    human << "state -> " << opt.out << " (mass drift " << state.mass_drift
          << ", clamped " << 100.0 * state.clamp_fraction << "%"
          << (state.unreliable ? ", UNRELIABLE" : "") << ")\n";
    for (const std::string& w : window.warnings) human << "warning: " << w << "\n";
    report(g, info, human.str());
}

struct MetricsOpts {
    std::string state, out;
    std::vector<std::size_t> egj;  // i1,i2,f1,f2 when given
};

void run_metrics(const GlobalOpts& g, const MetricsOpts& opt) {
    inverse::MechanicsState state = inverse::load_state(opt.state);
    json wj = parse_json(read_text_file(opt.state + "/window.json"),
                         opt.state + "/window.json");
    ingest::AnalysisWindow window = window_from_json(wj, state.alpha_node);

    metrics::EgjRegion region;
    if (!opt.egj.empty()) {
        if (opt.egj.size() != 4)
            throw ValidationError("--egj expects i1,i2,f1,f2 (four indices)");
        region = metrics::region_from_bounds(window, state.fit, opt.egj[0], opt.egj[1],
                                             opt.egj[2], opt.egj[3]);
    } else {
        region = metrics::locate_egj(window, state);
    }
    metrics::WorkMetrics work = metrics::compute_work_metrics(window, state, region);
    metrics::PrimaryParams params = metrics::discrete_params(window, state, state.fit);
    json j = json::parse(metrics::metrics_to_json(work, params));
    j["egj"] = json{{"i1", region.i1}, {"i2", region.i2}, {"f1", region.f1},
                    {"f2", region.f2}, {"manual", region.manual}};
    j["state"] = opt.state;
    j["state_hash"] = hash_file_hex(opt.state + "/manifest.json");
    write_text_file(opt.out, j.dump(2) + "\n");
    json info = j;
    info["command"] = "metrics";
    std::ostringstream human;
    human.precision(6);
    human << "EGJW = " << work.egjw << " J, EGJROW = {" << work.egjrow1 << ", "
          << work.egjrow2 << ", " << work.egjrow3 << "} J (sensors " << region.i1 << "-"
          << region.i2 << (region.manual ? ", manual" : ", detected") << ")\n";
    report(g, info, human.str());
}

struct TrainVaeOpts {
    std::string cohort, out;
    std::optional<std::size_t> epochs, batch;
};

void run_train_vae(const GlobalOpts& g, const TrainVaeOpts& opt) {
    ProjectConfig config = effective_config(g);
    neural::TrainConfig tc = config.vae_training;
    tc.seed = require_seed(config);
    if (opt.epochs) tc.epochs = *opt.epochs;
    if (opt.batch) tc.batch = *opt.batch;
    if (tc.epochs == 0) throw ValidationError("training needs at least one epoch");
    std::vector<synth::CohortSample> cohort = synth::load_cohort(opt.cohort);
    std::vector<neural::ThetaImage> images = cohort_images(cohort);
    std::vector<neural::EpochStats> curve;
    neural::VaeModel<float> model = neural::train_network1(images, tc, curve);
    neural::save_vae(opt.out, model, tc);
    neural::write_curve_csv(opt.out + ".curve.csv", curve);
    json prov{{"cohort", opt.cohort},
              {"cohort_manifest_hash", hash_file_hex(opt.cohort + "/manifest.json")},
              {"images", images.size()},
              {"curve", opt.out + ".curve.csv"}};
    write_text_file(opt.out + ".provenance.json", prov.dump(2) + "\n");
    json info{{"command", "train-vae"},
              {"checkpoint", opt.out},
              {"epochs", tc.epochs},
              {"final_recon_mse", curve.back().recon_mse},
              {"final_kld", curve.back().kld},
              {"final_total", curve.back().total}};
    std::ostringstream human;
    human.precision(6);
    human << "trained " << tc.epochs << " epochs on " << images.size()
          << " images; final recon MSE " << curve.back().recon_mse << ", KLD "
          << curve.back().kld << " -> " << opt.out << "\n";
    report(g, info, human.str());
}

struct EmbedOpts {
    std::string cohort, vae, out, stats, use_stats, boxes;
    double timestamp = 0.0;
};

void run_embed(const GlobalOpts& g, const EmbedOpts& opt) {
    ProjectConfig config = effective_config(g);
    std::vector<synth::CohortSample> cohort = synth::load_cohort(opt.cohort);
    neural::VaeModel<float> vae = neural::load_vae(opt.vae);

    neural::NormStats stats;
    if (!opt.use_stats.empty()) {
        json sj = parse_json(read_text_file(opt.use_stats), opt.use_stats);
        stats.lo = sj.at("lo").get<Vec>();
        stats.hi = sj.at("hi").get<Vec>();
    } else {
        Matrix raw(cohort.size(), 6);
        for (std::size_t r = 0; r < cohort.size(); ++r) {
            Vec v = cohort[r].params.as_vector();
            for (std::size_t c = 0; c < 6; ++c) raw(r, c) = v[c];
        }
        stats = neural::fit_stats(raw);
    }

    std::vector<landscape::VdlVector> points;
    points.reserve(cohort.size());
    for (const synth::CohortSample& sample : cohort) {
        neural::ThetaImage image = neural::normalize_theta(sample.theta_true, sample.id);
        Vec mu = neural::encode_mu(vae, image);
        landscape::VdlVector p = landscape::assemble_vdl(mu, sample.params, stats);
        p.subject_id = sample.id;
        p.disease_label = sample.phenotype;
        p.peristalsis = sample.peristalsis;
        p.augmented = sample.augmented;
        p.timestamp = opt.timestamp;
        points.push_back(std::move(p));
    }
    landscape::save_vdl_csv(opt.out, points);

    std::string stats_path = opt.stats.empty() ? opt.out + ".stats.json" : opt.stats;
    json sj{{"lo", stats.lo},
            {"hi", stats.hi},
            {"fingerprint", landscape::stats_fingerprint(stats)},
            {"cohort_manifest_hash", hash_file_hex(opt.cohort + "/manifest.json")},
            {"vae_checkpoint_hash", hash_file_hex(opt.vae)}};
    write_text_file(stats_path, sj.dump(2) + "\n");

    std::vector<std::string> warnings;
    if (!opt.boxes.empty()) {
        const char* param_names[6] = {"k_over_ao", "po_minus_k", "p_max",
                                      "t_max",     "volume",     "theta_max"};
        std::map<std::string, std::map<std::string, Vec>> by_group;
        std::set<std::string> present;
        for (const synth::CohortSample& sample : cohort) {
            Vec v = sample.params.as_vector();
            present.insert(sample.phenotype);
            for (std::size_t c = 0; c < 6; ++c)
                by_group[sample.phenotype][param_names[c]].push_back(v[c]);
        }
        bool configured = std::all_of(present.begin(), present.end(), [&](const auto& s) {
            return std::find(config.label_set.begin(), config.label_set.end(), s) !=
                   config.label_set.end();
        });
        std::vector<std::string> order =
            configured ? config.label_set
                       : std::vector<std::string>(present.begin(), present.end());
        write_box_csv(opt.boxes, by_group, order, warnings);
        for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
    }

    json info{{"command", "embed"},   {"vdl", opt.out},
              {"points", points.size()}, {"stats", stats_path},
              {"stats_fingerprint", landscape::stats_fingerprint(stats)},
              {"warnings", warnings}};
    std::ostringstream human;
    human << "embedded " << points.size() << " points -> " << opt.out << "\n";
    report(g, info, human.str());
}

struct TrainWorknetOpts {
    std::string cohort, vdl, stats, out;
    std::optional<std::size_t> epochs, batch;
};

void run_train_worknet(const GlobalOpts& g, const TrainWorknetOpts& opt) {
    ProjectConfig config = effective_config(g);
    neural::TrainConfig tc = config.worknet_training;
    tc.seed = require_seed(config);
    if (opt.epochs) tc.epochs = *opt.epochs;
    if (opt.batch) tc.batch = *opt.batch;
    if (tc.epochs == 0) throw ValidationError("training needs at least one epoch");

    std::vector<landscape::VdlVector> points = landscape::load_vdl_csv(opt.vdl);
    if (points.empty()) throw ValidationError("landscape dataset is empty: " + opt.vdl);
    json sj = parse_json(read_text_file(opt.stats), opt.stats);
    neural::NormStats param_stats;
    param_stats.lo = sj.at("lo").get<Vec>();
    param_stats.hi = sj.at("hi").get<Vec>();
    std::string fingerprint = landscape::stats_fingerprint(param_stats);
    for (const landscape::VdlVector& p : points)
        if (p.stats_id != fingerprint)
            throw ValidationError("point '" + p.subject_id + "' was assembled under a "
                                  "different normalization regime than " + opt.stats);

    std::vector<synth::CohortSample> cohort = synth::load_cohort(opt.cohort);
    std::map<std::string, const synth::CohortSample*> by_id;
    for (const synth::CohortSample& s : cohort) by_id[s.id] = &s;

    Matrix inputs(points.size(), landscape::kVdlDim);
    Matrix targets(points.size(), 4);
    for (std::size_t r = 0; r < points.size(); ++r) {
        for (std::size_t c = 0; c < landscape::kVdlDim; ++c)
            inputs(r, c) = points[r].coords[c];
        auto it = by_id.find(points[r].subject_id);
        if (it == by_id.end())
            throw ValidationError("point '" + points[r].subject_id +
                                  "' has no matching cohort sample in " + opt.cohort);
        metrics::WorkMetrics work = sample_work_targets(*it->second);
        targets(r, 0) = work.egjw;
        targets(r, 1) = work.egjrow1;
        targets(r, 2) = work.egjrow2;
        targets(r, 3) = work.egjrow3;
    }

    neural::NormStats in_stats = neural::fit_stats(inputs);
    neural::NormStats out_stats = neural::fit_stats(targets);
    Matrix x(inputs.rows(), inputs.cols()), y(targets.rows(), targets.cols());
    for (std::size_t r = 0; r < inputs.rows(); ++r) {
        Vec xr(inputs.cols()), yr(targets.cols());
        for (std::size_t c = 0; c < inputs.cols(); ++c) xr[c] = inputs(r, c);
        for (std::size_t c = 0; c < targets.cols(); ++c) yr[c] = targets(r, c);
        Vec xn = in_stats.normalize(xr), yn = out_stats.normalize(yr);
        for (std::size_t c = 0; c < inputs.cols(); ++c) x(r, c) = xn[c];
        for (std::size_t c = 0; c < targets.cols(); ++c) y(r, c) = yn[c];
    }

    std::vector<neural::EpochStats> curve;
    neural::WorkNet<float> net = neural::train_network2(x, y, tc, curve);
    neural::save_worknet(opt.out, net, in_stats, out_stats, tc);
    neural::write_curve_csv(opt.out + ".curve.csv", curve);
    json prov{{"cohort", opt.cohort},
              {"cohort_manifest_hash", hash_file_hex(opt.cohort + "/manifest.json")},
              {"vdl", opt.vdl},
              {"vdl_hash", hash_file_hex(opt.vdl)},
              {"curve", opt.out + ".curve.csv"}};
    write_text_file(opt.out + ".provenance.json", prov.dump(2) + "\n");
    json info{{"command", "train-worknet"},
              {"checkpoint", opt.out},
              {"epochs", tc.epochs},
              {"train_mse", curve.back().recon_mse},
              {"val_mse", curve.back().val_mse}};
    std::ostringstream human;
    human.precision(6);
    human << "trained " << tc.epochs << " epochs on " << points.size()
          << " points; train MSE " << curve.back().recon_mse << ", val MSE "
          << curve.back().val_mse << " -> " << opt.out << "\n";
    report(g, info, human.str());
}

struct ReduceOpts {
    std::string vdl, method, out, points_csv;
    bool original_only = false;
};

void run_reduce(const GlobalOpts& g, const ReduceOpts& opt) {
    std::vector<landscape::VdlVector> points = landscape::load_vdl_csv(opt.vdl);
    if (opt.original_only) {
        std::erase_if(points, [](const landscape::VdlVector& p) { return p.augmented; });
    }
    if (points.empty()) throw ValidationError("no points to reduce in " + opt.vdl);
    Matrix rows = landscape::coords_matrix(points);
    landscape::ReducedSpace space;
    if (opt.method == "pca") {
        space = landscape::pca_reduce(rows);
    } else {
        std::vector<std::string> labels;
        for (const landscape::VdlVector& p : points) {
            if (p.disease_label.empty())
                throw ValidationError("point '" + p.subject_id +
                                      "' lacks the disease label required for lda");
            labels.push_back(p.disease_label);
        }
        space = landscape::lda_reduce(rows, labels);
    }
    landscape::save_reduced(opt.out, space);
    if (!opt.points_csv.empty()) {
        Matrix projected = landscape::project(space, rows);
        std::ostringstream os;
        os.precision(17);
        os << "subject_id,disease,peristalsis,augmented";
        for (std::size_t c = 0; c < projected.cols(); ++c) os << ",p" << c + 1;
        os << '\n';
        for (std::size_t r = 0; r < points.size(); ++r) {
            os << points[r].subject_id << ',' << points[r].disease_label << ','
               << points[r].peristalsis << ',' << (points[r].augmented ? 1 : 0);
            for (std::size_t c = 0; c < projected.cols(); ++c) os << ',' << projected(r, c);
            os << '\n';
        }
        write_text_file(opt.points_csv, os.str());
    }
    json info{{"command", "reduce"},
              {"method", opt.method},
              {"reduced", opt.out},
              {"explained", space.explained},
              {"reduced_rank", space.reduced_rank},
              {"points", points.size()}};
    std::ostringstream human;
    human.precision(6);
    human << opt.method << " on " << points.size() << " points -> " << opt.out;
    if (space.reduced_rank) human << " (reduced rank)";
    human << "\n";
    report(g, info, human.str());
}

struct DistmatOpts {
    std::string vdl, reduced, out;
    bool full_space = false, original_only = false;
};

void run_distmat(const GlobalOpts& g, const DistmatOpts& opt) {
    std::vector<landscape::VdlVector> points = landscape::load_vdl_csv(opt.vdl);
    if (opt.original_only)
        std::erase_if(points, [](const landscape::VdlVector& p) { return p.augmented; });
    if (points.empty()) throw ValidationError("no points in " + opt.vdl);
    std::vector<std::string> labels;
    for (const landscape::VdlVector& p : points) {
        if (p.disease_label.empty())
            throw ValidationError("point '" + p.subject_id + "' lacks a disease label");
        labels.push_back(p.disease_label);
    }
    Matrix rows = landscape::coords_matrix(points);
    Matrix space_rows;
    if (opt.full_space) {
        space_rows = rows;
    } else {
        if (opt.reduced.empty())
            throw ValidationError("distmat needs --reduced (or --full-space)");
        landscape::ReducedSpace space = landscape::load_reduced(opt.reduced);
        space_rows = landscape::project(space, rows);
    }
    landscape::DistanceMatrix dm = landscape::distance_matrix(space_rows, labels);
    landscape::save_distance_csv(opt.out, dm);
    json values = json::array();
    for (std::size_t r = 0; r < dm.groups.size(); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < dm.groups.size(); ++c) row.push_back(dm.values(r, c));
        values.push_back(row);
    }
    json info{{"command", "distmat"}, {"matrix", opt.out},
              {"groups", dm.groups},  {"values", values},
              {"space", opt.full_space ? "full" : "reduced"}};
    std::ostringstream human;
    human << "distance matrix over " << dm.groups.size() << " groups -> " << opt.out << "\n";
    report(g, info, human.str());
}

struct TrainForestOpts {
    std::string vdl, task, out;
    std::optional<std::size_t> trees;
};

void run_train_forest(const GlobalOpts& g, const TrainForestOpts& opt) {
    ProjectConfig config = effective_config(g);
    landscape::ForestConfig fc;
    fc.seed = require_seed(config);
    if (opt.trees) fc.n_trees = *opt.trees;

    std::vector<landscape::VdlVector> points = landscape::load_vdl_csv(opt.vdl);
    std::erase_if(points, [](const landscape::VdlVector& p) { return p.augmented; });
    if (points.empty())
        throw ValidationError("no original (non-augmented) points in " + opt.vdl);
    std::vector<std::string> labels;
    for (const landscape::VdlVector& p : points) {
        if (opt.task == "disease") {
            if (p.disease_label.empty())
                throw ValidationError("point '" + p.subject_id + "' lacks a disease label");
            labels.push_back(p.disease_label);
        } else {
            if (p.peristalsis != 0 && p.peristalsis != 1)
                throw ValidationError("point '" + p.subject_id +
                                      "' lacks a peristalsis label");
            labels.push_back(std::to_string(p.peristalsis));
        }
    }
    Matrix rows = landscape::coords_matrix(points);
    landscape::ForestModel model = landscape::train_forest(rows, labels, opt.task, fc);
    landscape::save_forest(opt.out, model);
    json info{{"command", "train-forest"},
              {"forest", opt.out},
              {"task", opt.task},
              {"score", model.holdout_score},
              {"metric", opt.task == "peristalsis" ? "jaccard" : "subset_accuracy"},
              {"n_train", model.n_train},
              {"n_holdout", model.n_holdout},
              {"trees", model.trees.size()}};
    std::ostringstream human;
    human.precision(4);
    human << opt.task << " forest (" << model.trees.size() << " trees): held-out "
          << (opt.task == "peristalsis" ? "Jaccard " : "subset accuracy ")
          << model.holdout_score << " -> " << opt.out << "\n";
    report(g, info, human.str());
}

struct ClassifyOpts {
    std::string forest, vdl, out, id;
};

void run_classify(const GlobalOpts& g, const ClassifyOpts& opt) {
    landscape::ForestModel model = landscape::load_forest(opt.forest);
    std::vector<landscape::VdlVector> points = landscape::load_vdl_csv(opt.vdl);
    if (!opt.id.empty()) {
        landscape::VdlVector chosen = find_point(points, opt.id);
        points.clear();
        points.push_back(std::move(chosen));
    }
    if (points.empty()) throw ValidationError("no points to classify in " + opt.vdl);
    std::ostringstream os;
    os.precision(17);
    os << "subject_id,truth,predicted";
    for (const std::string& cls : model.classes) os << ",p_" << cls;
    os << '\n';
    json rows = json::array();
    for (const landscape::VdlVector& p : points) {
        Vec probs = landscape::forest_probabilities(model, p.coords);
        std::string predicted = landscape::forest_predict(model, p.coords);
        std::string truth = model.task == "peristalsis"
                                ? (p.peristalsis < 0 ? "" : std::to_string(p.peristalsis))
                                : p.disease_label;
        os << p.subject_id << ',' << truth << ',' << predicted;
        for (double v : probs) os << ',' << v;
        os << '\n';
        rows.push_back(json{{"subject_id", p.subject_id},
                            {"truth", truth},
                            {"predicted", predicted},
                            {"probabilities", probs}});
    }
    write_text_file(opt.out, os.str());
    json info{{"command", "classify"},
              {"probabilities", opt.out},
              {"task", model.task},
              {"points", points.size()},
              {"rows", opt.id.empty() ? json(points.size()) : json(rows)}};
    std::ostringstream human;
    human << "classified " << points.size() << " points -> " << opt.out << "\n";
    report(g, info, human.str());
}

struct TraverseOpts {
    std::string vdl, from, to, vae, worknet, out;
    std::size_t steps = 5;
};

void run_traverse(const GlobalOpts& g, const TraverseOpts& opt) {
    std::vector<landscape::VdlVector> points = landscape::load_vdl_csv(opt.vdl);
    const landscape::VdlVector& a = find_point(points, opt.from);
    const landscape::VdlVector& b = find_point(points, opt.to);
    if (a.stats_id != b.stats_id)
        throw ValidationError("endpoints were assembled under different normalization "
                              "regimes");
    neural::VaeModel<float> vae = neural::load_vae(opt.vae);
    neural::WorkNetArtifact worknet = neural::load_worknet(opt.worknet);
    std::vector<landscape::TraversalStep> path =
        landscape::traverse_latent(a.coords, b.coords, opt.steps, vae, worknet);

    std::filesystem::create_directories(opt.out);
    std::ostringstream work;
    work.precision(17);
    work << "step,egjw_j,egjrow1_j,egjrow2_j,egjrow3_j\n";
    json steps_json = json::array();
    for (std::size_t i = 0; i < path.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "step_%02zu_theta.csv", i);
        write_matrix_csv(opt.out + "/" + name, path[i].decoded);
        work << i;
        for (double v : path[i].work) work << ',' << v;
        work << '\n';
        steps_json.push_back(json{{"grid", name}, {"work", path[i].work},
                                  {"point", path[i].point}});
    }
    write_text_file(opt.out + "/work.csv", work.str());
    json manifest{{"command", "traverse"},
                  {"from", opt.from},
                  {"to", opt.to},
                  {"steps", opt.steps},
                  {"vdl_hash", hash_file_hex(opt.vdl)},
                  {"vae_checkpoint_hash", hash_file_hex(opt.vae)},
                  {"worknet_checkpoint_hash", hash_file_hex(opt.worknet)},
                  {"path", steps_json}};
    write_text_file(opt.out + "/path.json", manifest.dump(2) + "\n");
    json info{{"command", "traverse"}, {"out", opt.out}, {"steps", opt.steps}};
    std::ostringstream human;
    human << "traversed " << opt.from << " -> " << opt.to << " in " << opt.steps
          << " steps -> " << opt.out << "\n";
    report(g, info, human.str());
}

struct TrackOpts {
    std::string vdl, subject, vae, out;
    double at = 0.0;
};

void run_track(const GlobalOpts& g, const TrackOpts& opt) {
    std::vector<landscape::VdlVector> points = landscape::load_vdl_csv(opt.vdl);
    std::vector<landscape::VdlVector> history;
    for (const landscape::VdlVector& p : points)
        if (p.subject_id == opt.subject) history.push_back(p);
    if (history.size() < 2)
        throw ValidationError("subject '" + opt.subject + "' has " +
                              std::to_string(history.size()) +
                              " observations; tracking needs at least 2");
    neural::VaeModel<float> vae = neural::load_vae(opt.vae);
    landscape::Extrapolation ex = landscape::extrapolate_trajectory(history, opt.at, vae);
    std::filesystem::create_directories(opt.out);
    write_matrix_csv(opt.out + "/predicted_theta.csv", ex.decoded);
    json j{{"command", "track"},
           {"subject", opt.subject},
           {"at", opt.at},
           {"coords", ex.predicted.coords},
           {"extrapolated", ex.extrapolated},
           {"observations", history.size()},
           {"vdl_hash", hash_file_hex(opt.vdl)},
           {"vae_checkpoint_hash", hash_file_hex(opt.vae)}};
    write_text_file(opt.out + "/predicted.json", j.dump(2) + "\n");
    std::ostringstream human;
    human << "extrapolated " << opt.subject << " to t=" << opt.at << " from "
          << history.size() << " observations -> " << opt.out << "\n";
    report(g, j, human.str());
}

struct TreatmentOpts {
    std::string vdl, pre, post, reference = "normal", reduced, out;
};

void run_treatment(const GlobalOpts& g, const TreatmentOpts& opt) {
    std::vector<landscape::VdlVector> points = landscape::load_vdl_csv(opt.vdl);
    const landscape::VdlVector& pre = find_point(points, opt.pre);
    const landscape::VdlVector& post = find_point(points, opt.post);
    std::vector<landscape::VdlVector> reference;
    for (const landscape::VdlVector& p : points)
        if (p.disease_label == opt.reference) reference.push_back(p);
    if (reference.empty())
        throw ValidationError("reference group '" + opt.reference + "' has no points");
    Matrix ref_rows = landscape::coords_matrix(reference);

    landscape::ReducedSpace space;
    bool have_space = !opt.reduced.empty();
    if (have_space) space = landscape::load_reduced(opt.reduced);
    landscape::TreatmentEffect effect = landscape::treatment_vector(
        pre, post, ref_rows, have_space ? &space : nullptr);

    json j{{"command", "treatment"},
           {"pre", opt.pre},
           {"post", opt.post},
           {"reference", opt.reference},
           {"magnitude", effect.magnitude},
           {"direction", effect.direction},
           {"delta", effect.delta},
           {"centroid_distance_before", effect.centroid_before},
           {"centroid_distance_after", effect.centroid_after},
           {"vdl_hash", hash_file_hex(opt.vdl)}};
    if (have_space) {
        j["reduced_delta"] = effect.reduced_delta;
        j["reduced_magnitude"] = effect.reduced_magnitude;
    }
    write_text_file(opt.out, j.dump(2) + "\n");
    std::ostringstream human;
    human.precision(6);
    human << "treatment " << opt.pre << " -> " << opt.post << ": magnitude "
          << effect.magnitude << ", distance to '" << opt.reference << "' centroid "
          << effect.centroid_before << " -> " << effect.centroid_after << "\n";
    report(g, j, human.str());
}

void print_json_error(const std::string& type, const std::string& message) {
    json err{{"error", {{"type", type}, {"message", message}}}};
    std::cerr << err.dump() << "\n";
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"esophageal mechanics reconstruction and the virtual disease landscape",
                 "vdl"};
    app.require_subcommand(1);
    app.fallthrough(true);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "project config file (or VDL_CONFIG)");
    std::int64_t seed_raw = -1;
    app.add_option("--seed", seed_raw, "seed override (or VDL_SEED)");
    app.add_flag("--json", g.json, "machine-readable output");

    IngestOpts ingest_opt;
    auto* c_ingest = app.add_subcommand("ingest", "validate and canonicalize a recording");
    c_ingest->add_option("--in", ingest_opt.in, "recording CSV")->required();
    c_ingest->add_option("--out", ingest_opt.out, "output directory")->required();

    SynthOpts synth_opt;
    auto* c_synth = app.add_subcommand("synth", "generate a synthetic cohort");
    c_synth->add_option("--spec", synth_opt.spec, "cohort spec JSON")->required();
    c_synth->add_option("--out", synth_opt.out, "cohort directory")->required();

    CalibrateOpts cal_opt;
    auto* c_cal = app.add_subcommand("calibrate", "fit the tube law from fill plateaus");
    c_cal->add_option("--in", cal_opt.in, "recording CSV")->required();
    c_cal->add_option("--out", cal_opt.out, "fit JSON")->required();

    SolveOpts solve_opt;
    auto* c_solve = app.add_subcommand("solve", "reconstruct the mechanical state");
    c_solve->add_option("--in", solve_opt.in, "recording CSV")->required();
    c_solve->add_option("--fit", solve_opt.fit, "tube-law fit JSON")->required();
    c_solve->add_option("--out", solve_opt.out, "state directory")->required();
    c_solve->add_option("--t0", solve_opt.t0, "window start (s), default full range");
    c_solve->add_option("--t1", solve_opt.t1, "window end (s), default full range");
    c_solve->add_flag("--no-verify", solve_opt.no_verify, "skip upstream hash checks");

    MetricsOpts met_opt;
    auto* c_met = app.add_subcommand("metrics", "work metrics and discrete parameters");
    c_met->add_option("--state", met_opt.state, "state directory")->required();
    c_met->add_option("--out", met_opt.out, "metrics JSON")->required();
    c_met->add_option("--egj", met_opt.egj, "manual region i1,i2,f1,f2")->delimiter(',');

    TrainVaeOpts tv_opt;
    auto* c_tv = app.add_subcommand("train-vae", "train the activation-image autoencoder");
    c_tv->add_option("--cohort", tv_opt.cohort, "cohort directory")->required();
    c_tv->add_option("--out", tv_opt.out, "checkpoint path")->required();
    std::int64_t tv_epochs = -1, tv_batch = -1;
    c_tv->add_option("--epochs", tv_epochs, "override epoch count");
    c_tv->add_option("--batch", tv_batch, "override batch size");

    EmbedOpts em_opt;
    auto* c_em = app.add_subcommand("embed", "assemble landscape vectors");
    c_em->add_option("--cohort", em_opt.cohort, "cohort directory")->required();
    c_em->add_option("--vae", em_opt.vae, "autoencoder checkpoint")->required();
    c_em->add_option("--out", em_opt.out, "landscape CSV")->required();
    c_em->add_option("--stats", em_opt.stats, "where to write normalization stats");
    c_em->add_option("--use-stats", em_opt.use_stats, "reuse existing normalization stats");
    c_em->add_option("--timestamp", em_opt.timestamp, "timestamp column value");
    c_em->add_option("--boxes", em_opt.boxes, "emit per-group parameter box summaries");

    TrainWorknetOpts tw_opt;
    auto* c_tw = app.add_subcommand("train-worknet", "train the work-metric regressor");
    c_tw->add_option("--cohort", tw_opt.cohort, "cohort directory")->required();
    c_tw->add_option("--vdl", tw_opt.vdl, "landscape CSV")->required();
    c_tw->add_option("--stats", tw_opt.stats, "normalization stats JSON")->required();
    c_tw->add_option("--out", tw_opt.out, "checkpoint path")->required();
    std::int64_t tw_epochs = -1, tw_batch = -1;
    c_tw->add_option("--epochs", tw_epochs, "override epoch count");
    c_tw->add_option("--batch", tw_batch, "override batch size");

    ReduceOpts red_opt;
    auto* c_red = app.add_subcommand("reduce", "project the landscape to 3 dimensions");
    c_red->add_option("--vdl", red_opt.vdl, "landscape CSV")->required();
    c_red->add_option("--method", red_opt.method, "pca or lda")
        ->required()
        ->check(CLI::IsMember({"pca", "lda"}));
    c_red->add_option("--out", red_opt.out, "reduced-space JSON")->required();
    c_red->add_option("--points", red_opt.points_csv, "projected scatter CSV");
    c_red->add_flag("--original-only", red_opt.original_only, "drop augmented points");

    DistmatOpts dm_opt;
    auto* c_dm = app.add_subcommand("distmat", "group-to-centroid distance matrix");
    c_dm->add_option("--vdl", dm_opt.vdl, "landscape CSV")->required();
    c_dm->add_option("--reduced", dm_opt.reduced, "reduced-space JSON");
    c_dm->add_option("--out", dm_opt.out, "distance CSV")->required();
    c_dm->add_flag("--full-space", dm_opt.full_space, "compute in the 30-d space");
    c_dm->add_flag("--original-only", dm_opt.original_only, "drop augmented points");

    TrainForestOpts tf_opt;
    auto* c_tf = app.add_subcommand("train-forest", "train a random-forest classifier");
    c_tf->add_option("--vdl", tf_opt.vdl, "landscape CSV")->required();
    c_tf->add_option("--task", tf_opt.task, "disease or peristalsis")
        ->required()
        ->check(CLI::IsMember({"disease", "peristalsis"}));
    c_tf->add_option("--out", tf_opt.out, "forest JSON")->required();
    std::int64_t tf_trees = -1;
    c_tf->add_option("--trees", tf_trees, "override tree count");

    ClassifyOpts cl_opt;
    auto* c_cl = app.add_subcommand("classify", "evaluate a forest on landscape points");
    c_cl->add_option("--forest", cl_opt.forest, "forest JSON")->required();
    c_cl->add_option("--vdl", cl_opt.vdl, "landscape CSV")->required();
    c_cl->add_option("--out", cl_opt.out, "probability CSV")->required();
    c_cl->add_option("--id", cl_opt.id, "restrict to one subject");

    TraverseOpts tr_opt;
    auto* c_tr = app.add_subcommand("traverse", "interpolate between two landscape points");
    c_tr->add_option("--vdl", tr_opt.vdl, "landscape CSV")->required();
    c_tr->add_option("--from", tr_opt.from, "start subject id")->required();
    c_tr->add_option("--to", tr_opt.to, "end subject id")->required();
    c_tr->add_option("--steps", tr_opt.steps, "number of points on the path")
        ->check(CLI::Range(static_cast<std::size_t>(2), static_cast<std::size_t>(1000)));
    c_tr->add_option("--vae", tr_opt.vae, "autoencoder checkpoint")->required();
    c_tr->add_option("--worknet", tr_opt.worknet, "regressor checkpoint")->required();
    c_tr->add_option("--out", tr_opt.out, "output directory")->required();

    TrackOpts tk_opt;
    auto* c_tk = app.add_subcommand("track", "extrapolate a subject's trajectory");
    c_tk->add_option("--vdl", tk_opt.vdl, "landscape CSV")->required();
    c_tk->add_option("--subject", tk_opt.subject, "subject id")->required();
    c_tk->add_option("--at", tk_opt.at, "target time")->required();
    c_tk->add_option("--vae", tk_opt.vae, "autoencoder checkpoint")->required();
    c_tk->add_option("--out", tk_opt.out, "output directory")->required();

    TreatmentOpts tt_opt;
    auto* c_tt = app.add_subcommand("treatment", "pre/post treatment displacement");
    c_tt->add_option("--vdl", tt_opt.vdl, "landscape CSV")->required();
    c_tt->add_option("--pre", tt_opt.pre, "pre-treatment subject id")->required();
    c_tt->add_option("--post", tt_opt.post, "post-treatment subject id")->required();
    c_tt->add_option("--reference", tt_opt.reference, "reference group label");
    c_tt->add_option("--reduced", tt_opt.reduced, "reduced-space JSON for projection");
    c_tt->add_option("--out", tt_opt.out, "effect JSON")->required();

    std::vector<std::string> cli_args(args.rbegin(), args.rend());
    try {
        app.parse(cli_args);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        print_json_error("usage", e.what());
        return 2;
    }
    if (seed_raw >= 0) g.seed_flag = static_cast<std::uint64_t>(seed_raw);

    try {
        if (c_ingest->parsed()) run_ingest(g, ingest_opt);
        else if (c_synth->parsed()) run_synth(g, synth_opt);
        else if (c_cal->parsed()) run_calibrate(g, cal_opt);
        else if (c_solve->parsed()) run_solve(g, solve_opt);
        else if (c_met->parsed()) run_metrics(g, met_opt);
        else if (c_tv->parsed()) {
            if (tv_epochs >= 0) tv_opt.epochs = static_cast<std::size_t>(tv_epochs);
            if (tv_batch > 0) tv_opt.batch = static_cast<std::size_t>(tv_batch);
            run_train_vae(g, tv_opt);
        } else if (c_em->parsed()) run_embed(g, em_opt);
        else if (c_tw->parsed()) {
            if (tw_epochs >= 0) tw_opt.epochs = static_cast<std::size_t>(tw_epochs);
            if (tw_batch > 0) tw_opt.batch = static_cast<std::size_t>(tw_batch);
            run_train_worknet(g, tw_opt);
        } else if (c_red->parsed()) run_reduce(g, red_opt);
        else if (c_dm->parsed()) run_distmat(g, dm_opt);
        else if (c_tf->parsed()) {
            if (tf_trees > 0) tf_opt.trees = static_cast<std::size_t>(tf_trees);
            run_train_forest(g, tf_opt);
        } else if (c_cl->parsed()) run_classify(g, cl_opt);
        else if (c_tr->parsed()) run_traverse(g, tr_opt);
        else if (c_tk->parsed()) run_track(g, tk_opt);
        else if (c_tt->parsed()) run_treatment(g, tt_opt);
    } catch (const ValidationError& e) {
        print_json_error("validation", e.what());
        return 1;
    } catch (const std::exception& e) {
        print_json_error("internal", e.what());
        return 1;
    }
    return 0;
}

int dispatch(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return dispatch(args);
}

}  // namespace vdl::cli
