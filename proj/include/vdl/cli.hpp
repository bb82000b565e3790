#pragma once

#include <map>
#include <string>
#include <vector>

#include "vdl/core.hpp"
#include "vdl/landscape.hpp"
#include "vdl/neural.hpp"

namespace vdl::cli {

/// Project-wide settings loaded from the TOML-like config file; every field
/// has a documented default except the seed, which must be supplied
/// explicitly (config, VDL_SEED, or --seed) before a stochastic command runs.
struct ProjectConfig {
    std::string data_dir = ".";
    std::string artifacts_dir = ".";
    double rho = 1000.0;             // kg/m^3
    double mu = 1.0e-3;              // Pa s
    double wave_speed = kContractionSpeed;  // m/s
    double sensor_spacing_cm = 1.0;
    neural::TrainConfig vae_training;
    neural::TrainConfig worknet_training;
    std::uint64_t seed = 0;
    bool has_seed = false;
    std::vector<std::string> label_set;

    ProjectConfig();
};

ProjectConfig parse_config_text(const std::string& text, const std::string& origin);
ProjectConfig load_config(const std::string& path);

/// Five-number summary using the inclusive-quartile convention (each half
/// keeps the median when the count is odd).
struct BoxSummary {
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
    std::size_t count = 0;
};
BoxSummary box_summary(Vec values);

/// Box-plot CSV: one row per (group, parameter). Groups listed in
/// group_order but absent from the data are skipped and reported in
/// warnings.
void write_box_csv(const std::string& path,
                   const std::map<std::string, std::map<std::string, Vec>>& values_by_group,
                   const std::vector<std::string>& group_order,
                   std::vector<std::string>& warnings);

int dispatch(const std::vector<std::string>& args);
int dispatch(int argc, char** argv);

}  // namespace vdl::cli
