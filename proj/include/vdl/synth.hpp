#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vdl/calibrate.hpp"
#include "vdl/core.hpp"
#include "vdl/ingest.hpp"
#include "vdl/metrics.hpp"

namespace vdl::synth {

/// First sensor of the scripted junction segment in synthetic phenotypes.
constexpr std::size_t kEgjSensorStart = 13;

/// Stylized motility pattern used to script activation fields.
struct Phenotype {
    std::string name;
    double contraction_amplitude = 0.0;  // theta depression in (0, 1]
    double wave_speed = 3.0;  // cm/s
    double egj_tone = 1.0;  // theta held at the distal cells
    double relaxation_peak = 1.0;  // theta the junction reaches when it opens
    int peristalsis_label = 0;  // 1 for a propagating contraction band
};

const std::vector<std::string>& phenotype_names();
Phenotype make_phenotype(const std::string& name);

/// Field transform probabilities and strengths for augmentation.
struct AugmentSpec {
    double scalar_sigma = 0.05;
    double normal_clip = 2.0;
    double p_grid_distort = 0.9;
    double p_elastic = 0.8;
    double p_temporal_blur = 0.7;
    double max_displacement = 0.20;  // fraction of cell size
    std::size_t replicas_per_sample = 31;
};

struct ForwardResult {
    ingest::AnalysisWindow window;
    Matrix theta;  // prescribed activation, interfaces x frames
    Matrix pressure_pa;  // tube-law pressure at the interfaces
    Matrix q;  // non-dimensional flow rate sampled at the frames
    double max_step_drift = 0.0;  // worst per-step relative mass error
};

/// Evolve the closed tube under a prescribed activation field and emit a
/// synthetic analysis window. theta_field is interfaces x frames.
ForwardResult forward_solve(const Matrix& theta_field, const calibrate::TubeLawFit& fit,
                            double volume, double duration);

/// Activation field for a phenotype on the 16 x 16 window grid.
Matrix phenotype_theta_field(const Phenotype& ph, double duration, double length);
Matrix phenotype_theta_field(const Phenotype& ph, double duration, double length,
                             std::size_t frames);

/// Multi-plateau recording for calibration: each bag volume is held for
/// quiet frames followed by phenotype activity, sampled at sample_hz.
ingest::FlipRecording synthesize_recording(const Phenotype& ph, const calibrate::TubeLawFit& fit,
                                           const std::vector<double>& volumes_m3,
                                           double seconds_per_fill, double sample_hz);

struct CohortSample {
    std::string id;
    std::string phenotype;
    int peristalsis = 0;
    ingest::AnalysisWindow window;
    Matrix theta_true;
    calibrate::TubeLawFit fit;  // generating fit for this subject
    metrics::PrimaryParams params;
    bool augmented = false;
    std::string parent_id;  // original sample id when augmented
};

/// Deterministic cohort: counts per phenotype, per-sample parameter jitter
/// drawn from (seed, sample-index) streams.
std::vector<CohortSample> generate_cohort(
    const std::vector<std::pair<std::string, std::size_t>>& spec, std::uint64_t seed);

/// Multiplies K/A_o, P_o-K, P_d series and T_max by independent factors
/// f = 1 + sigma * N with N resampled until |N| < clip.
metrics::PrimaryParams augment_scalars(const metrics::PrimaryParams& params,
                                       const AugmentSpec& spec, Rng& rng);

/// Box filter along the time axis with edge replication; width <= 1 is the
/// identity.
Matrix temporal_blur(const Matrix& grid, std::size_t width);

/// Grid distortion, elastic warp and temporal blur, each applied with its
/// stated probability. Output clamped strictly positive.
Matrix augment_field(const Matrix& grid, const AugmentSpec& spec, Rng& rng);

/// Augmented copies of a sample: jittered scalars plus a warped area field,
/// re-solved so the theta grid stays consistent with the tube law.
std::vector<CohortSample> augment_sample(const CohortSample& sample, const AugmentSpec& spec,
                                         std::uint64_t seed);

void save_cohort(const std::string& dir, const std::vector<CohortSample>& cohort);
std::vector<CohortSample> load_cohort(const std::string& dir);

}  // namespace vdl::synth
