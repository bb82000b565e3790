#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vdl/core.hpp"
#include "vdl/metrics.hpp"
#include "vdl/neural.hpp"

namespace vdl::landscape {

constexpr std::size_t kVdlDim = 30;

/// One point of the virtual disease landscape: 24 latent means followed by
/// the 6 normalized discrete parameters.
struct VdlVector {
    Vec coords;
    std::string subject_id;
    std::string disease_label;   // empty when unlabeled
    int peristalsis = -1;        // 1 propagating band, 0 none, -1 unknown
    bool augmented = false;
    double timestamp = 0.0;
    std::string stats_id;        // fingerprint of the normalization stats
};

/// The thirteen cohort groups, configurable wherever a label set is accepted.
std::vector<std::string> default_label_set();

std::string stats_fingerprint(const neural::NormStats& stats);

VdlVector assemble_vdl(const Vec& latent_mu, const metrics::PrimaryParams& params,
                       const neural::NormStats& param_stats);

void save_vdl_csv(const std::string& path, const std::vector<VdlVector>& points);
std::vector<VdlVector> load_vdl_csv(const std::string& path);

Matrix coords_matrix(const std::vector<VdlVector>& points);

struct ReducedSpace {
    std::string method;          // "pca" or "lda"
    Matrix basis;                // d x k, orthonormal columns for pca
    Vec mean;                    // d
    Vec explained;               // variance ratios (pca) or Fisher values (lda)
    double lambda = 0.0;         // lda regularization actually applied
    bool reduced_rank = false;   // fewer than the requested components survived
    std::vector<std::string> class_labels;  // lda only
    Matrix class_means;                     // lda only, G x d
};

ReducedSpace pca_reduce(const Matrix& rows, std::size_t components = 3);
ReducedSpace lda_reduce(const Matrix& rows, const std::vector<std::string>& labels,
                        std::size_t components = 3);
Matrix project(const ReducedSpace& space, const Matrix& rows);
Vec project_point(const ReducedSpace& space, const Vec& x);
double fisher_criterion(const Matrix& projected, const std::vector<std::string>& labels);
void save_reduced(const std::string& path, const ReducedSpace& space);
ReducedSpace load_reduced(const std::string& path);

/// Row i: distances of every group's points to the centroid of group i,
/// summarized by the median and normalized so the row sums to 100.
struct DistanceMatrix {
    std::vector<std::string> groups;
    Matrix values;
};

DistanceMatrix distance_matrix(const Matrix& points, const std::vector<std::string>& labels,
                               std::vector<std::string> group_order = {});
void save_distance_csv(const std::string& path, const DistanceMatrix& dm);
DistanceMatrix load_distance_csv(const std::string& path);

struct ForestConfig {
    std::size_t n_trees = 1000;
    std::size_t min_leaf = 2;
    double holdout = 0.25;
    std::uint64_t seed = 0;
};

struct TreeNode {
    int feature = -1;            // -1 marks a leaf
    double threshold = 0.0;
    int left = -1, right = -1;
    std::vector<double> histogram;  // class counts at this node's samples
};

struct DecisionTree {
    std::vector<TreeNode> nodes;
};

struct ForestModel {
    std::string task;            // "disease" or "peristalsis"
    std::vector<std::string> classes;
    std::vector<DecisionTree> trees;
    std::uint64_t seed = 0;
    double holdout_score = 0.0;  // subset accuracy or Jaccard on the 25% split
    std::size_t n_train = 0, n_holdout = 0;
};

ForestModel train_forest(const Matrix& rows, const std::vector<std::string>& labels,
                         const std::string& task, const ForestConfig& config);
Vec forest_probabilities(const ForestModel& model, const Vec& x);
std::string forest_predict(const ForestModel& model, const Vec& x);
double subset_accuracy(const std::vector<std::string>& predicted,
                       const std::vector<std::string>& truth);
double jaccard_score(const std::vector<std::string>& predicted,
                     const std::vector<std::string>& truth);
void save_forest(const std::string& path, const ForestModel& model);
ForestModel load_forest(const std::string& path);

struct TraversalStep {
    Vec point;       // full 30-d location
    Matrix decoded;  // 16x16 activation image from the latent block
    Vec work;        // denormalized EGJW + three EGJROW predictions
};

std::vector<TraversalStep> traverse_latent(const Vec& from, const Vec& to, std::size_t steps,
                                           const neural::VaeModel<float>& vae,
                                           const neural::WorkNetArtifact& worknet);

struct Extrapolation {
    VdlVector predicted;
    Matrix decoded;
    bool extrapolated = true;
};

Extrapolation extrapolate_trajectory(const std::vector<VdlVector>& history, double at_time,
                                     const neural::VaeModel<float>& vae);

struct TreatmentEffect {
    Vec delta;            // post minus pre in the 30-d space
    double magnitude = 0.0;
    Vec direction;        // unit vector, zeros when magnitude is 0
    double centroid_before = 0.0, centroid_after = 0.0;  // distance to reference centroid
    Vec reduced_delta;    // present when a reduced space is supplied
    double reduced_magnitude = 0.0;
};

TreatmentEffect treatment_vector(const VdlVector& pre, const VdlVector& post,
                                 const Matrix& reference_points,
                                 const ReducedSpace* space = nullptr);

}  // namespace vdl::landscape
