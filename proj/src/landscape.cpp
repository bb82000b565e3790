#include "vdl/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vdl/linalg.hpp"

namespace vdl::landscape {

using nlohmann::json;

std::vector<std::string> default_label_set() {
    return {"normal",          "achalasia-1", "achalasia-2", "achalasia-3",
            "egjoo",           "hypercontractile", "des",    "iem",
            "absent",          "eoe",         "gerd",        "scleroderma",
            "inconclusive"};
}

std::string stats_fingerprint(const neural::NormStats& stats) {
    std::ostringstream os;
    os.precision(17);
    for (double v : stats.lo) os << v << ',';
    os << '|';
    for (double v : stats.hi) os << v << ',';
    return hash_bytes_hex(os.str());
}

VdlVector assemble_vdl(const Vec& latent_mu, const metrics::PrimaryParams& params,
                       const neural::NormStats& param_stats) {
    if (latent_mu.size() != neural::kLatentDim)
        throw ValidationError("assemble_vdl: latent mean must have " +
                              std::to_string(neural::kLatentDim) + " entries");
    if (param_stats.lo.size() != 6)
        throw ValidationError("assemble_vdl: normalization stats for the 6 discrete "
                              "parameters are missing");
    VdlVector v;
    v.coords = latent_mu;
    Vec scaled = param_stats.normalize(params.as_vector());
    v.coords.insert(v.coords.end(), scaled.begin(), scaled.end());
    v.stats_id = stats_fingerprint(param_stats);
    return v;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s, const std::string& what) {
    try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ValidationError("could not parse " + what + " from '" + s + "'");
    }
}

double median_of(Vec values) {
    if (values.empty()) throw ValidationError("median of an empty set");
    std::sort(values.begin(), values.end());
    std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double norm2(const Vec& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

}  // namespace

void save_vdl_csv(const std::string& path, const std::vector<VdlVector>& points) {
    std::ostringstream os;
    os.precision(17);
    os << "subject_id,disease,peristalsis,augmented,timestamp,stats_id";
    for (std::size_t c = 0; c < kVdlDim; ++c)
        os << ",c" << (c < 10 ? "0" : "") << c;
    os << '\n';
    for (const VdlVector& p : points) {
        if (p.coords.size() != kVdlDim)
            throw ValidationError("landscape vector for '" + p.subject_id +
                                  "' does not have 30 coordinates");
        if (p.subject_id.find(',') != std::string::npos ||
            p.disease_label.find(',') != std::string::npos)
            throw ValidationError("identifiers must not contain commas");
        os << p.subject_id << ',' << p.disease_label << ',' << p.peristalsis << ','
           << (p.augmented ? 1 : 0) << ',' << p.timestamp << ',' << p.stats_id;
        for (double v : p.coords) os << ',' << v;
        os << '\n';
    }
    write_text_file(path, os.str());
}

std::vector<VdlVector> load_vdl_csv(const std::string& path) {
    std::istringstream is(read_text_file(path));
    std::string line;
    if (!std::getline(is, line))
        throw ValidationError("empty landscape dataset: " + path);
    std::vector<VdlVector> points;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != 6 + kVdlDim)
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": expected " + std::to_string(6 + kVdlDim) +
                                  " fields, got " + std::to_string(fields.size()));
        VdlVector p;
        p.subject_id = fields[0];
        p.disease_label = fields[1];
        p.peristalsis = static_cast<int>(parse_double(fields[2], "peristalsis flag"));
        p.augmented = parse_double(fields[3], "augmented flag") != 0.0;
        p.timestamp = parse_double(fields[4], "timestamp");
        p.stats_id = fields[5];
        p.coords.resize(kVdlDim);
        for (std::size_t c = 0; c < kVdlDim; ++c)
            p.coords[c] = parse_double(fields[6 + c], "coordinate");
        points.push_back(std::move(p));
    }
    return points;
}

Matrix coords_matrix(const std::vector<VdlVector>& points) {
    Matrix rows(points.size(), kVdlDim);
    for (std::size_t r = 0; r < points.size(); ++r) {
        if (points[r].coords.size() != kVdlDim)
            throw ValidationError("landscape vector does not have 30 coordinates");
        for (std::size_t c = 0; c < kVdlDim; ++c) rows(r, c) = points[r].coords[c];
    }
    return rows;
}

ReducedSpace pca_reduce(const Matrix& rows, std::size_t components) {
    if (rows.rows() < 4)
        throw ValidationError("pca_reduce: need at least 4 samples");
    std::size_t n = rows.rows(), d = rows.cols();
    ReducedSpace space;
    space.method = "pca";
    space.mean.assign(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) space.mean[c] += rows(r, c);
    for (double& m : space.mean) m /= static_cast<double>(n);

    Matrix cov(d, d);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < d; ++i) {
            double xi = rows(r, i) - space.mean[i];
            for (std::size_t j = i; j < d; ++j)
                cov(i, j) += xi * (rows(r, j) - space.mean[j]);
        }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            cov(i, j) /= static_cast<double>(n - 1);
            cov(j, i) = cov(i, j);
        }

    SymmetricEigen eig = symmetric_eigen(cov);
    double total = 0.0;
    for (double v : eig.values) total += std::max(v, 0.0);
    std::size_t want = std::min(components, d);
    std::size_t rank = 0;
    for (std::size_t i = 0; i < want; ++i)
        if (eig.values[i] > 1e-12 * std::max(eig.values[0], 0.0) && eig.values[i] > 0.0)
            ++rank;
    std::size_t k = rank == 0 ? 0 : rank;
    space.reduced_rank = k < components;
    space.basis = Matrix(d, k);
    space.explained.assign(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t r = 0; r < d; ++r) space.basis(r, c) = eig.vectors(r, c);
        space.explained[c] = total > 0.0 ? std::max(eig.values[c], 0.0) / total : 0.0;
    }
    return space;
}

namespace {

struct ClassIndex {
    std::vector<std::string> names;                 // sorted unique
    std::vector<int> of_sample;                     // label index per row
    std::vector<std::vector<std::size_t>> members;  // rows per class
};

ClassIndex index_classes(const std::vector<std::string>& labels) {
    ClassIndex ci;
    std::set<std::string> uniq(labels.begin(), labels.end());
    ci.names.assign(uniq.begin(), uniq.end());
    ci.members.resize(ci.names.size());
    ci.of_sample.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto it = std::lower_bound(ci.names.begin(), ci.names.end(), labels[i]);
        int idx = static_cast<int>(it - ci.names.begin());
        ci.of_sample[i] = idx;
        ci.members[static_cast<std::size_t>(idx)].push_back(i);
    }
    return ci;
}

}  // namespace

ReducedSpace lda_reduce(const Matrix& rows, const std::vector<std::string>& labels,
                        std::size_t components) {
    if (rows.rows() != labels.size())
        throw ValidationError("lda_reduce: one label per sample is required");
    ClassIndex ci = index_classes(labels);
    std::size_t g = ci.names.size();
    if (g < 2) throw ValidationError("lda_reduce: at least two classes are required");
    std::size_t n = rows.rows(), d = rows.cols();

    Vec grand(d, 0.0);
    Matrix means(g, d);
    for (std::size_t c = 0; c < g; ++c) {
        for (std::size_t r : ci.members[c])
            for (std::size_t j = 0; j < d; ++j) means(c, j) += rows(r, j);
        for (std::size_t j = 0; j < d; ++j) {
            means(c, j) /= static_cast<double>(ci.members[c].size());
            grand[j] += means(c, j) * static_cast<double>(ci.members[c].size());
        }
    }
    for (double& v : grand) v /= static_cast<double>(n);

    Matrix sw(d, d), sb(d, d);
    for (std::size_t c = 0; c < g; ++c) {
        for (std::size_t r : ci.members[c])
            for (std::size_t i = 0; i < d; ++i) {
                double xi = rows(r, i) - means(c, i);
                for (std::size_t j = i; j < d; ++j)
                    sw(i, j) += xi * (rows(r, j) - means(c, j));
            }
        for (std::size_t i = 0; i < d; ++i) {
            double mi = means(c, i) - grand[i];
            for (std::size_t j = i; j < d; ++j)
                sb(i, j) += static_cast<double>(ci.members[c].size()) * mi *
                            (means(c, j) - grand[j]);
        }
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            sw(j, i) = sw(i, j);
            sb(j, i) = sb(i, j);
        }

    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i) trace += sw(i, i);
    double lambda = 1e-6 * trace / static_cast<double>(d);
    if (lambda <= 0.0) lambda = 1e-12;
    for (std::size_t i = 0; i < d; ++i) sw(i, i) += lambda;

    // whiten the within-class scatter and solve the symmetric problem
    Matrix chol = cholesky_lower(sw);
    Matrix half(d, d);  // L^-1 * Sb, built column by column
    for (std::size_t c = 0; c < d; ++c) {
        Vec col(d);
        for (std::size_t r = 0; r < d; ++r) col[r] = sb(r, c);
        Vec sol = forward_substitute(chol, col);
        for (std::size_t r = 0; r < d; ++r) half(r, c) = sol[r];
    }
    Matrix sym(d, d);  // L^-1 * Sb * L^-T, via a second solve on the transpose
    Matrix half_t = transpose(half);
    for (std::size_t c = 0; c < d; ++c) {
        Vec col(d);
        for (std::size_t r = 0; r < d; ++r) col[r] = half_t(r, c);
        Vec sol = forward_substitute(chol, col);
        for (std::size_t r = 0; r < d; ++r) sym(c, r) = sol[r];
    }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
            double avg = 0.5 * (sym(i, j) + sym(j, i));
            sym(i, j) = avg;
            sym(j, i) = avg;
        }

    SymmetricEigen eig = symmetric_eigen(sym);
    std::size_t k = std::min({components, g - 1, d});
    ReducedSpace space;
    space.method = "lda";
    space.mean = grand;
    space.lambda = lambda;
    space.reduced_rank = k < components;
    space.class_labels = ci.names;
    space.class_means = means;
    space.basis = Matrix(d, k);
    space.explained.assign(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        Vec y(d);
        for (std::size_t r = 0; r < d; ++r) y[r] = eig.vectors(r, c);
        Vec v = backward_substitute_transposed(chol, y);
        double len = norm2(v);
        if (len > 0.0)
            for (double& x : v) x /= len;
        for (std::size_t r = 0; r < d; ++r) space.basis(r, c) = v[r];
        space.explained[c] = std::max(eig.values[c], 0.0);
    }
    return space;
}

Matrix project(const ReducedSpace& space, const Matrix& rows) {
    if (rows.cols() != space.mean.size())
        throw ValidationError("project: dimension mismatch with the reduced space");
    std::size_t k = space.basis.cols();
    Matrix out(rows.rows(), k);
    for (std::size_t r = 0; r < rows.rows(); ++r)
        for (std::size_t c = 0; c < k; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < rows.cols(); ++j)
                acc += (rows(r, j) - space.mean[j]) * space.basis(j, c);
            out(r, c) = acc;
        }
    return out;
}

Vec project_point(const ReducedSpace& space, const Vec& x) {
    Matrix one(1, x.size());
    for (std::size_t j = 0; j < x.size(); ++j) one(0, j) = x[j];
    Matrix p = project(space, one);
    Vec out(p.cols());
    for (std::size_t j = 0; j < p.cols(); ++j) out[j] = p(0, j);
    return out;
}

double fisher_criterion(const Matrix& projected, const std::vector<std::string>& labels) {
    if (projected.rows() != labels.size())
        throw ValidationError("fisher_criterion: one label per sample is required");
    ClassIndex ci = index_classes(labels);
    std::size_t d = projected.cols();
    Vec grand(d, 0.0);
    for (std::size_t r = 0; r < projected.rows(); ++r)
        for (std::size_t c = 0; c < d; ++c) grand[c] += projected(r, c);
    for (double& v : grand) v /= static_cast<double>(projected.rows());

    double between = 0.0, within = 0.0;
    for (std::size_t g = 0; g < ci.names.size(); ++g) {
        Vec mean(d, 0.0);
        for (std::size_t r : ci.members[g])
            for (std::size_t c = 0; c < d; ++c) mean[c] += projected(r, c);
        for (double& v : mean) v /= static_cast<double>(ci.members[g].size());
        for (std::size_t c = 0; c < d; ++c) {
            double m = mean[c] - grand[c];
            between += static_cast<double>(ci.members[g].size()) * m * m;
        }
        for (std::size_t r : ci.members[g])
            for (std::size_t c = 0; c < d; ++c) {
                double m = projected(r, c) - mean[c];
                within += m * m;
            }
    }
    return between / std::max(within, 1e-30);
}

void save_reduced(const std::string& path, const ReducedSpace& space) {
    json basis = json::array();
    for (std::size_t r = 0; r < space.basis.rows(); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < space.basis.cols(); ++c) row.push_back(space.basis(r, c));
        basis.push_back(row);
    }
    json means = json::array();
    for (std::size_t r = 0; r < space.class_means.rows(); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < space.class_means.cols(); ++c)
            row.push_back(space.class_means(r, c));
        means.push_back(row);
    }
    json j{{"method", space.method}, {"mean", space.mean},
           {"basis", basis},         {"explained", space.explained},
           {"lambda", space.lambda}, {"reduced_rank", space.reduced_rank},
           {"class_labels", space.class_labels}, {"class_means", means}};
    write_text_file(path, j.dump(2) + "\n");
}

ReducedSpace load_reduced(const std::string& path) {
    json j = json::parse(read_text_file(path));
    ReducedSpace space;
    space.method = j.at("method").get<std::string>();
    space.mean = j.at("mean").get<Vec>();
    space.explained = j.at("explained").get<Vec>();
    space.lambda = j.at("lambda").get<double>();
    space.reduced_rank = j.at("reduced_rank").get<bool>();
    space.class_labels = j.at("class_labels").get<std::vector<std::string>>();
    const json& basis = j.at("basis");
    std::size_t d = basis.size();
    std::size_t k = d > 0 ? basis.at(0).size() : 0;
    space.basis = Matrix(d, k);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < k; ++c)
            space.basis(r, c) = basis.at(r).at(c).get<double>();
    const json& means = j.at("class_means");
    std::size_t g = means.size();
    std::size_t md = g > 0 ? means.at(0).size() : 0;
    space.class_means = Matrix(g, md);
    for (std::size_t r = 0; r < g; ++r)
        for (std::size_t c = 0; c < md; ++c)
            space.class_means(r, c) = means.at(r).at(c).get<double>();
    return space;
}

DistanceMatrix distance_matrix(const Matrix& points, const std::vector<std::string>& labels,
                               std::vector<std::string> group_order) {
    if (points.rows() != labels.size())
        throw ValidationError("distance_matrix: one label per point is required");
    if (points.rows() == 0) throw ValidationError("distance_matrix: empty dataset");
    if (group_order.empty()) {
        std::set<std::string> seen;
        for (const std::string& l : labels)
            if (seen.insert(l).second) group_order.push_back(l);
    }
    std::size_t g = group_order.size(), d = points.cols();
    std::vector<std::vector<std::size_t>> members(g);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto it = std::find(group_order.begin(), group_order.end(), labels[i]);
        if (it != group_order.end())
            members[static_cast<std::size_t>(it - group_order.begin())].push_back(i);
    }
    for (std::size_t c = 0; c < g; ++c)
        if (members[c].empty())
            throw ValidationError("distance_matrix: group '" + group_order[c] +
                                  "' has no points");

    Matrix centroids(g, d);
    for (std::size_t c = 0; c < g; ++c) {
        for (std::size_t r : members[c])
            for (std::size_t j = 0; j < d; ++j) centroids(c, j) += points(r, j);
        for (std::size_t j = 0; j < d; ++j)
            centroids(c, j) /= static_cast<double>(members[c].size());
    }

    DistanceMatrix dm;
    dm.groups = group_order;
    dm.values = Matrix(g, g);
    for (std::size_t i = 0; i < g; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < g; ++j) {
            Vec dists;
            dists.reserve(members[j].size());
            for (std::size_t r : members[j]) {
                double acc = 0.0;
                for (std::size_t c = 0; c < d; ++c) {
                    double diff = points(r, c) - centroids(i, c);
                    acc += diff * diff;
                }
                dists.push_back(std::sqrt(acc));
            }
            dm.values(i, j) = median_of(std::move(dists));
            row_sum += dm.values(i, j);
        }
        if (row_sum <= 0.0)
            throw ValidationError("distance_matrix: group '" + group_order[i] +
                                  "' has degenerate distances");
        for (std::size_t j = 0; j < g; ++j) dm.values(i, j) *= 100.0 / row_sum;
    }
    return dm;
}

void save_distance_csv(const std::string& path, const DistanceMatrix& dm) {
    std::ostringstream os;
    os.precision(17);
    os << "group";
    for (const std::string& gname : dm.groups) os << ',' << gname;
    os << '\n';
    for (std::size_t r = 0; r < dm.groups.size(); ++r) {
        os << dm.groups[r];
        for (std::size_t c = 0; c < dm.groups.size(); ++c) os << ',' << dm.values(r, c);
        os << '\n';
    }
    write_text_file(path, os.str());
}

DistanceMatrix load_distance_csv(const std::string& path) {
    std::istringstream is(read_text_file(path));
    std::string line;
    if (!std::getline(is, line)) throw ValidationError("empty distance matrix: " + path);
    auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "group")
        throw ValidationError("malformed distance-matrix header in " + path);
    DistanceMatrix dm;
    dm.groups.assign(header.begin() + 1, header.end());
    std::size_t g = dm.groups.size();
    dm.values = Matrix(g, g);
    for (std::size_t r = 0; r < g; ++r) {
        if (!std::getline(is, line))
            throw ValidationError("distance matrix in " + path + " is truncated");
        auto fields = split_csv_line(line);
        if (fields.size() != g + 1 || fields[0] != dm.groups[r])
            throw ValidationError("distance matrix row " + std::to_string(r) +
                                  " malformed in " + path);
        for (std::size_t c = 0; c < g; ++c)
            dm.values(r, c) = parse_double(fields[c + 1], "distance entry");
    }
    return dm;
}

namespace {

struct TreeBuilder {
    const Matrix& x;
    const std::vector<int>& y;
    std::size_t n_classes;
    std::size_t mtry;
    std::size_t min_leaf;
    Rng& rng;
    std::vector<TreeNode> nodes;

    int build(std::vector<std::size_t> idx) {
        int me = static_cast<int>(nodes.size());
        nodes.emplace_back();
        std::vector<double> hist(n_classes, 0.0);
        for (std::size_t i : idx) hist[static_cast<std::size_t>(y[i])] += 1.0;
        nodes[static_cast<std::size_t>(me)].histogram = hist;

        std::size_t present = 0;
        for (double h : hist)
            if (h > 0.0) ++present;
        if (present <= 1 || idx.size() < 2 * min_leaf) return me;

        // feature subsample without replacement
        std::vector<std::size_t> feats(x.cols());
        std::iota(feats.begin(), feats.end(), std::size_t{0});
        for (std::size_t i = 0; i < mtry; ++i)
            std::swap(feats[i], feats[i + rng.integer(feats.size() - i)]);
        feats.resize(mtry);

        double best_score = std::numeric_limits<double>::infinity();
        int best_feature = -1;
        double best_threshold = 0.0;
        std::vector<std::size_t> order(idx);
        for (std::size_t f : feats) {
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                double va = x(a, f), vb = x(b, f);
                if (va != vb) return va < vb;
                return a < b;
            });
            std::vector<double> left(n_classes, 0.0);
            double sl2 = 0.0;
            double sr2 = 0.0;
            for (double h : hist) sr2 += h * h;
            std::vector<double> right(hist);
            std::size_t n = order.size();
            for (std::size_t s = 1; s < n; ++s) {
                auto cls = static_cast<std::size_t>(y[order[s - 1]]);
                sl2 += 2.0 * left[cls] + 1.0;
                left[cls] += 1.0;
                sr2 -= 2.0 * right[cls] - 1.0;
                right[cls] -= 1.0;
                if (s < min_leaf || n - s < min_leaf) continue;
                double lo = x(order[s - 1], f), hi = x(order[s], f);
                if (lo == hi) continue;
                double nl = static_cast<double>(s), nr = static_cast<double>(n - s);
                double score = (nl - sl2 / nl) + (nr - sr2 / nr);  // weighted Gini
                if (score < best_score) {
                    best_score = score;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (lo + hi);
                }
            }
        }
        if (best_feature < 0) return me;

        std::vector<std::size_t> lhs, rhs;
        for (std::size_t i : idx) {
            if (x(i, static_cast<std::size_t>(best_feature)) <= best_threshold)
                lhs.push_back(i);
            else
                rhs.push_back(i);
        }
        idx.clear();
        idx.shrink_to_fit();
        int li = build(std::move(lhs));
        int ri = build(std::move(rhs));
        nodes[static_cast<std::size_t>(me)].feature = best_feature;
        nodes[static_cast<std::size_t>(me)].threshold = best_threshold;
        nodes[static_cast<std::size_t>(me)].left = li;
        nodes[static_cast<std::size_t>(me)].right = ri;
        return me;
    }
};

const TreeNode& leaf_for(const DecisionTree& tree, const Vec& x) {
    std::size_t at = 0;
    for (;;) {
        const TreeNode& node = tree.nodes[at];
        if (node.feature < 0) return node;
        double v = x[static_cast<std::size_t>(node.feature)];
        at = static_cast<std::size_t>(v <= node.threshold ? node.left : node.right);
    }
}

}  // namespace

ForestModel train_forest(const Matrix& rows, const std::vector<std::string>& labels,
                         const std::string& task, const ForestConfig& config) {
    if (task != "disease" && task != "peristalsis")
        throw ValidationError("train_forest: task must be 'disease' or 'peristalsis'");
    if (rows.rows() != labels.size())
        throw ValidationError("train_forest: one label per sample is required");
    if (rows.rows() == 0) throw ValidationError("train_forest: empty dataset");
    if (config.n_trees == 0) throw ValidationError("train_forest: need at least one tree");
    ClassIndex ci = index_classes(labels);
    if (task == "peristalsis") {
        for (const std::string& name : ci.names)
            if (name != "0" && name != "1")
                throw ValidationError("train_forest: peristalsis labels must be 0 or 1, "
                                      "got '" + name + "'");
        if (ci.names.size() < 2)
            throw ValidationError("train_forest: the peristalsis task degenerates on a "
                                  "single-class dataset");
    }

    ForestModel model;
    model.task = task;
    model.classes = ci.names;
    model.seed = config.seed;

    Rng root(config.seed);
    Rng split_rng = root.stream(0);
    std::vector<std::size_t> order(rows.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[split_rng.integer(i)]);
    auto held = static_cast<std::size_t>(config.holdout * static_cast<double>(order.size()));
    std::vector<std::size_t> holdout(order.end() - static_cast<long>(held), order.end());
    std::vector<std::size_t> train(order.begin(), order.end() - static_cast<long>(held));
    if (train.empty()) throw ValidationError("train_forest: empty training split");
    model.n_train = train.size();
    model.n_holdout = holdout.size();

    auto mtry = static_cast<std::size_t>(std::sqrt(static_cast<double>(rows.cols())));
    mtry = std::max<std::size_t>(1, std::min(mtry, rows.cols()));

    model.trees.resize(config.n_trees);
    for (std::size_t t = 0; t < config.n_trees; ++t) {
        Rng tree_rng = root.stream(t + 1);
        std::vector<std::size_t> bootstrap(train.size());
        for (std::size_t& b : bootstrap) b = train[tree_rng.integer(train.size())];
        TreeBuilder builder{rows, ci.of_sample, ci.names.size(), mtry,
                            std::max<std::size_t>(1, config.min_leaf), tree_rng, {}};
        builder.build(std::move(bootstrap));
        model.trees[t].nodes = std::move(builder.nodes);
    }

    const auto& eval = holdout.empty() ? train : holdout;
    std::vector<std::string> predicted, truth;
    predicted.reserve(eval.size());
    truth.reserve(eval.size());
    for (std::size_t r : eval) {
        Vec point(rows.cols());
        for (std::size_t c = 0; c < rows.cols(); ++c) point[c] = rows(r, c);
        predicted.push_back(forest_predict(model, point));
        truth.push_back(labels[r]);
    }
    model.holdout_score = task == "peristalsis" ? jaccard_score(predicted, truth)
                                                : subset_accuracy(predicted, truth);
    return model;
}

Vec forest_probabilities(const ForestModel& model, const Vec& x) {
    if (model.trees.empty()) throw ValidationError("forest model has no trees");
    Vec probs(model.classes.size(), 0.0);
    for (const DecisionTree& tree : model.trees) {
        const TreeNode& leaf = leaf_for(tree, x);
        double total = std::accumulate(leaf.histogram.begin(), leaf.histogram.end(), 0.0);
        for (std::size_t c = 0; c < probs.size(); ++c)
            probs[c] += leaf.histogram[c] / total;
    }
    for (double& p : probs) p /= static_cast<double>(model.trees.size());
    return probs;
}

std::string forest_predict(const ForestModel& model, const Vec& x) {
    Vec probs = forest_probabilities(model, x);
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.size(); ++c)
        if (probs[c] > probs[best]) best = c;
    return model.classes[best];
}

double subset_accuracy(const std::vector<std::string>& predicted,
                       const std::vector<std::string>& truth) {
    if (predicted.size() != truth.size() || predicted.empty())
        throw ValidationError("subset_accuracy: label lists must match and be non-empty");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (predicted[i] == truth[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double jaccard_score(const std::vector<std::string>& predicted,
                     const std::vector<std::string>& truth) {
    if (predicted.size() != truth.size() || predicted.empty())
        throw ValidationError("jaccard_score: label lists must match and be non-empty");
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        bool p = predicted[i] == "1";
        bool t = truth[i] == "1";
        if (p && t) ++tp;
        else if (p && !t) ++fp;
        else if (!p && t) ++fn;
    }
    double denom = tp + fp + fn;
    return denom > 0.0 ? tp / denom : 1.0;
}

void save_forest(const std::string& path, const ForestModel& model) {
    json trees = json::array();
    for (const DecisionTree& tree : model.trees) {
        json nodes = json::array();
        for (const TreeNode& node : tree.nodes)
            nodes.push_back(json::array(
                {node.feature, node.threshold, node.left, node.right, node.histogram}));
        trees.push_back(std::move(nodes));
    }
    json j{{"task", model.task},       {"classes", model.classes},
           {"seed", model.seed},       {"holdout_score", model.holdout_score},
           {"n_train", model.n_train}, {"n_holdout", model.n_holdout},
           {"trees", std::move(trees)}};
    write_text_file(path, j.dump() + "\n");
}

ForestModel load_forest(const std::string& path) {
    json j = json::parse(read_text_file(path));
    ForestModel model;
    model.task = j.at("task").get<std::string>();
    model.classes = j.at("classes").get<std::vector<std::string>>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.holdout_score = j.at("holdout_score").get<double>();
    model.n_train = j.at("n_train").get<std::size_t>();
    model.n_holdout = j.at("n_holdout").get<std::size_t>();
    for (const json& tree : j.at("trees")) {
        DecisionTree dt;
        for (const json& node : tree) {
            TreeNode tn;
            tn.feature = node.at(0).get<int>();
            tn.threshold = node.at(1).get<double>();
            tn.left = node.at(2).get<int>();
            tn.right = node.at(3).get<int>();
            tn.histogram = node.at(4).get<std::vector<double>>();
            dt.nodes.push_back(std::move(tn));
        }
        model.trees.push_back(std::move(dt));
    }
    if (model.trees.empty()) throw ValidationError("forest at " + path + " has no trees");
    return model;
}

std::vector<TraversalStep> traverse_latent(const Vec& from, const Vec& to, std::size_t steps,
                                           const neural::VaeModel<float>& vae,
                                           const neural::WorkNetArtifact& worknet) {
    if (steps < 2) throw ValidationError("traverse_latent: need at least 2 steps");
    if (from.size() != kVdlDim || to.size() != kVdlDim)
        throw ValidationError("traverse_latent: endpoints must be 30-dimensional");
    std::vector<TraversalStep> path;
    path.reserve(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        TraversalStep step;
        if (i == 0) {
            step.point = from;
        } else if (i == steps - 1) {
            step.point = to;
        } else {
            double t = static_cast<double>(i) / static_cast<double>(steps - 1);
            step.point.resize(kVdlDim);
            for (std::size_t c = 0; c < kVdlDim; ++c)
                step.point[c] = from[c] + t * (to[c] - from[c]);
        }
        Vec latent(step.point.begin(), step.point.begin() + neural::kLatentDim);
        step.decoded = neural::decode_latent(vae, latent);
        Vec normalized = worknet.in_stats.normalize(step.point);
        Vec predicted = neural::predict_work(worknet.net, normalized);
        step.work = worknet.out_stats.denormalize(predicted);
        path.push_back(std::move(step));
    }
    return path;
}

Extrapolation extrapolate_trajectory(const std::vector<VdlVector>& history, double at_time,
                                     const neural::VaeModel<float>& vae) {
    if (history.size() < 2)
        throw ValidationError("extrapolate_trajectory: need at least 2 time points");
    for (const VdlVector& p : history) {
        if (p.coords.size() != kVdlDim)
            throw ValidationError("extrapolate_trajectory: points must be 30-dimensional");
        if (p.subject_id != history.front().subject_id)
            throw ValidationError("extrapolate_trajectory: points belong to different "
                                  "subjects");
        if (p.stats_id != history.front().stats_id)
            throw ValidationError("extrapolate_trajectory: normalization regimes differ");
    }
    std::vector<const VdlVector*> sorted;
    for (const VdlVector& p : history) sorted.push_back(&p);
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const VdlVector* a, const VdlVector* b) {
                         return a->timestamp < b->timestamp;
                     });

    auto n = static_cast<double>(sorted.size());
    double t_mean = 0.0;
    for (const VdlVector* p : sorted) t_mean += p->timestamp;
    t_mean /= n;
    double sxx = 0.0;
    for (const VdlVector* p : sorted) {
        double dt = p->timestamp - t_mean;
        sxx += dt * dt;
    }

    Extrapolation out;
    out.predicted.coords.resize(kVdlDim);
    for (std::size_t c = 0; c < kVdlDim; ++c) {
        double mean = 0.0;
        for (const VdlVector* p : sorted) mean += p->coords[c];
        mean /= n;
        double slope = 0.0;
        if (sxx > 0.0) {
            double sxy = 0.0;
            for (const VdlVector* p : sorted)
                sxy += (p->timestamp - t_mean) * (p->coords[c] - mean);
            slope = sxy / sxx;
        }
        out.predicted.coords[c] = mean + slope * (at_time - t_mean);
    }
    out.predicted.subject_id = history.front().subject_id;
    out.predicted.stats_id = history.front().stats_id;
    out.predicted.timestamp = at_time;
    Vec latent(out.predicted.coords.begin(),
               out.predicted.coords.begin() + neural::kLatentDim);
    out.decoded = neural::decode_latent(vae, latent);
    out.extrapolated = true;
    return out;
}

TreatmentEffect treatment_vector(const VdlVector& pre, const VdlVector& post,
                                 const Matrix& reference_points,
                                 const ReducedSpace* space) {
    if (pre.coords.size() != kVdlDim || post.coords.size() != kVdlDim)
        throw ValidationError("treatment_vector: points must be 30-dimensional");
    if (pre.stats_id != post.stats_id)
        throw ValidationError("treatment_vector: normalization regimes differ");
    if (reference_points.rows() == 0 || reference_points.cols() != kVdlDim)
        throw ValidationError("treatment_vector: reference cluster must be non-empty "
                              "30-dimensional points");

    TreatmentEffect effect;
    effect.delta.resize(kVdlDim);
    for (std::size_t c = 0; c < kVdlDim; ++c)
        effect.delta[c] = post.coords[c] - pre.coords[c];
    effect.magnitude = norm2(effect.delta);
    effect.direction.assign(kVdlDim, 0.0);
    if (effect.magnitude > 0.0)
        for (std::size_t c = 0; c < kVdlDim; ++c)
            effect.direction[c] = effect.delta[c] / effect.magnitude;

    Vec centroid(kVdlDim, 0.0);
    for (std::size_t r = 0; r < reference_points.rows(); ++r)
        for (std::size_t c = 0; c < kVdlDim; ++c) centroid[c] += reference_points(r, c);
    for (double& v : centroid) v /= static_cast<double>(reference_points.rows());
    double before = 0.0, after = 0.0;
    for (std::size_t c = 0; c < kVdlDim; ++c) {
        double db = pre.coords[c] - centroid[c];
        double da = post.coords[c] - centroid[c];
        before += db * db;
        after += da * da;
    }
    effect.centroid_before = std::sqrt(before);
    effect.centroid_after = std::sqrt(after);

    if (space != nullptr) {
        Vec rp = project_point(*space, pre.coords);
        Vec rq = project_point(*space, post.coords);
        effect.reduced_delta.resize(rp.size());
        for (std::size_t c = 0; c < rp.size(); ++c)
            effect.reduced_delta[c] = rq[c] - rp[c];
        effect.reduced_magnitude = norm2(effect.reduced_delta);
    }
    return effect;
}

}  // namespace vdl::landscape
