#include "vdl/neural.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace vdl::neural {

using nlohmann::json;

ThetaImage normalize_theta(const Matrix& theta, const std::string& provenance) {
    ThetaImage image;
    image.provenance = provenance;
    image.grid = Matrix(theta.rows(), theta.cols());
    double lo = theta.min();
    double hi = theta.max();
    double range = hi - lo;
    if (range <= 0.0) return image;  // constant field maps to all zeros
    for (std::size_t i = 0; i < theta.size(); ++i)
        image.grid[i] = 1.0 - (theta[i] - lo) / range;
    return image;
}

double kld_closed_form(const Vec& mu, const Vec& log_var) {
    if (mu.size() != log_var.size())
        throw ValidationError("kld_closed_form: mu and log_var sizes differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i)
        acc += mu[i] * mu[i] + std::exp(log_var[i]) - 1.0 - log_var[i];
    return 0.5 * acc;
}

Vec reparameterize(const Vec& mu, const Vec& log_var, const Vec& eps) {
    if (mu.size() != log_var.size() || mu.size() != eps.size())
        throw ValidationError("reparameterize: size mismatch");
    Vec z(mu.size());
    for (std::size_t i = 0; i < mu.size(); ++i)
        z[i] = mu[i] + eps[i] * std::exp(0.5 * log_var[i]);
    return z;
}

double loss_n1(const Matrix& recon, const Matrix& input, const Vec& mu, const Vec& log_var,
               double beta) {
    if (!recon.same_shape(input)) throw ValidationError("loss_n1: shape mismatch");
    double se = 0.0;
    for (std::size_t i = 0; i < input.size(); ++i) {
        double d = input[i] - recon[i];
        se += d * d;
    }
    return kld_closed_form(mu, log_var) / static_cast<double>(mu.size()) +
           beta * se / static_cast<double>(input.size());
}

namespace {

template <typename T>
void adam_step(ParamBlock<T>& blk, double lr, std::size_t step) {
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
    double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
    for (std::size_t i = 0; i < blk.size(); ++i) {
        double g = blk.grad[i];
        blk.m1[i] = static_cast<T>(b1 * blk.m1[i] + (1.0 - b1) * g);
        blk.m2[i] = static_cast<T>(b2 * blk.m2[i] + (1.0 - b2) * g * g);
        double mhat = blk.m1[i] / c1;
        double vhat = blk.m2[i] / c2;
        blk.value[i] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps));
    }
}

template <typename T>
void rmsprop_step(ParamBlock<T>& blk, double lr) {
    const double decay = 0.9, eps = 1e-8;
    for (std::size_t i = 0; i < blk.size(); ++i) {
        double g = blk.grad[i];
        blk.m2[i] = static_cast<T>(decay * blk.m2[i] + (1.0 - decay) * g * g);
        blk.value[i] -= static_cast<T>(lr * g / (std::sqrt(static_cast<double>(blk.m2[i])) + eps));
    }
}

std::vector<float> flatten_image(const Matrix& grid) {
    if (grid.rows() != kImageSide || grid.cols() != kImageSide)
        throw ValidationError("expected a 16x16 activation image, got " +
                              std::to_string(grid.rows()) + "x" + std::to_string(grid.cols()));
    std::vector<float> x(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid[i] < -1e-9 || grid[i] > 1.0 + 1e-9)
            throw ValidationError("activation image values must lie in [0,1]");
        x[i] = static_cast<float>(grid[i]);
    }
    return x;
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.integer(i)]);
}

double schedule_lr(const TrainConfig& cfg, std::size_t epoch) {
    auto s1 = static_cast<std::size_t>(cfg.stage1_frac * static_cast<double>(cfg.epochs));
    auto s2 = static_cast<std::size_t>((cfg.stage1_frac + cfg.stage2_frac) *
                                       static_cast<double>(cfg.epochs));
    if (epoch < s1) return cfg.lr_stage1;
    if (epoch < s2) return cfg.lr_stage2;
    return cfg.lr_stage3;
}

}  // namespace

VaeModel<float> train_network1(const std::vector<ThetaImage>& dataset,
                               const TrainConfig& config, std::vector<EpochStats>& curve) {
    if (dataset.empty()) throw ValidationError("train_network1: empty dataset");
    std::vector<std::vector<float>> images;
    images.reserve(dataset.size());
    for (const ThetaImage& im : dataset) images.push_back(flatten_image(im.grid));

    Rng root(config.seed);
    auto model = VaeModel<float>::random(root.raw());
    Rng shuffle_rng = root.stream(1);
    Rng eps_rng = root.stream(2);

    std::vector<std::size_t> order(images.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    auto blocks = model.blocks();
    VaeTrace<float> trace;
    std::vector<float> eps(kLatentDim);
    std::size_t adam_t = 0;
    curve.clear();
    curve.reserve(config.epochs);

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_indices(order, shuffle_rng);
        double lr = schedule_lr(config, epoch);
        EpochStats stats;
        for (std::size_t start = 0; start < order.size(); start += config.batch) {
            std::size_t stop = std::min(order.size(), start + config.batch);
            for (auto* blk : blocks) blk->zero_grad();
            for (std::size_t k = start; k < stop; ++k) {
                const std::vector<float>& x = images[order[k]];
                for (float& e : eps) e = static_cast<float>(eps_rng.normal());
                vae_forward(model, x, eps, trace);
                LossParts parts = vae_loss(trace.recon, x, trace.mu, trace.logvar,
                                           config.beta);
                if (!std::isfinite(parts.total))
                    throw ValidationError("training diverged at epoch " +
                                          std::to_string(epoch));
                stats.total += parts.total;
                stats.recon_mse += parts.recon_mse;
                stats.kld += parts.kld;
                vae_backward(model, trace, x, eps, config.beta);
            }
            auto batch_n = static_cast<float>(stop - start);
            for (auto* blk : blocks)
                for (float& g : blk->grad) g /= batch_n;
            ++adam_t;
            for (auto* blk : blocks) adam_step(*blk, lr, adam_t);
        }
        auto n = static_cast<double>(images.size());
        stats.total /= n;
        stats.recon_mse /= n;
        stats.kld /= n;
        curve.push_back(stats);
    }
    return model;
}

WorkNet<float> train_network2(const Matrix& inputs, const Matrix& targets,
                              const TrainConfig& config, std::vector<EpochStats>& curve) {
    if (inputs.rows() != targets.rows())
        throw ValidationError("train_network2: input/target row counts differ");
    if (inputs.cols() != 30 || targets.cols() != 4)
        throw ValidationError("train_network2: expected 30 input and 4 target columns");
    if (inputs.rows() < 4) throw ValidationError("train_network2: dataset too small");

    std::vector<std::vector<float>> xs(inputs.rows()), ts(inputs.rows());
    for (std::size_t r = 0; r < inputs.rows(); ++r) {
        xs[r].resize(30);
        ts[r].resize(4);
        for (std::size_t c = 0; c < 30; ++c) xs[r][c] = static_cast<float>(inputs(r, c));
        for (std::size_t c = 0; c < 4; ++c) ts[r][c] = static_cast<float>(targets(r, c));
    }

    Rng root(config.seed);
    auto net = WorkNet<float>::random(root.raw());
    Rng split_rng = root.stream(1);
    Rng shuffle_rng = root.stream(2);

    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_indices(order, split_rng);
    auto val_n = static_cast<std::size_t>(config.val_fraction *
                                          static_cast<double>(order.size()));
    std::vector<std::size_t> val(order.end() - static_cast<long>(val_n), order.end());
    std::vector<std::size_t> train(order.begin(), order.end() - static_cast<long>(val_n));
    if (train.empty()) throw ValidationError("train_network2: empty training split");

    auto blocks = net.blocks();
    WorkTrace<float> trace;
    curve.clear();
    curve.reserve(config.epochs);

    auto mse_of = [&](const std::vector<std::size_t>& idx) {
        double acc = 0.0;
        for (std::size_t r : idx) {
            worknet_forward(net, xs[r], trace);
            for (std::size_t c = 0; c < 4; ++c) {
                double d = trace.out[c] - ts[r][c];
                acc += d * d;
            }
        }
        return idx.empty() ? 0.0 : acc / (4.0 * static_cast<double>(idx.size()));
    };

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_indices(train, shuffle_rng);
        EpochStats stats;
        for (std::size_t start = 0; start < train.size(); start += config.batch) {
            std::size_t stop = std::min(train.size(), start + config.batch);
            for (auto* blk : blocks) blk->zero_grad();
            for (std::size_t k = start; k < stop; ++k) {
                const auto& x = xs[train[k]];
                worknet_forward(net, x, trace);
                double batch_loss = 0.0;
                for (std::size_t c = 0; c < 4; ++c) {
                    double d = trace.out[c] - ts[train[k]][c];
                    batch_loss += d * d;
                }
                if (!std::isfinite(batch_loss))
                    throw ValidationError("training diverged at epoch " +
                                          std::to_string(epoch));
                stats.recon_mse += batch_loss / 4.0;
                worknet_backward(net, trace, x, ts[train[k]]);
            }
            auto batch_n = static_cast<float>(stop - start);
            for (auto* blk : blocks)
                for (float& g : blk->grad) g /= batch_n;
            for (auto* blk : blocks) rmsprop_step(*blk, config.rms_lr);
        }
        stats.recon_mse /= static_cast<double>(train.size());
        stats.total = stats.recon_mse;
        stats.val_mse = mse_of(val);
        curve.push_back(stats);
    }
    return net;
}

Vec NormStats::normalize(const Vec& v) const {
    if (v.size() != lo.size())
        throw ValidationError("normalize: vector length does not match stored stats");
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double range = hi[i] - lo[i];
        out[i] = range > 0.0 ? (v[i] - lo[i]) / range : 0.0;
    }
    return out;
}

Vec NormStats::denormalize(const Vec& v) const {
    if (v.size() != lo.size())
        throw ValidationError("denormalize: vector length does not match stored stats");
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = lo[i] + v[i] * (hi[i] - lo[i]);
    return out;
}

NormStats fit_stats(const Matrix& rows) {
    if (rows.rows() == 0) throw ValidationError("fit_stats: empty matrix");
    NormStats stats;
    stats.lo.assign(rows.cols(), 0.0);
    stats.hi.assign(rows.cols(), 0.0);
    for (std::size_t c = 0; c < rows.cols(); ++c) {
        double lo = rows(0, c), hi = rows(0, c);
        for (std::size_t r = 1; r < rows.rows(); ++r) {
            lo = std::min(lo, rows(r, c));
            hi = std::max(hi, rows(r, c));
        }
        stats.lo[c] = lo;
        stats.hi[c] = hi;
    }
    return stats;
}

Vec encode_mu(const VaeModel<float>& model, const ThetaImage& image) {
    std::vector<float> x = flatten_image(image.grid);
    std::vector<float> r1 = relu(model.enc1.forward(x, 16));
    std::vector<float> r2 = relu(model.enc2.forward(r1, 8));
    std::vector<float> mu = model.mu_head.forward(r2);
    return Vec(mu.begin(), mu.end());
}

Matrix decode_latent(const VaeModel<float>& model, const Vec& z) {
    if (z.size() != kLatentDim)
        throw ValidationError("decode_latent: expected a " + std::to_string(kLatentDim) +
                              "-dimensional code");
    std::vector<float> zf(z.begin(), z.end());
    std::vector<float> y = vae_decode(model, zf);
    Matrix grid(kImageSide, kImageSide);
    for (std::size_t i = 0; i < y.size(); ++i) grid[i] = y[i];
    return grid;
}

Vec predict_work(const WorkNet<float>& net, const Vec& vdl_vector) {
    if (vdl_vector.size() != 30)
        throw ValidationError("predict_work: expected a 30-dimensional landscape vector");
    for (std::size_t i = 0; i < vdl_vector.size(); ++i)
        if (vdl_vector[i] < -1e-6 || vdl_vector[i] > 1.0 + 1e-6)
            throw ValidationError("predict_work: coordinate " + std::to_string(i) +
                                  " outside the normalized range [0,1]");
    std::vector<float> x(vdl_vector.begin(), vdl_vector.end());
    WorkTrace<float> trace;
    worknet_forward(net, x, trace);
    Vec out(4);
    for (std::size_t i = 0; i < 4; ++i)
        out[i] = std::clamp(static_cast<double>(trace.out[i]), 0.0, 1.0);
    return out;
}

void write_curve_csv(const std::string& path, const std::vector<EpochStats>& curve) {
    std::ostringstream os;
    os.precision(10);
    os << "epoch,recon_mse,kld,total,val_mse\n";
    for (std::size_t i = 0; i < curve.size(); ++i)
        os << i << ',' << curve[i].recon_mse << ',' << curve[i].kld << ','
           << curve[i].total << ',' << curve[i].val_mse << '\n';
    write_text_file(path, os.str());
}

namespace {

constexpr char kMagic[8] = {'V', 'D', 'L', 'C', 'K', 'P', 'T', '1'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct ByteReader {
    const std::string& buf;
    std::size_t pos = 0;
    explicit ByteReader(const std::string& b) : buf(b) {}
    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw ValidationError("checkpoint file truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

json config_to_json(const TrainConfig& cfg) {
    return json{{"beta", cfg.beta},
                {"epochs", cfg.epochs},
                {"lr_stage1", cfg.lr_stage1},
                {"lr_stage2", cfg.lr_stage2},
                {"lr_stage3", cfg.lr_stage3},
                {"stage1_frac", cfg.stage1_frac},
                {"stage2_frac", cfg.stage2_frac},
                {"rms_lr", cfg.rms_lr},
                {"batch", cfg.batch},
                {"val_fraction", cfg.val_fraction},
                {"seed", cfg.seed}};
}

template <typename ModelT>
void write_checkpoint(const std::string& path, ModelT& model, const json& arch,
                      const TrainConfig& config, const json& extra_sidecar) {
    std::string blob;
    blob.append(kMagic, 8);
    put_u32(blob, 1);  // format version
    std::string arch_text = arch.dump();
    put_u32(blob, static_cast<std::uint32_t>(arch_text.size()));
    blob += arch_text;
    std::uint64_t count = 0;
    for (auto* blk : model.blocks()) count += blk->size();
    put_u64(blob, count);
    for (auto* blk : model.blocks())
        for (float v : blk->value) put_f32(blob, v);
    write_text_file(path, blob);

    json sidecar = extra_sidecar;
    sidecar["config"] = config_to_json(config);
    sidecar["checkpoint_hash"] = hash_file_hex(path);
    sidecar["parameter_count"] = count;
    write_text_file(path + ".json", sidecar.dump(2) + "\n");
}

template <typename ModelT>
json read_checkpoint(const std::string& path, ModelT& model, const std::string& kind,
                     const std::string& kind_label) {
    std::string blob = read_text_file(path);
    ByteReader rd(blob);
    if (rd.bytes(8) != std::string(kMagic, 8))
        throw ValidationError("not a model checkpoint: " + path);
    std::uint32_t version = rd.u32();
    if (version != 1)
        throw ValidationError("unsupported checkpoint version " + std::to_string(version));
    json arch = json::parse(rd.bytes(rd.u32()));
    // check the declared kind before binding parameters, so a wrong-type file
    // is reported as such rather than as a parameter-count mismatch
    if (arch.at("kind").get<std::string>() != kind)
        throw ValidationError("checkpoint at " + path + " is not a " + kind_label + " model");

    std::string sidecar_text;
    try {
        sidecar_text = read_text_file(path + ".json");
    } catch (const std::exception&) {
        throw ValidationError("missing checkpoint sidecar: " + path + ".json");
    }
    json sidecar = json::parse(sidecar_text);
    if (sidecar.at("checkpoint_hash").get<std::string>() != hash_file_hex(path))
        throw ValidationError("checkpoint content hash mismatch for " + path);

    std::uint64_t count = rd.u64();
    std::uint64_t expected = 0;
    for (auto* blk : model.blocks()) expected += blk->size();
    if (count != expected)
        throw ValidationError("checkpoint parameter count " + std::to_string(count) +
                              " does not match architecture (" + std::to_string(expected) +
                              ")");
    for (auto* blk : model.blocks())
        for (float& v : blk->value) v = rd.f32();
    sidecar["architecture"] = arch;
    return sidecar;
}

Vec json_vec(const json& j) { return j.get<Vec>(); }

}  // namespace

void save_vae(const std::string& path, VaeModel<float>& model, const TrainConfig& config) {
    json arch{{"kind", "vae"}, {"latent", kLatentDim}, {"image", kImageSide}};
    write_checkpoint(path, model, arch, config, json::object());
}

VaeModel<float> load_vae(const std::string& path) {
    auto model = VaeModel<float>::random(0);
    read_checkpoint(path, model, "vae", "latent-space");
    return model;
}

void save_worknet(const std::string& path, WorkNet<float>& net, const NormStats& in_stats,
                  const NormStats& out_stats, const TrainConfig& config) {
    if (in_stats.lo.size() != 30 || out_stats.lo.size() != 4)
        throw ValidationError("save_worknet: normalization stats have wrong length");
    json arch{{"kind", "worknet"}, {"dims", json::array({30, 75, 75, 75, 4})}};
    json extra{{"input_lo", in_stats.lo},
               {"input_hi", in_stats.hi},
               {"output_lo", out_stats.lo},
               {"output_hi", out_stats.hi}};
    write_checkpoint(path, net, arch, config, extra);
}

WorkNetArtifact load_worknet(const std::string& path) {
    WorkNetArtifact art;
    art.net = WorkNet<float>::random(0);
    json sidecar = read_checkpoint(path, art.net, "worknet", "work-metric");
    if (!sidecar.contains("input_lo"))
        throw ValidationError("checkpoint sidecar lacks normalization statistics; "
                              "inference is not possible without them");
    art.in_stats.lo = json_vec(sidecar.at("input_lo"));
    art.in_stats.hi = json_vec(sidecar.at("input_hi"));
    art.out_stats.lo = json_vec(sidecar.at("output_lo"));
    art.out_stats.hi = json_vec(sidecar.at("output_hi"));
    if (art.in_stats.lo.size() != 30 || art.out_stats.lo.size() != 4)
        throw ValidationError("checkpoint normalization statistics have wrong length");
    return art;
}

namespace {

/// A draw is unusable for finite differences when any rectifier sits within
/// reach of its kink; redraw deterministically until all are clear.
bool any_near_kink(const std::vector<double>& pre, double tol = 1e-3) {
    for (double v : pre)
        if (std::abs(v) < tol) return true;
    return false;
}

double rel_err(double a, double b) {
    double denom = std::max({std::abs(a), std::abs(b), 1e-10});
    if (std::abs(a) < 1e-12 && std::abs(b) < 1e-12) return 0.0;
    return std::abs(a - b) / denom;
}

}  // namespace

double gradcheck_vae(std::uint64_t seed) {
    const double beta = 2.0;
    const double h = 1e-5;
    for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
        Rng rng(seed * 7919 + attempt * 104729 + 11);
        auto model = VaeModel<double>::random(rng.raw());
        std::vector<double> x(kImagePixels), eps(kLatentDim);
        for (double& v : x) v = rng.uniform();
        for (double& v : eps) v = rng.normal();

        VaeTrace<double> trace;
        vae_forward(model, x, eps, trace);
        if (any_near_kink(trace.a1) || any_near_kink(trace.a2) ||
            any_near_kink(trace.d0) || any_near_kink(trace.a3))
            continue;

        for (auto* blk : model.blocks()) blk->zero_grad();
        vae_backward(model, trace, x, eps, beta);

        auto loss_at = [&]() {
            VaeTrace<double> t;
            vae_forward(model, x, eps, t);
            return vae_loss(t.recon, x, t.mu, t.logvar, beta).total;
        };

        double worst = 0.0;
        for (auto* blk : model.blocks()) {
            std::size_t picks = std::min<std::size_t>(blk->size(), 10);
            for (std::size_t p = 0; p < picks; ++p) {
                std::size_t i = rng.integer(blk->size());
                double saved = blk->value[i];
                blk->value[i] = saved + h;
                double lp = loss_at();
                blk->value[i] = saved - h;
                double lm = loss_at();
                blk->value[i] = saved;
                double fd = (lp - lm) / (2.0 * h);
                worst = std::max(worst, rel_err(blk->grad[i], fd));
            }
        }
        return worst;
    }
    throw ValidationError("gradient check could not find a kink-free configuration");
}

double gradcheck_worknet(std::uint64_t seed) {
    const double h = 1e-5;
    for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
        Rng rng(seed * 6271 + attempt * 99991 + 5);
        auto net = WorkNet<double>::random(rng.raw());
        std::vector<double> x(30), target(4);
        for (double& v : x) v = rng.uniform();
        for (double& v : target) v = rng.uniform();

        WorkTrace<double> trace;
        worknet_forward(net, x, trace);
        if (any_near_kink(trace.a1) || any_near_kink(trace.a2) ||
            any_near_kink(trace.a3) || any_near_kink(trace.a4))
            continue;

        for (auto* blk : net.blocks()) blk->zero_grad();
        worknet_backward(net, trace, x, target);

        auto loss_at = [&]() {
            WorkTrace<double> t;
            worknet_forward(net, x, t);
            double acc = 0.0;
            for (std::size_t c = 0; c < 4; ++c) {
                double d = t.out[c] - target[c];
                acc += d * d;
            }
            return acc / 4.0;
        };

        double worst = 0.0;
        for (auto* blk : net.blocks()) {
            std::size_t picks = std::min<std::size_t>(blk->size(), 10);
            for (std::size_t p = 0; p < picks; ++p) {
                std::size_t i = rng.integer(blk->size());
                double saved = blk->value[i];
                blk->value[i] = saved + h;
                double lp = loss_at();
                blk->value[i] = saved - h;
                double lm = loss_at();
                blk->value[i] = saved;
                double fd = (lp - lm) / (2.0 * h);
                worst = std::max(worst, rel_err(blk->grad[i], fd));
            }
        }
        return worst;
    }
    throw ValidationError("gradient check could not find a kink-free configuration");
}

}  // namespace vdl::neural
