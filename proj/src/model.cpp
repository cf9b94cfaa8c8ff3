#include "phn/model.hpp"

#include <cmath>
#include <json.hpp>

#include "phn/errors.hpp"
#include "phn/io.hpp"

namespace phn {

void ModelParams::validate() const {
    bank.validate();
    const std::size_t D = bank.g.dim;
    if (proj_weight.rows != D || proj_weight.cols != d_in || proj_bias.size() != D)
        throw InvalidInput("ModelParams: projector shape mismatch");
    if (cls_weight.size() != bank.num_data()) throw InvalidInput("ModelParams: classifier shape mismatch");
    if (!all_finite(proj_weight.a) || !all_finite(proj_bias) || !all_finite(cls_weight) ||
        !std::isfinite(cls_bias))
        throw InvalidInput("ModelParams: non-finite parameters");
}

ModelParams init_model(const TrainConfig& cfg, std::size_t d_in, Rng& rng) {
    cfg.validate();
    if (d_in == 0) throw InvalidInput("init_model: d_in must be positive");
    ModelParams p;
    p.d_in = d_in;
    const std::size_t D = cfg.geometry.dim;
    p.proj_weight = Mat(D, d_in);
    double w_sigma = 1.0 / std::sqrt(static_cast<double>(d_in));
    for (auto& w : p.proj_weight.a) w = rng.gaussian() * w_sigma;
    p.proj_bias.assign(D, 0.0);
    p.bank = make_bank(cfg.num_bona_protos, cfg.num_spoof_protos, cfg.num_top_protos, cfg.geometry,
                       rng, cfg.init_sigma);
    p.cls_weight.assign(p.bank.num_data(), 0.0);
    p.cls_bias = 0.0;
    p.cls_bias_enabled = cfg.cls_bias_enabled;
    return p;
}

ModelGrads ModelGrads::zeros_like(const ModelParams& p) {
    ModelGrads g;
    g.proj_weight = Mat(p.proj_weight.rows, p.proj_weight.cols);
    g.proj_bias.assign(p.proj_bias.size(), 0.0);
    g.theta_data = Mat(p.bank.theta_data.rows, p.bank.theta_data.cols);
    g.theta_top = Mat(p.bank.theta_top.rows, p.bank.theta_top.cols);
    g.cls_weight.assign(p.cls_weight.size(), 0.0);
    g.cls_bias = 0.0;
    return g;
}

void ModelGrads::accumulate(const ModelGrads& o, double scale) {
    for (std::size_t i = 0; i < proj_weight.a.size(); ++i) proj_weight.a[i] += scale * o.proj_weight.a[i];
    for (std::size_t i = 0; i < proj_bias.size(); ++i) proj_bias[i] += scale * o.proj_bias[i];
    for (std::size_t i = 0; i < theta_data.a.size(); ++i) theta_data.a[i] += scale * o.theta_data.a[i];
    for (std::size_t i = 0; i < theta_top.a.size(); ++i) theta_top.a[i] += scale * o.theta_top.a[i];
    for (std::size_t i = 0; i < cls_weight.size(); ++i) cls_weight[i] += scale * o.cls_weight[i];
    cls_bias += scale * o.cls_bias;
}

bool ModelGrads::finite() const {
    return all_finite(proj_weight.a) && all_finite(proj_bias) && all_finite(theta_data.a) &&
           all_finite(theta_top.a) && all_finite(cls_weight) && std::isfinite(cls_bias);
}

std::vector<TensorView> tensor_views(ModelParams& p) {
    return {
        {"proj_weight", p.proj_weight.a.data(), p.proj_weight.a.size(), 0},
        {"proj_bias", p.proj_bias.data(), p.proj_bias.size(), 0},
        {"theta_data", p.bank.theta_data.a.data(), p.bank.theta_data.a.size(), 1},
        {"theta_top", p.bank.theta_top.a.data(), p.bank.theta_top.a.size(), 1},
        {"cls_weight", p.cls_weight.data(), p.cls_weight.size(), 2},
        {"cls_bias", &p.cls_bias, 1, 2},
    };
}

std::vector<TensorView> tensor_views(ModelGrads& g) {
    return {
        {"proj_weight", g.proj_weight.a.data(), g.proj_weight.a.size(), 0},
        {"proj_bias", g.proj_bias.data(), g.proj_bias.size(), 0},
        {"theta_data", g.theta_data.a.data(), g.theta_data.a.size(), 1},
        {"theta_top", g.theta_top.a.data(), g.theta_top.a.size(), 1},
        {"cls_weight", g.cls_weight.data(), g.cls_weight.size(), 2},
        {"cls_bias", &g.cls_bias, 1, 2},
    };
}

std::vector<ConstTensorView> tensor_views(const ModelParams& p) {
    return {
        {"proj_weight", p.proj_weight.a.data(), p.proj_weight.a.size(), 0},
        {"proj_bias", p.proj_bias.data(), p.proj_bias.size(), 0},
        {"theta_data", p.bank.theta_data.a.data(), p.bank.theta_data.a.size(), 1},
        {"theta_top", p.bank.theta_top.a.data(), p.bank.theta_top.a.size(), 1},
        {"cls_weight", p.cls_weight.data(), p.cls_weight.size(), 2},
        {"cls_bias", &p.cls_bias, 1, 2},
    };
}

std::vector<ConstTensorView> tensor_views(const ModelGrads& g) {
    return {
        {"proj_weight", g.proj_weight.a.data(), g.proj_weight.a.size(), 0},
        {"proj_bias", g.proj_bias.data(), g.proj_bias.size(), 0},
        {"theta_data", g.theta_data.a.data(), g.theta_data.a.size(), 1},
        {"theta_top", g.theta_top.a.data(), g.theta_top.a.size(), 1},
        {"cls_weight", g.cls_weight.data(), g.cls_weight.size(), 2},
        {"cls_bias", &g.cls_bias, 1, 2},
    };
}

Vec forward_affine(const ModelParams& p, std::span<const double> x) {
    if (x.size() != p.d_in) throw InvalidInput("forward: input dimension mismatch");
    if (!all_finite(x)) throw InvalidInput("forward: non-finite input");
    const std::size_t D = p.dim();
    Vec u(D);
    for (std::size_t i = 0; i < D; ++i) u[i] = p.proj_bias[i] + dot(p.proj_weight.row(i), x);
    return u;
}

Vec forward_embed(const ModelParams& p, std::span<const double> x) {
    return exp_map0(forward_affine(p, x), p.bank.g);
}

double classifier_logit(std::span<const double> z, const ModelParams& p,
                        const MaterializedBank& mat) {
    double logit = p.cls_bias_enabled ? p.cls_bias : 0.0;
    for (std::size_t r = 0; r < mat.data.rows; ++r)
        logit += p.cls_weight[r] * hyperbolic_distance(z, mat.data.row(r), p.bank.g);
    return logit;
}

double classifier_logit(std::span<const double> z, const ModelParams& p) {
    return classifier_logit(z, p, materialize(p.bank));
}

std::vector<LabeledEmbedding> EmbeddedBatch::labeled() const {
    std::vector<LabeledEmbedding> out(size());
    for (std::size_t n = 0; n < size(); ++n) {
        out[n].z = z.row_copy(n);
        out[n].z_aug = z_aug.row_copy(n);
        out[n].y = y[n];
    }
    return out;
}

EmbeddedBatch embed_batch(const ModelParams& p, const EmbeddingDataset& ds,
                          const std::vector<std::size_t>& idx) {
    if (!ds.has_aug()) throw InvalidDataset("embed_batch: dataset has no augmented block");
    const std::size_t n = idx.size();
    const std::size_t D = p.dim();
    EmbeddedBatch b;
    b.x = Mat(n, ds.d_in);
    b.x_aug = Mat(n, ds.d_in);
    b.u = Mat(n, D);
    b.u_aug = Mat(n, D);
    b.z = Mat(n, D);
    b.z_aug = Mat(n, D);
    b.y.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        std::size_t row = idx[t];
        if (row >= ds.n()) throw InvalidInput("embed_batch: index out of range");
        b.y[t] = ds.labels[row];
        for (std::size_t k = 0; k < ds.d_in; ++k) {
            b.x(t, k) = static_cast<double>(ds.features[row * ds.d_in + k]);
            b.x_aug(t, k) = static_cast<double>(ds.aug_features[row * ds.d_in + k]);
        }
        Vec u = forward_affine(p, b.x.row(t));
        Vec z = exp_map0(u, p.bank.g);
        std::copy(u.begin(), u.end(), b.u.row(t).begin());
        std::copy(z.begin(), z.end(), b.z.row(t).begin());
        Vec ua = forward_affine(p, b.x_aug.row(t));
        Vec za = exp_map0(ua, p.bank.g);
        std::copy(ua.begin(), ua.end(), b.u_aug.row(t).begin());
        std::copy(za.begin(), za.end(), b.z_aug.row(t).begin());
    }
    return b;
}

namespace {

double stable_sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

} // namespace

// d_z rows chained through exp_map0 at the affine pre-images, then into the
// projector weights through the raw inputs.
void chain_embedding_grads(const EmbeddedBatch& b, const Mat& d_z, const Mat& d_zaug,
                           const GeometryConfig& g, ModelGrads& out) {
    const std::size_t D = d_z.cols;
    auto chain_one = [&](const Mat& u, const Mat& x, const Mat& dz) {
        for (std::size_t n = 0; n < dz.rows; ++n) {
            bool nz = false;
            for (double v : dz.row(n))
                if (v != 0.0) {
                    nz = true;
                    break;
                }
            if (!nz) continue;
            Vec gu = exp_map0_vjp(u.row(n), dz.row(n), g);
            for (std::size_t i = 0; i < D; ++i) {
                if (gu[i] == 0.0) continue;
                out.proj_bias[i] += gu[i];
                axpy(gu[i], x.row(n), out.proj_weight.row(i));
            }
        }
    };
    chain_one(b.u, b.x, d_z);
    chain_one(b.u_aug, b.x_aug, d_zaug);
}

ClsLoss loss_cls(const EmbeddedBatch& batch, const ModelParams& p, bool use_aug) {
    if (batch.size() == 0) throw InvalidBatch("loss_cls: empty batch");
    auto mat = materialize(p.bank);
    const std::size_t R = p.bank.num_data();
    const std::size_t D = p.dim();
    const std::size_t n = batch.size();
    const std::size_t total = n * (use_aug ? 2 : 1);
    const double scale = 1.0 / static_cast<double>(total);

    ClsLoss out;
    out.grads = ModelGrads::zeros_like(p);
    Mat d_z(n, D), d_zaug(n, D);
    Mat proto_cot(R, D);

    Vec dist(R), gu(D), gv(D);
    auto add_sample = [&](std::span<const double> z, int y, std::span<double> dz_row) {
        for (std::size_t r = 0; r < R; ++r) dist[r] = hyperbolic_distance(z, mat.data.row(r), p.bank.g);
        double logit = p.cls_bias_enabled ? p.cls_bias : 0.0;
        for (std::size_t r = 0; r < R; ++r) logit += p.cls_weight[r] * dist[r];
        out.value += scale * (softplus(logit) - static_cast<double>(y) * logit);
        double e = scale * (stable_sigmoid(logit) - static_cast<double>(y));
        for (std::size_t r = 0; r < R; ++r) out.grads.cls_weight[r] += e * dist[r];
        if (p.cls_bias_enabled) out.grads.cls_bias += e;
        for (std::size_t r = 0; r < R; ++r) {
            double w = e * p.cls_weight[r];
            if (w == 0.0) continue;
            if (!try_dist_grad(z, mat.data.row(r), p.bank.g, gu, gv)) continue;
            axpy(w, gu, dz_row);
            axpy(w, gv, proto_cot.row(r));
        }
    };

    for (std::size_t i = 0; i < n; ++i) add_sample(batch.z.row(i), batch.y[i], d_z.row(i));
    if (use_aug)
        for (std::size_t i = 0; i < n; ++i) add_sample(batch.z_aug.row(i), batch.y[i], d_zaug.row(i));

    for (std::size_t r = 0; r < R; ++r) {
        bool nz = false;
        for (double v : proto_cot.row(r))
            if (v != 0.0) nz = true;
        if (!nz) continue;
        Vec gb = exp_map0_vjp(p.bank.theta_data.row(r), proto_cot.row(r), p.bank.g);
        axpy(1.0, gb, out.grads.theta_data.row(r));
    }
    chain_embedding_grads(batch, d_z, d_zaug, p.bank.g, out.grads);
    return out;
}

StepPlan make_step_plan(const EmbeddedBatch& batch, const ModelParams& p, const TrainConfig& cfg,
                        Rng& hsl_rng) {
    StepPlan plan;
    auto mat = materialize(p.bank);
    auto labeled = batch.labeled();
    plan.nearest = nearest_same_class(labeled, p.bank, mat);
    if (cfg.enable_hsl) plan.triplets = plan_triplets(p.bank, mat, cfg.hsl, hsl_rng);
    if (cfg.enable_pfw)
        plan.pfw = plan_pfw(labeled, p.bank.g, cfg.mask_ratio_bona, cfg.mask_ratio_spoof);
    return plan;
}

TotalLoss total_loss(const EmbeddedBatch& batch, const ModelParams& p, const TrainConfig& cfg,
                     const StepPlan& plan) {
    const std::size_t D = p.dim();
    TotalLoss out;
    out.grads = ModelGrads::zeros_like(p);

    ClsLoss cls = loss_cls(batch, p, cfg.cls_use_aug);
    out.breakdown.cls = cls.value;
    out.grads.accumulate(cls.grads);

    Mat d_z(batch.size(), D), d_zaug(batch.size(), D);
    auto labeled = batch.labeled();

    if (cfg.enable_ppl) {
        ProtoLoss pr = loss_proto(labeled, p.bank, plan.nearest);
        AugLoss au = loss_aug(labeled, p.bank, plan.nearest);
        out.breakdown.proto = pr.value;
        out.breakdown.aug = au.value;
        out.breakdown.ppl = pr.value + au.value;
        for (std::size_t i = 0; i < d_z.a.size(); ++i) d_z.a[i] += pr.d_z.a[i] + au.d_z.a[i];
        for (std::size_t i = 0; i < d_zaug.a.size(); ++i) d_zaug.a[i] += au.d_zaug.a[i];
        for (std::size_t i = 0; i < out.grads.theta_data.a.size(); ++i)
            out.grads.theta_data.a[i] += pr.d_theta.a[i] + au.d_theta.a[i];
    }
    if (cfg.enable_hsl) {
        HslLoss h = loss_hsl(plan.triplets, p.bank, cfg.hsl);
        out.breakdown.hsl = h.value;
        for (std::size_t i = 0; i < out.grads.theta_data.a.size(); ++i)
            out.grads.theta_data.a[i] += h.d_theta_data.a[i];
        for (std::size_t i = 0; i < out.grads.theta_top.a.size(); ++i)
            out.grads.theta_top.a[i] += h.d_theta_top.a[i];
    }
    if (cfg.enable_pfw) {
        PfwLoss w = loss_pfw(labeled, p.bank.g, plan.pfw);
        out.breakdown.pfw = w.value;
        out.warnings = w.warnings;
        for (std::size_t i = 0; i < d_z.a.size(); ++i) d_z.a[i] += w.d_z.a[i];
        for (std::size_t i = 0; i < d_zaug.a.size(); ++i) d_zaug.a[i] += w.d_zaug.a[i];
    }
    chain_embedding_grads(batch, d_z, d_zaug, p.bank.g, out.grads);

    out.breakdown.total =
        out.breakdown.cls + out.breakdown.ppl + out.breakdown.hsl + out.breakdown.pfw;
    return out;
}

AdamState AdamState::zeros_like(const ModelParams& p) {
    AdamState s;
    s.m = ModelGrads::zeros_like(p);
    s.v = ModelGrads::zeros_like(p);
    s.step = 0;
    return s;
}

void adam_step(ModelParams& p, const ModelGrads& g, AdamState& state, const TrainConfig& cfg) {
    state.step += 1;
    const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
    const double lr_by_group[3] = {cfg.lr_projector, cfg.lr_prototypes, cfg.lr_classifier};

    auto pv = tensor_views(p);
    auto gv = tensor_views(static_cast<const ModelGrads&>(g));
    auto mv = tensor_views(state.m);
    auto vv = tensor_views(state.v);
    for (std::size_t t = 0; t < pv.size(); ++t) {
        const double lr = lr_by_group[pv[t].group];
        for (std::size_t i = 0; i < pv[t].size; ++i) {
            double grad = gv[t].data[i];
            double& m = mv[t].data[i];
            double& v = vv[t].data[i];
            m = b1 * m + (1.0 - b1) * grad;
            v = b2 * v + (1.0 - b2) * grad * grad;
            double mhat = m / c1;
            double vhat = v / c2;
            pv[t].data[i] -= lr * mhat / (std::sqrt(vhat) + cfg.adam_eps);
        }
    }
}

namespace {
constexpr std::uint32_t kModelVersion = 1;
}

void save_model(const ModelParams& p, const TrainConfig& cfg, const std::filesystem::path& path) {
    p.validate();
    auto views = tensor_views(p);

    nlohmann::json header;
    header["kind"] = "phn-model";
    header["version"] = kModelVersion;
    header["d_in"] = p.d_in;
    header["config"] = nlohmann::json::parse(config_to_json(cfg));
    auto tensors = nlohmann::json::array();
    for (const auto& v : views)
        tensors.push_back({{"name", v.name}, {"size", v.size}});
    header["tensors"] = tensors;

    std::string head = header.dump();
    std::string buf;
    io::put_u32(buf, static_cast<std::uint32_t>(head.size()));
    buf += head;
    for (const auto& v : views)
        for (std::size_t i = 0; i < v.size; ++i) io::put_f64(buf, v.data[i]);
    io::atomic_write(path, buf);
}

LoadedModel load_model(const std::filesystem::path& path) {
    std::string bytes = io::read_file(path);
    io::Reader r{bytes};
    std::uint32_t head_len = r.u32();
    std::string_view head = r.bytes(head_len);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(head);
    } catch (const nlohmann::json::exception&) {
        throw FormatError("model header is not valid JSON");
    }
    if (!header.contains("kind") || header["kind"] != "phn-model")
        throw FormatError("not a model file");
    if (header.value("version", 0u) != kModelVersion)
        throw UnsupportedVersion("unsupported model version");

    LoadedModel out;
    std::size_t total = 0;
    try {
        out.config = config_from_json(header.at("config").dump());
        std::size_t d_in = header.at("d_in").get<std::size_t>();
        Rng dummy(0);
        out.params = init_model(out.config, d_in, dummy);

        auto views = tensor_views(out.params);
        const auto& tensors = header.at("tensors");
        if (tensors.size() != views.size()) throw FormatError("model tensor list mismatch");
        for (std::size_t t = 0; t < views.size(); ++t) {
            if (tensors[t].at("name").get<std::string>() != views[t].name ||
                tensors[t].at("size").get<std::size_t>() != views[t].size)
                throw FormatError("model tensor shape mismatch");
            total += views[t].size;
        }
    } catch (const nlohmann::json::exception&) {
        throw FormatError("model header missing or malformed fields");
    } catch (const ConfigError& e) {
        throw FormatError(std::string("model config echo invalid: ") + e.what());
    }
    if (bytes.size() != 4 + head_len + 8 * total) throw FormatError("model payload length mismatch");
    for (auto& v : tensor_views(out.params))
        for (std::size_t i = 0; i < v.size; ++i) v.data[i] = r.f64();
    out.params.validate();
    return out;
}

} // namespace phn
