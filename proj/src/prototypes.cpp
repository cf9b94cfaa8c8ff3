#include "phn/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "phn/errors.hpp"

namespace phn {

void PrototypeBank::validate() const {
    g.validate();
    if (theta_data.rows != num_bona + num_spoof || class_of.size() != theta_data.rows)
        throw InvalidInput("PrototypeBank: inconsistent shapes");
    if (num_bona == 0 || num_spoof == 0)
        throw InvalidInput("PrototypeBank: both classes need at least one prototype");
    for (std::size_t r = 0; r < theta_data.rows; ++r) {
        int want = r < num_bona ? 0 : 1;
        if (class_of[r] != want) throw InvalidInput("PrototypeBank: class layout violated");
    }
    if (!all_finite(theta_data.a) || !all_finite(theta_top.a))
        throw InvalidInput("PrototypeBank: non-finite parameters");
}

PrototypeBank make_bank(std::size_t num_bona, std::size_t num_spoof, std::size_t num_top,
                        const GeometryConfig& g, Rng& rng, double init_sigma) {
    PrototypeBank bank;
    bank.g = g;
    bank.num_bona = num_bona;
    bank.num_spoof = num_spoof;
    bank.theta_data = Mat(num_bona + num_spoof, g.dim);
    bank.theta_top = Mat(num_top, g.dim);
    for (auto& x : bank.theta_data.a) x = rng.gaussian() * init_sigma;
    for (auto& x : bank.theta_top.a) x = rng.gaussian() * init_sigma;
    bank.class_of.resize(num_bona + num_spoof);
    for (std::size_t r = 0; r < bank.class_of.size(); ++r) bank.class_of[r] = r < num_bona ? 0 : 1;
    bank.validate();
    return bank;
}

MaterializedBank materialize(const PrototypeBank& bank) {
    MaterializedBank out;
    out.data = Mat(bank.theta_data.rows, bank.theta_data.cols);
    out.top = Mat(bank.theta_top.rows, bank.theta_top.cols);
    for (std::size_t r = 0; r < bank.theta_data.rows; ++r) {
        Vec p = exp_map0(bank.theta_data.row(r), bank.g);
        std::copy(p.begin(), p.end(), out.data.row(r).begin());
    }
    for (std::size_t r = 0; r < bank.theta_top.rows; ++r) {
        Vec p = exp_map0(bank.theta_top.row(r), bank.g);
        std::copy(p.begin(), p.end(), out.top.row(r).begin());
    }
    return out;
}

std::size_t nearest_prototype(std::span<const double> z, const Mat& data_points,
                              const std::vector<int>& class_of, int class_filter,
                              const GeometryConfig& g) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < data_points.rows; ++r) {
        if (class_of[r] != class_filter) continue;
        double d = hyperbolic_distance(z, data_points.row(r), g);
        if (d < best_d) {
            best_d = d;
            best = r;
        }
    }
    if (best == std::numeric_limits<std::size_t>::max())
        throw InvalidInput("nearest_prototype: no prototype of the requested class");
    return best;
}

std::size_t nearest_prototype(std::span<const double> z, const PrototypeBank& bank,
                              int class_filter) {
    auto mat = materialize(bank);
    return nearest_prototype(z, mat.data, bank.class_of, class_filter, bank.g);
}

std::vector<std::size_t> nearest_same_class(const std::vector<LabeledEmbedding>& batch,
                                            const PrototypeBank& bank,
                                            const MaterializedBank& mat) {
    std::vector<std::size_t> out(batch.size());
    for (std::size_t n = 0; n < batch.size(); ++n)
        out[n] = nearest_prototype(batch[n].z, mat.data, bank.class_of, batch[n].y, bank.g);
    return out;
}

namespace {

// Accumulates per-prototype cotangents and maps them back to theta at the end;
// exp_map0_vjp is linear in the cotangent, so one call per row suffices.
void chain_to_theta(const Mat& proto_cotangent, const Mat& theta, const GeometryConfig& g,
                    Mat& d_theta) {
    for (std::size_t r = 0; r < theta.rows; ++r) {
        bool nonzero = false;
        for (double v : proto_cotangent.row(r))
            if (v != 0.0) {
                nonzero = true;
                break;
            }
        if (!nonzero) continue;
        Vec gb = exp_map0_vjp(theta.row(r), proto_cotangent.row(r), g);
        axpy(1.0, gb, d_theta.row(r));
    }
}

} // namespace

ProtoLoss loss_proto(const std::vector<LabeledEmbedding>& batch, const PrototypeBank& bank,
                     const std::vector<std::size_t>& nearest) {
    if (batch.empty()) throw InvalidBatch("loss_proto: empty batch");
    const std::size_t R = bank.num_data();
    const std::size_t D = bank.theta_data.cols;
    auto mat = materialize(bank);

    ProtoLoss out;
    out.d_z = Mat(batch.size(), D);
    out.d_theta = Mat(R, D);
    Mat proto_cot(R, D);

    Vec dist(R), coeff(R), gu(D), gv(D);
    for (std::size_t n = 0; n < batch.size(); ++n) {
        const auto& z = batch[n].z;
        for (std::size_t r = 0; r < R; ++r) dist[r] = hyperbolic_distance(z, mat.data.row(r), bank.g);
        std::size_t k = nearest[n];
        double m = -*std::min_element(dist.begin(), dist.end());
        double sum = 0.0;
        for (std::size_t r = 0; r < R; ++r) sum += std::exp(-dist[r] - m);
        out.value += dist[k] + m + std::log(sum);
        for (std::size_t r = 0; r < R; ++r)
            coeff[r] = (r == k ? 1.0 : 0.0) - std::exp(-dist[r] - m) / sum;
        for (std::size_t r = 0; r < R; ++r) {
            if (coeff[r] == 0.0) continue;
            if (!try_dist_grad(z, mat.data.row(r), bank.g, gu, gv)) continue;
            axpy(coeff[r], gu, out.d_z.row(n));
            axpy(coeff[r], gv, proto_cot.row(r));
        }
    }
    chain_to_theta(proto_cot, bank.theta_data, bank.g, out.d_theta);
    return out;
}

ProtoLoss loss_proto(const std::vector<LabeledEmbedding>& batch, const PrototypeBank& bank) {
    auto mat = materialize(bank);
    return loss_proto(batch, bank, nearest_same_class(batch, bank, mat));
}

AugLoss loss_aug(const std::vector<LabeledEmbedding>& batch, const PrototypeBank& bank,
                 const std::vector<std::size_t>& nearest) {
    if (batch.empty()) throw InvalidBatch("loss_aug: empty batch");
    const std::size_t D = bank.theta_data.cols;
    auto mat = materialize(bank);

    AugLoss out;
    out.d_z = Mat(batch.size(), D);
    out.d_zaug = Mat(batch.size(), D);
    out.d_theta = Mat(bank.num_data(), D);
    Mat proto_cot(bank.num_data(), D);

    Vec gu(D), gv(D);
    for (std::size_t n = 0; n < batch.size(); ++n) {
        const auto& s = batch[n];
        if (s.z_aug.size() != s.z.size()) throw InvalidBatch("loss_aug: missing augmented pair");
        std::size_t k = nearest[n];
        auto pk = mat.data.row(k);

        out.value += hyperbolic_distance(s.z, s.z_aug, bank.g);
        if (try_dist_grad(s.z, s.z_aug, bank.g, gu, gv)) {
            axpy(1.0, gu, out.d_z.row(n));
            axpy(1.0, gv, out.d_zaug.row(n));
        }

        double a = hyperbolic_distance(s.z, pk, bank.g);
        double b = hyperbolic_distance(s.z_aug, pk, bank.g);
        out.value += std::abs(a - b);
        double sign = a > b ? 1.0 : (a < b ? -1.0 : 0.0);
        if (sign != 0.0) {
            if (try_dist_grad(s.z, pk, bank.g, gu, gv)) {
                axpy(sign, gu, out.d_z.row(n));
                axpy(sign, gv, proto_cot.row(k));
            }
            if (try_dist_grad(s.z_aug, pk, bank.g, gu, gv)) {
                axpy(-sign, gu, out.d_zaug.row(n));
                axpy(-sign, gv, proto_cot.row(k));
            }
        }
    }
    chain_to_theta(proto_cot, bank.theta_data, bank.g, out.d_theta);
    return out;
}

AugLoss loss_aug(const std::vector<LabeledEmbedding>& batch, const PrototypeBank& bank) {
    auto mat = materialize(bank);
    return loss_aug(batch, bank, nearest_same_class(batch, bank, mat));
}

PplLoss loss_ppl(const std::vector<LabeledEmbedding>& batch, const PrototypeBank& bank) {
    auto mat = materialize(bank);
    auto nearest = nearest_same_class(batch, bank, mat);
    ProtoLoss p = loss_proto(batch, bank, nearest);
    AugLoss a = loss_aug(batch, bank, nearest);
    PplLoss out;
    out.value = p.value + a.value;
    out.d_z = std::move(p.d_z);
    for (std::size_t i = 0; i < out.d_z.a.size(); ++i) out.d_z.a[i] += a.d_z.a[i];
    out.d_zaug = std::move(a.d_zaug);
    out.d_theta = std::move(p.d_theta);
    for (std::size_t i = 0; i < out.d_theta.a.size(); ++i) out.d_theta.a[i] += a.d_theta.a[i];
    return out;
}

namespace {

std::vector<std::size_t> sample_from_pool(const std::vector<std::size_t>& pool, std::size_t n,
                                          Rng& rng) {
    std::vector<std::size_t> out;
    out.reserve(n);
    if (n <= pool.size()) {
        // partial Fisher-Yates, without replacement
        std::vector<std::size_t> work = pool;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t j = i + rng.index(work.size() - i);
            std::swap(work[i], work[j]);
            out.push_back(work[i]);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) out.push_back(pool[rng.index(pool.size())]);
    }
    return out;
}

} // namespace

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
balanced_batch_indices(const std::vector<int>& labels, std::size_t batch_size,
                       std::size_t num_bona_protos, std::size_t num_spoof_protos, Rng& rng) {
    if (batch_size < 2) throw InvalidInput("balanced_batch_indices: batch size must be >= 2");
    std::vector<std::size_t> bona_pool, spoof_pool;
    for (std::size_t i = 0; i < labels.size(); ++i)
        (labels[i] == 0 ? bona_pool : spoof_pool).push_back(i);
    if (bona_pool.empty() || spoof_pool.empty())
        throw InvalidDataset("balanced_batch_indices: a class pool is empty");
    double frac = static_cast<double>(batch_size) * static_cast<double>(num_bona_protos) /
                  static_cast<double>(num_bona_protos + num_spoof_protos);
    std::size_t n_bona = static_cast<std::size_t>(std::floor(frac + 0.5)); // round half up
    if (n_bona > batch_size) n_bona = batch_size;
    std::size_t n_spoof = batch_size - n_bona;
    return {sample_from_pool(bona_pool, n_bona, rng), sample_from_pool(spoof_pool, n_spoof, rng)};
}

} // namespace phn
