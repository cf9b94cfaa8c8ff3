#include "phn/hierarchy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "phn/errors.hpp"

namespace phn {

void HslConfig::validate(std::size_t num_data_protos) const {
    if (neighbors < 1 || neighbors + 1 >= num_data_protos)
        throw ConfigError("HslConfig: need 1 <= K < num_prototypes - 1");
    if (margin < 0.0) throw ConfigError("HslConfig: margin must be >= 0");
}

std::vector<std::vector<std::size_t>> knn_neighbors(const Mat& points, const GeometryConfig& g,
                                                    std::size_t K) {
    const std::size_t N = points.rows;
    Mat d = pairwise_distances(points, points, g);
    std::vector<std::vector<std::size_t>> out(N);
    std::vector<std::size_t> order(N);
    for (std::size_t i = 0; i < N; ++i) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (d(i, a) != d(i, b)) return d(i, a) < d(i, b);
            return a < b;
        });
        out[i].reserve(K);
        for (std::size_t r = 0; r < N && out[i].size() < K; ++r)
            if (order[r] != i) out[i].push_back(order[r]);
    }
    return out;
}

std::vector<std::vector<std::size_t>> knn_neighbors(const PrototypeBank& bank, std::size_t K) {
    return knn_neighbors(materialize(bank).data, bank.g, K);
}

std::vector<Triplet> sample_triplets(const PrototypeBank& bank, const HslConfig& cfg, Rng& rng) {
    const std::size_t N = bank.num_data();
    cfg.validate(N);
    const std::size_t count = cfg.triplets_per_step == 0 ? N : cfg.triplets_per_step;
    auto nbrs = knn_neighbors(bank, cfg.neighbors);

    std::vector<char> is_nbr(N);
    std::vector<std::size_t> anchors(N);
    std::iota(anchors.begin(), anchors.end(), 0);
    std::vector<Triplet> out;
    out.reserve(count);
    for (std::size_t t = 0; t < count; ++t) {
        if (t % N == 0) rng.shuffle(anchors);
        std::size_t i = anchors[t % N];
        std::size_t j = nbrs[i][rng.index(nbrs[i].size())];

        std::fill(is_nbr.begin(), is_nbr.end(), 0);
        is_nbr[i] = 1;
        for (std::size_t m : nbrs[i]) is_nbr[m] = 1;
        std::vector<std::size_t> complement;
        complement.reserve(N);
        for (std::size_t m = 0; m < N; ++m)
            if (!is_nbr[m]) complement.push_back(m);
        if (complement.empty())
            throw ConfigError("sample_triplets: neighborhood complement is empty");
        std::size_t k = complement[rng.index(complement.size())];
        out.push_back(Triplet{i, j, k, 0, 0});
    }
    return out;
}

std::size_t select_lca(std::span<const double> a, std::span<const double> b,
                       const Mat& top_points, const GeometryConfig& g, Rng& rng,
                       bool gumbel_enabled) {
    if (top_points.rows == 0) throw InvalidInput("select_lca: no top prototypes");
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < top_points.rows; ++r) {
        double da = hyperbolic_distance(a, top_points.row(r), g);
        double db = hyperbolic_distance(b, top_points.row(r), g);
        double score = std::exp(-std::max(da, db));
        if (gumbel_enabled) score += rng.gumbel();
        if (score > best_score) {
            best_score = score;
            best = r;
        }
    }
    return best;
}

std::vector<Triplet> plan_triplets(const PrototypeBank& bank, const MaterializedBank& mat,
                                   const HslConfig& cfg, Rng& rng) {
    auto triplets = sample_triplets(bank, cfg, rng);
    for (auto& t : triplets) {
        t.lca_ij = select_lca(mat.data.row(t.i), mat.data.row(t.j), mat.top, bank.g, rng, cfg.gumbel);
        t.lca_ijk =
            select_lca(mat.top.row(t.lca_ij), mat.data.row(t.k), mat.top, bank.g, rng, cfg.gumbel);
    }
    return triplets;
}

HslLoss loss_hsl(const std::vector<Triplet>& triplets, const PrototypeBank& bank,
                 const HslConfig& cfg) {
    const std::size_t D = bank.theta_data.cols;
    auto mat = materialize(bank);

    HslLoss out;
    out.d_theta_data = Mat(bank.num_data(), D);
    out.d_theta_top = Mat(bank.theta_top.rows, D);
    Mat data_cot(bank.num_data(), D);
    Mat top_cot(bank.theta_top.rows, D);

    Vec gu(D), gv(D);
    // hinge on (d(p, near_top) - d(p, far_top) + delta); sign flips the roles
    auto hinge = [&](std::size_t p, std::size_t near_top, std::size_t far_top) {
        double da = hyperbolic_distance(mat.data.row(p), mat.top.row(near_top), bank.g);
        double db = hyperbolic_distance(mat.data.row(p), mat.top.row(far_top), bank.g);
        double arg = da - db + cfg.margin;
        if (arg <= 0.0) return 0.0;
        if (try_dist_grad(mat.data.row(p), mat.top.row(near_top), bank.g, gu, gv)) {
            axpy(1.0, gu, data_cot.row(p));
            axpy(1.0, gv, top_cot.row(near_top));
        }
        if (try_dist_grad(mat.data.row(p), mat.top.row(far_top), bank.g, gu, gv)) {
            axpy(-1.0, gu, data_cot.row(p));
            axpy(-1.0, gv, top_cot.row(far_top));
        }
        return arg;
    };

    for (const auto& t : triplets) {
        out.value += hinge(t.i, t.lca_ij, t.lca_ijk);
        out.value += hinge(t.j, t.lca_ij, t.lca_ijk);
        out.value += hinge(t.k, t.lca_ijk, t.lca_ij);
    }

    for (std::size_t r = 0; r < bank.num_data(); ++r) {
        bool nz = false;
        for (double v : data_cot.row(r))
            if (v != 0.0) nz = true;
        if (!nz) continue;
        Vec gb = exp_map0_vjp(bank.theta_data.row(r), data_cot.row(r), bank.g);
        axpy(1.0, gb, out.d_theta_data.row(r));
    }
    for (std::size_t r = 0; r < bank.theta_top.rows; ++r) {
        bool nz = false;
        for (double v : top_cot.row(r))
            if (v != 0.0) nz = true;
        if (!nz) continue;
        Vec gb = exp_map0_vjp(bank.theta_top.row(r), top_cot.row(r), bank.g);
        axpy(1.0, gb, out.d_theta_top.row(r));
    }
    return out;
}

LcaReport lca_consistency_report(const PrototypeBank& bank, const HslConfig& cfg, Rng& rng) {
    auto mat = materialize(bank);
    auto triplets = plan_triplets(bank, mat, cfg, rng);
    LcaReport rep;
    rep.n_triplets = triplets.size();
    for (const auto& t : triplets) {
        double da = hyperbolic_distance(mat.data.row(t.i), mat.top.row(t.lca_ij), bank.g);
        double db = hyperbolic_distance(mat.data.row(t.i), mat.top.row(t.lca_ijk), bank.g);
        if (da < db) ++rep.n_consistent;
    }
    rep.fraction = rep.n_triplets == 0
                       ? 0.0
                       : static_cast<double>(rep.n_consistent) / static_cast<double>(rep.n_triplets);
    return rep;
}

} // namespace phn
