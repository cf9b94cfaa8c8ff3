#include "phn/whitening.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "phn/errors.hpp"
#include "phn/threading.hpp"

namespace phn {

bool SimilarityMask::contains(std::size_t r, std::size_t s) const {
    std::uint32_t pos = static_cast<std::uint32_t>(r * dim + s);
    return std::find(ones.begin(), ones.end(), pos) != ones.end();
}

namespace {

// One projected column per feature dimension: row r of the result is the
// length-B vector of dimension r across the batch, rescaled into the ball.
Mat projected_columns(const Mat& batch, const GeometryConfig& g) {
    Mat cols(batch.cols, batch.rows);
    for (std::size_t r = 0; r < batch.cols; ++r) {
        Vec raw(batch.rows);
        for (std::size_t t = 0; t < batch.rows; ++t) raw[t] = batch(t, r);
        Vec p = project_to_ball(raw, g);
        std::copy(p.begin(), p.end(), cols.row(r).begin());
    }
    return cols;
}

SimilarityMatrix simmatrix_from_columns(const Mat& cols, const GeometryConfig& g, bool parallel) {
    const std::size_t D = cols.rows;
    SimilarityMatrix out;
    out.values = Mat(D, D);
    const long n = static_cast<long>(D);
#pragma omp parallel for schedule(dynamic) if (parallel && threads() != 1)
    for (long r = 0; r < n; ++r) {
        for (std::size_t s = static_cast<std::size_t>(r) + 1; s < D; ++s) {
            double d = hyperbolic_distance(cols.row(static_cast<std::size_t>(r)), cols.row(s), g);
            out.values(static_cast<std::size_t>(r), s) = d;
            out.values(s, static_cast<std::size_t>(r)) = d;
        }
    }
    return out;
}

} // namespace

SimilarityMatrix dimension_similarity_matrix(const Mat& batch, const GeometryConfig& g) {
    if (batch.rows < 2) throw InvalidBatch("dimension_similarity_matrix: need a batch of >= 2");
    return simmatrix_from_columns(projected_columns(batch, g), g, true);
}

namespace reference {
SimilarityMatrix dimension_similarity_matrix(const Mat& batch, const GeometryConfig& g) {
    if (batch.rows < 2) throw InvalidBatch("dimension_similarity_matrix: need a batch of >= 2");
    return simmatrix_from_columns(projected_columns(batch, g), g, false);
}
} // namespace reference

SimilarityMask variance_mask(const SimilarityMatrix& sigma_org, const SimilarityMatrix& sigma_aug,
                             double ratio) {
    const Mat& so = sigma_org.values;
    const Mat& sa = sigma_aug.values;
    if (!so.same_shape(sa) || so.rows != so.cols)
        throw InvalidInput("variance_mask: shape mismatch");
    if (!(ratio >= 0.0 && ratio <= 1.0)) throw InvalidInput("variance_mask: ratio must be in [0,1]");
    const std::size_t D = so.rows;
    const std::size_t total = D * D;

    Vec var(total);
    for (std::size_t p = 0; p < total; ++p) {
        double mu = 0.5 * (so.a[p] + sa.a[p]);
        double d1 = so.a[p] - mu;
        double d2 = sa.a[p] - mu;
        var[p] = 0.5 * (d1 * d1 + d2 * d2);
    }

    std::size_t m = static_cast<std::size_t>(std::floor(static_cast<double>(total) * ratio));
    std::vector<std::uint32_t> order(total);
    std::iota(order.begin(), order.end(), 0u);
    // highest variance first, ties by (row, column) lexicographic order
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (var[a] != var[b]) return var[a] > var[b];
        return a < b;
    });

    SimilarityMask mask;
    mask.dim = D;
    mask.ratio = ratio;
    mask.ones.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
    return mask;
}

namespace {

struct ClassSplit {
    std::vector<std::size_t> idx[2];
};

ClassSplit split_by_class(const std::vector<LabeledEmbedding>& batch) {
    ClassSplit s;
    for (std::size_t n = 0; n < batch.size(); ++n) {
        int y = batch[n].y;
        if (y != 0 && y != 1) throw InvalidBatch("loss_pfw: labels must be 0 or 1");
        s.idx[y].push_back(n);
    }
    return s;
}

Mat gather_rows(const std::vector<LabeledEmbedding>& batch, const std::vector<std::size_t>& idx,
                bool aug) {
    const std::size_t D = batch[idx[0]].z.size();
    Mat out(idx.size(), D);
    for (std::size_t t = 0; t < idx.size(); ++t) {
        const Vec& src = aug ? batch[idx[t]].z_aug : batch[idx[t]].z;
        if (src.size() != D) throw InvalidBatch("loss_pfw: inconsistent dimensions");
        std::copy(src.begin(), src.end(), out.row(t).begin());
    }
    return out;
}

// Mean of the masked similarity entries plus its gradient, scattered back to
// the per-sample coordinates of the sub-batch.
double masked_mean_with_grad(const Mat& sub, const SimilarityMask& mask, const GeometryConfig& g,
                             const std::vector<std::size_t>& idx, Mat& d_out) {
    const std::size_t D = sub.cols;
    const std::size_t B = sub.rows;
    if (mask.ones.empty()) return 0.0;
    Mat cols = projected_columns(sub, g);
    Mat raw(D, B);
    for (std::size_t r = 0; r < D; ++r)
        for (std::size_t t = 0; t < B; ++t) raw(r, t) = sub(t, r);

    const double w = 1.0 / static_cast<double>(mask.ones.size());
    double mean = 0.0;
    Vec gu(B), gv(B);
    for (std::uint32_t pos : mask.ones) {
        std::size_t r = pos / D, s = pos % D;
        if (r == s) continue; // zero diagonal, zero gradient
        mean += w * hyperbolic_distance(cols.row(r), cols.row(s), g);
        if (!try_dist_grad(cols.row(r), cols.row(s), g, gu, gv)) continue;
        for (double& x : gu) x *= w;
        for (double& x : gv) x *= w;
        Vec br = project_to_ball_vjp(raw.row(r), gu, g);
        Vec bs = project_to_ball_vjp(raw.row(s), gv, g);
        for (std::size_t t = 0; t < B; ++t) {
            d_out(idx[t], r) += br[t];
            d_out(idx[t], s) += bs[t];
        }
    }
    return mean;
}

} // namespace

PfwPlan plan_pfw(const std::vector<LabeledEmbedding>& batch, const GeometryConfig& g,
                 double ratio_bona, double ratio_spoof) {
    if (batch.empty()) throw InvalidBatch("loss_pfw: empty batch");
    auto split = split_by_class(batch);
    PfwPlan plan;
    for (int y = 0; y < 2; ++y) {
        const auto& idx = split.idx[y];
        if (idx.empty()) continue;
        if (idx.size() < 2)
            throw InvalidBatch("loss_pfw: a present class needs at least 2 samples");
        Mat zo = gather_rows(batch, idx, false);
        Mat za = gather_rows(batch, idx, true);
        auto so = dimension_similarity_matrix(zo, g);
        auto sa = dimension_similarity_matrix(za, g);
        plan.masks[y] = variance_mask(so, sa, y == 0 ? ratio_bona : ratio_spoof);
    }
    return plan;
}

PfwLoss loss_pfw(const std::vector<LabeledEmbedding>& batch, const GeometryConfig& g,
                 const PfwPlan& plan) {
    if (batch.empty()) throw InvalidBatch("loss_pfw: empty batch");
    auto split = split_by_class(batch);
    const std::size_t D = batch[0].z.size();
    PfwLoss out;
    out.d_z = Mat(batch.size(), D);
    out.d_zaug = Mat(batch.size(), D);
    for (int y = 0; y < 2; ++y) {
        const auto& idx = split.idx[y];
        if (idx.empty()) {
            out.warnings.push_back(std::string("class ") + std::to_string(y) +
                                   " absent from batch; PFW term contributes 0");
            continue;
        }
        if (idx.size() < 2)
            throw InvalidBatch("loss_pfw: a present class needs at least 2 samples");
        const SimilarityMask& mask = plan.masks[y];
        if (mask.dim != D && mask.dim != 0)
            throw InvalidInput("loss_pfw: plan mask dimension mismatch");
        Mat zo = gather_rows(batch, idx, false);
        Mat za = gather_rows(batch, idx, true);
        out.value += masked_mean_with_grad(zo, mask, g, idx, out.d_z);
        out.value += masked_mean_with_grad(za, mask, g, idx, out.d_zaug);
    }
    return out;
}

PfwLoss loss_pfw(const std::vector<LabeledEmbedding>& batch, const GeometryConfig& g,
                 double ratio_bona, double ratio_spoof) {
    return loss_pfw(batch, g, plan_pfw(batch, g, ratio_bona, ratio_spoof));
}

} // namespace phn
