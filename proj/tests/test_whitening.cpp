#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "phn/errors.hpp"
#include "phn/rng.hpp"
#include "phn/whitening.hpp"

using namespace phn;

namespace {

std::vector<LabeledEmbedding> random_batch(std::size_t n, std::size_t d, std::uint64_t seed,
                                           double aug_jitter = 0.2) {
    Rng rng(seed);
    GeometryConfig g{1.0, 1e-5, d};
    std::vector<LabeledEmbedding> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec v(d), w(d);
        for (std::size_t k = 0; k < d; ++k) {
            v[k] = rng.gaussian() * 0.5;
            w[k] = v[k] + rng.gaussian() * aug_jitter;
        }
        out[i].z = exp_map0(v, g);
        out[i].z_aug = exp_map0(w, g);
        out[i].y = static_cast<int>(i % 2);
    }
    return out;
}

} // namespace

TEST_CASE("similarity matrix: symmetry, zero diagonal, identical dimensions") {
    GeometryConfig g{0.01, 1e-5, 3};
    Mat Z(4, 3);
    Rng rng(3);
    for (auto& x : Z.a) x = rng.uniform(-2.0, 2.0);
    // make dimensions 0 and 2 identical
    for (std::size_t t = 0; t < 4; ++t) Z(t, 2) = Z(t, 0);
    auto S = dimension_similarity_matrix(Z, g);
    CHECK(S.values.rows == 3);
    for (std::size_t r = 0; r < 3; ++r) {
        CHECK(S.values(r, r) == 0.0);
        for (std::size_t s = 0; s < 3; ++s) CHECK(S.values(r, s) == S.values(s, r));
    }
    CHECK(S.values(0, 2) == 0.0);
    CHECK(S.values(0, 1) > 0.0);
}

TEST_CASE("similarity matrix D=1 and error cases") {
    GeometryConfig g{1.0, 1e-5, 1};
    Mat Z(3, 1);
    Z(0, 0) = 0.1;
    Z(1, 0) = 0.5;
    Z(2, 0) = -0.2;
    auto S = dimension_similarity_matrix(Z, g);
    CHECK(S.values.rows == 1);
    CHECK(S.values(0, 0) == 0.0);

    Mat one(1, 4);
    CHECK_THROWS_AS(dimension_similarity_matrix(one, g), InvalidBatch);
}

TEST_CASE("similarity matrix matches the documented scalar composition") {
    GeometryConfig g{1.0, 1e-5, 2};
    Mat Z(2, 2);
    Z(0, 0) = 3.0;
    Z(0, 1) = -1.0;
    Z(1, 0) = 0.25;
    Z(1, 1) = 2.0;
    auto S = dimension_similarity_matrix(Z, g);
    Vec col0{3.0, 0.25}, col1{-1.0, 2.0};
    Vec p0 = project_to_ball(col0, g);
    Vec p1 = project_to_ball(col1, g);
    CHECK(S.values(0, 1) == hyperbolic_distance(p0, p1, g));
    // the omp kernel agrees with the serial reference bit-for-bit
    auto R = reference::dimension_similarity_matrix(Z, g);
    CHECK(R.values.a == S.values.a);
}

TEST_CASE("variance_mask counts, ties, and dominance") {
    // degenerate all-tie case documents the lexicographic rule
    SimilarityMatrix a, b;
    a.values = Mat(4, 4);
    b.values = Mat(4, 4);
    auto mask = variance_mask(a, b, 0.25);
    REQUIRE(mask.ones.size() == 4);
    CHECK(mask.ones == std::vector<std::uint32_t>{0, 1, 2, 3});

    // single perturbed entry wins a 1/D^2 mask
    b.values(2, 1) = 0.7;
    auto one = variance_mask(a, b, 1.0 / 16.0);
    REQUIRE(one.ones.size() == 1);
    CHECK(one.ones[0] == 2 * 4 + 1);

    // production-scale arithmetic
    SimilarityMatrix big1, big2;
    big1.values = Mat(160, 160);
    big2.values = Mat(160, 160);
    CHECK(variance_mask(big1, big2, 0.003).ones.size() == 76);
    CHECK(variance_mask(big1, big2, 0.0006).ones.size() == 15);

    SimilarityMatrix odd;
    odd.values = Mat(3, 3);
    CHECK_THROWS_AS(variance_mask(a, odd, 0.1), InvalidInput);
}

TEST_CASE("variance_mask selects a dominating set") {
    Rng rng(17);
    GeometryConfig g{1.0, 1e-5, 6};
    Mat Zo(5, 6), Za(5, 6);
    for (auto& x : Zo.a) x = rng.uniform(-2.0, 2.0);
    for (std::size_t i = 0; i < Za.a.size(); ++i) Za.a[i] = Zo.a[i] + rng.gaussian() * 0.3;
    auto so = dimension_similarity_matrix(Zo, g);
    auto sa = dimension_similarity_matrix(Za, g);
    auto mask = variance_mask(so, sa, 0.2);

    auto variance = [&](std::size_t p) {
        double mu = 0.5 * (so.values.a[p] + sa.values.a[p]);
        double d1 = so.values.a[p] - mu, d2 = sa.values.a[p] - mu;
        return 0.5 * (d1 * d1 + d2 * d2);
    };
    std::set<std::uint32_t> selected(mask.ones.begin(), mask.ones.end());
    double min_sel = 1e300, max_unsel = -1.0;
    for (std::size_t p = 0; p < 36; ++p) {
        if (selected.count(static_cast<std::uint32_t>(p)))
            min_sel = std::min(min_sel, variance(p));
        else
            max_unsel = std::max(max_unsel, variance(p));
    }
    CHECK(min_sel >= max_unsel);
}

TEST_CASE("loss_pfw closed forms") {
    GeometryConfig g{1.0, 1e-5, 4};
    auto batch = random_batch(8, 4, 21);

    // zero ratios -> empty masks -> zero loss
    auto zero = loss_pfw(batch, g, 0.0, 0.0);
    CHECK(zero.value == 0.0);
    for (double v : zero.d_z.a) CHECK(v == 0.0);

    // z_aug == z makes the org and aug terms equal
    auto same = batch;
    for (auto& s : same) s.z_aug = s.z;
    auto res = loss_pfw(same, g, 0.25, 0.25);
    double direct = 0.0;
    for (int y = 0; y < 2; ++y) {
        Mat Z(4, 4);
        std::size_t t = 0;
        for (const auto& s : same)
            if (s.y == y) {
                std::copy(s.z.begin(), s.z.end(), Z.row(t).begin());
                ++t;
            }
        auto sm = dimension_similarity_matrix(Z, g);
        auto mask = variance_mask(sm, sm, 0.25);
        double mean = 0.0;
        for (auto p : mask.ones) mean += sm.values.a[p];
        mean /= static_cast<double>(mask.ones.size());
        direct += 2.0 * mean;
    }
    CHECK(res.value == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("loss_pfw matches the scratch composition on a random 2-class batch") {
    GeometryConfig g{1.0, 1e-5, 5};
    auto batch = random_batch(10, 5, 33);
    double kb = 0.2, ks = 0.12;
    auto res = loss_pfw(batch, g, kb, ks);

    double want = 0.0;
    for (int y = 0; y < 2; ++y) {
        std::vector<std::size_t> idx;
        for (std::size_t n = 0; n < batch.size(); ++n)
            if (batch[n].y == y) idx.push_back(n);
        Mat Zo(idx.size(), 5), Za(idx.size(), 5);
        for (std::size_t t = 0; t < idx.size(); ++t) {
            std::copy(batch[idx[t]].z.begin(), batch[idx[t]].z.end(), Zo.row(t).begin());
            std::copy(batch[idx[t]].z_aug.begin(), batch[idx[t]].z_aug.end(), Za.row(t).begin());
        }
        auto so = dimension_similarity_matrix(Zo, g);
        auto sa = dimension_similarity_matrix(Za, g);
        auto mask = variance_mask(so, sa, y == 0 ? kb : ks);
        if (mask.ones.empty()) continue;
        double mo = 0.0, ma = 0.0;
        for (auto p : mask.ones) {
            mo += so.values.a[p];
            ma += sa.values.a[p];
        }
        want += (mo + ma) / static_cast<double>(mask.ones.size());
    }
    CHECK(res.value == doctest::Approx(want).epsilon(1e-12));
    CHECK(res.value >= 0.0);
}

TEST_CASE("loss_pfw warns when a class is absent and rejects singletons") {
    GeometryConfig g{1.0, 1e-5, 3};
    auto batch = random_batch(6, 3, 40);
    for (auto& s : batch) s.y = 0;
    auto res = loss_pfw(batch, g, 0.2, 0.2);
    CHECK(res.warnings.size() == 1);
    CHECK(res.value >= 0.0);

    batch[5].y = 1; // one lonely spoof sample
    CHECK_THROWS_AS(loss_pfw(batch, g, 0.2, 0.2), InvalidBatch);
}

TEST_CASE("loss_pfw gradients match finite differences with a frozen mask") {
    const double h = 1e-6;
    GeometryConfig g{1.0, 1e-5, 4};
    for (std::uint64_t seed : {3u, 14u, 15u}) {
        auto batch = random_batch(8, 4, seed);
        auto plan = plan_pfw(batch, g, 0.3, 0.3);
        auto res = loss_pfw(batch, g, plan);
        // floor of 1 in the denominator: clipped columns sit on the guard
        // radius where fp jitter in the norm is amplified by the metric, so
        // tiny components are held to an absolute tolerance instead
        auto rel = [](double a, double b) {
            return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
        };
        for (std::size_t n = 0; n < batch.size(); ++n) {
            for (std::size_t c = 0; c < 4; ++c) {
                auto bp = batch, bm = batch;
                bp[n].z[c] += h;
                bm[n].z[c] -= h;
                double fd = (loss_pfw(bp, g, plan).value - loss_pfw(bm, g, plan).value) / (2 * h);
                CHECK(rel(fd, res.d_z(n, c)) < 1e-4);

                bp = batch;
                bm = batch;
                bp[n].z_aug[c] += h;
                bm[n].z_aug[c] -= h;
                fd = (loss_pfw(bp, g, plan).value - loss_pfw(bm, g, plan).value) / (2 * h);
                CHECK(rel(fd, res.d_zaug(n, c)) < 1e-4);
            }
        }
    }
}

TEST_CASE("loss_pfw determinism: identical inputs give identical masks and loss") {
    GeometryConfig g{1.0, 1e-5, 4};
    auto batch = random_batch(8, 4, 77);
    auto p1 = plan_pfw(batch, g, 0.25, 0.125);
    auto p2 = plan_pfw(batch, g, 0.25, 0.125);
    CHECK(p1.masks[0].ones == p2.masks[0].ones);
    CHECK(p1.masks[1].ones == p2.masks[1].ones);
    CHECK(loss_pfw(batch, g, p1).value == loss_pfw(batch, g, p2).value);
}

TEST_CASE("decreasing the masked similarity entries never increases the loss") {
    // keep column norms well inside the ball so scaling toward the origin
    // shrinks every pairwise distance
    GeometryConfig g{1.0, 1e-5, 3};
    Rng rng(90);
    std::vector<LabeledEmbedding> batch(6);
    for (std::size_t n = 0; n < 6; ++n) {
        batch[n].z = Vec(3);
        batch[n].z_aug = Vec(3);
        for (std::size_t c = 0; c < 3; ++c) {
            batch[n].z[c] = rng.uniform(-0.25, 0.25);
            batch[n].z_aug[c] = rng.uniform(-0.25, 0.25);
        }
        batch[n].y = static_cast<int>(n % 2);
    }
    auto plan = plan_pfw(batch, g, 0.5, 0.5);
    double before = loss_pfw(batch, g, plan).value;
    auto shrunk = batch;
    for (auto& s : shrunk) {
        for (auto& x : s.z) x *= 0.5;
        for (auto& x : s.z_aug) x *= 0.5;
    }
    double after = loss_pfw(shrunk, g, plan).value;
    CHECK(after <= before);
}
