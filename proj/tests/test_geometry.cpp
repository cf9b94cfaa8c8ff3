#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "phn/errors.hpp"
#include "phn/geometry.hpp"
#include "phn/rng.hpp"
#include "phn/threading.hpp"

using namespace phn;

namespace {

// Independent distance oracle: the Mobius-addition route,
// d(u,v) = 2/sqrt(c) * artanh(sqrt(c) * |(-u) (+) v|).
Vec mobius_add(const Vec& u, const Vec& v, double c) {
    double uu = squared_norm(u), vv = squared_norm(v), uv = dot(u, v);
    double den = 1.0 + 2.0 * c * uv + c * c * uu * vv;
    double cu = (1.0 + 2.0 * c * uv + c * vv) / den;
    double cv = (1.0 - c * uu) / den;
    Vec out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = cu * u[i] + cv * v[i];
    return out;
}

double mobius_distance(const Vec& u, const Vec& v, double c) {
    Vec nu(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) nu[i] = -u[i];
    double r = std::sqrt(c) * norm(mobius_add(nu, v, c));
    return 2.0 / std::sqrt(c) * std::atanh(r);
}

Vec random_interior_point(Rng& rng, std::size_t d, const GeometryConfig& g, double max_radius = 0.9) {
    Vec v(d);
    for (auto& x : v) x = rng.gaussian();
    double n = norm(v);
    double r = max_radius * rng.uniform() / std::sqrt(g.c);
    for (auto& x : v) x *= r / n;
    return v;
}

} // namespace

TEST_CASE("project_to_ball basics") {
    GeometryConfig g{1.0, 1e-5, 2};
    CHECK(project_to_ball(Vec{0.0, 0.0}, g) == Vec{0.0, 0.0});
    // interior point comes back bit-for-bit
    Vec p{0.5, 0.0};
    CHECK(project_to_ball(p, g) == p);
    // exterior point lands on the guard radius
    Vec q = project_to_ball(Vec{2.0, 0.0}, g);
    CHECK(q[0] == doctest::Approx(0.99999).epsilon(1e-9));
    CHECK(q[1] == 0.0);
    CHECK_THROWS_AS(project_to_ball(Vec{std::nan(""), 0.0}, g), InvalidInput);
}

TEST_CASE("project_to_ball keeps 1e4 random inputs inside the guard band") {
    Rng rng(7);
    for (double c : {0.01, 1.0}) {
        GeometryConfig g{c, 1e-5, 8};
        for (int i = 0; i < 5000; ++i) {
            Vec v(8);
            for (auto& x : v) x = rng.gaussian() * 10.0;
            Vec p = project_to_ball(v, g);
            CHECK(std::sqrt(c) * norm(p) <= 1.0 - g.eps_ball);
        }
    }
}

TEST_CASE("exp_map0 matches the closed form") {
    GeometryConfig g{1.0, 1e-5, 2};
    CHECK(exp_map0(Vec{0.0, 0.0}, g) == Vec{0.0, 0.0});
    Vec p = exp_map0(Vec{1.0, 0.0}, g);
    CHECK(p[0] == doctest::Approx(std::tanh(1.0)).epsilon(1e-14));
    CHECK(p[1] == 0.0);
    // first-order behaviour at tiny norms
    Vec tiny{1e-6, 0.0};
    Vec q = exp_map0(tiny, g);
    CHECK(std::abs(q[0] - 1e-6) / 1e-6 < 1e-10);
}

TEST_CASE("exp_map0 output always satisfies the ball invariant") {
    Rng rng(11);
    for (double c : {0.01, 1.0}) {
        GeometryConfig g{c, 1e-5, 4};
        for (int i = 0; i < 5000; ++i) {
            Vec v(4);
            for (auto& x : v) x = rng.gaussian() * 20.0;
            Vec p = exp_map0(v, g);
            CHECK(std::sqrt(c) * norm(p) <= 1.0 - g.eps_ball);
        }
    }
}

TEST_CASE("log_map0 inverts exp_map0") {
    GeometryConfig g{1.0, 1e-5, 2};
    CHECK(log_map0(Vec{0.0, 0.0}, g) == Vec{0.0, 0.0});
    Vec v = log_map0(Vec{std::tanh(1.0), 0.0}, g);
    CHECK(v[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(log_map0(Vec{1.5, 0.0}, g), InvalidInput);

    Rng rng(13);
    for (double c : {0.01, 1.0}) {
        GeometryConfig gc{c, 1e-5, 6};
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            Vec p = random_interior_point(rng, 6, gc);
            Vec back = exp_map0(log_map0(p, gc), gc);
            double err = 0.0, ref = norm(p);
            for (std::size_t k = 0; k < p.size(); ++k) err = std::max(err, std::abs(back[k] - p[k]));
            if (ref > 0) worst = std::max(worst, err / ref);
        }
        CHECK(worst < 1e-9);
    }
}

TEST_CASE("hyperbolic_distance closed-form values") {
    GeometryConfig g{1.0, 1e-5, 2};
    Vec o{0.0, 0.0}, v{0.5, 0.0};
    CHECK(hyperbolic_distance(v, v, g) == 0.0);
    CHECK(hyperbolic_distance(o, v, g) == doctest::Approx(2.0 * std::atanh(0.5)).epsilon(1e-14));
    Vec u{0.3, 0.0}, w{0.0, 0.4};
    double d = hyperbolic_distance(u, w, g);
    CHECK(d == doctest::Approx(1.0891).epsilon(1e-4));
    CHECK(d == doctest::Approx(mobius_distance(u, w, 1.0)).epsilon(1e-12));
}

TEST_CASE("hyperbolic_distance agrees with the Mobius oracle") {
    Rng rng(17);
    for (double c : {0.01, 1.0}) {
        GeometryConfig g{c, 1e-5, 8};
        for (int i = 0; i < 1000; ++i) {
            Vec u = random_interior_point(rng, 8, g);
            Vec v = random_interior_point(rng, 8, g);
            double d1 = hyperbolic_distance(u, v, g);
            double d2 = mobius_distance(u, v, c);
            CHECK(std::abs(d1 - d2) < 1e-9);
        }
    }
}

TEST_CASE("metric axioms on random triples") {
    Rng rng(19);
    for (double c : {0.01, 1.0}) {
        GeometryConfig g{c, 1e-5, 5};
        for (int i = 0; i < 3000; ++i) {
            Vec u = random_interior_point(rng, 5, g);
            Vec v = random_interior_point(rng, 5, g);
            Vec w = random_interior_point(rng, 5, g);
            double duv = hyperbolic_distance(u, v, g);
            double dvu = hyperbolic_distance(v, u, g);
            CHECK(duv == dvu);
            CHECK(duv >= 0.0);
            double duw = hyperbolic_distance(u, w, g);
            double dvw = hyperbolic_distance(v, w, g);
            CHECK(duw <= duv + dvw + 1e-9);
        }
    }
}

TEST_CASE("curvature scaling: d_c(u,v) = d_1(sqrt(c)u, sqrt(c)v)/sqrt(c)") {
    Rng rng(23);
    GeometryConfig g1{1.0, 1e-5, 4};
    for (double c : {0.01, 0.25, 4.0}) {
        GeometryConfig gc{c, 1e-5, 4};
        for (int i = 0; i < 200; ++i) {
            Vec u = random_interior_point(rng, 4, gc);
            Vec v = random_interior_point(rng, 4, gc);
            Vec su(4), sv(4);
            for (int k = 0; k < 4; ++k) {
                su[k] = std::sqrt(c) * u[k];
                sv[k] = std::sqrt(c) * v[k];
            }
            double lhs = hyperbolic_distance(u, v, gc);
            double rhs = hyperbolic_distance(su, sv, g1) / std::sqrt(c);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        }
    }
}

TEST_CASE("distance at c=1 equals the verbatim unit-ball formula") {
    Rng rng(29);
    GeometryConfig g{1.0, 1e-5, 3};
    for (int i = 0; i < 200; ++i) {
        Vec u = random_interior_point(rng, 3, g);
        Vec v = random_interior_point(rng, 3, g);
        double dd = 0.0;
        for (int k = 0; k < 3; ++k) dd += (u[k] - v[k]) * (u[k] - v[k]);
        double arg = 1.0 + 2.0 * dd / ((1.0 - squared_norm(u)) * (1.0 - squared_norm(v)));
        double ref = std::acosh(arg);
        CHECK(hyperbolic_distance(u, v, g) == doctest::Approx(ref).epsilon(1e-10));
    }
}

TEST_CASE("dist_grad radial closed form") {
    GeometryConfig g{1.0, 1e-5, 2};
    Vec o{0.0, 0.0}, v{0.5, 0.0};
    Vec gu(2), gv(2);
    dist_grad(o, v, g, gu, gv);
    CHECK(gv[0] == doctest::Approx(8.0 / 3.0).epsilon(1e-12));
    CHECK(gv[1] == 0.0);
    CHECK_THROWS_AS(dist_grad(v, v, g, gu, gv), ZeroDistanceGradient);
}

TEST_CASE("dist_grad is symmetric under argument swap") {
    Rng rng(31);
    GeometryConfig g{1.0, 1e-5, 4};
    for (int i = 0; i < 100; ++i) {
        Vec u = random_interior_point(rng, 4, g);
        Vec v = random_interior_point(rng, 4, g);
        Vec gu(4), gv(4), hu(4), hv(4);
        dist_grad(u, v, g, gu, gv);
        dist_grad(v, u, g, hu, hv);
        for (int k = 0; k < 4; ++k) {
            CHECK(gu[k] == doctest::Approx(hv[k]).epsilon(1e-12));
            CHECK(gv[k] == doctest::Approx(hu[k]).epsilon(1e-12));
        }
    }
}

TEST_CASE("dist_grad matches central finite differences on 1000 pairs") {
    Rng rng(37);
    const double h = 1e-5;
    for (double c : {0.01, 1.0}) {
        GeometryConfig g{c, 1e-5, 4};
        for (int i = 0; i < 500; ++i) {
            Vec u = random_interior_point(rng, 4, g, 0.8);
            Vec v = random_interior_point(rng, 4, g, 0.8);
            Vec gu(4), gv(4);
            dist_grad(u, v, g, gu, gv);
            for (int k = 0; k < 4; ++k) {
                Vec up = u, um = u;
                up[k] += h;
                um[k] -= h;
                double fd = (hyperbolic_distance(up, v, g) - hyperbolic_distance(um, v, g)) / (2 * h);
                double scale = std::max({std::abs(fd), std::abs(gu[k]), 1e-6});
                CHECK(std::abs(fd - gu[k]) / scale < 1e-4);
            }
        }
    }
}

TEST_CASE("exp_map0_vjp and project_to_ball_vjp match finite differences") {
    Rng rng(41);
    const double h = 1e-6;
    for (double c : {0.01, 1.0}) {
        GeometryConfig g{c, 1e-5, 3};
        for (int i = 0; i < 200; ++i) {
            Vec v(3);
            // cover both the smooth branch and the clip branch
            double scale = (i % 2 == 0) ? 1.0 : 12.0 / std::sqrt(c);
            for (auto& x : v) x = rng.gaussian() * scale;
            Vec gbar(3);
            for (auto& x : gbar) x = rng.gaussian();
            Vec an = exp_map0_vjp(v, gbar, g);
            double t = std::sqrt(c) * norm(v);
            // skip points too close to the clip boundary for clean FD
            if (std::abs(std::tanh(t) - (1.0 - g.eps_ball)) < 1e-3) continue;
            for (int k = 0; k < 3; ++k) {
                Vec vp = v, vm = v;
                vp[k] += h;
                vm[k] -= h;
                double fp = dot(exp_map0(vp, g), gbar);
                double fm = dot(exp_map0(vm, g), gbar);
                double fd = (fp - fm) / (2 * h);
                CHECK(std::abs(fd - an[k]) / std::max({std::abs(fd), std::abs(an[k]), 1e-6}) < 1e-3);
            }
            Vec an2 = project_to_ball_vjp(v, gbar, g);
            if (std::abs(std::sqrt(c) * norm(v) - (1.0 - g.eps_ball)) < 1e-3) continue;
            for (int k = 0; k < 3; ++k) {
                Vec vp = v, vm = v;
                vp[k] += h;
                vm[k] -= h;
                double fd = (dot(project_to_ball(vp, g), gbar) - dot(project_to_ball(vm, g), gbar)) / (2 * h);
                CHECK(std::abs(fd - an2[k]) / std::max({std::abs(fd), std::abs(an2[k]), 1e-6}) < 1e-3);
            }
        }
    }
}

TEST_CASE("pairwise_distances matches scalar calls and the serial reference") {
    Rng rng(43);
    GeometryConfig g{0.01, 1e-5, 6};
    Mat A(3, 6), B(2, 6);
    for (std::size_t i = 0; i < 3; ++i) {
        Vec p = random_interior_point(rng, 6, g);
        for (int k = 0; k < 6; ++k) A(i, k) = p[k];
    }
    for (std::size_t i = 0; i < 2; ++i) {
        Vec p = random_interior_point(rng, 6, g);
        for (int k = 0; k < 6; ++k) B(i, k) = p[k];
    }
    Mat D = pairwise_distances(A, B, g);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(D(i, j) == hyperbolic_distance(A.row(i), B.row(j), g));

    Mat Dref = reference::pairwise_distances(A, B, g);
    CHECK(D.a == Dref.a);

    // diagonal of self-distances is exactly zero
    Mat S = pairwise_distances(A, A, g);
    for (std::size_t i = 0; i < 3; ++i) CHECK(S(i, i) == 0.0);

    Mat Z(1, 1);
    Z(0, 0) = 0.0;
    GeometryConfig g1{1.0, 1e-5, 1};
    Mat D0 = pairwise_distances(Z, Z, g1);
    CHECK(D0(0, 0) == 0.0);
}
