#include "phn/geometry.hpp"

#include <cmath>

#include "phn/errors.hpp"
#include "phn/threading.hpp"

namespace phn {

void GeometryConfig::validate() const {
    if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("curvature must be positive");
    if (!(eps_ball > 0.0) || eps_ball > 0.01) throw ConfigError("eps_ball must be in (0, 0.01]");
    if (dim < 1) throw ConfigError("dim must be >= 1");
}

bool in_ball(std::span<const double> p, const GeometryConfig& g) {
    return std::sqrt(g.c) * norm(p) < 1.0;
}

Vec project_to_ball(std::span<const double> v, const GeometryConfig& g) {
    if (!all_finite(v)) throw InvalidInput("project_to_ball: non-finite input");
    double sc = std::sqrt(g.c);
    double n = norm(v);
    double limit = 1.0 - g.eps_ball;
    if (sc * n <= limit) return Vec(v.begin(), v.end());
    Vec out(v.size());
    // the 1e-11 margin absorbs norm rounding so the guard band holds without
    // a direction-dependent fixup step
    double scale = limit * (1.0 - 1e-11) / (sc * n);
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * scale;
    return out;
}

namespace {

// tanh(t)/t, accurate through t = 0.
double tanh_ratio(double t) {
    if (t < 1e-8) return 1.0 - t * t / 3.0;
    return std::tanh(t) / t;
}

// g(t) = (t*sech^2(t) - tanh(t)) / t^3, the radial second factor of the
// exp_map0 Jacobian; -2/3 at t = 0.
double exp_jac_radial(double t) {
    if (t < 1e-4) return -2.0 / 3.0 + (8.0 / 15.0) * t * t;
    double th = std::tanh(t);
    double sech2 = 1.0 - th * th;
    return (t * sech2 - th) / (t * t * t);
}

// arcosh(1 + x) for x >= 0 without forming 1 + x, full precision near 0.
double arcosh1p(double x) {
    return std::log1p(x + std::sqrt(x * (x + 2.0)));
}

} // namespace

Vec exp_map0(std::span<const double> v, const GeometryConfig& g) {
    if (!all_finite(v)) throw InvalidInput("exp_map0: non-finite input");
    double sc = std::sqrt(g.c);
    double n = norm(v);
    if (n == 0.0) return Vec(v.size(), 0.0);
    double f = tanh_ratio(sc * n); // result = f * v, with sqrt(c)*|result| = tanh(sc*n)
    Vec out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = f * v[i];
    return project_to_ball(out, g);
}

Vec log_map0(std::span<const double> p, const GeometryConfig& g) {
    if (!all_finite(p)) throw InvalidInput("log_map0: non-finite input");
    double sc = std::sqrt(g.c);
    double n = norm(p);
    if (sc * n >= 1.0) throw InvalidInput("log_map0: point outside the ball");
    if (n == 0.0) return Vec(p.size(), 0.0);
    double t = sc * n;
    double f = std::atanh(t) / t;
    Vec out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = f * p[i];
    return out;
}

double hyperbolic_distance(std::span<const double> u, std::span<const double> v,
                           const GeometryConfig& g) {
    if (u.size() != v.size()) throw InvalidInput("hyperbolic_distance: dimension mismatch");
    double uu = squared_norm(u);
    double vv = squared_norm(v);
    double alpha = 1.0 - g.c * uu;
    double beta = 1.0 - g.c * vv;
    if (alpha <= 0.0 || beta <= 0.0)
        throw NumericalInstability("hyperbolic_distance: denominator underflow at the ball boundary");
    double dd = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        double t = u[i] - v[i];
        dd += t * t;
    }
    double x = 2.0 * g.c * dd / (alpha * beta);
    return arcosh1p(x) / std::sqrt(g.c);
}

bool try_dist_grad(std::span<const double> u, std::span<const double> v,
                   const GeometryConfig& g, std::span<double> grad_u,
                   std::span<double> grad_v) {
    std::size_t d = u.size();
    if (v.size() != d || grad_u.size() != d || grad_v.size() != d)
        throw InvalidInput("dist_grad: dimension mismatch");
    bool coincident = true;
    for (std::size_t i = 0; i < d; ++i) {
        if (u[i] != v[i]) {
            coincident = false;
            break;
        }
    }
    if (coincident) {
        for (std::size_t i = 0; i < d; ++i) grad_u[i] = grad_v[i] = 0.0;
        return false;
    }
    double uu = squared_norm(u);
    double vv = squared_norm(v);
    double alpha = 1.0 - g.c * uu;
    double beta = 1.0 - g.c * vv;
    if (alpha <= 0.0 || beta <= 0.0)
        throw NumericalInstability("dist_grad: denominator underflow at the ball boundary");
    double dd = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double t = u[i] - v[i];
        dd += t * t;
    }
    double x = 2.0 * g.c * dd / (alpha * beta); // z - 1
    // d = arcosh(z)/sqrt(c); dd/dz = 1/(sqrt(c) sqrt(z^2-1)), z^2-1 = x(x+2)
    double denom = std::sqrt(g.c) * std::sqrt(x * (x + 2.0));
    double s1 = 4.0 * g.c / (alpha * beta) / denom;
    double su = 4.0 * g.c * g.c * dd / (alpha * alpha * beta) / denom;
    double sv = 4.0 * g.c * g.c * dd / (alpha * beta * beta) / denom;
    for (std::size_t i = 0; i < d; ++i) {
        double diff = u[i] - v[i];
        grad_u[i] = s1 * diff + su * u[i];
        grad_v[i] = -s1 * diff + sv * v[i];
    }
    return true;
}

void dist_grad(std::span<const double> u, std::span<const double> v,
               const GeometryConfig& g, std::span<double> grad_u,
               std::span<double> grad_v) {
    if (!try_dist_grad(u, v, g, grad_u, grad_v))
        throw ZeroDistanceGradient("dist_grad: coincident points");
}

Vec exp_map0_vjp(std::span<const double> v, std::span<const double> gbar,
                 const GeometryConfig& g) {
    std::size_t d = v.size();
    if (gbar.size() != d) throw InvalidInput("exp_map0_vjp: dimension mismatch");
    double sc = std::sqrt(g.c);
    double n = norm(v);
    Vec out(d);
    if (n == 0.0) {
        // Jacobian is the identity at the origin.
        for (std::size_t i = 0; i < d; ++i) out[i] = gbar[i];
        return out;
    }
    double t = sc * n;
    double th = std::tanh(t);
    if (th > 1.0 - g.eps_ball) {
        // clip branch: p = (1-eps)/sqrt(c) * v/|v|, purely radial
        double a = (1.0 - g.eps_ball) / sc;
        double gv = dot(gbar, v) / (n * n);
        for (std::size_t i = 0; i < d; ++i) out[i] = (a / n) * (gbar[i] - gv * v[i]);
        return out;
    }
    double f = tanh_ratio(t);
    double radial = g.c * exp_jac_radial(t); // f'(|v|)/|v|
    double gv = dot(gbar, v);
    for (std::size_t i = 0; i < d; ++i) out[i] = f * gbar[i] + radial * gv * v[i];
    return out;
}

Vec project_to_ball_vjp(std::span<const double> v, std::span<const double> gbar,
                        const GeometryConfig& g) {
    std::size_t d = v.size();
    if (gbar.size() != d) throw InvalidInput("project_to_ball_vjp: dimension mismatch");
    double sc = std::sqrt(g.c);
    double n = norm(v);
    Vec out(d);
    if (sc * n <= 1.0 - g.eps_ball) {
        for (std::size_t i = 0; i < d; ++i) out[i] = gbar[i];
        return out;
    }
    double a = (1.0 - g.eps_ball) / sc;
    double gv = dot(gbar, v) / (n * n);
    for (std::size_t i = 0; i < d; ++i) out[i] = (a / n) * (gbar[i] - gv * v[i]);
    return out;
}

Mat pairwise_distances(const Mat& A, const Mat& B, const GeometryConfig& g) {
    if (A.cols != B.cols) throw InvalidInput("pairwise_distances: dimension mismatch");
    Mat out(A.rows, B.rows);
    const long n = static_cast<long>(A.rows);
#pragma omp parallel for schedule(static) if (threads() != 1)
    for (long i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < B.rows; ++j)
            out(static_cast<std::size_t>(i), j) =
                hyperbolic_distance(A.row(static_cast<std::size_t>(i)), B.row(j), g);
    }
    return out;
}

namespace reference {

Mat pairwise_distances(const Mat& A, const Mat& B, const GeometryConfig& g) {
    if (A.cols != B.cols) throw InvalidInput("pairwise_distances: dimension mismatch");
    Mat out(A.rows, B.rows);
    for (std::size_t i = 0; i < A.rows; ++i)
        for (std::size_t j = 0; j < B.rows; ++j)
            out(i, j) = hyperbolic_distance(A.row(i), B.row(j), g);
    return out;
}

} // namespace reference

} // namespace phn
