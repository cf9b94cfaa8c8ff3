#pragma once

#include <span>

#include "phn/mat.hpp"

namespace phn {

struct GeometryConfig {
    double c = 0.01;       // curvature, > 0; ball radius is 1/sqrt(c)
    double eps_ball = 1e-5; // boundary clearance, in (0, 0.01]
    std::size_t dim = 160;  // feature dimension D

    void validate() const;
};

// A point strictly inside the curvature-c ball: sqrt(c)*|coords| <= 1 - eps_ball
// after any projecting operation. Produced by project_to_ball / exp_map0;
// plain vectors elsewhere are tangent-space quantities.
struct PoincarePoint {
    Vec coords;
};

bool in_ball(std::span<const double> p, const GeometryConfig& g);

// Radially rescales v into the ball: v * min(1, (1 - eps_ball)/(sqrt(c)|v|)).
// Interior inputs are returned unchanged bit-for-bit.
Vec project_to_ball(std::span<const double> v, const GeometryConfig& g);

// exp_0^c(v) = tanh(sqrt(c)|v|) * v / (sqrt(c)|v|), continuous at v = 0,
// then clipped to the eps_ball guard band.
Vec exp_map0(std::span<const double> v, const GeometryConfig& g);

// Inverse of exp_map0 (before clipping): artanh(sqrt(c)|p|) * p / (sqrt(c)|p|).
Vec log_map0(std::span<const double> p, const GeometryConfig& g);

// Curvature-scaled Poincare distance,
//   d(u,v) = (1/sqrt(c)) * arcosh(1 + 2c|u-v|^2 / ((1-c|u|^2)(1-c|v|^2))),
// which reduces to the unit-ball formula at c = 1.
double hyperbolic_distance(std::span<const double> u, std::span<const double> v,
                           const GeometryConfig& g);

// Partial derivatives of hyperbolic_distance w.r.t. u and v. Returns false
// and zeros the outputs when u == v exactly (the subgradient rule); the
// throwing wrapper below is the strict variant.
bool try_dist_grad(std::span<const double> u, std::span<const double> v,
                   const GeometryConfig& g, std::span<double> grad_u,
                   std::span<double> grad_v);

// Throws ZeroDistanceGradient at exact coincidence.
void dist_grad(std::span<const double> u, std::span<const double> v,
               const GeometryConfig& g, std::span<double> grad_u,
               std::span<double> grad_v);

// Vector-Jacobian products used to backpropagate through the maps.
// exp_map0_vjp accounts for the eps_ball clip branch of exp_map0.
Vec exp_map0_vjp(std::span<const double> v, std::span<const double> gbar,
                 const GeometryConfig& g);
Vec project_to_ball_vjp(std::span<const double> v, std::span<const double> gbar,
                        const GeometryConfig& g);

// Batched distances, entry (i,j) = d(A_i, B_j). OpenMP-parallel over entries;
// bit-identical to the scalar op at any thread count because entries are
// independent.
Mat pairwise_distances(const Mat& A, const Mat& B, const GeometryConfig& g);

namespace reference {
// Plain serial loop kept as the comparison baseline for tests and the
// kernel benchmark.
Mat pairwise_distances(const Mat& A, const Mat& B, const GeometryConfig& g);
} // namespace reference

} // namespace phn
