#pragma once

#include <cstddef>
#include <vector>

#include "phn/prototypes.hpp"

namespace phn {

struct HslConfig {
    std::size_t neighbors = 3;        // K of the K-nearest-neighbor positive set
    double margin = 0.1;              // delta
    std::size_t triplets_per_step = 0; // 0 = one per data prototype
    bool gumbel = true;

    void validate(std::size_t num_data_protos) const;
};

// Anchor/positive/negative over flattened data prototypes plus the two
// selected ancestor indices into the top prototypes.
struct Triplet {
    std::size_t i = 0, j = 0, k = 0;
    std::size_t lca_ij = 0, lca_ijk = 0;
};

// K nearest data prototypes per data prototype (labels ignored), self
// excluded, ties by index.
std::vector<std::vector<std::size_t>> knn_neighbors(const Mat& points, const GeometryConfig& g,
                                                    std::size_t K);
std::vector<std::vector<std::size_t>> knn_neighbors(const PrototypeBank& bank, std::size_t K);

// Anchors are drawn as shuffled passes over all prototypes (each anchor is
// marginally uniform); j uniform over R_K(i), k uniform over the complement
// of R_K(i) plus the anchor itself. LCA fields are left unset.
std::vector<Triplet> sample_triplets(const PrototypeBank& bank, const HslConfig& cfg, Rng& rng);

// argmax over top prototypes of exp(-max{d(a,rho), d(b,rho)}) + gumbel noise;
// with noise off this is the deterministic minimizer of the max distance,
// ties by lowest index. One Gumbel draw per candidate, in index order.
std::size_t select_lca(std::span<const double> a, std::span<const double> b,
                       const Mat& top_points, const GeometryConfig& g, Rng& rng,
                       bool gumbel_enabled);

// sample_triplets + both LCA selections per triplet.
std::vector<Triplet> plan_triplets(const PrototypeBank& bank, const MaterializedBank& mat,
                                   const HslConfig& cfg, Rng& rng);

struct HslLoss {
    double value = 0.0;
    Mat d_theta_data;
    Mat d_theta_top;
};

// Margin hinges over the planned triplets. Selection is fixed input; no
// gradient flows through the argmax.
HslLoss loss_hsl(const std::vector<Triplet>& triplets, const PrototypeBank& bank,
                 const HslConfig& cfg);

struct LcaReport {
    std::size_t n_triplets = 0;
    std::size_t n_consistent = 0;
    double fraction = 0.0;
};

// Fraction of planned triplets whose selected rho_ij is closer to the anchor
// than rho_ijk.
LcaReport lca_consistency_report(const PrototypeBank& bank, const HslConfig& cfg, Rng& rng);

} // namespace phn
