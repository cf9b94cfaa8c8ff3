#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "phn/prototypes.hpp"

namespace phn {

// Pairwise hyperbolic distances between feature dimensions: each length-B
// column of the batch is radially projected into the curvature-c ball of
// dimension B, then entry (r,s) is the distance between the projected
// columns r and s. Symmetric, zero diagonal.
struct SimilarityMatrix {
    Mat values; // D x D
};

// Element-wise selection of the highest-variance positions between an
// original and an augmented similarity matrix.
struct SimilarityMask {
    std::size_t dim = 0;
    double ratio = 0.0;
    std::vector<std::uint32_t> ones; // linear positions r*D + s, selection order
    bool contains(std::size_t r, std::size_t s) const;
};

SimilarityMatrix dimension_similarity_matrix(const Mat& batch, const GeometryConfig& g);

namespace reference {
// Serial baseline for tests and the kernel benchmark.
SimilarityMatrix dimension_similarity_matrix(const Mat& batch, const GeometryConfig& g);
} // namespace reference

// Mask of the floor(D^2 * ratio) largest-variance entries; ties broken by
// (row, column) lexicographic order.
SimilarityMask variance_mask(const SimilarityMatrix& sigma_org, const SimilarityMatrix& sigma_aug,
                             double ratio);

struct PfwLoss {
    double value = 0.0;
    Mat d_z;    // batch x D
    Mat d_zaug; // batch x D
    std::vector<std::string> warnings;
};

// Per class: similarity matrices from that class's originals and
// augmentations, one mask (ratio_bona for class 0, ratio_spoof for class 1),
// then the mean of the masked entries of both matrices. Masks are constants
// w.r.t. the gradient. A class absent from the batch contributes zero and a
// warning.
PfwLoss loss_pfw(const std::vector<LabeledEmbedding>& batch, const GeometryConfig& g,
                 double ratio_bona, double ratio_spoof);

// Same loss with pre-computed masks (one per class that is present); used by
// the finite-difference harness, which must hold the discrete selection
// fixed.
struct PfwPlan {
    // index 0 = bonafide mask, 1 = spoof mask; empty `ones` with dim==0 marks
    // an absent class
    SimilarityMask masks[2];
};
PfwPlan plan_pfw(const std::vector<LabeledEmbedding>& batch, const GeometryConfig& g,
                 double ratio_bona, double ratio_spoof);
PfwLoss loss_pfw(const std::vector<LabeledEmbedding>& batch, const GeometryConfig& g,
                 const PfwPlan& plan);

} // namespace phn
