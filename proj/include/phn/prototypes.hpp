#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "phn/geometry.hpp"
#include "phn/rng.hpp"

namespace phn {

// Tangent-space parameters for the learnable prototypes. The first num_bona
// rows of theta_data are class 0 (bonafide), the next num_spoof rows class 1.
// Ball points are obtained through exp_map0, so a Euclidean optimizer keeps
// them on-manifold.
struct PrototypeBank {
    Mat theta_data;            // (K_b + K_s) x D
    std::vector<int> class_of; // 0 = bonafide, 1 = spoof
    Mat theta_top;             // K_top x D
    GeometryConfig g;
    std::size_t num_bona = 0;
    std::size_t num_spoof = 0;

    std::size_t num_data() const { return num_bona + num_spoof; }
    void validate() const;
};

// theta ~ iid normal(0, sigma^2); prototypes start near the origin.
PrototypeBank make_bank(std::size_t num_bona, std::size_t num_spoof, std::size_t num_top,
                        const GeometryConfig& g, Rng& rng, double init_sigma = 0.01);

struct MaterializedBank {
    Mat data; // ball points, one row per data prototype
    Mat top;  // ball points, one row per top prototype
};

MaterializedBank materialize(const PrototypeBank& bank);

// A paired sample: the embedded original, its embedded augmentation, and the
// class label (0 = bonafide, 1 = spoof). Coordinates are ball points.
struct LabeledEmbedding {
    Vec z;
    Vec z_aug;
    int y = 0;
};

// Index of the closest prototype of the given class; ties broken by lowest
// index. The Mat overload works on pre-materialized points.
std::size_t nearest_prototype(std::span<const double> z, const Mat& data_points,
                              const std::vector<int>& class_of, int class_filter,
                              const GeometryConfig& g);
std::size_t nearest_prototype(std::span<const double> z, const PrototypeBank& bank,
                              int class_filter);

// Per-sample nearest same-class prototype indices (the k of the losses below).
std::vector<std::size_t> nearest_same_class(const std::vector<LabeledEmbedding>& batch,
                                            const PrototypeBank& bank,
                                            const MaterializedBank& mat);

struct ProtoLoss {
    double value = 0.0;
    Mat d_z;     // batch x D, gradient w.r.t. original embeddings
    Mat d_theta; // (K_b+K_s) x D, gradient w.r.t. theta_data
};

struct AugLoss {
    double value = 0.0;
    Mat d_z;
    Mat d_zaug;
    Mat d_theta;
};

struct PplLoss {
    double value = 0.0;
    Mat d_z;
    Mat d_zaug;
    Mat d_theta;
};

// Softmax cross-entropy over negated distances: the numerator uses the
// nearest same-class prototype, the denominator runs over every data
// prototype of both classes.
ProtoLoss loss_proto(const std::vector<LabeledEmbedding>& batch, const PrototypeBank& bank,
                     const std::vector<std::size_t>& nearest);
ProtoLoss loss_proto(const std::vector<LabeledEmbedding>& batch, const PrototypeBank& bank);

// Alignment of each augmentation with its original: d(z, z_aug) plus the
// absolute gap between their distances to the prototype selected from the
// original z.
AugLoss loss_aug(const std::vector<LabeledEmbedding>& batch, const PrototypeBank& bank,
                 const std::vector<std::size_t>& nearest);
AugLoss loss_aug(const std::vector<LabeledEmbedding>& batch, const PrototypeBank& bank);

PplLoss loss_ppl(const std::vector<LabeledEmbedding>& batch, const PrototypeBank& bank);

// Class-balanced batch composition: round(B*K_b/(K_b+K_s)) bonafide indices
// (round half up) and B minus that many spoof indices, sampled without
// replacement when the pool allows it.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
balanced_batch_indices(const std::vector<int>& labels, std::size_t batch_size,
                       std::size_t num_bona_protos, std::size_t num_spoof_protos, Rng& rng);

} // namespace phn
