#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "phn/data.hpp"
#include "phn/hierarchy.hpp"
#include "phn/prototypes.hpp"
#include "phn/whitening.hpp"

namespace phn {

struct TrainConfig {
    GeometryConfig geometry{0.01, 1e-5, 160};
    std::size_t num_bona_protos = 10;  // K_b
    std::size_t num_spoof_protos = 6;  // K_s
    std::size_t num_top_protos = 256;  // K_top
    HslConfig hsl{3, 0.1, 0, true};
    double mask_ratio_bona = 0.003;
    double mask_ratio_spoof = 0.0006;
    std::size_t batch_size = 256;
    double lr_prototypes = 1e-3;
    double lr_projector = 1e-4;
    double lr_classifier = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t epochs = 10;
    std::uint64_t seed = 1;
    bool enable_ppl = true;
    bool enable_hsl = true;
    bool enable_pfw = true;
    bool cls_bias_enabled = true;
    bool cls_use_aug = false;   // include augmented samples in the BCE term
    double init_sigma = 0.01;   // prototype tangent init scale
    double aug_sigma = 0.3;     // only used when a dataset arrives unpaired

    void validate() const;
};

// JSON layering: built-in defaults < config file < --set overrides. Unknown
// keys are rejected at every layer.
std::string config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const std::string& text);
void apply_config_json(TrainConfig& cfg, const std::string& text);
void apply_config_override(TrainConfig& cfg, const std::string& key, const std::string& value);

// Everything the optimizer touches: the affine projector standing in for an
// upstream feature extractor, the prototype banks, and the distance-vector
// classifier head.
struct ModelParams {
    std::size_t d_in = 0;
    Mat proj_weight; // D x d_in
    Vec proj_bias;   // D
    PrototypeBank bank;
    Vec cls_weight;  // K_b + K_s
    double cls_bias = 0.0;
    bool cls_bias_enabled = true;

    std::size_t dim() const { return bank.g.dim; }
    void validate() const;
};

ModelParams init_model(const TrainConfig& cfg, std::size_t d_in, Rng& rng);

// Gradient (or moment) container shaped like ModelParams.
struct ModelGrads {
    Mat proj_weight;
    Vec proj_bias;
    Mat theta_data;
    Mat theta_top;
    Vec cls_weight;
    double cls_bias = 0.0;

    static ModelGrads zeros_like(const ModelParams& p);
    void accumulate(const ModelGrads& o, double scale = 1.0);
    bool finite() const;
};

// Named flat views over the tensors, shared by Adam and the gradient checker.
// group: 0 = projector, 1 = prototypes, 2 = classifier.
struct TensorView {
    const char* name;
    double* data;
    std::size_t size;
    int group;
};
struct ConstTensorView {
    const char* name;
    const double* data;
    std::size_t size;
    int group;
};
std::vector<TensorView> tensor_views(ModelParams& p);
std::vector<TensorView> tensor_views(ModelGrads& g);
std::vector<ConstTensorView> tensor_views(const ModelParams& p);
std::vector<ConstTensorView> tensor_views(const ModelGrads& g);

// z = exp_map0(W x + b)
Vec forward_affine(const ModelParams& p, std::span<const double> x);
Vec forward_embed(const ModelParams& p, std::span<const double> x);

// logit = cls_weight . d_H(z, prototypes) + cls_bias; sigmoid gives P(spoof)
double classifier_logit(std::span<const double> z, const ModelParams& p,
                        const MaterializedBank& mat);
double classifier_logit(std::span<const double> z, const ModelParams& p);

// A batch pushed through the shared projector, originals and augmentations.
struct EmbeddedBatch {
    Mat x, x_aug; // raw double copies, n x d_in
    Mat u, u_aug; // affine pre-images, n x D
    Mat z, z_aug; // ball points, n x D
    std::vector<int> y;

    std::size_t size() const { return y.size(); }
    std::vector<LabeledEmbedding> labeled() const;
};

EmbeddedBatch embed_batch(const ModelParams& p, const EmbeddingDataset& ds,
                          const std::vector<std::size_t>& idx);

struct ClsLoss {
    double value = 0.0;
    ModelGrads grads;
};

// Mean binary cross entropy in log-space over the original samples (plus the
// augmented ones when cls_use_aug is set).
ClsLoss loss_cls(const EmbeddedBatch& batch, const ModelParams& p, bool use_aug = false);

// Discrete selections of a training step, frozen so that value re-evaluation
// under parameter perturbation is well defined.
struct StepPlan {
    std::vector<std::size_t> nearest; // per-sample same-class prototype
    std::vector<Triplet> triplets;
    PfwPlan pfw;
};

StepPlan make_step_plan(const EmbeddedBatch& batch, const ModelParams& p, const TrainConfig& cfg,
                        Rng& hsl_rng);

struct LossBreakdown {
    double cls = 0.0;
    double proto = 0.0;
    double aug = 0.0;
    double ppl = 0.0;
    double hsl = 0.0;
    double pfw = 0.0;
    double total = 0.0;
};

struct TotalLoss {
    LossBreakdown breakdown;
    ModelGrads grads;
    std::vector<std::string> warnings;
};

// Unit-weight sum of the enabled terms, with every gradient chained back to
// the model parameters.
TotalLoss total_loss(const EmbeddedBatch& batch, const ModelParams& p, const TrainConfig& cfg,
                     const StepPlan& plan);

// Per-sample embedding cotangents pulled back through exp_map0 and the affine
// projector into parameter space.
void chain_embedding_grads(const EmbeddedBatch& b, const Mat& d_z, const Mat& d_zaug,
                           const GeometryConfig& g, ModelGrads& out);

struct AdamState {
    ModelGrads m;
    ModelGrads v;
    std::size_t step = 0;

    static AdamState zeros_like(const ModelParams& p);
};

// Standard Adam with bias correction and per-group learning rates.
void adam_step(ModelParams& p, const ModelGrads& g, AdamState& state, const TrainConfig& cfg);

// Model container: u32 header length, JSON header (version, config echo,
// d_in, tensor shapes), then float64 payloads in tensor_views order.
void save_model(const ModelParams& p, const TrainConfig& cfg, const std::filesystem::path& path);
struct LoadedModel {
    ModelParams params;
    TrainConfig config;
};
LoadedModel load_model(const std::filesystem::path& path);

} // namespace phn
