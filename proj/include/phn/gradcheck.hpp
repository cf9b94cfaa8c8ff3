#pragma once

#include <functional>
#include <string>

#include "phn/model.hpp"

namespace phn {

enum class LossSelector { Proto, Aug, Hsl, Pfw, Cls, All };

const char* selector_name(LossSelector s);
LossSelector selector_from_name(const std::string& name);

struct TensorReport {
    std::string tensor;
    double max_rel_err = 0.0;
    bool pass = true;
};

struct FdReport {
    std::vector<TensorReport> tensors;
    double tolerance = 1e-4;
    double step = 1e-5;
    bool pass = true;
};

// Central differences of `value` against `analytic`, one entry per tensor.
// The error measure is |a-f| / max(|a|,|f|,1): components much smaller than
// one are held to an absolute tolerance, since fp jitter of points sitting on
// the ball guard radius is amplified by the metric there.
FdReport check_gradients(const std::function<double(ModelParams&)>& value, const ModelParams& at,
                         const ModelGrads& analytic, double step, double tolerance);

// FD verification of one loss term (or the total) at a batch. Embeddings are
// recomputed from raw features at each perturbation; the discrete structure
// of the step (nearest prototypes, triplets, LCA picks, masks) stays frozen.
FdReport finite_diff_check(LossSelector sel, const ModelParams& params, const EmbeddingDataset& ds,
                           const std::vector<std::size_t>& idx, const TrainConfig& cfg,
                           double step, double tolerance, Rng& hsl_rng);

std::string format_report(const FdReport& rep, const std::string& label);

} // namespace phn
