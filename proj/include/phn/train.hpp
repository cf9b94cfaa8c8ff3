#pragma once

#include <memory>
#include <string>
#include <vector>

#include "phn/errors.hpp"
#include "phn/model.hpp"

namespace phn {

struct EpochMetrics {
    std::size_t epoch = 0; // 1-based
    double loss_cls = 0.0;
    double loss_ppl = 0.0;
    double loss_hsl = 0.0;
    double loss_pfw = 0.0;
    double loss_total = 0.0;
    double train_eer = 0.0;
};

struct TrainResult {
    ModelParams params;
    TrainConfig config;
    std::vector<EpochMetrics> log;
    std::vector<std::string> warnings;
};

// Thrown when a loss turns non-finite; carries the parameters from the last
// step that evaluated finite.
struct TrainingDiverged : DivergedError {
    TrainingDiverged(const std::string& msg, std::shared_ptr<ModelParams> params)
        : DivergedError(msg), last_good(std::move(params)) {}
    std::shared_ptr<ModelParams> last_good;
};

// Balanced batches, all enabled losses from step 0, Adam updates, one metrics
// entry per epoch (epoch-mean losses plus the training EER). Deterministic
// given config and dataset bytes in single-threaded mode.
TrainResult train(const TrainConfig& cfg, const EmbeddingDataset& ds);

// Deterministic JSON rendering of the metrics log.
std::string metrics_to_json(const TrainResult& result);

} // namespace phn
