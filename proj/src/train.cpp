#include "phn/train.hpp"

#include <cmath>
#include <json.hpp>

#include "phn/errors.hpp"
#include "phn/eval.hpp"

namespace phn {

TrainResult train(const TrainConfig& cfg, const EmbeddingDataset& ds) {
    cfg.validate();
    ds.validate();
    if (ds.n() == 0) throw InvalidDataset("train: empty dataset");
    if (!ds.has_aug()) throw InvalidDataset("train: dataset has no augmented block");
    bool seen[2] = {false, false};
    for (auto y : ds.labels) seen[y] = true;
    if (!seen[0] || !seen[1]) throw InvalidDataset("train: both classes required");
    if (cfg.enable_hsl) cfg.hsl.validate(cfg.num_bona_protos + cfg.num_spoof_protos);

    Rng init_rng = derive_rng(cfg.seed, "init");
    Rng batch_rng = derive_rng(cfg.seed, "batch");
    Rng hsl_rng = derive_rng(cfg.seed, "hsl");

    TrainResult result;
    result.config = cfg;
    result.params = init_model(cfg, ds.d_in, init_rng);
    AdamState adam = AdamState::zeros_like(result.params);

    std::vector<int> labels(ds.labels.begin(), ds.labels.end());
    const std::size_t steps_per_epoch =
        std::max<std::size_t>(1, (ds.n() + cfg.batch_size - 1) / cfg.batch_size);

    auto last_good = std::make_shared<ModelParams>(result.params);
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        EpochMetrics em;
        em.epoch = epoch;
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            auto [bona, spoof] = balanced_batch_indices(labels, cfg.batch_size,
                                                        cfg.num_bona_protos,
                                                        cfg.num_spoof_protos, batch_rng);
            std::vector<std::size_t> idx = bona;
            idx.insert(idx.end(), spoof.begin(), spoof.end());

            EmbeddedBatch batch = embed_batch(result.params, ds, idx);
            StepPlan plan = make_step_plan(batch, result.params, cfg, hsl_rng);
            TotalLoss tl = total_loss(batch, result.params, cfg, plan);
            for (const auto& w : tl.warnings)
                if (result.warnings.size() < 32) result.warnings.push_back(w);

            if (!std::isfinite(tl.breakdown.total) || !tl.grads.finite())
                throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) +
                                           " step " + std::to_string(step),
                                       last_good);
            *last_good = result.params;

            adam_step(result.params, tl.grads, adam, cfg);

            em.loss_cls += tl.breakdown.cls;
            em.loss_ppl += tl.breakdown.ppl;
            em.loss_hsl += tl.breakdown.hsl;
            em.loss_pfw += tl.breakdown.pfw;
            em.loss_total += tl.breakdown.total;
        }
        double inv = 1.0 / static_cast<double>(steps_per_epoch);
        em.loss_cls *= inv;
        em.loss_ppl *= inv;
        em.loss_hsl *= inv;
        em.loss_pfw *= inv;
        em.loss_total *= inv;
        em.train_eer = compute_eer(score_dataset(result.params, ds)).eer;
        result.log.push_back(em);
    }
    return result;
}

std::string metrics_to_json(const TrainResult& result) {
    nlohmann::json j;
    j["config"] = nlohmann::json::parse(config_to_json(result.config));
    auto epochs = nlohmann::json::array();
    for (const auto& em : result.log) {
        epochs.push_back({
            {"epoch", em.epoch},
            {"loss_cls", em.loss_cls},
            {"loss_ppl", em.loss_ppl},
            {"loss_hsl", em.loss_hsl},
            {"loss_pfw", em.loss_pfw},
            {"loss_total", em.loss_total},
            {"train_eer", em.train_eer},
        });
    }
    j["epochs"] = epochs;
    j["warnings"] = result.warnings;
    return j.dump(2) + "\n";
}

} // namespace phn
