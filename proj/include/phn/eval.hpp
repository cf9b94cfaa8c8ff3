#pragma once

#include <filesystem>
#include <vector>

#include "phn/data.hpp"
#include "phn/model.hpp"

namespace phn {

struct ScoreRecord {
    std::size_t sample_index = 0;
    double score = 0.0; // P(spoof)
    int label = 0;
};

// sigmoid(classifier_logit(forward_embed(x))) over the original features, in
// dataset order. The augmented block is never consulted.
std::vector<ScoreRecord> score_dataset(const ModelParams& p, const EmbeddingDataset& ds);

struct EerResult {
    double eer = 0.0;
    double threshold = 0.0;
};

// Equal error rate with spoof as the positive class: sweep every distinct
// score threshold, then interpolate linearly between the two adjacent
// operating points where FAR - FRR changes sign. The sentinel point past the
// maximum score sits at max_score + 1.
EerResult compute_eer(const std::vector<ScoreRecord>& records);

// "index,score,label" rows, scores at 9 significant digits.
void write_scores_csv(const std::vector<ScoreRecord>& records, const std::filesystem::path& path);
std::vector<ScoreRecord> read_scores_csv(const std::filesystem::path& path);

// 2-D Poincare disk snapshot: boundary circle, samples colored by label, data
// prototypes as filled markers, top prototypes hollow, and a chord from each
// data prototype to its nearest top prototype. Coordinates are pre-scaled by
// sqrt(c). Refuses models with dim != 2.
void render_disk_svg(const ModelParams& p, const EmbeddingDataset& ds,
                     const std::vector<std::size_t>& sample_idx,
                     const std::filesystem::path& path);

} // namespace phn
