#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace phn {

// Raw feature storage is single precision; all computation upgrades to
// double on the way in.
struct EmbeddingDataset {
    std::size_t d_in = 0;
    std::vector<float> features;        // n * d_in, row-major
    std::vector<float> aug_features;    // empty, or n * d_in
    std::vector<std::uint8_t> labels;   // n entries, 0 = bonafide, 1 = spoof
    std::vector<std::uint32_t> subcluster_ids; // empty, or n entries

    std::size_t n() const { return labels.size(); }
    bool has_aug() const { return !aug_features.empty(); }
    bool has_subclusters() const { return !subcluster_ids.empty(); }
    void validate() const;
};

// "PHE1" container: magic, u32 version/n/d_in, aug + subcluster flags,
// labels, then float32 payloads, all little-endian.
void write_dataset(const EmbeddingDataset& ds, const std::filesystem::path& path);
EmbeddingDataset read_dataset(const std::filesystem::path& path);

struct SynthConfig {
    std::size_t n_per_subcluster = 250;
    std::size_t subclusters_per_class = 4;
    std::size_t d_in = 32;
    double class_separation = 6.0;
    double subcluster_spread = 2.0;
    double noise_sigma = 0.5;
    double aug_sigma = 0.3;
    std::uint64_t seed = 1;

    void validate() const;
};

// Two class centers separated by class_separation, per-class sub-centers at
// subcluster_spread, gaussian noise on samples and augmentations. Exactly
// balanced labels; subcluster ids recorded as ground truth.
EmbeddingDataset generate_synthetic(const SynthConfig& cfg);

// Adds feature-level gaussian noise as the augmented view of a dataset that
// arrived without one.
EmbeddingDataset augment_pair(const EmbeddingDataset& ds, double aug_sigma, std::uint64_t seed);

} // namespace phn
