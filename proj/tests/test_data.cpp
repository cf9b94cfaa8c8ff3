#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "phn/data.hpp"
#include "phn/errors.hpp"
#include "phn/io.hpp"

using namespace phn;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const char* name) {
    auto dir = fs::temp_directory_path() / "phn_data_tests";
    fs::create_directories(dir);
    return dir / name;
}

EmbeddingDataset tiny_dataset() {
    EmbeddingDataset ds;
    ds.d_in = 3;
    ds.labels = {0, 1, 0};
    ds.features = {0.5f, -1.25f, 3.0f, 0.0f, 2.5f, -0.125f, 9.75f, 1.5f, -2.0f};
    ds.aug_features = ds.features;
    ds.aug_features[0] += 0.25f;
    ds.subcluster_ids = {0, 3, 1};
    return ds;
}

} // namespace

TEST_CASE("dataset round trip is byte-exact") {
    auto ds = tiny_dataset();
    auto p1 = temp_path("roundtrip1.phe");
    auto p2 = temp_path("roundtrip2.phe");
    write_dataset(ds, p1);
    auto back = read_dataset(p1);
    CHECK(back.d_in == ds.d_in);
    CHECK(back.labels == ds.labels);
    CHECK(back.features == ds.features);
    CHECK(back.aug_features == ds.aug_features);
    CHECK(back.subcluster_ids == ds.subcluster_ids);
    write_dataset(back, p2);
    CHECK(io::read_file(p1) == io::read_file(p2));
}

TEST_CASE("empty dataset writes a fixed-size header-only file") {
    EmbeddingDataset ds;
    ds.d_in = 7;
    auto p = temp_path("empty.phe");
    write_dataset(ds, p);
    CHECK(fs::file_size(p) == 18);
    auto back = read_dataset(p);
    CHECK(back.n() == 0);
    CHECK(!back.has_aug());
}

TEST_CASE("optional blocks really are optional") {
    auto ds = tiny_dataset();
    ds.aug_features.clear();
    ds.subcluster_ids.clear();
    auto p = temp_path("noaug.phe");
    write_dataset(ds, p);
    auto back = read_dataset(p);
    CHECK(!back.has_aug());
    CHECK(!back.has_subclusters());
    CHECK(back.features == ds.features);
}

TEST_CASE("corrupt and truncated files raise the documented errors") {
    auto ds = tiny_dataset();
    auto p = temp_path("corrupt.phe");
    write_dataset(ds, p);
    std::string bytes = io::read_file(p);

    {
        std::string bad = bytes;
        bad[0] = 'X';
        auto q = temp_path("badmagic.phe");
        io::atomic_write(q, bad);
        CHECK_THROWS_AS(read_dataset(q), FormatError);
    }
    {
        std::string bad = bytes.substr(0, bytes.size() - 5);
        auto q = temp_path("trunc.phe");
        io::atomic_write(q, bad);
        CHECK_THROWS_AS(read_dataset(q), FormatError);
    }
    {
        std::string bad = bytes + "zz";
        auto q = temp_path("trailing.phe");
        io::atomic_write(q, bad);
        CHECK_THROWS_AS(read_dataset(q), FormatError);
    }
    {
        std::string bad = bytes;
        bad[4] = 9; // version
        auto q = temp_path("version.phe");
        io::atomic_write(q, bad);
        CHECK_THROWS_AS(read_dataset(q), UnsupportedVersion);
    }
    CHECK_THROWS_AS(read_dataset(temp_path("missing.phe")), IoError);
}

TEST_CASE("minimal one-sample file") {
    EmbeddingDataset ds;
    ds.d_in = 2;
    ds.labels = {1};
    ds.features = {1.0f, 2.0f};
    auto p = temp_path("one.phe");
    write_dataset(ds, p);
    auto back = read_dataset(p);
    CHECK(back.n() == 1);
    CHECK(back.labels[0] == 1);
}

TEST_CASE("generate_synthetic counts, balance, determinism") {
    SynthConfig cfg;
    cfg.n_per_subcluster = 10;
    cfg.subclusters_per_class = 3;
    cfg.d_in = 5;
    cfg.seed = 99;
    auto ds = generate_synthetic(cfg);
    CHECK(ds.n() == 60);
    CHECK(ds.has_aug());
    CHECK(ds.has_subclusters());
    std::size_t bona = 0;
    for (auto y : ds.labels)
        if (y == 0) ++bona;
    CHECK(bona == 30);

    auto again = generate_synthetic(cfg);
    CHECK(again.features == ds.features);
    CHECK(again.aug_features == ds.aug_features);
    CHECK(again.subcluster_ids == ds.subcluster_ids);
}

TEST_CASE("zero noise collapses samples onto sub-centers") {
    SynthConfig cfg;
    cfg.n_per_subcluster = 4;
    cfg.subclusters_per_class = 2;
    cfg.d_in = 3;
    cfg.noise_sigma = 0.0;
    cfg.aug_sigma = 0.0;
    auto ds = generate_synthetic(cfg);
    CHECK(ds.aug_features == ds.features);
    // all samples of a subcluster coincide
    for (std::size_t i = 0; i < ds.n(); ++i) {
        std::size_t rep = (i / 4) * 4; // first sample of the subcluster
        CHECK(ds.subcluster_ids[i] == ds.subcluster_ids[rep]);
        for (std::size_t k = 0; k < 3; ++k)
            CHECK(ds.features[i * 3 + k] == ds.features[rep * 3 + k]);
    }
}

TEST_CASE("well-separated classes are perfectly classified by nearest centroid") {
    SynthConfig cfg;
    cfg.n_per_subcluster = 25;
    cfg.subclusters_per_class = 3;
    cfg.d_in = 8;
    cfg.class_separation = 30.0;
    cfg.subcluster_spread = 2.0;
    cfg.noise_sigma = 0.5;
    cfg.seed = 5;
    auto ds = generate_synthetic(cfg);

    std::vector<double> centroid[2];
    std::size_t counts[2] = {0, 0};
    centroid[0].assign(cfg.d_in, 0.0);
    centroid[1].assign(cfg.d_in, 0.0);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        ++counts[ds.labels[i]];
        for (std::size_t k = 0; k < cfg.d_in; ++k)
            centroid[ds.labels[i]][k] += ds.features[i * cfg.d_in + k];
    }
    for (int c = 0; c < 2; ++c)
        for (auto& v : centroid[c]) v /= static_cast<double>(counts[c]);

    for (std::size_t i = 0; i < ds.n(); ++i) {
        double d2[2] = {0.0, 0.0};
        for (int c = 0; c < 2; ++c)
            for (std::size_t k = 0; k < cfg.d_in; ++k) {
                double t = ds.features[i * cfg.d_in + k] - centroid[c][k];
                d2[c] += t * t;
            }
        int pred = d2[1] < d2[0] ? 1 : 0;
        CHECK(pred == static_cast<int>(ds.labels[i]));
    }
}

TEST_CASE("augment_pair determinism, zero-sigma identity, and noise scale") {
    EmbeddingDataset ds;
    ds.d_in = 2;
    std::size_t n = 50000;
    ds.labels.assign(n, 0);
    ds.labels[0] = 1;
    ds.features.assign(n * 2, 1.5f);

    CHECK(augment_pair(ds, 0.0, 3).aug_features == ds.features);

    auto a1 = augment_pair(ds, 0.7, 3);
    auto a2 = augment_pair(ds, 0.7, 3);
    CHECK(a1.aug_features == a2.aug_features);
    CHECK_THROWS_AS(augment_pair(a1, 0.7, 3), InvalidInput);

    // empirical std within 2% over 1e5 draws
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < n * 2; ++i) {
        double d = static_cast<double>(a1.aug_features[i]) - 1.5;
        sum += d;
        sum2 += d * d;
    }
    double mean = sum / static_cast<double>(n * 2);
    double sd = std::sqrt(sum2 / static_cast<double>(n * 2) - mean * mean);
    CHECK(std::abs(sd - 0.7) / 0.7 < 0.02);
}
