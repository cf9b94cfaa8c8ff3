#include "phn/data.hpp"

#include <cmath>

#include "phn/errors.hpp"
#include "phn/io.hpp"
#include "phn/rng.hpp"

namespace phn {

namespace {
constexpr char kMagic[4] = {'P', 'H', 'E', '1'};
constexpr std::uint32_t kVersion = 1;
} // namespace

void EmbeddingDataset::validate() const {
    const std::size_t count = labels.size();
    if (d_in == 0) throw InvalidDataset("dataset: d_in must be positive");
    if (features.size() != count * d_in) throw InvalidDataset("dataset: feature shape mismatch");
    if (!aug_features.empty() && aug_features.size() != count * d_in)
        throw InvalidDataset("dataset: aug shape mismatch");
    if (!subcluster_ids.empty() && subcluster_ids.size() != count)
        throw InvalidDataset("dataset: subcluster shape mismatch");
    for (auto y : labels)
        if (y > 1) throw InvalidDataset("dataset: labels must be 0 or 1");
}

void write_dataset(const EmbeddingDataset& ds, const std::filesystem::path& path) {
    ds.validate();
    std::string buf;
    buf.reserve(18 + ds.labels.size() * (1 + 4 * ds.d_in * 2 + 4));
    buf.append(kMagic, 4);
    io::put_u32(buf, kVersion);
    io::put_u32(buf, static_cast<std::uint32_t>(ds.n()));
    io::put_u32(buf, static_cast<std::uint32_t>(ds.d_in));
    io::put_u8(buf, ds.has_aug() ? 1 : 0);
    io::put_u8(buf, ds.has_subclusters() ? 1 : 0);
    for (auto y : ds.labels) io::put_u8(buf, y);
    for (float v : ds.features) io::put_f32(buf, v);
    for (float v : ds.aug_features) io::put_f32(buf, v);
    for (auto s : ds.subcluster_ids) io::put_u32(buf, s);
    io::atomic_write(path, buf);
}

EmbeddingDataset read_dataset(const std::filesystem::path& path) {
    std::string bytes = io::read_file(path);
    io::Reader r{bytes};
    auto magic = r.bytes(4);
    if (std::string_view(kMagic, 4) != magic) throw FormatError("not a PHE1 file");
    std::uint32_t version = r.u32();
    if (version != kVersion)
        throw UnsupportedVersion("unsupported PHE1 version " + std::to_string(version));
    std::uint64_t n = r.u32();
    std::uint64_t d_in = r.u32();
    bool has_aug = r.u8() != 0;
    bool has_sub = r.u8() != 0;

    // header-declared payload size must match the file exactly
    std::uint64_t expect = 18 + n + 4 * n * d_in * (has_aug ? 2 : 1) + (has_sub ? 4 * n : 0);
    if (bytes.size() != expect) throw FormatError("PHE1 payload length mismatch");
    if (n > 0 && d_in == 0) throw FormatError("PHE1 header: d_in is zero");

    EmbeddingDataset ds;
    ds.d_in = static_cast<std::size_t>(d_in);
    ds.labels.resize(n);
    for (auto& y : ds.labels) y = r.u8();
    ds.features.resize(n * d_in);
    for (auto& v : ds.features) v = r.f32();
    if (has_aug) {
        ds.aug_features.resize(n * d_in);
        for (auto& v : ds.aug_features) v = r.f32();
    }
    if (has_sub) {
        ds.subcluster_ids.resize(n);
        for (auto& s : ds.subcluster_ids) s = r.u32();
    }
    if (n > 0) ds.validate();
    return ds;
}

void SynthConfig::validate() const {
    if (n_per_subcluster == 0 || subclusters_per_class == 0 || d_in == 0)
        throw ConfigError("SynthConfig: counts must be positive");
    if (class_separation < 0 || subcluster_spread < 0 || noise_sigma < 0 || aug_sigma < 0)
        throw ConfigError("SynthConfig: scales must be nonnegative");
}

namespace {

std::vector<double> random_unit(Rng& rng, std::size_t d) {
    std::vector<double> v(d);
    double n = 0.0;
    do {
        for (auto& x : v) x = rng.gaussian();
        n = 0.0;
        for (double x : v) n += x * x;
    } while (n == 0.0);
    n = std::sqrt(n);
    for (auto& x : v) x /= n;
    return v;
}

} // namespace

EmbeddingDataset generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const std::size_t d = cfg.d_in;
    const std::size_t spc = cfg.subclusters_per_class;
    const std::size_t nps = cfg.n_per_subcluster;
    const std::size_t n = 2 * spc * nps;

    auto axis = random_unit(rng, d);

    // class centers at +/- separation/2 along a random axis
    std::vector<std::vector<double>> sub_centers(2 * spc, std::vector<double>(d));
    for (int cls = 0; cls < 2; ++cls) {
        double sgn = cls == 0 ? -0.5 : 0.5;
        for (std::size_t s = 0; s < spc; ++s) {
            auto dir = random_unit(rng, d);
            auto& ctr = sub_centers[static_cast<std::size_t>(cls) * spc + s];
            for (std::size_t k = 0; k < d; ++k)
                ctr[k] = sgn * cfg.class_separation * axis[k] + cfg.subcluster_spread * dir[k];
        }
    }

    EmbeddingDataset ds;
    ds.d_in = d;
    ds.labels.resize(n);
    ds.subcluster_ids.resize(n);
    ds.features.resize(n * d);
    ds.aug_features.resize(n * d);

    std::size_t row = 0;
    for (int cls = 0; cls < 2; ++cls) {
        for (std::size_t s = 0; s < spc; ++s) {
            const auto& ctr = sub_centers[static_cast<std::size_t>(cls) * spc + s];
            for (std::size_t i = 0; i < nps; ++i, ++row) {
                ds.labels[row] = static_cast<std::uint8_t>(cls);
                ds.subcluster_ids[row] =
                    static_cast<std::uint32_t>(static_cast<std::size_t>(cls) * spc + s);
                for (std::size_t k = 0; k < d; ++k)
                    ds.features[row * d + k] =
                        static_cast<float>(ctr[k] + cfg.noise_sigma * rng.gaussian());
            }
        }
    }
    for (std::size_t i = 0; i < n * d; ++i)
        ds.aug_features[i] =
            static_cast<float>(static_cast<double>(ds.features[i]) + cfg.aug_sigma * rng.gaussian());
    return ds;
}

EmbeddingDataset augment_pair(const EmbeddingDataset& ds, double aug_sigma, std::uint64_t seed) {
    if (ds.has_aug()) throw InvalidInput("augment_pair: dataset already has an augmented block");
    if (aug_sigma < 0) throw InvalidInput("augment_pair: sigma must be nonnegative");
    ds.validate();
    EmbeddingDataset out = ds;
    Rng rng(seed);
    out.aug_features.resize(ds.features.size());
    for (std::size_t i = 0; i < ds.features.size(); ++i)
        out.aug_features[i] =
            static_cast<float>(static_cast<double>(ds.features[i]) + aug_sigma * rng.gaussian());
    return out;
}

} // namespace phn
