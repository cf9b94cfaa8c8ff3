#include "phn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <string>

#include "phn/errors.hpp"
#include "phn/io.hpp"
#include "phn/threading.hpp"

namespace phn {

std::vector<ScoreRecord> score_dataset(const ModelParams& p, const EmbeddingDataset& ds) {
    ds.validate();
    if (ds.d_in != p.d_in) throw InvalidInput("score_dataset: feature dimension mismatch");
    auto mat = materialize(p.bank);
    std::vector<ScoreRecord> out(ds.n());
    const long n = static_cast<long>(ds.n());
#pragma omp parallel for schedule(static) if (threads() != 1)
    for (long i = 0; i < n; ++i) {
        std::size_t row = static_cast<std::size_t>(i);
        Vec x(ds.d_in);
        for (std::size_t k = 0; k < ds.d_in; ++k)
            x[k] = static_cast<double>(ds.features[row * ds.d_in + k]);
        Vec z = forward_embed(p, x);
        double logit = classifier_logit(z, p, mat);
        double score = logit >= 0 ? 1.0 / (1.0 + std::exp(-logit))
                                  : std::exp(logit) / (1.0 + std::exp(logit));
        out[row] = ScoreRecord{row, score, static_cast<int>(ds.labels[row])};
    }
    return out;
}

EerResult compute_eer(const std::vector<ScoreRecord>& records) {
    std::size_t n_bona = 0, n_spoof = 0;
    for (const auto& r : records) {
        if (!std::isfinite(r.score)) throw InvalidInput("compute_eer: non-finite score");
        (r.label == 0 ? n_bona : n_spoof) += 1;
    }
    if (n_bona == 0 || n_spoof == 0)
        throw InvalidInput("compute_eer: both classes must be present");

    // candidate thresholds: distinct scores ascending, plus a sentinel past
    // the maximum where FAR = 0 and FRR = 1
    std::vector<double> scores;
    scores.reserve(records.size());
    for (const auto& r : records) scores.push_back(r.score);
    std::sort(scores.begin(), scores.end());
    scores.erase(std::unique(scores.begin(), scores.end()), scores.end());
    scores.push_back(scores.back() + 1.0);

    auto rates = [&](double tau) {
        std::size_t fa = 0, fr = 0;
        for (const auto& r : records) {
            if (r.label == 0 && r.score >= tau) ++fa;
            if (r.label == 1 && r.score < tau) ++fr;
        }
        return std::pair<double, double>{static_cast<double>(fa) / static_cast<double>(n_bona),
                                         static_cast<double>(fr) / static_cast<double>(n_spoof)};
    };

    double prev_tau = scores[0];
    auto [prev_far, prev_frr] = rates(prev_tau);
    if (prev_far - prev_frr <= 0.0)
        return {prev_far, prev_tau}; // degenerate: crossing at the first point
    for (std::size_t i = 1; i < scores.size(); ++i) {
        double tau = scores[i];
        auto [far, frr] = rates(tau);
        double diff = far - frr;
        if (diff == 0.0) return {far, tau};
        if (diff < 0.0) {
            double d1 = prev_far - prev_frr;
            double t = d1 / (d1 - diff);
            return {prev_far + t * (far - prev_far), prev_tau + t * (tau - prev_tau)};
        }
        prev_tau = tau;
        prev_far = far;
        prev_frr = frr;
    }
    // FAR - FRR is weakly decreasing and the sentinel ends at -1
    throw NumericalInstability("compute_eer: no crossing found");
}

void write_scores_csv(const std::vector<ScoreRecord>& records,
                      const std::filesystem::path& path) {
    std::string buf = "index,score,label\n";
    char line[96];
    for (const auto& r : records) {
        std::snprintf(line, sizeof line, "%zu,%.9g,%d\n", r.sample_index, r.score, r.label);
        buf += line;
    }
    io::atomic_write(path, buf);
}

std::vector<ScoreRecord> read_scores_csv(const std::filesystem::path& path) {
    std::string text = io::read_file(path);
    std::vector<ScoreRecord> out;
    std::size_t pos = 0;
    bool first = true;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        if (line.empty()) continue;
        if (first) {
            if (line != "index,score,label") throw FormatError("bad scores header");
            first = false;
            continue;
        }
        ScoreRecord r;
        char* end = nullptr;
        r.sample_index = std::strtoull(line.c_str(), &end, 10);
        if (!end || *end != ',') throw FormatError("bad scores row");
        r.score = std::strtod(end + 1, &end);
        if (!end || *end != ',') throw FormatError("bad scores row");
        r.label = static_cast<int>(std::strtol(end + 1, &end, 10));
        out.push_back(r);
    }
    return out;
}

namespace {

void svg_circle(std::string& buf, double cx, double cy, double r, const char* style) {
    char line[192];
    std::snprintf(line, sizeof line,
                  "  <circle cx=\"%.5f\" cy=\"%.5f\" r=\"%.5f\" %s/>\n", cx, cy, r, style);
    buf += line;
}

} // namespace

void render_disk_svg(const ModelParams& p, const EmbeddingDataset& ds,
                     const std::vector<std::size_t>& sample_idx,
                     const std::filesystem::path& path) {
    if (p.dim() != 2)
        throw UnsupportedDimension("render_disk_svg: only native 2-D models are drawable");
    const double sc = std::sqrt(p.bank.g.c);
    auto mat = materialize(p.bank);

    std::string buf;
    buf += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"640\" "
           "viewBox=\"-1.1 -1.1 2.2 2.2\">\n";
    buf += "  <rect x=\"-1.1\" y=\"-1.1\" width=\"2.2\" height=\"2.2\" fill=\"white\"/>\n";
    buf += "  <circle cx=\"0\" cy=\"0\" r=\"1\" fill=\"none\" stroke=\"#333\" "
           "stroke-width=\"0.006\"/>\n";

    // chords from each data prototype to its nearest top prototype
    for (std::size_t r = 0; r < mat.data.rows; ++r) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < mat.top.rows; ++t) {
            double d = hyperbolic_distance(mat.data.row(r), mat.top.row(t), p.bank.g);
            if (d < best_d) {
                best_d = d;
                best = t;
            }
        }
        char line[192];
        std::snprintf(line, sizeof line,
                      "  <line x1=\"%.5f\" y1=\"%.5f\" x2=\"%.5f\" y2=\"%.5f\" "
                      "stroke=\"#bbbbbb\" stroke-width=\"0.004\"/>\n",
                      sc * mat.data(r, 0), sc * mat.data(r, 1), sc * mat.top(best, 0),
                      sc * mat.top(best, 1));
        buf += line;
    }

    for (std::size_t i : sample_idx) {
        if (i >= ds.n()) throw InvalidInput("render_disk_svg: sample index out of range");
        Vec x(ds.d_in);
        for (std::size_t k = 0; k < ds.d_in; ++k)
            x[k] = static_cast<double>(ds.features[i * ds.d_in + k]);
        Vec z = forward_embed(p, x);
        svg_circle(buf, sc * z[0], sc * z[1], 0.010,
                   ds.labels[i] == 0 ? "fill=\"#2b6cb0\" fill-opacity=\"0.55\""
                                     : "fill=\"#c53030\" fill-opacity=\"0.55\"");
    }

    for (std::size_t r = 0; r < mat.top.rows; ++r)
        svg_circle(buf, sc * mat.top(r, 0), sc * mat.top(r, 1), 0.022,
                   "fill=\"none\" stroke=\"#6b46c1\" stroke-width=\"0.006\"");
    for (std::size_t r = 0; r < mat.data.rows; ++r)
        svg_circle(buf, sc * mat.data(r, 0), sc * mat.data(r, 1), 0.030,
                   p.bank.class_of[r] == 0 ? "fill=\"#2b6cb0\" stroke=\"#1a365d\" stroke-width=\"0.005\""
                                           : "fill=\"#c53030\" stroke=\"#63171b\" stroke-width=\"0.005\"");
    buf += "</svg>\n";
    io::atomic_write(path, buf);
}

} // namespace phn
