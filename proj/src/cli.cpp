#include "phn/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>

#include "phn/data.hpp"
#include "phn/errors.hpp"
#include "phn/eval.hpp"
#include "phn/gradcheck.hpp"
#include "phn/io.hpp"
#include "phn/threading.hpp"
#include "phn/train.hpp"

namespace phn {

namespace {

TrainConfig layered_config(const std::string& config_path,
                           const std::vector<std::string>& overrides) {
    TrainConfig cfg; // built-in defaults
    if (!config_path.empty()) apply_config_json(cfg, io::read_file(config_path));
    for (const auto& kv : overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("override must look like key=value: " + kv);
        apply_config_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
}

int cmd_gen_synth(const SynthConfig& sc, const std::string& out_path) {
    write_dataset(generate_synthetic(sc), out_path);
    return 0;
}

int cmd_train(const std::string& data_path, const std::string& config_path,
              const std::vector<std::string>& overrides, const std::string& model_out,
              const std::string& metrics_out, std::ostream& out, std::ostream& err) {
    TrainConfig cfg = layered_config(config_path, overrides);
    EmbeddingDataset ds = read_dataset(data_path);
    if (!ds.has_aug())
        ds = augment_pair(ds, cfg.aug_sigma, derive_seed(cfg.seed, "aug"));
    try {
        TrainResult result = train(cfg, ds);
        save_model(result.params, cfg, model_out);
        if (!metrics_out.empty()) io::atomic_write(metrics_out, metrics_to_json(result));
        for (const auto& w : result.warnings) err << "warning: " << w << "\n";
        if (!result.log.empty()) {
            char line[64];
            std::snprintf(line, sizeof line, "final train EER: %.4f%%\n",
                          result.log.back().train_eer * 100.0);
            out << line;
        }
        return 0;
    } catch (const TrainingDiverged& d) {
        if (d.last_good) save_model(*d.last_good, cfg, model_out + ".lastgood");
        err << "error: " << d.what() << " (last-good checkpoint written to " << model_out
            << ".lastgood)\n";
        return 2;
    }
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& scores_out, std::ostream& out) {
    LoadedModel m = load_model(model_path);
    EmbeddingDataset ds = read_dataset(data_path);
    auto records = score_dataset(m.params, ds);
    if (!scores_out.empty()) write_scores_csv(records, scores_out);
    auto r = compute_eer(records);
    char line[64];
    std::snprintf(line, sizeof line, "EER: %.4f%%\n", r.eer * 100.0);
    out << line;
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, double step, double tol, std::ostream& out) {
    // the small documented shapes: D=8, D_in=12, K_b=3, K_s=2, K_top=4, B=8
    TrainConfig cfg;
    cfg.geometry = GeometryConfig{0.01, 1e-5, 8};
    cfg.num_bona_protos = 3;
    cfg.num_spoof_protos = 2;
    cfg.num_top_protos = 4;
    cfg.hsl = HslConfig{2, 0.1, 0, true};
    cfg.mask_ratio_bona = 0.1;
    cfg.mask_ratio_spoof = 0.1;
    cfg.batch_size = 8;
    cfg.seed = seed;

    SynthConfig sc;
    sc.n_per_subcluster = 8;
    sc.subclusters_per_class = 2;
    sc.d_in = 12;
    sc.seed = derive_seed(seed, "gradcheck-data");
    EmbeddingDataset ds = generate_synthetic(sc);
    std::vector<std::size_t> idx = {0, 1, 2, 3, 16, 17, 18, 19};

    Rng init_rng = derive_rng(seed, "init");
    ModelParams params = init_model(cfg, sc.d_in, init_rng);
    Rng wr = derive_rng(seed, "gradcheck-cls");
    for (auto& w : params.cls_weight) w = wr.gaussian() * 0.4;
    params.cls_bias = wr.gaussian() * 0.1;

    bool all_pass = true;
    for (LossSelector sel : {LossSelector::Proto, LossSelector::Aug, LossSelector::Hsl,
                             LossSelector::Pfw, LossSelector::Cls, LossSelector::All}) {
        Rng hsl_rng = derive_rng(seed, "hsl");
        FdReport rep = finite_diff_check(sel, params, ds, idx, cfg, step, tol, hsl_rng);
        out << format_report(rep, selector_name(sel));
        all_pass = all_pass && rep.pass;
    }
    out << (all_pass ? "gradcheck PASS" : "gradcheck FAIL") << "\n";
    return all_pass ? 0 : 2;
}

int cmd_plot(const std::string& model_path, const std::string& data_path,
             const std::string& out_path, std::size_t max_points) {
    LoadedModel m = load_model(model_path);
    EmbeddingDataset ds;
    std::vector<std::size_t> subset;
    if (!data_path.empty()) {
        ds = read_dataset(data_path);
        for (std::size_t i = 0; i < std::min(max_points, ds.n()); ++i) subset.push_back(i);
    } else {
        ds.d_in = m.params.d_in;
    }
    render_disk_svg(m.params, ds, subset, out_path);
    return 0;
}

} // namespace

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"hierarchical prototype learning in the Poincare ball"};
    app.name("phn");
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = auto, 1 = bit-reproducible)");

    auto* gen = app.add_subcommand("gen-synth", "generate a synthetic PHE1 dataset");
    SynthConfig sc;
    std::string gen_out;
    gen->add_option("--out", gen_out, "output PHE1 path")->required();
    gen->add_option("--n-per-subcluster", sc.n_per_subcluster);
    gen->add_option("--subclusters-per-class", sc.subclusters_per_class);
    gen->add_option("--d-in", sc.d_in);
    gen->add_option("--class-separation", sc.class_separation);
    gen->add_option("--subcluster-spread", sc.subcluster_spread);
    gen->add_option("--noise-sigma", sc.noise_sigma);
    gen->add_option("--aug-sigma", sc.aug_sigma);
    gen->add_option("--seed", sc.seed);

    auto* tr = app.add_subcommand("train", "train a model on a PHE1 dataset");
    std::string tr_data, tr_config, tr_model = "model.phnm", tr_metrics;
    std::vector<std::string> tr_set;
    tr->add_option("--data", tr_data, "input PHE1 dataset")->required();
    tr->add_option("--config", tr_config, "JSON config file");
    tr->add_option("--set", tr_set, "config override key=value (repeatable)");
    tr->add_option("--model-out", tr_model, "output model path");
    tr->add_option("--metrics-out", tr_metrics, "output metrics JSON path");

    auto* ev = app.add_subcommand("eval", "score a dataset and report EER");
    std::string ev_model, ev_data, ev_scores;
    ev->add_option("--model", ev_model)->required();
    ev->add_option("--data", ev_data)->required();
    ev->add_option("--scores-out", ev_scores, "output scores CSV path");

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    std::uint64_t gc_seed = 1;
    double gc_step = 1e-5, gc_tol = 1e-4;
    gc->add_option("--seed", gc_seed);
    gc->add_option("--step", gc_step);
    gc->add_option("--tol", gc_tol);

    auto* pl = app.add_subcommand("plot", "render a 2-D Poincare disk SVG");
    std::string pl_model, pl_data, pl_out = "disk.svg";
    std::size_t pl_max = 500;
    pl->add_option("--model", pl_model)->required();
    pl->add_option("--data", pl_data);
    pl->add_option("--out", pl_out);
    pl->add_option("--max-points", pl_max);

    try {
        std::reverse(args.begin(), args.end()); // CLI11 vector parse order
        app.parse(std::move(args));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return 1;
    }

    try {
        set_threads(threads);
        if (gen->parsed()) return cmd_gen_synth(sc, gen_out);
        if (tr->parsed()) return cmd_train(tr_data, tr_config, tr_set, tr_model, tr_metrics, out, err);
        if (ev->parsed()) return cmd_eval(ev_model, ev_data, ev_scores, out);
        if (gc->parsed()) return cmd_gradcheck(gc_seed, gc_step, gc_tol, out);
        if (pl->parsed()) return cmd_plot(pl_model, pl_data, pl_out, pl_max);
        err << "error: no command\n";
        return 1;
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace phn
