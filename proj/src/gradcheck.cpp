#include "phn/gradcheck.hpp"

#include <cmath>
#include <cstdio>

#include "phn/errors.hpp"

namespace phn {

const char* selector_name(LossSelector s) {
    switch (s) {
    case LossSelector::Proto: return "L_proto";
    case LossSelector::Aug: return "L_aug";
    case LossSelector::Hsl: return "L_hsl";
    case LossSelector::Pfw: return "L_pfw";
    case LossSelector::Cls: return "L_cls";
    case LossSelector::All: return "L_all";
    }
    return "?";
}

LossSelector selector_from_name(const std::string& name) {
    for (LossSelector s : {LossSelector::Proto, LossSelector::Aug, LossSelector::Hsl,
                           LossSelector::Pfw, LossSelector::Cls, LossSelector::All})
        if (name == selector_name(s)) return s;
    throw InvalidInput("unknown loss selector: " + name);
}

namespace {

// value + full-parameter gradient of a single selected term under a frozen plan
std::pair<double, ModelGrads> eval_selected(LossSelector sel, const EmbeddedBatch& batch,
                                            const ModelParams& p, const TrainConfig& cfg,
                                            const StepPlan& plan) {
    const std::size_t D = p.dim();
    ModelGrads grads = ModelGrads::zeros_like(p);
    auto labeled = batch.labeled();
    Mat d_z(batch.size(), D), d_zaug(batch.size(), D);
    double value = 0.0;
    switch (sel) {
    case LossSelector::Proto: {
        ProtoLoss pr = loss_proto(labeled, p.bank, plan.nearest);
        value = pr.value;
        d_z = pr.d_z;
        for (std::size_t i = 0; i < grads.theta_data.a.size(); ++i)
            grads.theta_data.a[i] += pr.d_theta.a[i];
        break;
    }
    case LossSelector::Aug: {
        AugLoss au = loss_aug(labeled, p.bank, plan.nearest);
        value = au.value;
        d_z = au.d_z;
        d_zaug = au.d_zaug;
        for (std::size_t i = 0; i < grads.theta_data.a.size(); ++i)
            grads.theta_data.a[i] += au.d_theta.a[i];
        break;
    }
    case LossSelector::Hsl: {
        HslLoss h = loss_hsl(plan.triplets, p.bank, cfg.hsl);
        value = h.value;
        grads.theta_data = h.d_theta_data;
        grads.theta_top = h.d_theta_top;
        break;
    }
    case LossSelector::Pfw: {
        PfwLoss w = loss_pfw(labeled, p.bank.g, plan.pfw);
        value = w.value;
        d_z = w.d_z;
        d_zaug = w.d_zaug;
        break;
    }
    case LossSelector::Cls: {
        ClsLoss c = loss_cls(batch, p, cfg.cls_use_aug);
        return {c.value, std::move(c.grads)};
    }
    case LossSelector::All: {
        TotalLoss t = total_loss(batch, p, cfg, plan);
        return {t.breakdown.total, std::move(t.grads)};
    }
    }
    chain_embedding_grads(batch, d_z, d_zaug, p.bank.g, grads);
    return {value, std::move(grads)};
}

} // namespace

FdReport check_gradients(const std::function<double(ModelParams&)>& value, const ModelParams& at,
                         const ModelGrads& analytic, double step, double tolerance) {
    FdReport rep;
    rep.step = step;
    rep.tolerance = tolerance;
    ModelParams work = at;
    auto views = tensor_views(work);
    auto an_views = tensor_views(analytic);
    for (std::size_t t = 0; t < views.size(); ++t) {
        TensorReport tr;
        tr.tensor = views[t].name;
        for (std::size_t i = 0; i < views[t].size; ++i) {
            double saved = views[t].data[i];
            views[t].data[i] = saved + step;
            double fp = value(work);
            views[t].data[i] = saved - step;
            double fm = value(work);
            views[t].data[i] = saved;
            double fd = (fp - fm) / (2.0 * step);
            double an = an_views[t].data[i];
            double err = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1.0});
            if (err > tr.max_rel_err) tr.max_rel_err = err;
        }
        tr.pass = tr.max_rel_err < tolerance;
        if (!tr.pass) rep.pass = false;
        rep.tensors.push_back(std::move(tr));
    }
    return rep;
}

FdReport finite_diff_check(LossSelector sel, const ModelParams& params, const EmbeddingDataset& ds,
                           const std::vector<std::size_t>& idx, const TrainConfig& cfg,
                           double step, double tolerance, Rng& hsl_rng) {
    TrainConfig eff = cfg;
    eff.enable_ppl = sel == LossSelector::Proto || sel == LossSelector::Aug ||
                     sel == LossSelector::All ? true : cfg.enable_ppl;
    eff.enable_hsl = sel == LossSelector::Hsl || sel == LossSelector::All ? true : cfg.enable_hsl;
    eff.enable_pfw = sel == LossSelector::Pfw || sel == LossSelector::All ? true : cfg.enable_pfw;

    EmbeddedBatch batch = embed_batch(params, ds, idx);
    StepPlan plan = make_step_plan(batch, params, eff, hsl_rng);
    auto [base_value, analytic] = eval_selected(sel, batch, params, eff, plan);
    (void)base_value;

    auto value = [&](ModelParams& p) {
        EmbeddedBatch b = embed_batch(p, ds, idx);
        return eval_selected(sel, b, p, eff, plan).first;
    };
    return check_gradients(value, params, analytic, step, tolerance);
}

std::string format_report(const FdReport& rep, const std::string& label) {
    std::string out;
    char line[160];
    for (const auto& t : rep.tensors) {
        std::snprintf(line, sizeof line, "%-8s %-12s max_rel_err=%.3e %s\n", label.c_str(),
                      t.tensor.c_str(), t.max_rel_err, t.pass ? "PASS" : "FAIL");
        out += line;
    }
    return out;
}

} // namespace phn
