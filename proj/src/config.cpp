#include <json.hpp>

#include "phn/errors.hpp"
#include "phn/model.hpp"

namespace phn {

using nlohmann::json;

void TrainConfig::validate() const {
    geometry.validate();
    if (num_bona_protos < 1 || num_spoof_protos < 1 || num_top_protos < 1)
        throw ConfigError("prototype counts must be >= 1");
    if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
    if (!(lr_prototypes > 0) || !(lr_projector > 0) || !(lr_classifier > 0))
        throw ConfigError("learning rates must be positive");
    if (!(adam_beta1 > 0 && adam_beta1 < 1) || !(adam_beta2 > 0 && adam_beta2 < 1))
        throw ConfigError("adam betas must be in (0,1)");
    if (!(adam_eps > 0)) throw ConfigError("adam_eps must be positive");
    if (!(mask_ratio_bona >= 0 && mask_ratio_bona <= 1) ||
        !(mask_ratio_spoof >= 0 && mask_ratio_spoof <= 1))
        throw ConfigError("mask ratios must be in [0,1]");
    if (hsl.margin < 0) throw ConfigError("hsl margin must be >= 0");
    if (init_sigma < 0 || aug_sigma < 0) throw ConfigError("sigmas must be >= 0");
}

namespace {

json to_json(const TrainConfig& c) {
    return json{
        {"geometry", {{"c", c.geometry.c}, {"eps_ball", c.geometry.eps_ball}, {"dim", c.geometry.dim}}},
        {"num_bona_protos", c.num_bona_protos},
        {"num_spoof_protos", c.num_spoof_protos},
        {"num_top_protos", c.num_top_protos},
        {"hsl",
         {{"neighbors", c.hsl.neighbors},
          {"margin", c.hsl.margin},
          {"triplets_per_step", c.hsl.triplets_per_step},
          {"gumbel", c.hsl.gumbel}}},
        {"mask_ratio_bona", c.mask_ratio_bona},
        {"mask_ratio_spoof", c.mask_ratio_spoof},
        {"batch_size", c.batch_size},
        {"lr_prototypes", c.lr_prototypes},
        {"lr_projector", c.lr_projector},
        {"lr_classifier", c.lr_classifier},
        {"adam_beta1", c.adam_beta1},
        {"adam_beta2", c.adam_beta2},
        {"adam_eps", c.adam_eps},
        {"epochs", c.epochs},
        {"seed", c.seed},
        {"enable_ppl", c.enable_ppl},
        {"enable_hsl", c.enable_hsl},
        {"enable_pfw", c.enable_pfw},
        {"cls_bias_enabled", c.cls_bias_enabled},
        {"cls_use_aug", c.cls_use_aug},
        {"init_sigma", c.init_sigma},
        {"aug_sigma", c.aug_sigma},
    };
}

TrainConfig from_json(const json& j) {
    TrainConfig c;
    try {
        const auto& g = j.at("geometry");
        c.geometry.c = g.at("c").get<double>();
        c.geometry.eps_ball = g.at("eps_ball").get<double>();
        c.geometry.dim = g.at("dim").get<std::size_t>();
        c.num_bona_protos = j.at("num_bona_protos").get<std::size_t>();
        c.num_spoof_protos = j.at("num_spoof_protos").get<std::size_t>();
        c.num_top_protos = j.at("num_top_protos").get<std::size_t>();
        const auto& h = j.at("hsl");
        c.hsl.neighbors = h.at("neighbors").get<std::size_t>();
        c.hsl.margin = h.at("margin").get<double>();
        c.hsl.triplets_per_step = h.at("triplets_per_step").get<std::size_t>();
        c.hsl.gumbel = h.at("gumbel").get<bool>();
        c.mask_ratio_bona = j.at("mask_ratio_bona").get<double>();
        c.mask_ratio_spoof = j.at("mask_ratio_spoof").get<double>();
        c.batch_size = j.at("batch_size").get<std::size_t>();
        c.lr_prototypes = j.at("lr_prototypes").get<double>();
        c.lr_projector = j.at("lr_projector").get<double>();
        c.lr_classifier = j.at("lr_classifier").get<double>();
        c.adam_beta1 = j.at("adam_beta1").get<double>();
        c.adam_beta2 = j.at("adam_beta2").get<double>();
        c.adam_eps = j.at("adam_eps").get<double>();
        c.epochs = j.at("epochs").get<std::size_t>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.enable_ppl = j.at("enable_ppl").get<bool>();
        c.enable_hsl = j.at("enable_hsl").get<bool>();
        c.enable_pfw = j.at("enable_pfw").get<bool>();
        c.cls_bias_enabled = j.at("cls_bias_enabled").get<bool>();
        c.cls_use_aug = j.at("cls_use_aug").get<bool>();
        c.init_sigma = j.at("init_sigma").get<double>();
        c.aug_sigma = j.at("aug_sigma").get<double>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

void merge_into(json& base, const json& patch, const std::string& path) {
    if (!patch.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [k, v] : patch.items()) {
        if (!base.contains(k)) throw ConfigError("unknown config key: " + path + k);
        if (base[k].is_object()) {
            merge_into(base[k], v, path + k + ".");
        } else {
            if (v.is_object() || v.is_array())
                throw ConfigError("config key " + path + k + " expects a scalar");
            base[k] = v;
        }
    }
}

json parse(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
}

} // namespace

std::string config_to_json(const TrainConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

TrainConfig config_from_json(const std::string& text) {
    json base = to_json(TrainConfig{});
    merge_into(base, parse(text), "");
    return from_json(base);
}

void apply_config_json(TrainConfig& cfg, const std::string& text) {
    json base = to_json(cfg);
    merge_into(base, parse(text), "");
    cfg = from_json(base);
}

void apply_config_override(TrainConfig& cfg, const std::string& key, const std::string& value) {
    json base = to_json(cfg);
    json* node = &base;
    std::string path = key;
    std::size_t start = 0;
    std::string last;
    for (;;) {
        std::size_t dotpos = path.find('.', start);
        std::string part = path.substr(start, dotpos - start);
        if (dotpos == std::string::npos) {
            last = part;
            break;
        }
        if (!node->contains(part) || !(*node)[part].is_object())
            throw ConfigError("unknown config key: " + key);
        node = &(*node)[part];
        start = dotpos + 1;
    }
    if (!node->contains(last)) throw ConfigError("unknown config key: " + key);
    json& slot = (*node)[last];
    try {
        if (slot.is_boolean()) {
            if (value == "true" || value == "1")
                slot = true;
            else if (value == "false" || value == "0")
                slot = false;
            else
                throw ConfigError("boolean value expected for " + key);
        } else if (slot.is_number_unsigned()) {
            slot = static_cast<std::uint64_t>(std::stoull(value));
        } else if (slot.is_number()) {
            slot = std::stod(value);
        } else {
            slot = value;
        }
    } catch (const std::invalid_argument&) {
        throw ConfigError("bad value for " + key + ": " + value);
    } catch (const std::out_of_range&) {
        throw ConfigError("value out of range for " + key + ": " + value);
    }
    cfg = from_json(base);
}

} // namespace phn
