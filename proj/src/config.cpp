#include "mf/config.hpp"

#include <json.hpp>

#include "mf/image_io.hpp"
#include "mf/manifest.hpp"

namespace mf {

using nlohmann::json;

void RunConfig::validate() const {
    parse_strategy(strategy);
    model_config().validate();
    if (lambda < 0.0 || lambda > 0.9) throw UsageError("config: lambda must lie in [0, 0.9]");
    if (ap_window < 1 || ap_window % 2 == 0) throw UsageError("config: ap_window must be odd and positive");
    if (train_count < 1 || test_count < 0) throw UsageError("config: dataset counts must be positive");
    if (epochs < 1 || batch_size < 1) throw UsageError("config: epochs and batch_size must be positive");
    if (lr < 0.0) throw UsageError("config: lr must be nonnegative");
    if (fuse_lr_scale <= 0.0) throw UsageError("config: fuse_lr_scale must be positive");
    if (n < 1 || d < 1 || reps < 1) throw UsageError("config: n, d and reps must be positive");
}

ModelConfig RunConfig::model_config() const {
    ModelConfig mc;
    mc.image_size = image_size;
    mc.width = width;
    mc.heads = heads;
    mc.layers = layers;
    mc.ffn_hidden = ffn_hidden;
    mc.epsilon = epsilon;
    mc.use_coarse = use_coarse;
    mc.strategy = parse_strategy(strategy);
    return mc;
}

LossOptions RunConfig::loss_options() const {
    LossOptions lo;
    lo.lambda = lambda;
    lo.ap_window = ap_window;
    lo.focal.literal = literal_eq12;
    return lo;
}

std::string RunConfig::to_json() const {
    json j;
    j["seed"] = seed;
    j["strategy"] = strategy;
    j["epsilon"] = epsilon;
    j["lambda"] = lambda;
    j["layers"] = layers;
    j["heads"] = heads;
    j["width"] = width;
    j["ffn_hidden"] = ffn_hidden;
    j["use_coarse"] = use_coarse;
    j["literal_eq12"] = literal_eq12;
    j["ap_window"] = ap_window;
    j["image_size"] = image_size;
    j["train_count"] = train_count;
    j["test_count"] = test_count;
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["lr"] = lr;
    j["fuse_lr_scale"] = fuse_lr_scale;
    j["lr_decay_epoch1"] = lr_decay_epoch1;
    j["lr_decay_epoch2"] = lr_decay_epoch2;
    j["augment"] = augment;
    j["data_dir"] = data_dir;
    j["n"] = n;
    j["d"] = d;
    j["reps"] = reps;
    return j.dump(2) + "\n";
}

void apply_config_json(RunConfig& cfg, const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw UsageError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw UsageError("config: top level must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        try {
            if (key == "seed") cfg.seed = it.value().get<uint64_t>();
            else if (key == "strategy") cfg.strategy = it.value().get<std::string>();
            else if (key == "epsilon") cfg.epsilon = it.value().get<double>();
            else if (key == "lambda") cfg.lambda = it.value().get<double>();
            else if (key == "layers") cfg.layers = it.value().get<int>();
            else if (key == "heads") cfg.heads = it.value().get<int>();
            else if (key == "width") cfg.width = it.value().get<int>();
            else if (key == "ffn_hidden") cfg.ffn_hidden = it.value().get<int>();
            else if (key == "use_coarse") cfg.use_coarse = it.value().get<bool>();
            else if (key == "literal_eq12") cfg.literal_eq12 = it.value().get<bool>();
            else if (key == "ap_window") cfg.ap_window = it.value().get<int>();
            else if (key == "image_size") cfg.image_size = it.value().get<int>();
            else if (key == "train_count") cfg.train_count = it.value().get<int>();
            else if (key == "test_count") cfg.test_count = it.value().get<int>();
            else if (key == "epochs") cfg.epochs = it.value().get<int>();
            else if (key == "batch_size") cfg.batch_size = it.value().get<int>();
            else if (key == "lr") cfg.lr = it.value().get<double>();
            else if (key == "fuse_lr_scale") cfg.fuse_lr_scale = it.value().get<double>();
            else if (key == "lr_decay_epoch1") cfg.lr_decay_epoch1 = it.value().get<int>();
            else if (key == "lr_decay_epoch2") cfg.lr_decay_epoch2 = it.value().get<int>();
            else if (key == "augment") cfg.augment = it.value().get<bool>();
            else if (key == "data_dir") cfg.data_dir = it.value().get<std::string>();
            else if (key == "n") cfg.n = it.value().get<int>();
            else if (key == "d") cfg.d = it.value().get<int>();
            else if (key == "reps") cfg.reps = it.value().get<int>();
            else throw UsageError("config: unknown key '" + key + "'");
        } catch (const json::exception& e) {
            throw UsageError("config: bad value for '" + key + "': " + e.what());
        }
    }
}

RunConfig load_config_file(const std::string& path) {
    RunConfig cfg;
    std::string text;
    try {
        text = read_file(path);
    } catch (const FormatError& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    apply_config_json(cfg, text);
    return cfg;
}

} // namespace mf
