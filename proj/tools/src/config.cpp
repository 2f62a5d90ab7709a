#include "p3p_tools/config.hpp"

#include <fstream>
#include <functional>
#include <map>

#include "p3p_tools/io.hpp"

namespace p3p::config {

using nlohmann::json;

namespace {

// Walks one JSON object, dispatching each key to a field handler and
// rejecting anything not listed.
class Section {
public:
    Section(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
        if (!obj_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    template <class T>
    Section& field(const std::string& key, T& out) {
        handlers_[key] = [this, key, &out](const json& v) { out = read<T>(v, path_ + "." + key); };
        return *this;
    }
    Section& custom(const std::string& key, std::function<void(const json&, const std::string&)> fn) {
        handlers_[key] = [this, key, fn](const json& v) { fn(v, path_ + "." + key); };
        return *this;
    }

    void run() {
        for (const auto& [key, value] : obj_.items()) {
            const auto it = handlers_.find(key);
            if (it == handlers_.end()) throw ConfigError(path_ + ": unknown key '" + key + "'");
            it->second(value);
        }
    }

    bool has(const std::string& key) const { return obj_.contains(key); }

    template <class T>
    static T read(const json& v, const std::string& where) {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError(where + ": expected a boolean");
            return v.get<bool>();
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_unsigned()) return static_cast<T>(v.get<std::uint64_t>());
                if (v.get<std::int64_t>() < 0) throw ConfigError(where + ": must be non-negative");
            }
            return static_cast<T>(v.get<std::int64_t>());
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!v.is_number()) throw ConfigError(where + ": expected a number");
            return v.get<double>();
        } else {
            if (!v.is_string()) throw ConfigError(where + ": expected a string");
            return v.get<std::string>();
        }
    }

private:
    const json& obj_;
    std::string path_;
    std::map<std::string, std::function<void(const json&)>> handlers_;
};

void check(bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
}

}  // namespace

RunConfig full_defaults() {
    RunConfig cfg;
    cfg.model = ModelConfig::full_scale();
    return cfg;
}

RunConfig desk_defaults() { return RunConfig{}; }

RunConfig parse_config(const json& doc, RunConfig cfg) {
    TokenizerConfig& tok = cfg.model.tokenizer;
    bool voxel_size_given = false;

    Section root(doc, "$");
    root.field("seed", cfg.seed);
    root.custom("tokenizer", [&](const json& v, const std::string& p) {
        Section s(v, p);
        s.field("voxel_size", tok.voxel_size)
            .field("space_size", tok.space_size)
            .field("patch_size", tok.patch_size)
            .field("embed_dim", tok.embed_dim)
            .field("posembed_hidden", tok.posembed_hidden);
        voxel_size_given = s.has("voxel_size");
        s.run();
    });
    root.custom("masking", [&](const json& v, const std::string& p) {
        Section(v, p).field("ratio", cfg.mask_ratio).run();
    });
    root.custom("augment", [&](const json& v, const std::string& p) {
        Section(v, p)
            .field("ratio", cfg.augment.ratio)
            .field("scale", cfg.augment.scale)
            .field("translate", cfg.augment.translate)
            .field("rotate", cfg.rotate)
            .run();
    });
    root.custom("model", [&](const json& v, const std::string& p) {
        Section(v, p)
            .field("enc_blocks", cfg.model.enc_blocks)
            .field("dec_blocks", cfg.model.dec_blocks)
            .field("dec_dim", cfg.model.dec_dim)
            .field("enc_heads", cfg.model.enc_heads)
            .field("dec_heads", cfg.model.dec_heads)
            .field("mlp_ratio", cfg.model.mlp_ratio)
            .field("class_token", cfg.model.class_token)
            .custom("loss_weights",
                    [&](const json& w, const std::string& wp) {
                        Section(w, wp)
                            .field("mse", cfg.model.loss_weights.mse)
                            .field("chamfer", cfg.model.loss_weights.chamfer)
                            .field("occupancy", cfg.model.loss_weights.occupancy)
                            .run();
                    })
            .run();
    });
    root.custom("optimizer", [&](const json& v, const std::string& p) {
        OptimizerConfig& o = cfg.optimizer;
        Section(v, p)
            .custom("kind",
                    [](const json& k, const std::string& kp) {
                        if (Section::read<std::string>(k, kp) != "adamw")
                            throw ConfigError(kp + ": only \"adamw\" is supported");
                    })
            .field("lr", o.lr)
            .field("min_lr", o.min_lr)
            .field("beta1", o.beta1)
            .field("beta2", o.beta2)
            .field("eps", o.eps)
            .field("weight_decay", o.weight_decay)
            .field("warmup_steps", o.warmup_steps)
            .field("cosine", o.cosine)
            .field("steps", cfg.steps)
            .field("batch_size", cfg.batch_size)
            .run();
    });
    root.custom("io", [&](const json& v, const std::string& p) {
        Section(v, p).field("data", cfg.data_dir).field("out", cfg.out_path).field("log", cfg.log_path).run();
    });
    root.run();

    if (!voxel_size_given && tok.space_size > 0) tok.voxel_size = 1.0 / tok.space_size;
    cfg.optimizer.total_steps = cfg.steps;

    try {
        cfg.model.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    check(cfg.mask_ratio >= 0 && cfg.mask_ratio < 1, "masking.ratio must lie in [0, 1)");
    check(cfg.augment.ratio > 0 && cfg.augment.ratio <= 1, "augment.ratio must lie in (0, 1]");
    check(cfg.optimizer.lr >= 0, "optimizer.lr must be >= 0");
    check(cfg.optimizer.min_lr >= 0, "optimizer.min_lr must be >= 0");
    check(cfg.optimizer.beta1 >= 0 && cfg.optimizer.beta1 < 1, "optimizer.beta1 must lie in [0, 1)");
    check(cfg.optimizer.beta2 >= 0 && cfg.optimizer.beta2 < 1, "optimizer.beta2 must lie in [0, 1)");
    check(cfg.optimizer.eps > 0, "optimizer.eps must be > 0");
    check(cfg.optimizer.warmup_steps >= 0, "optimizer.warmup_steps must be >= 0");
    check(cfg.steps >= 0, "optimizer.steps must be >= 0");
    check(cfg.batch_size >= 1, "optimizer.batch_size must be >= 1");
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw io::IoError("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in, nullptr, true, false);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return parse_config(doc, std::move(base));
}

json to_json(const RunConfig& cfg) {
    const TokenizerConfig& t = cfg.model.tokenizer;
    const OptimizerConfig& o = cfg.optimizer;
    return json{
        {"seed", cfg.seed},
        {"tokenizer",
         {{"voxel_size", t.voxel_size},
          {"space_size", t.space_size},
          {"patch_size", t.patch_size},
          {"embed_dim", t.embed_dim},
          {"posembed_hidden", t.posembed_hidden}}},
        {"masking", {{"ratio", cfg.mask_ratio}}},
        {"augment",
         {{"ratio", cfg.augment.ratio},
          {"scale", cfg.augment.scale},
          {"translate", cfg.augment.translate},
          {"rotate", cfg.rotate}}},
        {"model",
         {{"enc_blocks", cfg.model.enc_blocks},
          {"dec_blocks", cfg.model.dec_blocks},
          {"dec_dim", cfg.model.dec_dim},
          {"enc_heads", cfg.model.enc_heads},
          {"dec_heads", cfg.model.dec_heads},
          {"mlp_ratio", cfg.model.mlp_ratio},
          {"class_token", cfg.model.class_token},
          {"loss_weights",
           {{"mse", cfg.model.loss_weights.mse},
            {"chamfer", cfg.model.loss_weights.chamfer},
            {"occupancy", cfg.model.loss_weights.occupancy}}}}},
        {"optimizer",
         {{"kind", "adamw"},
          {"lr", o.lr},
          {"min_lr", o.min_lr},
          {"beta1", o.beta1},
          {"beta2", o.beta2},
          {"eps", o.eps},
          {"weight_decay", o.weight_decay},
          {"warmup_steps", o.warmup_steps},
          {"cosine", o.cosine},
          {"steps", cfg.steps},
          {"batch_size", cfg.batch_size}}},
        {"io", {{"data", cfg.data_dir}, {"out", cfg.out_path}, {"log", cfg.log_path}}},
    };
}

}  // namespace p3p::config
