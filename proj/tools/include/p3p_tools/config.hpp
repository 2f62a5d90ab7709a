#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "p3p/masking.hpp"
#include "p3p/model.hpp"
#include "p3p/optimizer.hpp"

namespace p3p::config {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::uint64_t seed = 0;
    ModelConfig model;        // owns the tokenizer settings
    double mask_ratio = 0.6;
    AugmentOptions augment;   // ratio 1/2, scale + translate on
    bool rotate = true;       // random z rotation per sample
    OptimizerConfig optimizer;
    std::int64_t steps = 300;
    std::size_t batch_size = 8;
    std::string data_dir, out_path, log_path;

    const TokenizerConfig& tokenizer() const { return model.tokenizer; }
};

/// Full-scale tokenizer and model (224^3 grid, 16^3 patches, C = 384).
RunConfig full_defaults();
/// Desk-scale model (32^3 grid, 4^3 patches, C = 32, 2 + 2 blocks).
RunConfig desk_defaults();

/// Overlays `doc` on `base`. Unknown keys, wrong types and broken
/// invariants raise ConfigError naming the JSON path.
RunConfig parse_config(const nlohmann::json& doc, RunConfig base);
/// Reads and parses a JSON file. Throws p3p::io::IoError when unreadable.
RunConfig load_config(const std::filesystem::path& path, RunConfig base);

nlohmann::json to_json(const RunConfig& cfg);

}  // namespace p3p::config
