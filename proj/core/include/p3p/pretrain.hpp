#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "p3p/masking.hpp"
#include "p3p/model.hpp"
#include "p3p/optimizer.hpp"

namespace p3p {

struct PretrainConfig {
    ModelConfig model;
    OptimizerConfig optimizer;
    double mask_ratio = 0.6;
    AugmentOptions augment;
    bool use_augment = true;
    bool rotate = true;
    std::int64_t steps = 300;
    std::size_t batch_size = 8;
    std::uint64_t seed = 0;
};

struct StepLog {
    std::int64_t step = 0;  // 1-based
    LossReport loss;
};

// Per step: draw a batch (epoch-wise shuffle of the corpus), rotate about
// z, augment, tokenize, mask, then one AdamW update. Everything random is
// derived from cfg.seed. `on_step` may throw to abort.
std::vector<StepLog> pretrain(TrainState& state, const std::vector<PointCloud>& corpus,
                              const PretrainConfig& cfg,
                              const std::function<void(const StepLog&)>& on_step = {});

// The per-sample preparation used by pretrain, exposed for tools and tests.
TrainingSample prepare_sample(const PointCloud& pc, const PretrainConfig& cfg, std::uint64_t sample_seed);

}  // namespace p3p
