#pragma once

#include <cstdint>
#include <vector>

#include "p3p/model.hpp"

namespace p3p {

/// AdamW with linear warmup into a cosine decay.
struct OptimizerConfig {
    double lr = 5e-4;
    double min_lr = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    double weight_decay = 0.05;
    std::int64_t warmup_steps = 10;
    std::int64_t total_steps = 300;
    bool cosine = true;
};

double scheduled_lr(const OptimizerConfig& cfg, std::int64_t step);

struct TrainState {
    ParameterStore params;
    std::vector<Matrix> first_moment;
    std::vector<Matrix> second_moment;
    std::int64_t step = 0;

    explicit TrainState(ParameterStore p);
};

/// One AdamW update on `batch`. Decay skips 1 x n tensors (biases, norms,
/// tokens).
LossReport train_step(TrainState& state, const ModelConfig& model, const Batch& batch,
                      const OptimizerConfig& opt);

}  // namespace p3p
