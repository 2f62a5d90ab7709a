#include "p3p/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "p3p/lift.hpp"

namespace p3p {

TrainingSample prepare_sample(const PointCloud& pc, const PretrainConfig& cfg, std::uint64_t sample_seed) {
    std::mt19937_64 rng(sample_seed);
    PointCloud cloud = pc;
    if (cfg.rotate) {
        std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
        cloud = rotate_z(cloud, angle(rng));
    }
    if (cfg.use_augment) cloud = augment(cloud, cfg.augment, rng());
    return make_training_sample(cloud, cfg.model, cfg.mask_ratio, rng());
}

std::vector<StepLog> pretrain(TrainState& state, const std::vector<PointCloud>& corpus, const PretrainConfig& cfg,
                              const std::function<void(const StepLog&)>& on_step) {
    if (corpus.empty()) throw std::invalid_argument("pretrain: empty corpus");
    if (cfg.batch_size == 0) throw std::invalid_argument("pretrain: batch size must be >= 1");
    cfg.model.validate();

    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = order.size();

    std::vector<StepLog> log;
    log.reserve(static_cast<std::size_t>(std::max<std::int64_t>(cfg.steps, 0)));
    for (std::int64_t step = 1; step <= cfg.steps; ++step) {
        Batch batch;
        batch.reserve(cfg.batch_size);
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            const std::size_t idx = order[cursor++];
            batch.push_back(prepare_sample(corpus[idx], cfg, rng()));
        }
        StepLog entry{step, {}};
        try {
            entry.loss = train_step(state, cfg.model, batch, cfg.optimizer);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("step " + std::to_string(step) + ": " + e.what());
        }
        log.push_back(entry);
        if (on_step) on_step(entry);
    }
    return log;
}

}  // namespace p3p
