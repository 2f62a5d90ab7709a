#include "p3p/optimizer.hpp"

#include <cmath>
#include <numbers>

namespace p3p {

double scheduled_lr(const OptimizerConfig& cfg, std::int64_t step) {
    if (cfg.warmup_steps > 0 && step < cfg.warmup_steps)
        return cfg.lr * static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps);
    if (!cfg.cosine || cfg.total_steps <= cfg.warmup_steps) return cfg.lr;
    const double span = static_cast<double>(cfg.total_steps - cfg.warmup_steps);
    const double progress = std::min(1.0, static_cast<double>(step - cfg.warmup_steps) / span);
    const double floor = std::min(cfg.min_lr, cfg.lr);
    return floor + 0.5 * (cfg.lr - floor) * (1.0 + std::cos(std::numbers::pi * progress));
}

TrainState::TrainState(ParameterStore p) : params(std::move(p)) {
    for (const Parameter& q : params) {
        first_moment.push_back(Matrix::Zero(q.value.rows(), q.value.cols()));
        second_moment.push_back(Matrix::Zero(q.value.rows(), q.value.cols()));
    }
}

LossReport train_step(TrainState& state, const ModelConfig& model, const Batch& batch,
                      const OptimizerConfig& opt) {
    const LossReport report = loss_and_grad(state.params, model, batch);
    const double lr = scheduled_lr(opt, state.step);
    ++state.step;
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));

    std::size_t i = 0;
    for (Parameter& p : state.params) {
        Matrix& m = state.first_moment[i];
        Matrix& v = state.second_moment[i];
        ++i;
        m = opt.beta1 * m + (1.0 - opt.beta1) * p.grad;
        v = opt.beta2 * v + (1.0 - opt.beta2) * p.grad.cwiseAbs2();
        if (lr == 0.0) continue;
        if (p.value.rows() > 1 && opt.weight_decay != 0.0) p.value *= (1.0 - lr * opt.weight_decay);
        p.value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + opt.eps);
    }
    return report;
}

}  // namespace p3p
