#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "p3p/autograd.hpp"
#include "p3p/loss.hpp"
#include "p3p/masking.hpp"
#include "p3p/tokenizer.hpp"
#include "p3p/types.hpp"

namespace p3p {

struct ModelConfig {
    TokenizerConfig tokenizer{1.0 / 32.0, 32, 4, 32, 128};
    int enc_blocks = 2;
    int dec_blocks = 2;
    int dec_dim = 32;
    int enc_heads = 0;  // 0 picks width / 16, at least 1
    int dec_heads = 0;
    int mlp_ratio = 4;
    bool class_token = false;
    LossWeights loss_weights;

    int embed_dim() const { return tokenizer.embed_dim; }
    int patch_size() const { return tokenizer.patch_size; }
    int encoder_heads() const;
    int decoder_heads() const;
    int head_width() const;  // a^3 * 13
    void validate() const;

    // Encoder-S sized model on the 224^3 grid with 16^3 patches.
    static ModelConfig full_scale();
};

/// Fresh parameters for every trainable piece: SWI weight table, encoder and
/// decoder positional MLPs, transformer blocks, mask token and the head.
ParameterStore init_model(const ModelConfig& cfg, std::uint64_t seed);

/// Reads the positional MLP stored under `prefix` ("encoder.pos" or "decoder.pos").
PosEmbedParams pos_params(const ParameterStore& store, const std::string& prefix);
WeightTable swi_weights(const ParameterStore& store, const ModelConfig& cfg);

/// One tokenized, masked cloud with its reconstruction targets.
struct TrainingSample {
    std::vector<Patch> patches;        // every patch, sorted by position
    MaskPlan plan;
    std::vector<PatchTarget> targets;  // parallel to plan.masked
};
using Batch = std::vector<TrainingSample>;

TrainingSample make_training_sample(const PointCloud& pc, const ModelConfig& cfg, double mask_ratio,
                                    std::uint64_t mask_seed);

namespace model {

/// SWI embedding of `patches` as a differentiable function of the weight table.
ag::Var swi_embed(ag::Tape& tape, ParameterStore& store, const ModelConfig& cfg,
                  const std::vector<const Patch*>& patches);

ag::Var pos_embed(ag::Tape& tape, ParameterStore& store, const std::string& prefix,
                  const std::vector<PatchPosition>& positions, int space_size);

/// Pre-norm transformer stack over a padded batch. xs[b] has mask.max_len()
/// rows; rows past mask.length(b) never reach valid outputs.
std::vector<ag::Var> transformer_stack(ag::Tape& tape, ParameterStore& store, const std::string& prefix,
                                       int blocks, int heads, const std::vector<ag::Var>& xs,
                                       const AttentionMask& mask);

/// tokens[b], pos[b]: padded rows for sample b. Output rows follow the input
/// layout, with the class token first when enabled.
std::vector<ag::Var> encoder_forward(ag::Tape& tape, ParameterStore& store, const ModelConfig& cfg,
                                     const std::vector<ag::Var>& tokens, const std::vector<ag::Var>& pos,
                                     const AttentionMask& mask);

struct DecoderSample {
    ag::Var encoded;                         // visible rows only, no class token
    std::vector<PatchPosition> visible_positions;
    std::vector<PatchPosition> masked_positions;
};

/// One (masked count) x (a^3 * 13) head matrix per sample.
std::vector<ag::Var> decoder_forward(ag::Tape& tape, ParameterStore& store, const ModelConfig& cfg,
                                     const std::vector<DecoderSample>& samples);

}  // namespace model

// Plain-matrix conveniences over the tape versions.
std::vector<Matrix> encoder_forward(ParameterStore& store, const ModelConfig& cfg,
                                    const std::vector<Matrix>& tokens, const std::vector<Matrix>& pos,
                                    const AttentionMask& mask);

struct DecoderInput {
    Matrix encoded;
    std::vector<PatchPosition> visible_positions;
    std::vector<PatchPosition> masked_positions;
};
std::vector<std::vector<HeadOutput>> decoder_forward(ParameterStore& store, const ModelConfig& cfg,
                                                     const std::vector<DecoderInput>& samples);

struct LossReport {
    double total = 0, mse = 0, chamfer = 0, occupancy = 0;
    std::size_t masked_patches = 0;
};

/// Chamfer decisions per sample, per masked patch.
using LossDecisions = std::vector<std::vector<ChamferDecision>>;

/// Mean over masked patches, then over the samples that have any. Throws
/// std::runtime_error naming the term when a loss is not finite. `frozen`
/// replays recorded Chamfer decisions.
LossReport evaluate_loss(ParameterStore& store, const ModelConfig& cfg, const Batch& batch,
                         const LossDecisions* frozen = nullptr);
/// Same value; also overwrites every parameter's grad. `record` receives the
/// Chamfer decisions taken.
LossReport loss_and_grad(ParameterStore& store, const ModelConfig& cfg, const Batch& batch,
                         LossDecisions* record = nullptr);

struct GradCheckEntry {
    std::string name;
    Eigen::Index index = 0;
    double analytic = 0, numeric = 0, rel_error = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_error = 0;
    std::string worst;  // "<param>[<flat index>]"
};

/// Central differences on `samples` randomly chosen scalars. Relative error
/// is |a - n| / max(|a|, |n|, 1e-6). The Chamfer decisions taken at the
/// unperturbed point are replayed at +-step, so the difference quotient
/// measures the same smooth piece the analytic gradient belongs to.
GradCheckReport gradient_check(ParameterStore& store, const ModelConfig& cfg, const Batch& batch,
                               std::size_t samples, double step, std::uint64_t seed);

}  // namespace p3p
