#include "p3p/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace p3p {

namespace {

Matrix xavier(Eigen::Index fan_in, Eigen::Index fan_out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix m(fan_in, fan_out);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

Matrix small_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 0.02);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
    return m;
}

void add_linear(ParameterStore& s, const std::string& prefix, Eigen::Index in, Eigen::Index out,
                std::mt19937_64& rng) {
    s.add(prefix + ".w", xavier(in, out, rng));
    s.add(prefix + ".b", Matrix::Zero(1, out));
}

void add_norm(ParameterStore& s, const std::string& prefix, Eigen::Index width) {
    s.add(prefix + ".gamma", Matrix::Ones(1, width));
    s.add(prefix + ".beta", Matrix::Zero(1, width));
}

void add_blocks(ParameterStore& s, const std::string& prefix, int blocks, Eigen::Index width, int mlp_ratio,
                std::mt19937_64& rng) {
    for (int i = 0; i < blocks; ++i) {
        const std::string b = prefix + ".block" + std::to_string(i);
        add_norm(s, b + ".norm1", width);
        add_linear(s, b + ".attn.qkv", width, 3 * width, rng);
        add_linear(s, b + ".attn.proj", width, width, rng);
        add_norm(s, b + ".norm2", width);
        add_linear(s, b + ".mlp.fc1", width, mlp_ratio * width, rng);
        add_linear(s, b + ".mlp.fc2", mlp_ratio * width, width, rng);
    }
}

void add_pos_mlp(ParameterStore& s, const std::string& prefix, int hidden, Eigen::Index width,
                 std::mt19937_64& rng) {
    add_linear(s, prefix + ".fc1", 3, hidden, rng);
    add_linear(s, prefix + ".fc2", hidden, width, rng);
}

int default_heads(int width, int requested) {
    if (requested > 0) return requested;
    return std::max(1, width / 16);
}

ag::Var layer_norm(ag::Tape& tape, ParameterStore& store, const std::string& prefix, ag::Var x) {
    return ag::layer_norm(x, tape.param(store.get(prefix + ".gamma")), tape.param(store.get(prefix + ".beta")));
}

ag::Var attention(ag::Tape& tape, ParameterStore& store, const std::string& prefix, ag::Var x, int heads,
                  const std::vector<std::uint8_t>& valid) {
    const Eigen::Index width = x.cols();
    const Eigen::Index head_dim = width / heads;
    const ag::Var qkv = ag::linear(tape, store, prefix + ".qkv", x);
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    std::vector<ag::Var> outs;
    for (int h = 0; h < heads; ++h) {
        const ag::Var q = ag::slice_cols(qkv, h * head_dim, head_dim);
        const ag::Var k = ag::slice_cols(qkv, width + h * head_dim, head_dim);
        const ag::Var v = ag::slice_cols(qkv, 2 * width + h * head_dim, head_dim);
        const ag::Var probs = ag::masked_softmax(ag::scale(ag::matmul_transposed(q, k), inv_scale), valid, valid);
        outs.push_back(ag::matmul(probs, v));
    }
    return ag::linear(tape, store, prefix + ".proj", heads == 1 ? outs[0] : ag::concat_cols(outs));
}

ag::Var block(ag::Tape& tape, ParameterStore& store, const std::string& prefix, ag::Var x, int heads,
              const std::vector<std::uint8_t>& valid) {
    x = ag::add(x, attention(tape, store, prefix + ".attn", layer_norm(tape, store, prefix + ".norm1", x), heads, valid));
    const ag::Var h = layer_norm(tape, store, prefix + ".norm2", x);
    const ag::Var m = ag::linear(tape, store, prefix + ".mlp.fc2",
                                 ag::gelu(ag::linear(tape, store, prefix + ".mlp.fc1", h)));
    return ag::add(x, m);
}

ag::Var pad_rows(ag::Tape& tape, ag::Var x, Eigen::Index rows) {
    if (x.rows() == rows) return x;
    return ag::concat_rows({x, tape.constant(Matrix::Zero(rows - x.rows(), x.cols()))});
}

std::vector<Eigen::Index> index_range(Eigen::Index begin, Eigen::Index end) {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = begin; i < end; ++i) out.push_back(i);
    return out;
}

void check_finite(double v, const char* term) {
    if (!std::isfinite(v)) throw std::runtime_error(std::string("non-finite loss term: ") + term);
}

}  // namespace

int ModelConfig::encoder_heads() const { return default_heads(embed_dim(), enc_heads); }
int ModelConfig::decoder_heads() const { return default_heads(dec_dim, dec_heads); }

int ModelConfig::head_width() const {
    const int a = patch_size();
    return a * a * a * kHeadChannels;
}

void ModelConfig::validate() const {
    tokenizer.validate();
    if (enc_blocks < 0 || dec_blocks < 0) throw std::invalid_argument("model: block counts must be >= 0");
    if (dec_dim < 1 || mlp_ratio < 1) throw std::invalid_argument("model: widths must be >= 1");
    if (embed_dim() % encoder_heads() != 0)
        throw std::invalid_argument("model: encoder width not divisible by head count");
    if (dec_dim % decoder_heads() != 0)
        throw std::invalid_argument("model: decoder width not divisible by head count");
}

ModelConfig ModelConfig::full_scale() {
    ModelConfig cfg;
    cfg.tokenizer = TokenizerConfig{};
    cfg.enc_blocks = 12;
    cfg.dec_blocks = 8;
    cfg.dec_dim = 512;
    return cfg;
}

ParameterStore init_model(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    ParameterStore s;
    const int a = cfg.patch_size();
    const Eigen::Index c = cfg.embed_dim();
    const Eigen::Index cells = static_cast<Eigen::Index>(a) * a * a;

    Matrix table(cells * kPatchFeatures, c);
    for (Eigen::Index d = 0; d < cells; ++d) table.middleRows(d * kPatchFeatures, kPatchFeatures) = xavier(kPatchFeatures, c, rng);
    s.add("tokenizer.swi_weights", std::move(table));

    add_pos_mlp(s, "encoder.pos", cfg.tokenizer.posembed_hidden, c, rng);
    if (cfg.class_token) s.add("encoder.cls_token", small_normal(1, c, rng));
    add_blocks(s, "encoder", cfg.enc_blocks, c, cfg.mlp_ratio, rng);

    add_linear(s, "decoder.embed", c, cfg.dec_dim, rng);
    s.add("decoder.mask_token", small_normal(1, cfg.dec_dim, rng));
    add_pos_mlp(s, "decoder.pos", cfg.tokenizer.posembed_hidden, cfg.dec_dim, rng);
    add_blocks(s, "decoder", cfg.dec_blocks, cfg.dec_dim, cfg.mlp_ratio, rng);
    add_norm(s, "decoder.norm", cfg.dec_dim);
    add_linear(s, "decoder.head", cfg.dec_dim, cfg.head_width(), rng);
    return s;
}

PosEmbedParams pos_params(const ParameterStore& store, const std::string& prefix) {
    return {store.get(prefix + ".fc1.w").value, store.get(prefix + ".fc1.b").value.row(0),
            store.get(prefix + ".fc2.w").value, store.get(prefix + ".fc2.b").value.row(0)};
}

WeightTable swi_weights(const ParameterStore& store, const ModelConfig& cfg) {
    return WeightTable(cfg.patch_size(), cfg.embed_dim(), store.get("tokenizer.swi_weights").value);
}

TrainingSample make_training_sample(const PointCloud& pc, const ModelConfig& cfg, double mask_ratio,
                                    std::uint64_t mask_seed) {
    TrainingSample s;
    s.patches = graph_features(partition(voxelize(pc, cfg.tokenizer), cfg.patch_size()));
    s.plan = random_mask(s.patches.size(), mask_ratio, mask_seed);
    s.targets.reserve(s.plan.masked.size());
    for (std::size_t i : s.plan.masked) s.targets.push_back(make_patch_target(s.patches[i], cfg.patch_size()));
    return s;
}

namespace model {

ag::Var swi_embed(ag::Tape& tape, ParameterStore& store, const ModelConfig& cfg,
                  const std::vector<const Patch*>& patches) {
    const ag::Var table = tape.param(store.get("tokenizer.swi_weights"));
    const Eigen::Index width = cfg.embed_dim();
    const std::int64_t cells = static_cast<std::int64_t>(cfg.patch_size()) * cfg.patch_size() * cfg.patch_size();
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(patches.size()), width);
    for (std::size_t p = 0; p < patches.size(); ++p) {
        const Patch& patch = *patches[p];
        if (patch.size() == 0) throw std::invalid_argument("swi_embed: empty patch");
        for (std::size_t i = 0; i < patch.size(); ++i) {
            const std::int64_t d = patch.cell_indices[i];
            if (d < 0 || d >= cells) throw std::out_of_range("swi_embed: cell index out of range");
            Eigen::Map<const RowVector> v(patch.voxels[i].data(), kPatchFeatures);
            out.row(static_cast<Eigen::Index>(p)).noalias() +=
                v * table.value().middleRows(d * kPatchFeatures, kPatchFeatures);
        }
        out.row(static_cast<Eigen::Index>(p)) /= static_cast<double>(patch.size());
    }
    return tape.push(std::move(out), [table, patches](ag::Tape& t, const Matrix& g) {
        t.accumulate_with(table, [&](Matrix& gw) {
            for (std::size_t p = 0; p < patches.size(); ++p) {
                const Patch& patch = *patches[p];
                const double inv = 1.0 / static_cast<double>(patch.size());
                for (std::size_t i = 0; i < patch.size(); ++i) {
                    const Eigen::Index d = patch.cell_indices[i];
                    Eigen::Map<const RowVector> v(patch.voxels[i].data(), kPatchFeatures);
                    gw.middleRows(d * kPatchFeatures, kPatchFeatures).noalias() +=
                        inv * v.transpose() * g.row(static_cast<Eigen::Index>(p));
                }
            }
        });
    });
}

ag::Var pos_embed(ag::Tape& tape, ParameterStore& store, const std::string& prefix,
                  const std::vector<PatchPosition>& positions, int space_size) {
    Matrix coords(static_cast<Eigen::Index>(positions.size()), 3);
    for (std::size_t i = 0; i < positions.size(); ++i)
        for (int k = 0; k < 3; ++k)
            coords(static_cast<Eigen::Index>(i), k) = static_cast<double>(positions[i][static_cast<std::size_t>(k)]) / space_size;
    const ag::Var hidden = ag::gelu(ag::linear(tape, store, prefix + ".fc1", tape.constant(std::move(coords))));
    return ag::linear(tape, store, prefix + ".fc2", hidden);
}

std::vector<ag::Var> transformer_stack(ag::Tape& tape, ParameterStore& store, const std::string& prefix,
                                       int blocks, int heads, const std::vector<ag::Var>& xs,
                                       const AttentionMask& mask) {
    if (xs.size() != mask.batch()) throw std::invalid_argument("transformer: batch size does not match mask");
    std::vector<ag::Var> out;
    out.reserve(xs.size());
    for (std::size_t b = 0; b < xs.size(); ++b) {
        if (static_cast<std::size_t>(xs[b].rows()) != mask.max_len())
            throw std::invalid_argument("transformer: sample rows must equal the padded length");
        const auto valid = mask.row(b);
        ag::Var x = xs[b];
        for (int i = 0; i < blocks; ++i) x = block(tape, store, prefix + ".block" + std::to_string(i), x, heads, valid);
        out.push_back(x);
    }
    return out;
}

std::vector<ag::Var> encoder_forward(ag::Tape& tape, ParameterStore& store, const ModelConfig& cfg,
                                     const std::vector<ag::Var>& tokens, const std::vector<ag::Var>& pos,
                                     const AttentionMask& mask) {
    if (tokens.size() != pos.size() || tokens.size() != mask.batch())
        throw std::invalid_argument("encoder: tokens, positions and mask disagree on batch size");
    std::vector<ag::Var> xs;
    std::vector<std::size_t> lengths;
    for (std::size_t b = 0; b < tokens.size(); ++b) {
        if (tokens[b].cols() != cfg.embed_dim() || pos[b].cols() != cfg.embed_dim())
            throw std::invalid_argument("encoder: token width does not match embed dim");
        ag::Var x = ag::add(tokens[b], pos[b]);
        if (cfg.class_token) x = ag::concat_rows({tape.param(store.get("encoder.cls_token")), x});
        xs.push_back(x);
        lengths.push_back(mask.length(b) + (cfg.class_token ? 1 : 0));
    }
    const AttentionMask stack_mask(lengths, mask.max_len() + (cfg.class_token ? 1 : 0));
    return transformer_stack(tape, store, "encoder", cfg.enc_blocks, cfg.encoder_heads(), xs, stack_mask);
}

std::vector<ag::Var> decoder_forward(ag::Tape& tape, ParameterStore& store, const ModelConfig& cfg,
                                     const std::vector<DecoderSample>& samples) {
    std::vector<std::size_t> lengths;
    for (const DecoderSample& s : samples) {
        if (s.encoded.cols() != cfg.embed_dim()) throw std::invalid_argument("decoder: encoded width mismatch");
        if (static_cast<std::size_t>(s.encoded.rows()) != s.visible_positions.size())
            throw std::invalid_argument("decoder: one visible position per encoded row required");
        lengths.push_back(s.visible_positions.size() + s.masked_positions.size());
    }
    const std::size_t max_len = lengths.empty() ? 0 : *std::max_element(lengths.begin(), lengths.end());
    const AttentionMask mask(lengths, max_len);
    const ag::Var mask_token = tape.param(store.get("decoder.mask_token"));

    std::vector<ag::Var> xs;
    for (const DecoderSample& s : samples) {
        std::vector<PatchPosition> positions = s.visible_positions;
        positions.insert(positions.end(), s.masked_positions.begin(), s.masked_positions.end());
        std::vector<ag::Var> parts{ag::linear(tape, store, "decoder.embed", s.encoded)};
        if (!s.masked_positions.empty())
            parts.push_back(ag::repeat_row(mask_token, static_cast<Eigen::Index>(s.masked_positions.size())));
        const ag::Var seq = ag::add(ag::concat_rows(parts),
                                    pos_embed(tape, store, "decoder.pos", positions, cfg.tokenizer.space_size));
        xs.push_back(pad_rows(tape, seq, static_cast<Eigen::Index>(max_len)));
    }
    const auto ys = transformer_stack(tape, store, "decoder", cfg.dec_blocks, cfg.decoder_heads(), xs, mask);

    std::vector<ag::Var> heads;
    for (std::size_t b = 0; b < samples.size(); ++b) {
        const auto visible = static_cast<Eigen::Index>(samples[b].visible_positions.size());
        const auto masked = static_cast<Eigen::Index>(samples[b].masked_positions.size());
        if (masked == 0) {
            heads.push_back(tape.constant(Matrix::Zero(0, cfg.head_width())));
            continue;
        }
        const ag::Var rows = ag::gather_rows(ys[b], index_range(visible, visible + masked));
        heads.push_back(ag::linear(tape, store, "decoder.head", layer_norm(tape, store, "decoder.norm", rows)));
    }
    return heads;
}

}  // namespace model

std::vector<Matrix> encoder_forward(ParameterStore& store, const ModelConfig& cfg,
                                    const std::vector<Matrix>& tokens, const std::vector<Matrix>& pos,
                                    const AttentionMask& mask) {
    ag::Tape tape;
    std::vector<ag::Var> tv, pv;
    for (const Matrix& m : tokens) tv.push_back(tape.constant(m));
    for (const Matrix& m : pos) pv.push_back(tape.constant(m));
    const auto out = model::encoder_forward(tape, store, cfg, tv, pv, mask);
    std::vector<Matrix> result;
    for (const ag::Var& v : out) result.push_back(v.value());
    return result;
}

std::vector<std::vector<HeadOutput>> decoder_forward(ParameterStore& store, const ModelConfig& cfg,
                                                     const std::vector<DecoderInput>& samples) {
    ag::Tape tape;
    std::vector<model::DecoderSample> ds;
    for (const DecoderInput& s : samples)
        ds.push_back({tape.constant(s.encoded), s.visible_positions, s.masked_positions});
    const auto heads = model::decoder_forward(tape, store, cfg, ds);
    const int cells = cfg.head_width() / kHeadChannels;

    std::vector<std::vector<HeadOutput>> result;
    for (const ag::Var& h : heads) {
        std::vector<HeadOutput> per;
        for (Eigen::Index r = 0; r < h.rows(); ++r)
            per.push_back({Eigen::Map<const Matrix>(h.value().row(r).data(), cells, kHeadChannels)});
        result.push_back(std::move(per));
    }
    return result;
}

namespace {

// Runs the full masked-autoencoder forward pass and pushes a scalar loss node.
struct ForwardResult {
    ag::Var loss;
    LossReport report;
};

ForwardResult forward(ag::Tape& tape, ParameterStore& store, const ModelConfig& cfg, const Batch& batch,
                      const LossDecisions* frozen, LossDecisions* record) {
    cfg.validate();
    if (batch.empty()) throw std::invalid_argument("loss: empty batch");
    if (frozen && frozen->size() != batch.size()) throw std::invalid_argument("loss: frozen decisions do not fit the batch");
    if (record) record->assign(batch.size(), {});

    std::vector<std::size_t> lengths;
    for (const TrainingSample& s : batch) lengths.push_back(s.plan.visible.size());
    const std::size_t max_len = *std::max_element(lengths.begin(), lengths.end());
    const AttentionMask mask(lengths, max_len);

    std::vector<ag::Var> tokens, pos;
    std::vector<model::DecoderSample> dec;
    for (const TrainingSample& s : batch) {
        std::vector<const Patch*> visible;
        std::vector<PatchPosition> vis_pos, mask_pos;
        for (std::size_t i : s.plan.visible) {
            visible.push_back(&s.patches[i]);
            vis_pos.push_back(s.patches[i].position);
        }
        for (std::size_t i : s.plan.masked) mask_pos.push_back(s.patches[i].position);
        const auto rows = static_cast<Eigen::Index>(max_len);
        tokens.push_back(pad_rows(tape, model::swi_embed(tape, store, cfg, visible), rows));
        pos.push_back(pad_rows(tape, model::pos_embed(tape, store, "encoder.pos", vis_pos, cfg.tokenizer.space_size), rows));
        dec.push_back({{}, std::move(vis_pos), std::move(mask_pos)});
    }

    const auto encoded = model::encoder_forward(tape, store, cfg, tokens, pos, mask);
    const Eigen::Index skip = cfg.class_token ? 1 : 0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto n = static_cast<Eigen::Index>(lengths[b]);
        dec[b].encoded = ag::gather_rows(encoded[b], index_range(skip, skip + n));
    }
    const auto heads = model::decoder_forward(tape, store, cfg, dec);

    const Eigen::Index cells = cfg.head_width() / kHeadChannels;
    std::vector<ag::Var> sample_losses;
    LossReport report;
    std::size_t counted = 0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const TrainingSample& s = batch[b];
        const auto masked = static_cast<Eigen::Index>(s.targets.size());
        if (masked == 0) continue;
        Matrix grad(masked, cfg.head_width());
        LossReport mean;
        for (Eigen::Index j = 0; j < masked; ++j) {
            const HeadOutput pred{Eigen::Map<const Matrix>(heads[b].value().row(j).data(), cells, kHeadChannels)};
            const auto ju = static_cast<std::size_t>(j);
            const ChamferDecision* fixed = nullptr;
            if (frozen) {
                if ((*frozen)[b].size() != s.targets.size())
                    throw std::invalid_argument("loss: frozen decisions do not fit the batch");
                fixed = &(*frozen)[b][ju];
            }
            ChamferDecision taken;
            PatchLoss pl = patch_loss(s.targets[ju], pred, cfg.loss_weights, fixed, record ? &taken : nullptr);
            if (record) (*record)[b].push_back(std::move(taken));
            mean.mse += pl.mse;
            mean.chamfer += pl.chamfer;
            mean.occupancy += pl.occupancy;
            mean.total += pl.total;
            grad.row(j) = Eigen::Map<const RowVector>(pl.grad.data(), pl.grad.size());
        }
        const double inv = 1.0 / static_cast<double>(masked);
        report.mse += mean.mse * inv;
        report.chamfer += mean.chamfer * inv;
        report.occupancy += mean.occupancy * inv;
        report.total += mean.total * inv;
        report.masked_patches += static_cast<std::size_t>(masked);
        ++counted;

        const ag::Var head = heads[b];
        sample_losses.push_back(tape.push(Matrix::Constant(1, 1, mean.total * inv),
                                          [head, grad, inv](ag::Tape& t, const Matrix& g) {
                                              t.accumulate(head, grad * (inv * g(0, 0)));
                                          }));
    }
    if (counted == 0) throw std::invalid_argument("loss: no sample in the batch has a masked patch");
    const double inv_b = 1.0 / static_cast<double>(counted);
    report.mse *= inv_b;
    report.chamfer *= inv_b;
    report.occupancy *= inv_b;
    report.total *= inv_b;
    check_finite(report.mse, "mse");
    check_finite(report.chamfer, "chamfer");
    check_finite(report.occupancy, "occupancy");
    return {ag::scale(ag::sum_all(sample_losses), inv_b), report};
}

}  // namespace

LossReport evaluate_loss(ParameterStore& store, const ModelConfig& cfg, const Batch& batch,
                         const LossDecisions* frozen) {
    ag::Tape tape;
    return forward(tape, store, cfg, batch, frozen, nullptr).report;
}

LossReport loss_and_grad(ParameterStore& store, const ModelConfig& cfg, const Batch& batch,
                         LossDecisions* record) {
    ag::Tape tape;
    ForwardResult r = forward(tape, store, cfg, batch, nullptr, record);
    store.zero_grad();
    tape.backward(r.loss);
    return r.report;
}

GradCheckReport gradient_check(ParameterStore& store, const ModelConfig& cfg, const Batch& batch,
                               std::size_t samples, double step, std::uint64_t seed) {
    LossDecisions decisions;
    loss_and_grad(store, cfg, batch, &decisions);
    std::vector<Parameter*> params;
    for (Parameter& p : store) params.push_back(&p);

    std::mt19937_64 rng(seed);
    GradCheckReport report;
    for (std::size_t s = 0; s < samples; ++s) {
        // Pick a tensor first so small tensors (biases, tokens) get covered.
        std::uniform_int_distribution<std::size_t> pick_param(0, params.size() - 1);
        Parameter& p = *params[pick_param(rng)];
        std::uniform_int_distribution<Eigen::Index> pick_entry(0, p.value.size() - 1);
        const Eigen::Index idx = pick_entry(rng);

        double& slot = p.value.data()[idx];
        const double original = slot;
        slot = original + step;
        const double plus = evaluate_loss(store, cfg, batch, &decisions).total;
        slot = original - step;
        const double minus = evaluate_loss(store, cfg, batch, &decisions).total;
        slot = original;

        GradCheckEntry e;
        e.name = p.name;
        e.index = idx;
        e.analytic = p.grad.data()[idx];
        e.numeric = (plus - minus) / (2.0 * step);
        e.rel_error = std::abs(e.analytic - e.numeric) /
                      std::max({std::abs(e.analytic), std::abs(e.numeric), 1e-6});
        if (e.rel_error >= report.max_rel_error) {
            report.max_rel_error = e.rel_error;
            report.worst = e.name + "[" + std::to_string(idx) + "]";
        }
        report.entries.push_back(std::move(e));
    }
    return report;
}

}  // namespace p3p
