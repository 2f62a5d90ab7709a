#include "p3p_tools/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>

#include "p3p/checkpoint.hpp"
#include "p3p/flops.hpp"
#include "p3p/lift.hpp"
#include "p3p/model.hpp"
#include "p3p/pretrain.hpp"
#include "p3p/synthetic.hpp"
#include "p3p/tokenizer.hpp"
#include "p3p_tools/config.hpp"
#include "p3p_tools/io.hpp"

namespace p3p::cli {

namespace fs = std::filesystem;

namespace {

// Maps every failure to an exit code with one line on `err`.
template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const io::IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    }
}

void require_valid(const PointCloud& pc, const std::string& source) {
    const ValidationReport report = validate_cloud(pc);
    if (report.ok()) return;
    std::ostringstream msg;
    msg << source << ": invalid point cloud";
    for (const Violation& v : report.violations) msg << "\n  point " << v.point_index << ": " << v.message;
    throw std::invalid_argument(msg.str());
}

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

config::RunConfig training_config(const std::string& path) {
    return path.empty() ? config::desk_defaults() : config::load_config(path, config::desk_defaults());
}

PretrainConfig pretrain_config(const config::RunConfig& rc) {
    PretrainConfig pc;
    pc.model = rc.model;
    pc.optimizer = rc.optimizer;
    pc.optimizer.total_steps = rc.steps;
    pc.mask_ratio = rc.mask_ratio;
    pc.augment = rc.augment;
    pc.use_augment = rc.augment.scale || rc.augment.translate;
    pc.rotate = rc.rotate;
    pc.steps = rc.steps;
    pc.batch_size = rc.batch_size;
    pc.seed = rc.seed;
    return pc;
}

}  // namespace

int cmd_lift(const LiftOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const io::RgbImage rgb = io::read_ppm(opt.image);
        const io::GrayImage depth = io::read_depth(opt.depth);
        PointCloud pc = lift(io::make_depth_image(rgb, depth));
        if (opt.rotate_seed) {
            std::mt19937_64 rng(*opt.rotate_seed);
            std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
            pc = rotate_z(pc, angle(rng));
        }
        io::write_ply(opt.out, pc);
        out << "lifted " << rgb.width << "x" << rgb.height << " image to " << pc.size() << " points -> " << opt.out
            << '\n';
        return kExitOk;
    });
}

int cmd_tokenize(const TokenizeOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        config::RunConfig rc =
            opt.config.empty() ? config::full_defaults() : config::load_config(opt.config, config::full_defaults());
        if (opt.seed) rc.seed = *opt.seed;
        const TokenizerConfig& tok = rc.tokenizer();

        const PointCloud pc = io::read_ply(opt.in);
        require_valid(pc, opt.in);

        std::mt19937_64 rng(rc.seed);
        WeightTable table = random_weight_table(tok.patch_size, tok.embed_dim, rng);
        PosEmbedParams pos = PosEmbedParams::random(tok.posembed_hidden, tok.embed_dim, rng);
        if (!opt.checkpoint.empty()) {
            const ParameterStore store = store_from_tables(read_tables(fs::path(opt.checkpoint)));
            ModelConfig mc = rc.model;
            table = swi_weights(store, mc);
            pos = pos_params(store, "encoder.pos");
            if (pos.hidden() != tok.posembed_hidden || pos.embed_dim() != tok.embed_dim)
                throw std::invalid_argument("checkpoint positional MLP does not match the tokenizer config");
        }

        const VpsResult r = vps_tokenize(pc, tok, table, pos);
        const TokenSet& ts = r.tokens;
        Matrix positions(static_cast<Eigen::Index>(ts.size()), 3);
        Matrix sizes(1, static_cast<Eigen::Index>(ts.size()));
        for (std::size_t i = 0; i < ts.size(); ++i) {
            for (int k = 0; k < 3; ++k)
                positions(static_cast<Eigen::Index>(i), k) = ts.positions[i][static_cast<std::size_t>(k)];
            sizes(0, static_cast<Eigen::Index>(i)) = ts.patch_sizes[i];
        }
        write_tables(fs::path(opt.out), {matrix_table("positions", positions), matrix_table("tokens", ts.tokens),
                                         matrix_table("pos_embeddings", ts.pos_embeddings),
                                         matrix_table("patch_sizes", sizes)});

        out << "N=" << pc.size() << " M=" << r.grid.size() << " P=" << ts.size() << '\n';
        out << "weight table: " << table.cell_count() << " matrices of 12x" << table.embed_dim() << " (a="
            << table.patch_size() << ")\n";
        return kExitOk;
    });
}

int cmd_pretrain(const PretrainOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        config::RunConfig rc = training_config(opt.config);
        if (opt.seed) rc.seed = *opt.seed;
        if (opt.steps) {
            if (*opt.steps < 0) throw std::invalid_argument("--steps must be >= 0");
            rc.steps = *opt.steps;
        }
        const std::string data = opt.data.empty() ? rc.data_dir : opt.data;
        const std::string ckpt = opt.out.empty() ? rc.out_path : opt.out;
        std::string log_path = opt.log.empty() ? rc.log_path : opt.log;
        if (data.empty()) throw std::invalid_argument("no data directory given (--data or io.data)");
        if (ckpt.empty()) throw std::invalid_argument("no checkpoint path given (--out or io.out)");
        if (log_path.empty()) log_path = ckpt + ".csv";

        if (!fs::is_directory(data)) throw io::IoError("data directory " + data + " does not exist");
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(data))
            if (entry.is_regular_file() && entry.path().extension() == ".ply") files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        if (files.empty()) throw std::invalid_argument("data directory " + data + " contains no .ply files");

        std::vector<PointCloud> corpus;
        for (const fs::path& f : files) {
            corpus.push_back(io::read_ply(f));
            require_valid(corpus.back(), f.string());
        }

        std::ofstream log(log_path, std::ios::binary);
        if (!log) throw io::IoError("cannot open " + log_path + " for writing");
        log << "step,loss_total,loss_mse,loss_cd,loss_occ\n";

        const PretrainConfig pc = pretrain_config(rc);
        TrainState state(init_model(rc.model, rc.seed));
        out << "pretraining on " << corpus.size() << " clouds for " << rc.steps << " steps ("
            << state.params.scalar_count() << " parameters)\n";
        char line[256];
        pretrain(state, corpus, pc, [&](const StepLog& s) {
            std::snprintf(line, sizeof line, "%lld,%.17g,%.17g,%.17g,%.17g\n", static_cast<long long>(s.step),
                          s.loss.total, s.loss.mse, s.loss.chamfer, s.loss.occupancy);
            log << line;
            if (s.step == 1 || s.step % 25 == 0 || s.step == rc.steps)
                out << "step " << s.step << " loss " << fmt("%.6f", s.loss.total) << '\n';
        });
        log.close();
        if (!log) throw io::IoError("write failure on " + log_path);
        write_tables(fs::path(ckpt), checkpoint_tables(state.params));
        out << "checkpoint -> " << ckpt << ", log -> " << log_path << '\n';
        return kExitOk;
    });
}

int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        config::RunConfig rc = training_config(opt.config);
        if (opt.seed) rc.seed = *opt.seed;
        if (opt.samples == 0) throw std::invalid_argument("--samples must be >= 1");
        if (!(opt.step > 0)) throw std::invalid_argument("--step must be > 0");

        ParameterStore store = init_model(rc.model, rc.seed);
        Batch batch;
        for (std::uint64_t i = 0; i < 2; ++i)
            batch.push_back(make_training_sample(random_primitive_cloud(2000, 4000, rc.seed * 1000 + i), rc.model,
                                                 rc.mask_ratio, rc.seed + 17 * i + 1));
        const GradCheckReport report = gradient_check(store, rc.model, batch, opt.samples, opt.step, rc.seed);
        for (const GradCheckEntry& e : report.entries)
            out << e.name << "[" << e.index << "] analytic " << fmt("%.10e", e.analytic) << " numeric "
                << fmt("%.10e", e.numeric) << " rel " << fmt("%.3e", e.rel_error) << '\n';
        const bool pass = report.max_rel_error < opt.tolerance;
        out << "max relative error " << fmt("%.3e", report.max_rel_error) << " (worst " << report.worst << ") "
            << (pass ? "PASS" : "FAIL") << " at tolerance " << fmt("%g", opt.tolerance) << '\n';
        return pass ? kExitOk : kExitInvalid;
    });
}

int cmd_bench(const BenchOptions& opt, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        if (opt.sizes.empty()) throw std::invalid_argument("--sizes is empty");
        for (std::size_t i = 0; i < opt.sizes.size(); ++i) {
            if (opt.sizes[i] == 0) throw std::invalid_argument("--sizes entries must be >= 1");
            if (i > 0 && opt.sizes[i] <= opt.sizes[i - 1]) throw std::invalid_argument("--sizes must be ascending");
        }
        BenchConfig cfg = BenchConfig::defaults();
        cfg.seed = opt.seed;
        const BenchResult r = scaling_bench(opt.sizes, cfg);

        if (!opt.out.empty()) {
            std::ofstream csv(opt.out, std::ios::binary);
            if (!csv) throw io::IoError("cannot open " + opt.out + " for writing");
            write_bench_csv(csv, r.rows, opt.timings);
            if (!csv) throw io::IoError("write failure on " + opt.out);
        } else {
            write_bench_csv(out, r.rows, opt.timings);
        }
        if (opt.sizes.size() < 2) err << "warning: a single size gives no regression; slopes are NaN\n";
        out << "vps slope " << fmt("%.4f", r.vps_slope) << " (embedding stages " << fmt("%.4f", r.vps_embed_slope)
            << ")\n";
        out << "fkp slope " << fmt("%.4f", r.fkp_slope) << " (fps+knn " << fmt("%.4f", r.fkp_cluster_slope) << ")\n";
        return kExitOk;
    });
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Pseudo-3D point cloud tokenization, pre-training and complexity benchmarks"};
    app.require_subcommand(1);

    LiftOptions lift_opt;
    auto* lift_cmd = app.add_subcommand("lift", "Lift an RGB image and depth map to a PLY point cloud");
    lift_cmd->add_option("--image", lift_opt.image, "Binary PPM (P6) image")->required();
    lift_cmd->add_option("--depth", lift_opt.depth, "Depth map: PFM (Pf) or 16-bit PGM (P5)")->required();
    lift_cmd->add_option("--out", lift_opt.out, "Output ASCII PLY")->required();
    std::uint64_t rotate_seed = 0;
    auto* rotate_flag = lift_cmd->add_option("--rotate-seed", rotate_seed, "Apply a random z rotation drawn from this seed");
    lift_cmd->add_option("--seed", lift_opt.seed, "Seed (lifting itself is deterministic)");

    TokenizeOptions tok_opt;
    std::uint64_t tok_seed = 0;
    auto* tok_cmd = app.add_subcommand("tokenize", "Tokenize a PLY cloud with the sparse voxel tokenizer");
    tok_cmd->add_option("--in", tok_opt.in, "Input ASCII PLY")->required();
    tok_cmd->add_option("--config", tok_opt.config, "JSON run config (full-scale defaults)");
    tok_cmd->add_option("--checkpoint", tok_opt.checkpoint, "Take tokenizer weights from a checkpoint");
    tok_cmd->add_option("--out", tok_opt.out, "Output token dump")->required();
    auto* tok_seed_opt = tok_cmd->add_option("--seed", tok_seed, "Seed for the weight initialization");

    PretrainOptions pre_opt;
    std::int64_t steps = 0;
    std::uint64_t pre_seed = 0;
    auto* pre_cmd = app.add_subcommand("pretrain", "Masked-autoencoder pre-training on a directory of PLY clouds");
    pre_cmd->add_option("--data", pre_opt.data, "Directory of .ply files");
    pre_cmd->add_option("--config", pre_opt.config, "JSON run config (desk-scale defaults)");
    pre_cmd->add_option("--out", pre_opt.out, "Output checkpoint");
    pre_cmd->add_option("--log", pre_opt.log, "Loss CSV (default: <out>.csv)");
    auto* steps_opt = pre_cmd->add_option("--steps", steps, "Override the configured step count");
    auto* pre_seed_opt = pre_cmd->add_option("--seed", pre_seed, "Override the configured seed");

    GradcheckOptions grad_opt;
    std::uint64_t grad_seed = 0;
    auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the model gradients");
    grad_cmd->add_option("--config", grad_opt.config, "JSON run config (desk-scale defaults)");
    grad_cmd->add_option("--samples", grad_opt.samples, "Number of sampled parameters")->capture_default_str();
    grad_cmd->add_option("--tolerance", grad_opt.tolerance, "Maximum relative error")->capture_default_str();
    grad_cmd->add_option("--step", grad_opt.step, "Central difference step")->capture_default_str();
    auto* grad_seed_opt = grad_cmd->add_option("--seed", grad_seed, "Override the configured seed");

    BenchOptions bench_opt;
    std::string sizes;
    bool no_timings = false;
    auto* bench_cmd = app.add_subcommand("bench", "Operation-count scaling benchmark of both tokenizers");
    bench_cmd->add_option("--sizes", sizes, "Comma-separated ascending point counts (default 2000..64000)");
    bench_cmd->add_option("--out", bench_opt.out, "Output CSV (default: stdout)");
    bench_cmd->add_flag("--no-timings", no_timings, "Write 0 in the millisecond columns for byte-stable output");
    bench_cmd->add_option("--seed", bench_opt.seed, "Seed for the synthetic clouds and weights");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::ostringstream o, er;
        app.exit(e, o, er);
        out << o.str();
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        std::ostringstream o, er;
        app.exit(e, o, er);
        out << o.str();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, er;
        app.exit(e, o, er);
        err << er.str() << o.str();
        return kExitInvalid;
    }

    if (lift_cmd->parsed()) {
        if (rotate_flag->count() > 0) lift_opt.rotate_seed = rotate_seed;
        return cmd_lift(lift_opt, out, err);
    }
    if (tok_cmd->parsed()) {
        if (tok_seed_opt->count() > 0) tok_opt.seed = tok_seed;
        return cmd_tokenize(tok_opt, out, err);
    }
    if (pre_cmd->parsed()) {
        if (steps_opt->count() > 0) pre_opt.steps = steps;
        if (pre_seed_opt->count() > 0) pre_opt.seed = pre_seed;
        return cmd_pretrain(pre_opt, out, err);
    }
    if (grad_cmd->parsed()) {
        if (grad_seed_opt->count() > 0) grad_opt.seed = grad_seed;
        return cmd_gradcheck(grad_opt, out, err);
    }
    if (bench_cmd->parsed()) {
        bench_opt.timings = !no_timings;
        if (!sizes.empty()) {
            bench_opt.sizes.clear();
            std::stringstream ss(sizes);
            std::string item;
            while (std::getline(ss, item, ',')) {
                try {
                    std::size_t used = 0;
                    const long long v = std::stoll(item, &used);
                    if (used != item.size() || v <= 0) throw std::invalid_argument(item);
                    bench_opt.sizes.push_back(static_cast<std::uint64_t>(v));
                } catch (const std::exception&) {
                    err << "error: --sizes entry '" << item << "' is not a positive integer\n";
                    return kExitInvalid;
                }
            }
        }
        return cmd_bench(bench_opt, out, err);
    }
    return kExitInvalid;
}

}  // namespace p3p::cli
