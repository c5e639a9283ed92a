#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "mf/bench.hpp"
#include "mf/checkpoint.hpp"
#include "mf/gradcheck.hpp"
#include "mf/image_io.hpp"
#include "mf/runner.hpp"

namespace {

using namespace mf;

struct FlagValues {
    std::string config_path;
    std::string out_dir;
    RunConfig v; // staging area for flag values
};

/// Registers one flag per config key; after parsing, set flags override the
/// values loaded from --config.
void add_config_flags(CLI::App* cmd, FlagValues& fl) {
    cmd->add_option("--config", fl.config_path, "JSON config file");
    cmd->add_option("--seed", fl.v.seed, "RNG seed");
    cmd->add_option("--strategy", fl.v.strategy, "fusion strategy (add|cat|transformer|crossformer|crossformer_cda|mutualformer)");
    cmd->add_option("--epsilon", fl.v.epsilon, "CDA blending parameter");
    cmd->add_option("--lambda", fl.v.lambda, "focal loss weight");
    cmd->add_option("--layers", fl.v.layers, "MutualFormer layers T");
    cmd->add_option("--heads", fl.v.heads, "attention heads");
    cmd->add_option("--width", fl.v.width, "token width d");
    cmd->add_option("--ffn-hidden", fl.v.ffn_hidden, "FFN hidden width");
    cmd->add_option("--use-coarse", fl.v.use_coarse, "include the coarse transformer branch");
    cmd->add_option("--literal-eq12", fl.v.literal_eq12, "verbatim focal formula");
    cmd->add_option("--ap-window", fl.v.ap_window, "position-weight pooling window");
    cmd->add_option("--image-size", fl.v.image_size, "sample resolution");
    cmd->add_option("--train-count", fl.v.train_count, "training samples");
    cmd->add_option("--test-count", fl.v.test_count, "test samples");
    cmd->add_option("--epochs", fl.v.epochs, "training epochs");
    cmd->add_option("--batch-size", fl.v.batch_size, "batch size");
    cmd->add_option("--lr", fl.v.lr, "learning rate");
    cmd->add_option("--fuse-lr-scale", fl.v.fuse_lr_scale, "fusion-module lr multiplier");
    cmd->add_option("--lr-decay-epoch1", fl.v.lr_decay_epoch1, "first decay epoch (0 = auto)");
    cmd->add_option("--lr-decay-epoch2", fl.v.lr_decay_epoch2, "second decay epoch (0 = auto)");
    cmd->add_option("--augment", fl.v.augment, "flip/crop augmentation");
    cmd->add_option("--data-dir", fl.v.data_dir, "load samples from a gen-data directory");
    cmd->add_option("--n", fl.v.n, "token count (bench, dump-attn)");
    cmd->add_option("--d", fl.v.d, "feature dimension (bench)");
    cmd->add_option("--reps", fl.v.reps, "benchmark repetitions");
}

RunConfig resolve_config(CLI::App* cmd, const FlagValues& fl) {
    RunConfig cfg;
    if (!fl.config_path.empty()) cfg = load_config_file(fl.config_path);
    auto touched = [&](const std::string& flag) { return cmd->count(flag) > 0; };
    if (touched("--seed")) cfg.seed = fl.v.seed;
    if (touched("--strategy")) cfg.strategy = fl.v.strategy;
    if (touched("--epsilon")) cfg.epsilon = fl.v.epsilon;
    if (touched("--lambda")) cfg.lambda = fl.v.lambda;
    if (touched("--layers")) cfg.layers = fl.v.layers;
    if (touched("--heads")) cfg.heads = fl.v.heads;
    if (touched("--width")) cfg.width = fl.v.width;
    if (touched("--ffn-hidden")) cfg.ffn_hidden = fl.v.ffn_hidden;
    if (touched("--use-coarse")) cfg.use_coarse = fl.v.use_coarse;
    if (touched("--literal-eq12")) cfg.literal_eq12 = fl.v.literal_eq12;
    if (touched("--ap-window")) cfg.ap_window = fl.v.ap_window;
    if (touched("--image-size")) cfg.image_size = fl.v.image_size;
    if (touched("--train-count")) cfg.train_count = fl.v.train_count;
    if (touched("--test-count")) cfg.test_count = fl.v.test_count;
    if (touched("--epochs")) cfg.epochs = fl.v.epochs;
    if (touched("--batch-size")) cfg.batch_size = fl.v.batch_size;
    if (touched("--lr")) cfg.lr = fl.v.lr;
    if (touched("--fuse-lr-scale")) cfg.fuse_lr_scale = fl.v.fuse_lr_scale;
    if (touched("--lr-decay-epoch1")) cfg.lr_decay_epoch1 = fl.v.lr_decay_epoch1;
    if (touched("--lr-decay-epoch2")) cfg.lr_decay_epoch2 = fl.v.lr_decay_epoch2;
    if (touched("--augment")) cfg.augment = fl.v.augment;
    if (touched("--data-dir")) cfg.data_dir = fl.v.data_dir;
    if (touched("--n")) cfg.n = fl.v.n;
    if (touched("--d")) cfg.d = fl.v.d;
    if (touched("--reps")) cfg.reps = fl.v.reps;
    return cfg;
}

std::string csv_of(const Matrix& m) {
    std::string out;
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) {
            out += fmt_g17(m(i, j));
            out += j + 1 < m.cols() ? "," : "\n";
        }
    }
    return out;
}

int cmd_gen_data(const RunConfig& cfg, const std::string& out_dir) {
    OutputDir out(out_dir);
    const auto train = make_split(cfg, true);
    const auto test = make_split(cfg, false);
    int idx = 0;
    auto dump = [&](const SaliencySample& s) {
        char stem[32];
        std::snprintf(stem, sizeof(stem), "%04d", idx++);
        Matrix r(s.size, s.size), g(s.size, s.size), b(s.size, s.size);
        for (int k = 0; k < s.size * s.size; ++k) {
            r.data()[k] = s.rgb(k, 0);
            g.data()[k] = s.rgb(k, 1);
            b.data()[k] = s.rgb(k, 2);
        }
        out.write(std::string(stem) + "_rgb.ppm", encode_ppm(r, g, b));
        out.write(std::string(stem) + "_depth.pgm", encode_pgm(Matrix(s.size, s.size, s.depth.vec())));
        out.write(std::string(stem) + "_mask.pgm", encode_pgm(s.mask));
    };
    for (const auto& s : train) dump(s);
    for (const auto& s : test) dump(s);
    out.finalize();
    std::cout << "wrote " << idx << " samples to " << out.root() << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& out_dir, const std::string& resume) {
    cfg.validate();
    OutputDir out(out_dir);
    try {
        const TrainSummary s = train_run(cfg, out, resume);
        out.finalize();
        std::cout << "trained " << cfg.epochs << " epochs, best epoch " << s.best_epoch << " (train MAE "
                  << fmt_g17(s.best_mae) << ")\n";
        return 0;
    } catch (const TrainingError& e) {
        out.write("nan_dump.txt", std::string(e.what()) + "\n");
        out.finalize();
        std::cerr << "training aborted: " << e.what() << "\n";
        return 2;
    }
}

int cmd_eval(const std::string& checkpoint_path, const std::string& out_dir, const std::string& data_dir,
             bool fmax_mean_curve) {
    LoadedSession s = load_session(read_file(checkpoint_path));
    if (!data_dir.empty()) s.cfg.data_dir = data_dir;
    const auto test = make_split(s.cfg, false);
    OutputDir out(out_dir);
    const EvalSummary summary = evaluate_model(*s.model, test, fmax_mean_curve);
    out.write("metrics.csv", eval_csv(summary));
    for (size_t i = 0; i < test.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "preds/%04zu.pgm", i);
        out.write(name, encode_pgm(s.model->predict(test[i])));
    }
    out.finalize();
    std::cout << "mean: s=" << fmt_g17(summary.mean.s_measure) << " f=" << fmt_g17(summary.mean.f_max)
              << " e=" << fmt_g17(summary.mean.e_max) << " mae=" << fmt_g17(summary.mean.mae) << "\n";
    return 0;
}

int cmd_dump_attn(const RunConfig& cfg, const std::string& out_dir) {
    OutputDir out(out_dir);
    Rng rng(cfg.seed);
    BlockParams bp;
    bp.init(rng, cfg.width, cfg.heads, cfg.ffn_hidden, cfg.use_coarse);
    bp.cda.epsilon = cfg.epsilon;
    TokenSet xr{rng.uniform_matrix(cfg.n, cfg.width, -1.0, 1.0), Matrix(cfg.n, cfg.width), 'r'};
    TokenSet xd{rng.uniform_matrix(cfg.n, cfg.width, -1.0, 1.0), Matrix(cfg.n, cfg.width), 'd'};
    const BlockTrace tr = block_forward_trace(xr, xd, bp);
    out.write("s_r.csv", csv_of(tr.s_r));
    out.write("s_d.csv", csv_of(tr.s_d));
    out.write("shat_r.csv", csv_of(tr.shat_r));
    out.write("shat_d.csv", csv_of(tr.shat_d));
    out.write("s_rd.csv", csv_of(tr.s_rd));
    out.write("s_dr.csv", csv_of(tr.s_dr));
    out.finalize();
    std::cout << "dumped attention matrices for n=" << cfg.n << " d=" << cfg.width << "\n";
    return 0;
}

int cmd_grad_check(const RunConfig& cfg, const std::string& out_dir) {
    const auto results = run_grad_checks(cfg.seed);
    bool ok = true;
    std::string csv = "op,max_rel_err\n";
    for (const auto& r : results) {
        const bool pass = r.max_rel_err < 1e-4;
        ok = ok && pass;
        std::cout << (pass ? "PASS " : "FAIL ") << r.op << " max_rel_err=" << fmt_g17(r.max_rel_err) << "\n";
        csv += r.op + "," + fmt_g17(r.max_rel_err) + "\n";
    }
    if (!out_dir.empty()) {
        OutputDir out(out_dir);
        out.write("grad_check.csv", csv);
        out.finalize();
    }
    return ok ? 0 : 2;
}

int cmd_bench(const RunConfig& cfg, const std::string& out_dir) {
    auto rows = bench_similarity(cfg.seed, cfg.n, cfg.d, cfg.reps);
    const CrossoverResult sweep = bench_crossover(cfg.seed, cfg.d, std::max(3, cfg.reps / 10));
    rows.insert(rows.end(), sweep.rows.begin(), sweep.rows.end());
    const std::string csv = bench_csv(rows, sweep.crossover_n);
    std::cout << "ca median_ns=" << fmt_g17(rows[0].median_ns) << " cda median_ns=" << fmt_g17(rows[1].median_ns)
              << " (n=" << cfg.n << ", d=" << cfg.d << ")\n";
    std::cout << "crossover n: " << (sweep.crossover_n > 0 ? std::to_string(sweep.crossover_n) : "none in sweep")
              << "\n";
    if (!out_dir.empty()) {
        OutputDir out(out_dir);
        out.write("bench.csv", csv);
        out.finalize();
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"RGB-D salient-object detection with cross-diffusion attention fusion"};
    app.require_subcommand(1);

    FlagValues fl;
    std::string resume, checkpoint, eval_data_dir;
    bool fmax_mean_curve = false;

    CLI::App* gen = app.add_subcommand("gen-data", "synthesize an RGB-D dataset to disk");
    add_config_flags(gen, fl);
    gen->add_option("--out", fl.out_dir, "output directory")->required();

    CLI::App* train = app.add_subcommand("train", "train a model");
    add_config_flags(train, fl);
    train->add_option("--out", fl.out_dir, "output directory")->required();
    train->add_option("--resume", resume, "checkpoint to resume from");

    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    eval->add_option("--checkpoint", checkpoint, "MFCK checkpoint")->required();
    eval->add_option("--out", fl.out_dir, "output directory")->required();
    eval->add_option("--data-dir", eval_data_dir, "evaluate on a gen-data directory");
    eval->add_flag("--fmax-mean-curve", fmax_mean_curve, "aggregate F over the dataset-mean PR curve");

    CLI::App* dump = app.add_subcommand("dump-attn", "write block similarity matrices as CSV");
    add_config_flags(dump, fl);
    dump->add_option("--out", fl.out_dir, "output directory")->required();

    CLI::App* gc = app.add_subcommand("grad-check", "finite-difference gradient report");
    add_config_flags(gc, fl);
    gc->add_option("--out", fl.out_dir, "output directory");

    CLI::App* bench = app.add_subcommand("bench", "CA vs CDA similarity-step timing");
    add_config_flags(bench, fl);
    bench->add_option("--out", fl.out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e); // prints usage/help
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(resolve_config(gen, fl), fl.out_dir);
        if (train->parsed()) return cmd_train(resolve_config(train, fl), fl.out_dir, resume);
        if (eval->parsed()) return cmd_eval(checkpoint, fl.out_dir, eval_data_dir, fmax_mean_curve);
        if (dump->parsed()) return cmd_dump_attn(resolve_config(dump, fl), fl.out_dir);
        if (gc->parsed()) return cmd_grad_check(resolve_config(gc, fl), fl.out_dir);
        if (bench->parsed()) return cmd_bench(resolve_config(bench, fl), fl.out_dir);
    } catch (const mf::UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
