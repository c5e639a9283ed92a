#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "mf/checkpoint.hpp"
#include "mf/image_io.hpp"
#include "mf/metrics.hpp"
#include "mf/runner.hpp"
#include "oracles.hpp"

using namespace mf;

namespace {

/// Bit-level fingerprint of a matrix (CRC32 over the raw f64 bytes).
uint32_t fingerprint(const Matrix& m) {
    std::string bytes(reinterpret_cast<const char*>(m.data()), m.size() * sizeof(double));
    return crc32_bytes(bytes);
}

std::string temp_dir(const char* tag) {
    const auto p = std::filesystem::temp_directory_path() / (std::string("mf_test_") + tag);
    std::filesystem::remove_all(p);
    return p.string();
}

RunConfig tiny_config() {
    RunConfig cfg;
    cfg.seed = 11;
    cfg.image_size = 32;
    cfg.train_count = 6;
    cfg.test_count = 2;
    cfg.epochs = 3;
    cfg.batch_size = 3;
    cfg.lr = 1e-3;
    cfg.ap_window = 7;
    return cfg;
}

} // namespace

TEST_CASE("synthetic dataset is deterministic and well-formed") {
    const auto a = synth_dataset(99, 4, 32);
    const auto b = synth_dataset(99, 4, 32);
    REQUIRE(a.size() == 4);
    for (int i = 0; i < 4; ++i) {
        CHECK(max_abs_diff(a[i].rgb, b[i].rgb) == 0.0);
        CHECK(max_abs_diff(a[i].depth, b[i].depth) == 0.0);
        CHECK(max_abs_diff(a[i].mask, b[i].mask) == 0.0);
        CHECK(sum_all(a[i].mask) > 0.0); // nonempty masks
    }
    // Prefixes agree for any count.
    const auto longer = synth_dataset(99, 6, 32);
    CHECK(max_abs_diff(longer[3].rgb, a[3].rgb) == 0.0);
    CHECK_THROWS_AS(synth_dataset(1, 1, 16), DomainError);
}

TEST_CASE("centered disk mask matches the rasterization oracle") {
    SampleSpec spec;
    spec.size = 64;
    spec.noise_seed = 5;
    ShapeSpec disk;
    disk.kind = ShapeSpec::Ellipse;
    disk.cx = 32;
    disk.cy = 32;
    disk.rx = 10;
    disk.ry = 10;
    disk.depth = 0.9;
    spec.salient.push_back(disk);
    const SaliencySample s = render_sample(spec);

    long want = 0;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            const double dx = (x - 32.0) / 10.0, dy = (y - 32.0) / 10.0;
            if (dx * dx + dy * dy <= 1.0) ++want;
        }
    CHECK(static_cast<long>(sum_all(s.mask)) == want);
}

TEST_CASE("depth correlates positively with the mask on every sample") {
    const auto data = synth_dataset(123, 10, 32);
    for (const auto& s : data) {
        double fg_depth = 0.0, bg_depth = 0.0, fg_n = 0.0, bg_n = 0.0;
        for (int i = 0; i < s.size * s.size; ++i) {
            if (s.mask.data()[i] == 1.0) {
                fg_depth += s.depth(i, 0);
                fg_n += 1.0;
            } else {
                bg_depth += s.depth(i, 0);
                bg_n += 1.0;
            }
        }
        CHECK(fg_depth / fg_n > bg_depth / bg_n);
    }
}

TEST_CASE("encoder: zero input gives zero features and 0.5 probability maps") {
    Rng rng(1);
    Encoder enc;
    EncoderConfig cfg;
    cfg.image_size = 64;
    enc.init(rng, cfg);
    Tape t;
    EncoderOut out = encoder_forward_t(t, t.constant(Matrix(64 * 64, 3)), t.constant(Matrix(64 * 64, 1)), enc);
    const int want_sizes[4] = {32, 16, 8, 4};
    for (int l = 0; l < 4; ++l) {
        CHECK(out.f_r[l].h == want_sizes[l]);
        CHECK(out.f_r[l].w == want_sizes[l]);
        CHECK(out.f_r[l].c == cfg.channels[l]);
        for (double v : t.val(out.f_r[l].v).vec()) CHECK(v == 0.0);
        for (double v : t.val(out.p_r[l]).vec()) CHECK(v == 0.5);
        for (double v : t.val(out.p_d[l]).vec()) CHECK(v == 0.5);
    }
}

TEST_CASE("encoder forward matches its golden fingerprint") {
    Rng rng(7);
    Encoder enc;
    EncoderConfig cfg;
    cfg.image_size = 32;
    enc.init(rng, cfg);
    const auto data = synth_dataset(7, 1, 32);
    Tape t;
    EncoderOut out = encoder_forward_t(t, t.constant(data[0].rgb), t.constant(data[0].depth), enc);
    // Frozen on first run; any numeric drift in the encoder path trips this.
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08x", fingerprint(t.val(out.f_r[3].v)));
    CHECK(std::string(buf) == "b182d524");
}

TEST_CASE("fusion: Add with zero depth features is the rgb features") {
    Rng rng(2);
    FusionConfig fc;
    fc.strategy = FusionStrategy::Add;
    EncoderConfig ec;
    ec.image_size = 32;
    Fusion fuse;
    fuse.init(rng, ec, fc);
    Tape t;
    std::array<Grid, 4> fr, fd;
    for (int li = 0; li < 4; ++li) {
        const int g = 32 >> (li + 1);
        fr[li] = Grid{t.constant(rng.uniform_matrix(g * g, ec.channels[li], -1, 1)), g, g, ec.channels[li]};
        fd[li] = Grid{t.constant(Matrix(g * g, ec.channels[li])), g, g, ec.channels[li]};
    }
    const auto fused = fuse.forward_t(t, fr, fd);
    for (int li = 0; li < 4; ++li) CHECK(max_abs_diff(t.val(fused[li].v), t.val(fr[li].v)) == 0.0);
}

TEST_CASE("all six fusion strategies produce decoder-shaped grids") {
    for (const auto strategy : {FusionStrategy::Add, FusionStrategy::Cat, FusionStrategy::Transformer,
                                FusionStrategy::CrossFormer, FusionStrategy::CrossFormerCda,
                                FusionStrategy::MutualFormer}) {
        Rng rng(3);
        FusionConfig fc;
        fc.strategy = strategy;
        fc.layers = 1;
        EncoderConfig ec;
        ec.image_size = 32;
        Fusion fuse;
        fuse.init(rng, ec, fc);
        Tape t;
        std::array<Grid, 4> fr, fd;
        for (int li = 0; li < 4; ++li) {
            const int g = 32 >> (li + 1);
            fr[li] = Grid{t.constant(rng.uniform_matrix(g * g, ec.channels[li], -1, 1)), g, g, ec.channels[li]};
            fd[li] = Grid{t.constant(rng.uniform_matrix(g * g, ec.channels[li], -1, 1)), g, g, ec.channels[li]};
        }
        const auto fused = fuse.forward_t(t, fr, fd);
        for (int li = 0; li < 4; ++li) {
            CHECK(fused[li].h == 32 >> (li + 1));
            CHECK(fused[li].c == ec.channels[li]);
            CHECK(t.val(fused[li].v).all_finite());
        }
    }
}

TEST_CASE("decoder: zero fused maps give a uniform 0.5 prediction") {
    Rng rng(4);
    DecoderParams dec;
    const std::array<int, 4> channels{12, 16, 20, 24};
    dec.init(rng, channels);
    Tape t;
    std::array<Grid, 4> fused;
    for (int li = 0; li < 4; ++li) {
        const int g = 64 >> (li + 1);
        fused[li] = Grid{t.constant(Matrix(g * g, channels[li])), g, g, channels[li]};
    }
    const DecoderOut out = decoder_forward_t(t, fused, dec, 64);
    CHECK(t.val(out.pred2).rows() == 64 * 64);
    for (double v : t.val(out.pred1).vec()) CHECK(v == 0.5);
    for (double v : t.val(out.pred2).vec()) CHECK(v == 0.5);
    for (int li = 0; li < 4; ++li) {
        CHECK(t.val(out.level_preds[li]).rows() == 64 * 64);
        for (double v : t.val(out.level_preds[li]).vec()) CHECK(v == 0.5);
    }
}

TEST_CASE("model prediction has the sample's shape and is deterministic") {
    ModelConfig mc;
    mc.image_size = 32;
    SodModel m1(mc, 5), m2(mc, 5);
    const auto data = synth_dataset(5, 1, 32);
    const Matrix p1 = m1.predict(data[0]);
    const Matrix p2 = m2.predict(data[0]);
    CHECK(p1.rows() == 32);
    CHECK(p1.cols() == 32);
    CHECK(max_abs_diff(p1, p2) == 0.0);
}

TEST_CASE("fixed-seed model forwards match golden fingerprints per strategy") {
    const auto data = synth_dataset(21, 1, 32);
    const std::pair<FusionStrategy, std::string> want[] = {
        {FusionStrategy::Add, "aa26dac3"},
        {FusionStrategy::Cat, "cdbde090"},
        {FusionStrategy::Transformer, "683a47d3"},
        {FusionStrategy::CrossFormer, "2bf772f6"},
        {FusionStrategy::CrossFormerCda, "68d8d700"},
        {FusionStrategy::MutualFormer, "d01229eb"},
    };
    for (const auto& [strategy, fp] : want) {
        ModelConfig mc;
        mc.image_size = 32;
        mc.strategy = strategy;
        SodModel model(mc, 21);
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%08x", fingerprint(model.predict(data[0])));
        INFO(strategy_name(strategy));
        CHECK(std::string(buf) == fp);
    }
}

TEST_CASE("strategy isolation: non-fusion parameter names are identical") {
    std::vector<std::vector<std::string>> outside;
    for (const auto strategy : {FusionStrategy::Add, FusionStrategy::Cat, FusionStrategy::Transformer,
                                FusionStrategy::CrossFormer, FusionStrategy::CrossFormerCda,
                                FusionStrategy::MutualFormer}) {
        ModelConfig mc;
        mc.image_size = 32;
        mc.strategy = strategy;
        SodModel model(mc, 1);
        std::vector<std::string> names;
        for (const Param* p : model.registry().all())
            if (p->name.rfind("fuse.", 0) != 0) names.push_back(p->name + ":" + p->value.shape_str());
        outside.push_back(std::move(names));
    }
    for (size_t i = 1; i < outside.size(); ++i) CHECK(outside[i] == outside[0]);
}

TEST_CASE("checkpoint round-trips bit-exactly and rejects corruption") {
    Rng rng(6);
    std::vector<NamedTensor> tensors;
    tensors.push_back(NamedTensor::from_matrix("a.w", rng.uniform_matrix(3, 4, -1, 1)));
    tensors.push_back(NamedTensor::scalar("meta.seed", 42.0));
    const std::string bytes = encode_checkpoint(tensors);
    const auto back = decode_checkpoint(bytes);
    REQUIRE(back.size() == 2);
    CHECK(back[0].name == "a.w");
    CHECK(back[0].values == tensors[0].values);
    const std::string again = encode_checkpoint(back);
    CHECK(again == bytes);

    std::string corrupt = bytes;
    corrupt[20] ^= 0x01;
    CHECK_THROWS_AS(decode_checkpoint(corrupt), CheckpointError);

    std::string bad_version = bytes;
    bad_version[4] = 9;
    CHECK_THROWS_AS(decode_checkpoint(bad_version), CheckpointError);
}

TEST_CASE("pgm/ppm round trip") {
    Rng rng(8);
    Matrix gray = rng.uniform_matrix(5, 7, 0, 1);
    const Matrix back = decode_pgm(encode_pgm(gray));
    CHECK(back.rows() == 5);
    CHECK(max_abs_diff(back, gray) < 0.5 / 255.0 + 1e-12);

    Matrix r = rng.uniform_matrix(4, 4, 0, 1), g = rng.uniform_matrix(4, 4, 0, 1), b = rng.uniform_matrix(4, 4, 0, 1);
    Matrix r2, g2, b2;
    decode_ppm(encode_ppm(r, g, b), r2, g2, b2);
    CHECK(max_abs_diff(r2, r) < 0.5 / 255.0 + 1e-12);
    CHECK_THROWS_AS(decode_pgm("P6 1 1 255 x"), FormatError);
}

TEST_CASE("training decreases the loss and is byte-deterministic") {
    const RunConfig cfg = tiny_config();
    OutputDir out1(temp_dir("train1"));
    const TrainSummary s1 = train_run(cfg, out1);
    REQUIRE(s1.log.size() == 3);
    CHECK(s1.log.back().total < s1.log.front().total);

    OutputDir out2(temp_dir("train2"));
    const TrainSummary s2 = train_run(cfg, out2);
    CHECK(read_file(out1.path("checkpoint_final.mfck")) == read_file(out2.path("checkpoint_final.mfck")));
    CHECK(read_file(out1.path("losses.csv")) == read_file(out2.path("losses.csv")));
}

TEST_CASE("zero learning rate leaves parameters bit-identical") {
    RunConfig cfg = tiny_config();
    cfg.epochs = 1;
    cfg.lr = 0.0;
    SodModel reference(cfg.model_config(), cfg.seed);
    OutputDir out(temp_dir("zerolr"));
    train_run(cfg, out);
    const LoadedSession s = load_session(read_file(out.path("checkpoint_final.mfck")));
    const auto& got = s.model->registry().all();
    const auto& want = reference.registry().all();
    for (size_t i = 0; i < got.size(); ++i) CHECK(max_abs_diff(got[i]->value, want[i]->value) == 0.0);
}

TEST_CASE("resumed training equals the uninterrupted run bit-exactly") {
    RunConfig cfg = tiny_config();
    cfg.epochs = 4;
    // Pin the decay schedule so the 2-epoch interruption below sees the
    // same per-epoch learning rates as the 4-epoch run.
    cfg.lr_decay_epoch1 = 3;
    cfg.lr_decay_epoch2 = 4;

    OutputDir full(temp_dir("full"));
    train_run(cfg, full);

    // Emulate an interruption: train the first two epochs, then re-stamp the
    // snapshot with the real 4-epoch target before resuming.
    RunConfig stage = cfg;
    stage.epochs = 2;
    OutputDir part(temp_dir("part"));
    train_run(stage, part);
    LoadedSession s = load_session(read_file(part.path("checkpoint_final.mfck")));
    Adam adam;
    adam.attach(s.model->registry());
    adam.restore(std::move(s.adam_m), std::move(s.adam_v), s.adam_step);
    const std::string patched = encode_session(*s.model, adam, cfg, 2, s.best_epoch, s.best_mae);
    const std::string resume_path = part.path("resume.mfck");
    write_file(resume_path, patched);

    OutputDir cont(temp_dir("cont"));
    train_run(cfg, cont, resume_path);
    CHECK(read_file(cont.path("checkpoint_final.mfck")) == read_file(full.path("checkpoint_final.mfck")));
}

TEST_CASE("overfit a single sample to train MAE below 0.05") {
    RunConfig cfg;
    cfg.seed = 3;
    cfg.image_size = 32;
    cfg.train_count = 1;
    cfg.test_count = 0;
    cfg.epochs = 200;
    cfg.batch_size = 1;
    cfg.lr = 2e-3;
    cfg.ap_window = 7;
    OutputDir out(temp_dir("overfit"));
    const TrainSummary s = train_run(cfg, out);
    CHECK(s.best_mae < 0.05);
}

TEST_CASE("evaluation is deterministic and rejects empty datasets") {
    ModelConfig mc;
    mc.image_size = 32;
    SodModel model(mc, 9);
    const auto data = synth_dataset(9, 3, 32);
    const EvalSummary a = evaluate_model(model, data);
    const EvalSummary b = evaluate_model(model, data);
    CHECK(eval_csv(a) == eval_csv(b));
    CHECK(a.rows.size() == 3);
    CHECK_THROWS_AS(evaluate_model(model, {}), UsageError);
}
