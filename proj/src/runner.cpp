#include "mf/runner.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "mf/checkpoint.hpp"
#include "mf/image_io.hpp"
#include "mf/metrics.hpp"

namespace fs = std::filesystem;

namespace mf {

void Adam::attach(const ParamRegistry& reg) {
    m_.clear();
    v_.clear();
    for (const Param* p : reg.all()) {
        m_.emplace_back(p->value.rows(), p->value.cols());
        v_.emplace_back(p->value.rows(), p->value.cols());
    }
    step_ = 0;
}

void Adam::step(ParamRegistry& reg, const std::vector<Matrix>& grads, const std::vector<double>& lr) {
    const auto& params = reg.all();
    if (grads.size() != params.size() || m_.size() != params.size())
        throw DomainError("adam: gradient list does not match parameter registry");
    ++step_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (size_t i = 0; i < params.size(); ++i) {
        Matrix& w = params[i]->value;
        const Matrix& g = grads[i];
        Matrix& m = m_[i];
        Matrix& v = v_[i];
        for (size_t k = 0; k < w.size(); ++k) {
            const double gk = g.data()[k];
            m.data()[k] = beta1_ * m.data()[k] + (1.0 - beta1_) * gk;
            v.data()[k] = beta2_ * v.data()[k] + (1.0 - beta2_) * gk * gk;
            const double mhat = m.data()[k] / bc1;
            const double vhat = v.data()[k] / bc2;
            w.data()[k] -= lr[i] * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::restore(std::vector<Matrix> m, std::vector<Matrix> v, long step) {
    m_ = std::move(m);
    v_ = std::move(v);
    step_ = step;
}

// ---- datasets ----

std::vector<SaliencySample> make_split(const RunConfig& cfg, bool train_split) {
    if (!cfg.data_dir.empty()) {
        auto all = load_dataset_dir(cfg.data_dir);
        if (static_cast<int>(all.size()) < cfg.train_count + cfg.test_count)
            throw UsageError("dataset dir holds " + std::to_string(all.size()) + " samples, config needs " +
                             std::to_string(cfg.train_count + cfg.test_count));
        std::vector<SaliencySample> split;
        const int begin = train_split ? 0 : cfg.train_count;
        const int count = train_split ? cfg.train_count : cfg.test_count;
        for (int i = 0; i < count; ++i) split.push_back(std::move(all[begin + i]));
        return split;
    }
    // Distinct streams so the test split never overlaps training data.
    const uint64_t stream = train_split ? 1 : 2;
    const uint64_t seed = Rng(cfg.seed).fork(stream).bits();
    return synth_dataset(seed, train_split ? cfg.train_count : cfg.test_count, cfg.image_size);
}

std::vector<SaliencySample> load_dataset_dir(const std::string& dir) {
    std::vector<SaliencySample> out;
    for (int i = 0;; ++i) {
        char stem[32];
        std::snprintf(stem, sizeof(stem), "%04d", i);
        const std::string rgb_path = dir + "/" + stem + "_rgb.ppm";
        if (!fs::exists(rgb_path)) break;
        SaliencySample s;
        Matrix r, g, b;
        decode_ppm(read_file(rgb_path), r, g, b);
        const Matrix depth = decode_pgm(read_file(dir + "/" + stem + "_depth.pgm"));
        Matrix mask = decode_pgm(read_file(dir + "/" + stem + "_mask.pgm"));
        s.size = r.rows();
        if (r.rows() != r.cols()) throw FormatError("dataset: images must be square");
        s.rgb = Matrix(s.size * s.size, 3);
        for (int k = 0; k < s.size * s.size; ++k) {
            s.rgb(k, 0) = r.data()[k];
            s.rgb(k, 1) = g.data()[k];
            s.rgb(k, 2) = b.data()[k];
        }
        s.depth = Matrix(s.size * s.size, 1, depth.vec());
        for (double& v : mask.vec()) v = v >= 0.5 ? 1.0 : 0.0;
        s.mask = std::move(mask);
        out.push_back(std::move(s));
    }
    if (out.empty()) throw UsageError("dataset dir '" + dir + "' holds no samples");
    return out;
}

// ---- augmentation ----

namespace {

SaliencySample augment_sample(const SaliencySample& in, Rng& rng) {
    const bool flip = rng.uniform() < 0.5;
    const double crop_frac = rng.uniform(0.8, 1.0);
    const int s = in.size;
    const int cs = std::max(16, static_cast<int>(crop_frac * s));
    const int oy = rng.uniform_int(0, s - cs);
    const int ox = rng.uniform_int(0, s - cs);

    SaliencySample out;
    out.size = s;
    out.rgb = Matrix(s * s, 3);
    out.depth = Matrix(s * s, 1);
    out.mask = Matrix(s, s);
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
            const int sy = oy + y * cs / s;
            int sx = ox + x * cs / s;
            if (flip) sx = ox + (cs - 1) - (x * cs / s);
            const int src = sy * s + sx;
            const int dst = y * s + x;
            for (int c = 0; c < 3; ++c) out.rgb(dst, c) = in.rgb(src, c);
            out.depth(dst, 0) = in.depth(src, 0);
            out.mask(y, x) = in.mask(sy, sx);
        }
    for (double v : out.mask.vec())
        if (v == 1.0) return out;
    return in; // crop removed every foreground pixel; keep the original
}

} // namespace

// ---- session serialization ----

namespace {

constexpr const char* kMetaKeys[] = {"seed",      "epsilon",   "lambda",       "layers",       "heads",
                                     "width",     "ffn_hidden", "use_coarse",  "literal_eq12", "ap_window",
                                     "image_size", "train_count", "test_count", "epochs",      "batch_size",
                                     "lr",        "fuse_lr_scale", "lr_decay_epoch1", "lr_decay_epoch2", "augment",
                                     "strategy"};

std::vector<double> meta_values(const RunConfig& c) {
    return {static_cast<double>(c.seed),
            c.epsilon,
            c.lambda,
            static_cast<double>(c.layers),
            static_cast<double>(c.heads),
            static_cast<double>(c.width),
            static_cast<double>(c.ffn_hidden),
            c.use_coarse ? 1.0 : 0.0,
            c.literal_eq12 ? 1.0 : 0.0,
            static_cast<double>(c.ap_window),
            static_cast<double>(c.image_size),
            static_cast<double>(c.train_count),
            static_cast<double>(c.test_count),
            static_cast<double>(c.epochs),
            static_cast<double>(c.batch_size),
            c.lr,
            c.fuse_lr_scale,
            static_cast<double>(c.lr_decay_epoch1),
            static_cast<double>(c.lr_decay_epoch2),
            c.augment ? 1.0 : 0.0,
            static_cast<double>(static_cast<int>(parse_strategy(c.strategy)))};
}

void apply_meta(RunConfig& c, const std::string& key, double v) {
    if (key == "seed") c.seed = static_cast<uint64_t>(v);
    else if (key == "epsilon") c.epsilon = v;
    else if (key == "lambda") c.lambda = v;
    else if (key == "layers") c.layers = static_cast<int>(v);
    else if (key == "heads") c.heads = static_cast<int>(v);
    else if (key == "width") c.width = static_cast<int>(v);
    else if (key == "ffn_hidden") c.ffn_hidden = static_cast<int>(v);
    else if (key == "use_coarse") c.use_coarse = v != 0.0;
    else if (key == "literal_eq12") c.literal_eq12 = v != 0.0;
    else if (key == "ap_window") c.ap_window = static_cast<int>(v);
    else if (key == "image_size") c.image_size = static_cast<int>(v);
    else if (key == "train_count") c.train_count = static_cast<int>(v);
    else if (key == "test_count") c.test_count = static_cast<int>(v);
    else if (key == "epochs") c.epochs = static_cast<int>(v);
    else if (key == "batch_size") c.batch_size = static_cast<int>(v);
    else if (key == "lr") c.lr = v;
    else if (key == "fuse_lr_scale") c.fuse_lr_scale = v;
    else if (key == "lr_decay_epoch1") c.lr_decay_epoch1 = static_cast<int>(v);
    else if (key == "lr_decay_epoch2") c.lr_decay_epoch2 = static_cast<int>(v);
    else if (key == "augment") c.augment = v != 0.0;
    else if (key == "strategy") c.strategy = strategy_name(static_cast<FusionStrategy>(static_cast<int>(v)));
}

} // namespace

std::string encode_session(const SodModel& model, const Adam& adam, const RunConfig& cfg, int epochs_completed,
                           int best_epoch, double best_mae) {
    std::vector<NamedTensor> tensors;
    const auto& params = model.registry().all();
    for (const Param* p : params) tensors.push_back(NamedTensor::from_matrix(p->name, p->value));
    for (size_t i = 0; i < params.size(); ++i) {
        tensors.push_back(NamedTensor::from_matrix("opt.m." + params[i]->name, adam.m_state()[i]));
        tensors.push_back(NamedTensor::from_matrix("opt.v." + params[i]->name, adam.v_state()[i]));
    }
    tensors.push_back(NamedTensor::scalar("opt.step", static_cast<double>(adam.step_count())));
    const std::vector<double> mv = meta_values(cfg);
    for (size_t i = 0; i < mv.size(); ++i)
        tensors.push_back(NamedTensor::scalar(std::string("meta.") + kMetaKeys[i], mv[i]));
    tensors.push_back(NamedTensor::scalar("meta.epochs_completed", epochs_completed));
    tensors.push_back(NamedTensor::scalar("meta.best_epoch", best_epoch));
    tensors.push_back(NamedTensor::scalar("meta.best_mae", best_mae));
    return encode_checkpoint(tensors);
}

LoadedSession load_session(const std::string& bytes) {
    const std::vector<NamedTensor> tensors = decode_checkpoint(bytes);
    LoadedSession s;
    for (const NamedTensor& t : tensors)
        if (t.name.rfind("meta.", 0) == 0) {
            const std::string key = t.name.substr(5);
            if (key == "epochs_completed") s.epochs_completed = static_cast<int>(t.to_scalar());
            else if (key == "best_epoch") s.best_epoch = static_cast<int>(t.to_scalar());
            else if (key == "best_mae") s.best_mae = t.to_scalar();
            else apply_meta(s.cfg, key, t.to_scalar());
        }
    s.model = std::make_unique<SodModel>(s.cfg.model_config(), s.cfg.seed);

    const auto& params = s.model->registry().all();
    s.adam_m.resize(params.size());
    s.adam_v.resize(params.size());
    size_t loaded = 0;
    for (const NamedTensor& t : tensors) {
        if (t.name.rfind("meta.", 0) == 0) continue;
        if (t.name == "opt.step") {
            s.adam_step = static_cast<long>(t.to_scalar());
            continue;
        }
        const bool is_m = t.name.rfind("opt.m.", 0) == 0;
        const bool is_v = t.name.rfind("opt.v.", 0) == 0;
        const std::string pname = is_m || is_v ? t.name.substr(6) : t.name;
        Param* p = s.model->registry().find(pname);
        if (!p) throw CheckpointError("checkpoint names unknown parameter '" + t.name + "'");
        Matrix m = t.to_matrix();
        if (!m.same_shape(p->value))
            throw CheckpointError("checkpoint tensor '" + t.name + "' has shape " + m.shape_str() + ", model expects " +
                                  p->value.shape_str());
        size_t idx = 0;
        for (; idx < params.size(); ++idx)
            if (params[idx] == p) break;
        if (is_m) s.adam_m[idx] = std::move(m);
        else if (is_v) s.adam_v[idx] = std::move(m);
        else {
            p->value = std::move(m);
            ++loaded;
        }
    }
    if (loaded != params.size())
        throw CheckpointError("checkpoint holds " + std::to_string(loaded) + " of " + std::to_string(params.size()) +
                              " model tensors");
    for (size_t i = 0; i < params.size(); ++i) {
        if (s.adam_m[i].empty()) s.adam_m[i] = Matrix(params[i]->value.rows(), params[i]->value.cols());
        if (s.adam_v[i].empty()) s.adam_v[i] = Matrix(params[i]->value.rows(), params[i]->value.cols());
    }
    return s;
}

// ---- training ----

namespace {

double decayed_lr(const RunConfig& cfg, int epoch_1based) {
    // Desk-scale staging: from-scratch training wants most epochs at full
    // rate, with two late cuts (x0.1 then a further x0.2).
    const int d1 = cfg.lr_decay_epoch1 > 0 ? cfg.lr_decay_epoch1 : std::max(1, 7 * cfg.epochs / 10);
    const int d2 = cfg.lr_decay_epoch2 > 0 ? cfg.lr_decay_epoch2 : std::max(2, 9 * cfg.epochs / 10);
    double lr = cfg.lr;
    if (epoch_1based > d1) lr *= 0.1;
    if (epoch_1based > d2) lr *= 0.2;
    return lr;
}

std::string losses_csv(const std::vector<EpochLog>& log) {
    std::string csv = "epoch,l_p,focal_sum,total\n";
    for (const EpochLog& e : log)
        csv += std::to_string(e.epoch) + "," + fmt_g17(e.l_p) + "," + fmt_g17(e.focal_sum) + "," + fmt_g17(e.total) +
               "\n";
    return csv;
}

} // namespace

TrainSummary train_run(const RunConfig& cfg, OutputDir& out, const std::string& resume_path) {
    cfg.validate();
    const std::vector<SaliencySample> train_data = make_split(cfg, true);

    std::unique_ptr<SodModel> model;
    Adam adam;
    TrainSummary summary;
    int start_epoch = 0;
    if (!resume_path.empty()) {
        LoadedSession s = load_session(read_file(resume_path));
        // The stored snapshot must describe the same run.
        if (meta_values(s.cfg) != meta_values(cfg))
            throw CheckpointError("resume: checkpoint config snapshot does not match the requested config");
        model = std::move(s.model);
        adam.attach(model->registry());
        adam.restore(std::move(s.adam_m), std::move(s.adam_v), s.adam_step);
        start_epoch = s.epochs_completed;
        summary.best_epoch = s.best_epoch;
        summary.best_mae = s.best_mae;
    } else {
        model = std::make_unique<SodModel>(cfg.model_config(), cfg.seed);
        adam.attach(model->registry());
    }

    const LossOptions loss_opts = cfg.loss_options();
    const auto& params = model->registry().all();
    std::vector<Matrix> grad_accum(params.size());
    std::string best_bytes;

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        Rng epoch_rng = Rng(cfg.seed).fork(0x10000 + static_cast<uint64_t>(epoch));
        std::vector<int> order(train_data.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
            std::swap(order[i], order[epoch_rng.uniform_int(0, i)]);

        const double lr = decayed_lr(cfg, epoch + 1);
        std::vector<double> lr_per_param(params.size(), lr);
        for (size_t i = 0; i < params.size(); ++i)
            if (params[i]->name.rfind("fuse.", 0) == 0) lr_per_param[i] = lr * cfg.fuse_lr_scale;
        EpochLog log;
        log.epoch = epoch + 1;
        double mae_sum = 0.0;
        int batch_id = 0;
        for (size_t pos = 0; pos < order.size(); pos += cfg.batch_size, ++batch_id) {
            const size_t end = std::min(order.size(), pos + cfg.batch_size);
            for (size_t i = 0; i < params.size(); ++i)
                grad_accum[i] = Matrix(params[i]->value.rows(), params[i]->value.cols());

            for (size_t bi = pos; bi < end; ++bi) {
                const SaliencySample& base = train_data[order[bi]];
                const SaliencySample sample = cfg.augment ? augment_sample(base, epoch_rng) : base;
                Tape t;
                SodModel::Forward f = model->forward_t(t, sample);
                LossBreakdownVars parts;
                Var loss = model->loss_t(t, f, sample, loss_opts, &parts);
                const double lv = t.val(loss)(0, 0);
                if (!std::isfinite(lv))
                    throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                                            std::to_string(batch_id) + ", sample " + std::to_string(order[bi]),
                                        epoch + 1, batch_id);
                t.backward(loss);
                for (size_t i = 0; i < params.size(); ++i) {
                    const Matrix* g = t.param_grad(*params[i]);
                    if (!g) continue;
                    for (size_t k = 0; k < grad_accum[i].size(); ++k) grad_accum[i].data()[k] += g->data()[k];
                }
                log.l_p += t.val(parts.l_p)(0, 0);
                log.focal_sum += t.val(parts.focal_sum)(0, 0);
                log.total += lv;
                const Matrix pred(sample.size, sample.size, t.val(f.dec.pred2).vec());
                mae_sum += mae(pred, sample.mask);
            }
            const double inv = 1.0 / static_cast<double>(end - pos);
            for (auto& g : grad_accum)
                for (double& v : g.vec()) v *= inv;
            adam.step(model->registry(), grad_accum, lr_per_param);
        }
        const double inv_n = 1.0 / static_cast<double>(train_data.size());
        log.l_p *= inv_n;
        log.focal_sum *= inv_n;
        log.total *= inv_n;
        log.train_mae = mae_sum * inv_n;
        summary.log.push_back(log);

        if (summary.best_epoch == 0 || log.train_mae < summary.best_mae) {
            summary.best_epoch = epoch + 1;
            summary.best_mae = log.train_mae;
            best_bytes = encode_session(*model, adam, cfg, epoch + 1, summary.best_epoch, summary.best_mae);
        }
    }

    out.write("losses.csv", losses_csv(summary.log));
    out.write("checkpoint_final.mfck",
              encode_session(*model, adam, cfg, cfg.epochs, summary.best_epoch, summary.best_mae));
    if (best_bytes.empty())
        best_bytes = encode_session(*model, adam, cfg, cfg.epochs, summary.best_epoch, summary.best_mae);
    out.write("checkpoint_best.mfck", best_bytes);
    out.write("config.json", cfg.to_json());
    return summary;
}

// ---- evaluation ----

EvalSummary evaluate_model(const SodModel& model, const std::vector<SaliencySample>& data, bool fmax_mean_curve) {
    if (data.empty()) throw UsageError("evaluate: dataset is empty");
    EvalSummary out;
    std::array<double, 256> mean_p{}, mean_r{};
    for (size_t i = 0; i < data.size(); ++i) {
        const Matrix pred = model.predict(data[i]);
        EvalRow row;
        char id[16];
        std::snprintf(id, sizeof(id), "%04zu", i);
        row.id = id;
        row.mae = mae(pred, data[i].mask);
        row.s_measure = s_measure(pred, data[i].mask);
        row.e_max = e_measure_max(pred, data[i].mask);
        const PrCurve curve = pr_curve(pred, data[i].mask);
        row.f_max = f_measure_max(curve);
        for (int k = 0; k < 256; ++k) {
            mean_p[k] += curve.points[k].precision;
            mean_r[k] += curve.points[k].recall;
        }
        out.mean.s_measure += row.s_measure;
        out.mean.e_max += row.e_max;
        out.mean.mae += row.mae;
        out.mean.f_max += row.f_max;
        out.rows.push_back(row);
    }
    const double inv = 1.0 / static_cast<double>(data.size());
    out.mean.id = "mean";
    out.mean.s_measure *= inv;
    out.mean.e_max *= inv;
    out.mean.mae *= inv;
    if (fmax_mean_curve) {
        PrCurve mean_curve;
        for (int k = 0; k < 256; ++k) mean_curve.points[k] = {mean_p[k] * inv, mean_r[k] * inv};
        out.mean.f_max = f_measure_max(mean_curve);
    } else {
        out.mean.f_max *= inv;
    }
    return out;
}

std::string eval_csv(const EvalSummary& summary) {
    std::string csv = "sample,s_measure,f_max,e_max,mae\n";
    auto line = [](const EvalRow& r) {
        return r.id + "," + fmt_g17(r.s_measure) + "," + fmt_g17(r.f_max) + "," + fmt_g17(r.e_max) + "," +
               fmt_g17(r.mae) + "\n";
    };
    for (const EvalRow& r : summary.rows) csv += line(r);
    csv += line(summary.mean);
    return csv;
}

} // namespace mf
