#pragma once

#include <memory>

#include "mf/config.hpp"
#include "mf/manifest.hpp"

namespace mf {

/// Raised when the training loop hits a non-finite loss; carries the
/// offending batch for the diagnostic dump.
class TrainingError : public std::runtime_error {
public:
    TrainingError(std::string msg, int epoch, int batch) : std::runtime_error(std::move(msg)), epoch(epoch), batch(batch) {}
    int epoch = 0;
    int batch = 0;
};

struct EpochLog {
    int epoch = 0;
    double l_p = 0.0, focal_sum = 0.0, total = 0.0;
    double train_mae = 0.0;
};

struct TrainSummary {
    std::vector<EpochLog> log;
    int best_epoch = 0;
    double best_mae = 1.0;
};

/// Adam over the registry's parameters, fixed iteration order.
class Adam {
public:
    void attach(const ParamRegistry& reg);
    void step(ParamRegistry& reg, const std::vector<Matrix>& grads, const std::vector<double>& lr);
    long step_count() const { return step_; }

    // Checkpoint participation.
    const std::vector<Matrix>& m_state() const { return m_; }
    const std::vector<Matrix>& v_state() const { return v_; }
    void restore(std::vector<Matrix> m, std::vector<Matrix> v, long step);

private:
    std::vector<Matrix> m_, v_;
    long step_ = 0;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
};

std::vector<SaliencySample> make_split(const RunConfig& cfg, bool train_split);
std::vector<SaliencySample> load_dataset_dir(const std::string& dir);

/// Trains per the config (resuming from a checkpoint when provided) and
/// writes losses.csv, checkpoint_final.mfck and checkpoint_best.mfck.
TrainSummary train_run(const RunConfig& cfg, OutputDir& out, const std::string& resume_path = "");

struct EvalRow {
    std::string id;
    double s_measure = 0.0, f_max = 0.0, e_max = 0.0, mae = 0.0;
};

struct EvalSummary {
    std::vector<EvalRow> rows;
    EvalRow mean;
};

EvalSummary evaluate_model(const SodModel& model, const std::vector<SaliencySample>& data,
                           bool fmax_mean_curve = false);
std::string eval_csv(const EvalSummary& summary);

/// Restores a model (and optionally the optimizer + run config) from MFCK
/// bytes. The stored config snapshot drives model reconstruction.
struct LoadedSession {
    RunConfig cfg;
    std::unique_ptr<SodModel> model;
    std::vector<Matrix> adam_m, adam_v;
    long adam_step = 0;
    int epochs_completed = 0;
    int best_epoch = 0;
    double best_mae = 1.0;
};

std::string encode_session(const SodModel& model, const Adam& adam, const RunConfig& cfg, int epochs_completed,
                           int best_epoch, double best_mae);
LoadedSession load_session(const std::string& bytes);

} // namespace mf
