#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coreg/data.hpp"
#include "coreg/losses.hpp"
#include "coreg/model.hpp"

#include "json.hpp"

namespace coreg {

struct AblationFlags {
    bool use_mv = true;
    bool use_cr = true;
    bool use_gcn = true;
    /// One encoder and head trained with L_v only.
    bool single_view = false;
    /// Include U in the Mixed phase. Off for the supervised baseline.
    bool use_unlabeled = true;
};

/// The four configurations of the component ablation, in order of added parts.
enum class Ablation { Baseline, CoReg, CoRegMultiview, Full };

struct TrainConfig {
    double lambda_mv = 400.0;
    double lambda_cr = 100.0;
    double lr_pretrain = 1e-3;
    double lr_gcn = 1e-3;
    double lr_generators_finetune = 1e-4;
    std::size_t epochs_pretrain = 60;
    std::size_t epochs_finetune = 20;
    std::size_t batch_size = 100;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    std::uint64_t seed_view1 = 1;
    std::uint64_t seed_view2 = 2;
    /// Batch shuffling.
    std::uint64_t seed_data = 3;
    std::uint64_t seed_gcn = 4;

    /// Unlabeled samples drawn per Mixed pass; all of U when unset.
    std::optional<std::size_t> unlabeled_cap;

    /// Encoder hidden widths between the input and the feature layer.
    std::vector<std::size_t> hidden_layers = {32};
    std::size_t feature_dim = 16;
    double leaky_slope = 0.01;
    GcnInit gcn_init = GcnInit::Identity;
    /// 0 selects the init's natural width.
    std::size_t gcn_hidden = 0;

    AblationFlags flags;
};

/// Throws ErrorKind::Config describing the first violated constraint.
void validate(const TrainConfig& config);
TrainConfig with_ablation(TrainConfig config, Ablation ablation);
const char* to_string(Ablation ablation);

ModelSpec model_spec(const TrainConfig& config, std::size_t input_dim, std::size_t label_count);

// ---------------------------------------------------------------------------

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamOptions options;
    std::size_t step = 0;
    std::vector<Matrix> m;
    std::vector<Matrix> v;
};

/// One bias-corrected Adam update of every parameter with its own learning
/// rate. Moments are created on the first call. Throws ErrorKind::Numerical
/// naming the parameter if a gradient is non-finite, before touching anything.
void adam_step(std::span<const ParamRef> params, std::span<const Matrix> grads, AdamState& state,
               std::span<const double> learning_rates);
void adam_step(std::span<const ParamRef> params, std::span<const Matrix> grads, AdamState& state,
               double learning_rate);

// ---------------------------------------------------------------------------

enum class TrainPhase { Pretrain, Finetune };
const char* to_string(TrainPhase phase);

struct EpochRecord {
    TrainPhase phase = TrainPhase::Pretrain;
    std::size_t epoch = 0;
    std::size_t steps = 0;
    double l_v1 = 0.0;
    double l_v2 = 0.0;
    double l_mv = 0.0;
    double l_cr = 0.0;
    double total = 0.0;
    std::optional<double> val_f1_view1;
    std::optional<double> val_f1_view2;
    std::optional<double> val_f1_average;
    std::optional<double> val_f1_ensemble;
    /// Mean |cos| between paired classifier rows; unset for single-view runs.
    std::optional<double> mean_abs_cos;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
};

nlohmann::json to_json(const EpochRecord& record);
/// One JSON object per line.
void write_train_log(std::ostream& out, const TrainLog& log);

/// Passed to the step observer before each Adam update.
struct StepInfo {
    TrainPhase phase;
    std::size_t epoch;
    std::size_t step;
    Phase batch_phase;
    const Batch& batch;
    const TwoViewModel& model;
    const LossOptions& loss_options;
    const LossBreakdown& breakdown;
    std::span<const Matrix> gradients;
};

struct TrainHooks {
    std::function<void(const StepInfo&)> on_step;
    /// Evaluated at the end of every epoch when set.
    const Dataset* validation = nullptr;
};

/// Mean over labels of |cos(W1_j, W2_j)| for the raw or refined classifiers.
double mean_abs_cosine(const TwoViewModel& model, bool use_gcn);

/// Optimizes the combined loss over encoders and heads for epochs_pretrain
/// epochs of (Mixed pass, LabeledOnly pass). Throws ErrorKind::State if the
/// model already has an active GCN.
TrainLog pretrain(TwoViewModel& model, const Dataset& dataset, const TrainConfig& config,
                  const TrainHooks& hooks = {});

/// Attaches the shared GCN with the adjacency from the labeled split, drops
/// L_mv and fine-tunes for epochs_finetune epochs: GCN and classifier inputs at
/// lr_gcn, encoders at lr_generators_finetune.
TrainLog finetune_gcn(TwoViewModel& model, const Dataset& dataset, const TrainConfig& config,
                      const TrainHooks& hooks = {});

struct TrainResult {
    TwoViewModel model;
    TrainLog log;
};

/// Initializes a model and runs pretrain, then (with use_gcn) finetune_gcn.
TrainResult run_training(const Dataset& dataset, const TrainConfig& config, const TrainHooks& hooks = {});

}  // namespace coreg
