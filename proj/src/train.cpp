#include "coreg/train.hpp"

#include <cmath>
#include <ostream>

#include "coreg/error.hpp"
#include "coreg/eval.hpp"
#include "coreg/relgraph.hpp"

namespace coreg {

void validate(const TrainConfig& c) {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) fail(ErrorKind::Config, std::string(name) + " must be positive");
    };
    positive(c.lr_pretrain, "lr_pretrain");
    positive(c.lr_gcn, "lr_gcn");
    positive(c.lr_generators_finetune, "lr_generators_finetune");
    positive(c.adam_eps, "adam_eps");
    if (!(c.adam_beta1 >= 0.0 && c.adam_beta1 < 1.0)) fail(ErrorKind::Config, "adam_beta1 must lie in [0, 1)");
    if (!(c.adam_beta2 >= 0.0 && c.adam_beta2 < 1.0)) fail(ErrorKind::Config, "adam_beta2 must lie in [0, 1)");
    if (!std::isfinite(c.lambda_mv) || !std::isfinite(c.lambda_cr)) {
        fail(ErrorKind::Config, "loss weights must be finite");
    }
    if (c.batch_size == 0) fail(ErrorKind::Config, "batch_size must be positive");
    if (c.feature_dim == 0) fail(ErrorKind::Config, "feature_dim must be positive");
    for (std::size_t h : c.hidden_layers)
        if (h == 0) fail(ErrorKind::Config, "hidden layer widths must be positive");
    if (!(c.leaky_slope >= 0.0)) fail(ErrorKind::Config, "leaky_slope must be nonnegative");
    if (c.seed_view1 == c.seed_view2) fail(ErrorKind::Config, "seed_view1 and seed_view2 must differ");
    if (c.flags.single_view) {
        if (c.flags.use_gcn) fail(ErrorKind::Config, "GCN fine-tuning needs two views (single_view is set)");
        if (c.flags.use_mv || c.flags.use_cr) {
            fail(ErrorKind::Config, "single_view trains L_v only; disable use_mv and use_cr");
        }
    }
}

TrainConfig with_ablation(TrainConfig config, Ablation ablation) {
    AblationFlags& f = config.flags;
    switch (ablation) {
        case Ablation::Baseline:
            f = AblationFlags{false, false, false, true, false};
            break;
        case Ablation::CoReg:
            f = AblationFlags{false, true, false, false, true};
            break;
        case Ablation::CoRegMultiview:
            f = AblationFlags{true, true, false, false, true};
            break;
        case Ablation::Full:
            f = AblationFlags{true, true, true, false, true};
            break;
    }
    return config;
}

const char* to_string(Ablation ablation) {
    switch (ablation) {
        case Ablation::Baseline: return "baseline";
        case Ablation::CoReg: return "coreg";
        case Ablation::CoRegMultiview: return "coreg_mv";
        case Ablation::Full: return "full";
    }
    return "?";
}

const char* to_string(TrainPhase phase) { return phase == TrainPhase::Pretrain ? "pretrain" : "finetune"; }

ModelSpec model_spec(const TrainConfig& config, std::size_t input_dim, std::size_t label_count) {
    ModelSpec s;
    s.layer_sizes.push_back(input_dim);
    s.layer_sizes.insert(s.layer_sizes.end(), config.hidden_layers.begin(), config.hidden_layers.end());
    s.layer_sizes.push_back(config.feature_dim);
    s.label_count = label_count;
    s.leaky_slope = config.leaky_slope;
    return s;
}

// ---------------------------------------------------------------------------

void adam_step(std::span<const ParamRef> params, std::span<const Matrix> grads, AdamState& state,
               std::span<const double> learning_rates) {
    if (grads.size() != params.size() || learning_rates.size() != params.size()) {
        fail(ErrorKind::Contract, "adam_step: need one gradient and one learning rate per parameter");
    }
    for (std::size_t p = 0; p < params.size(); ++p) {
        if (!grads[p].same_shape(*params[p].value)) {
            fail(ErrorKind::Dimension, "adam_step: gradient " + grads[p].shape() + " for parameter " +
                                           params[p].name + " of shape " + params[p].value->shape());
        }
        if (!all_finite(grads[p])) {
            fail(ErrorKind::Numerical, "non-finite gradient for parameter " + params[p].name);
        }
    }
    if (state.m.empty()) {
        for (const ParamRef& p : params) {
            state.m.emplace_back(p.value->rows(), p.value->cols());
            state.v.emplace_back(p.value->rows(), p.value->cols());
        }
    }
    if (state.m.size() != params.size()) fail(ErrorKind::Contract, "adam_step: parameter set changed");

    ++state.step;
    const auto& o = state.options;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(o.beta1, t);
    const double c2 = 1.0 - std::pow(o.beta2, t);
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto w = params[p].value->data();
        auto g = grads[p].data();
        auto m = state.m[p].data();
        auto v = state.v[p].data();
        const double lr = learning_rates[p];
        for (std::size_t k = 0; k < w.size(); ++k) {
            m[k] = o.beta1 * m[k] + (1.0 - o.beta1) * g[k];
            v[k] = o.beta2 * v[k] + (1.0 - o.beta2) * g[k] * g[k];
            const double m_hat = m[k] / c1;
            const double v_hat = v[k] / c2;
            w[k] -= lr * m_hat / (std::sqrt(v_hat) + o.eps);
        }
    }
}

void adam_step(std::span<const ParamRef> params, std::span<const Matrix> grads, AdamState& state,
               double learning_rate) {
    const std::vector<double> lrs(params.size(), learning_rate);
    adam_step(params, grads, state, lrs);
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const EpochRecord& r) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    nlohmann::json j;
    j["phase"] = to_string(r.phase);
    j["epoch"] = r.epoch;
    j["steps"] = r.steps;
    j["l_v1"] = r.l_v1;
    j["l_v2"] = r.l_v2;
    j["l_mv"] = r.l_mv;
    j["l_cr"] = r.l_cr;
    j["total"] = r.total;
    j["val_f1_view1"] = opt(r.val_f1_view1);
    j["val_f1_view2"] = opt(r.val_f1_view2);
    j["val_f1_average"] = opt(r.val_f1_average);
    j["val_f1_ensemble"] = opt(r.val_f1_ensemble);
    j["mean_abs_cos"] = opt(r.mean_abs_cos);
    return j;
}

void write_train_log(std::ostream& out, const TrainLog& log) {
    for (const auto& r : log.epochs) out << to_json(r).dump() << '\n';
}

double mean_abs_cosine(const TwoViewModel& model, bool use_gcn) {
    const Matrix* w1 = &model.heads[0].weights;
    const Matrix* w2 = &model.heads[1].weights;
    ClassifierHead r1, r2;
    if (use_gcn) {
        if (!model.gcn_active || !model.gcn || !model.adjacency) {
            fail(ErrorKind::State, "mean_abs_cosine: model has no active GCN");
        }
        r1 = refine_weights(model.heads[0], *model.gcn, *model.adjacency);
        r2 = refine_weights(model.heads[1], *model.gcn, *model.adjacency);
        w1 = &r1.weights;
        w2 = &r2.weights;
    }
    double total = 0.0;
    for (std::size_t j = 0; j < w1->rows(); ++j) {
        double d = 0.0, n1 = 0.0, n2 = 0.0;
        for (std::size_t k = 0; k < w1->cols(); ++k) {
            d += (*w1)(j, k) * (*w2)(j, k);
            n1 += (*w1)(j, k) * (*w1)(j, k);
            n2 += (*w2)(j, k) * (*w2)(j, k);
        }
        if (n1 > 0.0 && n2 > 0.0) total += std::abs(d) / std::sqrt(n1 * n2);
    }
    return w1->rows() == 0 ? 0.0 : total / static_cast<double>(w1->rows());
}

namespace {

std::uint64_t epoch_seed(std::uint64_t base, TrainPhase phase, std::size_t epoch, Phase batch_phase) {
    // Distinct, reproducible shuffles per (phase, epoch, pass).
    return base * 1000003ULL + (phase == TrainPhase::Finetune ? 1ULL << 40 : 0ULL) +
           static_cast<std::uint64_t>(epoch) * 2ULL + (batch_phase == Phase::LabeledOnly ? 1ULL : 0ULL);
}

struct PhaseSetup {
    TrainPhase phase;
    std::size_t epochs;
    LossOptions loss;
    std::vector<double> lrs;
};

TrainLog run_phase(TwoViewModel& model, const Dataset& dataset, const TrainConfig& config, const PhaseSetup& setup,
                   const TrainHooks& hooks) {
    const bool single = config.flags.single_view;
    std::vector<ParamRef> params = parameters(model, single);
    AdamState adam;
    adam.options = {config.adam_beta1, config.adam_beta2, config.adam_eps};

    TrainLog log;
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < setup.epochs; ++epoch) {
        EpochRecord rec;
        rec.phase = setup.phase;
        rec.epoch = epoch + 1;

        for (Phase bp : {Phase::Mixed, Phase::LabeledOnly}) {
            const auto batches = epoch_batches(dataset, config.batch_size, bp,
                                               epoch_seed(config.seed_data, setup.phase, epoch, bp),
                                               config.unlabeled_cap);
            for (const Batch& batch : batches) {
                LossWithGradients lg = combined_loss_with_gradients(dataset, batch, model, setup.loss);
                if (!std::isfinite(lg.breakdown.total)) {
                    fail(ErrorKind::Numerical, "non-finite loss at epoch " + std::to_string(rec.epoch));
                }
                if (hooks.on_step) {
                    hooks.on_step(StepInfo{setup.phase, rec.epoch, step, bp, batch, model, setup.loss, lg.breakdown,
                                           lg.gradients});
                }
                adam_step(params, lg.gradients, adam, setup.lrs);
                ++step;
                ++rec.steps;
                rec.l_v1 += lg.breakdown.l_v1;
                rec.l_v2 += lg.breakdown.l_v2;
                rec.l_mv += lg.breakdown.l_mv;
                rec.l_cr += lg.breakdown.l_cr;
                rec.total += lg.breakdown.total;
            }
        }
        if (rec.steps > 0) {
            const double n = static_cast<double>(rec.steps);
            rec.l_v1 /= n;
            rec.l_v2 /= n;
            rec.l_mv /= n;
            rec.l_cr /= n;
            rec.total /= n;
        }
        if (!single) rec.mean_abs_cos = mean_abs_cosine(model, setup.loss.use_gcn);
        if (hooks.validation != nullptr) {
            const MetricsReport m =
                evaluate_model(model, *hooks.validation, EvalOptions{setup.loss.use_gcn, single, kDefaultThreshold});
            rec.val_f1_view1 = m.view1.mean_f1;
            rec.val_f1_view2 = m.view2.mean_f1;
            rec.val_f1_average = m.average.mean_f1;
            rec.val_f1_ensemble = m.ensemble.mean_f1;
        }
        log.epochs.push_back(rec);
    }
    return log;
}

Dataset training_pool(const Dataset& dataset, const TrainConfig& config) {
    if (dataset.labeled_count() == 0) fail(ErrorKind::Data, "training set has no labeled samples");
    return config.flags.use_unlabeled ? dataset : dataset.labeled_only();
}

}  // namespace

TrainLog pretrain(TwoViewModel& model, const Dataset& dataset, const TrainConfig& config, const TrainHooks& hooks) {
    validate(config);
    if (model.gcn_active) fail(ErrorKind::State, "pretrain: model already has an active GCN");
    const Dataset pool = training_pool(dataset, config);

    PhaseSetup setup;
    setup.phase = TrainPhase::Pretrain;
    setup.epochs = config.epochs_pretrain;
    setup.loss.lambda_mv = config.flags.use_mv ? config.lambda_mv : 0.0;
    setup.loss.lambda_cr = config.flags.use_cr ? config.lambda_cr : 0.0;
    setup.loss.use_gcn = false;
    setup.loss.single_view = config.flags.single_view;
    setup.lrs.assign(parameters(model, config.flags.single_view).size(), config.lr_pretrain);
    return run_phase(model, pool, config, setup, hooks);
}

TrainLog finetune_gcn(TwoViewModel& model, const Dataset& dataset, const TrainConfig& config,
                      const TrainHooks& hooks) {
    validate(config);
    if (config.flags.single_view) fail(ErrorKind::Config, "GCN fine-tuning needs two views");
    const Dataset pool = training_pool(dataset, config);

    const Matrix adjacency = adjacency_from_dependency(dependency_matrix(dataset.labeled_only()));
    attach_gcn(model, adjacency, config.gcn_init, config.gcn_hidden, config.seed_gcn);

    PhaseSetup setup;
    setup.phase = TrainPhase::Finetune;
    setup.epochs = config.epochs_finetune;
    setup.loss.lambda_mv = 0.0;
    setup.loss.lambda_cr = config.flags.use_cr ? config.lambda_cr : 0.0;
    setup.loss.use_gcn = true;
    setup.loss.single_view = false;
    for (const ParamRef& p : parameters(model, false)) {
        setup.lrs.push_back(p.group == ParamGroup::Encoder ? config.lr_generators_finetune : config.lr_gcn);
    }
    return run_phase(model, pool, config, setup, hooks);
}

TrainResult run_training(const Dataset& dataset, const TrainConfig& config, const TrainHooks& hooks) {
    validate(config);
    TrainResult r{init_two_view(model_spec(config, dataset.feature_dim(), dataset.label_count()), config.seed_view1,
                                config.seed_view2),
                  {}};
    r.model.label_names = dataset.label_names();
    r.log = pretrain(r.model, dataset, config, hooks);
    if (config.flags.use_gcn) {
        TrainLog ft = finetune_gcn(r.model, dataset, config, hooks);
        r.log.epochs.insert(r.log.epochs.end(), ft.epochs.begin(), ft.epochs.end());
    }
    return r;
}

}  // namespace coreg
