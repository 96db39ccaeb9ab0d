#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "doctest.h"

#include "coreg/train.hpp"
#include "reference_loop.hpp"
#include "support.hpp"

using namespace coreg;

namespace {

TrainConfig tiny_config() {
    TrainConfig c;
    c.hidden_layers = {5};
    c.feature_dim = 4;
    c.epochs_pretrain = 2;
    c.epochs_finetune = 2;
    c.batch_size = 16;
    c.lambda_mv = 4.0;
    c.lambda_cr = 1.0;
    return c;
}

std::vector<Matrix> snapshot(TwoViewModel& m) {
    std::vector<Matrix> out;
    for (const ParamRef& p : parameters(m)) out.push_back(*p.value);
    return out;
}

bool same_params(TwoViewModel& a, TwoViewModel& b) { return snapshot(a) == snapshot(b); }

}  // namespace

TEST_CASE("adam first step moves by the learning rate") {
    Matrix w(1, 2, 0.0);
    std::vector<ParamRef> params{{"w", ParamGroup::Encoder, &w}};
    std::vector<Matrix> grads{Matrix::from_rows({{1.0, -3.0}})};
    AdamState s;
    adam_step(params, grads, s, 1e-3);
    CHECK(s.step == 1);
    CHECK(w(0, 0) == doctest::Approx(-1e-3).epsilon(1e-7));
    CHECK(w(0, 1) == doctest::Approx(1e-3).epsilon(1e-7));

    // Second step with the same gradient: bias-corrected moments are unchanged.
    adam_step(params, grads, s, 1e-3);
    CHECK(w(0, 0) == doctest::Approx(-2e-3).epsilon(1e-7));
}

TEST_CASE("adam with zero gradient leaves parameters but counts the step") {
    Matrix w = Matrix::from_rows({{0.3, -0.2}});
    const Matrix before = w;
    std::vector<ParamRef> params{{"w", ParamGroup::Encoder, &w}};
    std::vector<Matrix> grads{Matrix(1, 2, 0.0)};
    AdamState s;
    adam_step(params, grads, s, 1e-2);
    CHECK(w == before);
    CHECK(s.step == 1);
}

TEST_CASE("adam rejects non-finite gradients before touching anything") {
    Matrix a = Matrix::from_rows({{1.0}});
    Matrix b = Matrix::from_rows({{2.0}});
    std::vector<ParamRef> params{{"a", ParamGroup::Encoder, &a}, {"b", ParamGroup::Gcn, &b}};
    std::vector<Matrix> grads{Matrix(1, 1, 1.0), Matrix(1, 1, std::numeric_limits<double>::quiet_NaN())};
    AdamState s;
    CHECK(testing::error_kind_of([&] { adam_step(params, grads, s, 1e-3); }) == ErrorKind::Numerical);
    CHECK(a(0, 0) == 1.0);
    CHECK(b(0, 0) == 2.0);
    CHECK(s.step == 0);

    const std::vector<double> lrs{1e-3};
    CHECK(testing::error_kind_of([&] { adam_step(params, grads, s, lrs); }) == ErrorKind::Contract);
}

TEST_CASE("per-parameter learning rates") {
    Matrix a(1, 1, 0.0), b(1, 1, 0.0);
    std::vector<ParamRef> params{{"a", ParamGroup::Encoder, &a}, {"b", ParamGroup::Gcn, &b}};
    std::vector<Matrix> grads{Matrix(1, 1, 1.0), Matrix(1, 1, 1.0)};
    AdamState s;
    const std::vector<double> lrs{1e-4, 1e-2};
    adam_step(params, grads, s, lrs);
    CHECK(a(0, 0) == doctest::Approx(-1e-4).epsilon(1e-6));
    CHECK(b(0, 0) == doctest::Approx(-1e-2).epsilon(1e-6));
}

TEST_CASE("config validation") {
    auto kind = [](auto mutate) {
        TrainConfig c;
        mutate(c);
        return testing::error_kind_of([&] { validate(c); });
    };
    CHECK_NOTHROW(validate(TrainConfig{}));
    CHECK(kind([](TrainConfig& c) { c.seed_view2 = c.seed_view1; }) == ErrorKind::Config);
    CHECK(kind([](TrainConfig& c) { c.batch_size = 0; }) == ErrorKind::Config);
    CHECK(kind([](TrainConfig& c) { c.lr_gcn = 0.0; }) == ErrorKind::Config);
    CHECK(kind([](TrainConfig& c) { c.adam_beta2 = 1.0; }) == ErrorKind::Config);
    CHECK(kind([](TrainConfig& c) { c.hidden_layers = {0}; }) == ErrorKind::Config);
    CHECK(kind([](TrainConfig& c) { c.lambda_cr = std::nan(""); }) == ErrorKind::Config);
    CHECK(kind([](TrainConfig& c) { c.flags.single_view = true; }) == ErrorKind::Config);
}

TEST_CASE("ablation presets") {
    const TrainConfig base = with_ablation(TrainConfig{}, Ablation::Baseline);
    CHECK(base.flags.single_view);
    CHECK_FALSE(base.flags.use_unlabeled);
    CHECK_FALSE(base.flags.use_gcn);
    const TrainConfig coreg = with_ablation(TrainConfig{}, Ablation::CoReg);
    CHECK(coreg.flags.use_cr);
    CHECK_FALSE(coreg.flags.use_mv);
    const TrainConfig mv = with_ablation(TrainConfig{}, Ablation::CoRegMultiview);
    CHECK(mv.flags.use_mv);
    CHECK_FALSE(mv.flags.use_gcn);
    const TrainConfig full = with_ablation(TrainConfig{}, Ablation::Full);
    CHECK(full.flags.use_gcn);
    for (Ablation a : {Ablation::Baseline, Ablation::CoReg, Ablation::CoRegMultiview, Ablation::Full}) {
        CHECK_NOTHROW(validate(with_ablation(TrainConfig{}, a)));
    }
    CHECK(std::string(to_string(Ablation::CoRegMultiview)) == "coreg_mv");
}

TEST_CASE("zero epochs leave the model untouched") {
    const Dataset ds = testing::random_dataset(30, 20, 3, 3, 5);
    TrainConfig c = tiny_config();
    c.epochs_pretrain = 0;
    c.epochs_finetune = 0;
    TwoViewModel init = init_two_view(model_spec(c, 3, 3), c.seed_view1, c.seed_view2);

    TrainConfig pre_only = c;
    pre_only.flags.use_gcn = false;
    TrainResult r = run_training(ds, pre_only, {});
    CHECK(same_params(r.model, init));
    CHECK(r.log.epochs.empty());

    TrainResult g = run_training(ds, c, {});
    CHECK(g.model.gcn_active);
    REQUIRE(g.model.gcn.has_value());
    CHECK(g.model.encoders[0].layers[0].weight == init.encoders[0].layers[0].weight);
    CHECK(g.model.heads[1].weights == init.heads[1].weights);
    // Identity GCN init: H0 and H1 start as identities.
    CHECK(g.model.gcn->h0 == Matrix::identity(c.feature_dim + 1));
}

TEST_CASE("identity gcn with identity adjacency reproduces the raw head") {
    const Dataset ds = testing::random_dataset(20, 0, 3, 4, 9);
    TrainConfig c = tiny_config();
    TwoViewModel m = init_two_view(model_spec(c, 3, 4), 1, 2);
    // Nonnegative head rows keep the leaky-relu in its identity branch.
    for (auto& h : m.heads)
        for (double& v : h.weights.data()) v = std::abs(v);
    const Matrix x = ds.all_features();
    const Matrix raw = predict_from_inputs(m, View::First, x, false);
    attach_gcn(m, Matrix::identity(4), GcnInit::Identity, 0, 4);
    const Matrix refined = predict_from_inputs(m, View::First, x, true);
    CHECK(max_abs(sub(raw, refined)) < 1e-15);
}

TEST_CASE("pretrain refuses a model with an active gcn") {
    const Dataset ds = testing::random_dataset(20, 0, 3, 2, 9);
    TrainConfig c = tiny_config();
    TwoViewModel m = init_two_view(model_spec(c, 3, 2), 1, 2);
    attach_gcn(m, Matrix::identity(2), GcnInit::Identity, 0, 4);
    CHECK(testing::error_kind_of([&] { pretrain(m, ds, c); }) == ErrorKind::State);
}

TEST_CASE("training without gcn equals pretraining alone") {
    const Dataset ds = testing::random_dataset(30, 30, 3, 3, 11);
    TrainConfig c = with_ablation(tiny_config(), Ablation::CoRegMultiview);
    TrainResult r = run_training(ds, c);
    TwoViewModel m = init_two_view(model_spec(c, 3, 3), c.seed_view1, c.seed_view2);
    pretrain(m, ds, c);
    CHECK(same_params(r.model, m));
    CHECK_FALSE(r.model.gcn_active);
}

TEST_CASE("identical configs give bit-identical runs") {
    const Dataset ds = testing::random_dataset(30, 30, 3, 3, 12);
    const TrainConfig c = tiny_config();
    TrainResult a = run_training(ds, c);
    TrainResult b = run_training(ds, c);
    CHECK(same_params(a.model, b.model));
    std::ostringstream la, lb;
    write_train_log(la, a.log);
    write_train_log(lb, b.log);
    CHECK(la.str() == lb.str());

    TrainConfig other = c;
    other.seed_data = 99;
    TrainResult d = run_training(ds, other);
    CHECK_FALSE(same_params(a.model, d.model));
}

TEST_CASE("phase loss settings seen by the step hook") {
    const Dataset ds = testing::random_dataset(20, 20, 3, 3, 13);
    const TrainConfig c = tiny_config();
    std::size_t pre = 0, fine = 0, mixed_unlabeled = 0;
    TrainHooks hooks;
    hooks.on_step = [&](const StepInfo& s) {
        if (s.phase == TrainPhase::Pretrain) {
            ++pre;
            CHECK(s.loss_options.lambda_mv == c.lambda_mv);
            CHECK_FALSE(s.loss_options.use_gcn);
        } else {
            ++fine;
            CHECK(s.loss_options.lambda_mv == 0.0);
            CHECK(s.loss_options.lambda_cr == c.lambda_cr);
            CHECK(s.loss_options.use_gcn);
            CHECK(s.model.gcn_active);
        }
        if (s.batch_phase == Phase::LabeledOnly) {
            CHECK(s.batch.labeled_count() == s.batch.size());
        } else {
            mixed_unlabeled += s.batch.size() - s.batch.labeled_count();
        }
    };
    const TrainResult r = run_training(ds, c, hooks);
    // 40 mixed + 20 labeled per epoch at batch 16: 3 + 2 steps.
    CHECK(pre == 10);
    CHECK(fine == 10);
    CHECK(mixed_unlabeled == 20 * 4);
    REQUIRE(r.log.epochs.size() == 4);
    CHECK(r.log.epochs[3].phase == TrainPhase::Finetune);
    CHECK(r.log.epochs[0].steps == 5);
}

TEST_CASE("supervised baseline never sees unlabeled rows") {
    const Dataset ds = testing::random_dataset(20, 20, 3, 3, 14);
    const TrainConfig c = with_ablation(tiny_config(), Ablation::Baseline);
    TrainHooks hooks;
    hooks.on_step = [&](const StepInfo& s) {
        CHECK(s.batch.labeled_count() == s.batch.size());
        CHECK(s.loss_options.single_view);
        CHECK(s.breakdown.total == s.breakdown.l_v1);
        CHECK(s.gradients.size() == 5);
    };
    run_training(ds, c, hooks);
}

TEST_CASE("without cross-view terms the views train independently") {
    const Dataset ds = testing::random_dataset(30, 0, 3, 3, 15);
    TrainConfig c = with_ablation(tiny_config(), Ablation::CoReg);
    c.flags.use_cr = false;
    c.flags.use_unlabeled = false;
    TrainConfig c2 = c;
    c2.seed_view2 = 77;
    TrainResult a = run_training(ds, c);
    TrainResult b = run_training(ds, c2);
    CHECK(a.model.heads[0].weights == b.model.heads[0].weights);
    CHECK(a.model.encoders[0].layers[1].weight == b.model.encoders[0].layers[1].weight);
    CHECK_FALSE(a.model.heads[1].weights == b.model.heads[1].weights);
}

TEST_CASE("single-view training matches a hand-written supervised loop") {
    const Dataset ds = testing::random_dataset(24, 0, 3, 3, 16);
    TrainConfig c = with_ablation(tiny_config(), Ablation::Baseline);
    c.batch_size = 64;  // one full batch per pass
    c.epochs_pretrain = 5;
    c.lr_pretrain = 5e-3;

    TwoViewModel m = init_two_view(model_spec(c, 3, 3), c.seed_view1, c.seed_view2);
    testing::ReferenceNet net = testing::reference_from(m);
    testing::ReferenceAdam adam;
    adam.lr = c.lr_pretrain;
    const Matrix x = ds.all_features();
    const LabelMatrix y = ds.all_labels();

    std::size_t steps = 0;
    double worst = 0.0;
    TrainHooks hooks;
    hooks.on_step = [&](const StepInfo& s) {
        worst = std::max(worst, testing::reference_distance(net, s.model));
        const double ref_loss = testing::reference_step(net, adam, x, y);
        CHECK(s.breakdown.l_v1 == doctest::Approx(ref_loss).epsilon(1e-12));
        ++steps;
    };
    pretrain(m, ds, c, hooks);
    worst = std::max(worst, testing::reference_distance(net, m));
    CHECK(steps == 10);
    CHECK(worst < 1e-10);
}
