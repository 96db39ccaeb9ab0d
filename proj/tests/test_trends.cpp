// Seeded trend checks on the default synthetic spec. These are directional
// expectations, not exact identities; a failure here is a measured outcome.

#include <chrono>

#include "doctest.h"

#include "coreg/eval.hpp"
#include "coreg/train.hpp"

using namespace coreg;

namespace {

struct DefaultRun {
    SynthData data;
    Dataset validation;
    TrainResult full;
    double seconds = 0.0;
};

const DefaultRun& default_run() {
    static const DefaultRun run = [] {
        DefaultRun r;
        r.data = generate_synthetic(SynthSpec{});
        SynthSpec val;
        val.seed = 1001;
        val.n_unlabeled = 0;
        val.n_labeled = 1;
        val.n_test = 500;
        r.validation = generate_synthetic(val).test;
        TrainHooks hooks;
        hooks.validation = &r.validation;
        const auto t0 = std::chrono::steady_clock::now();
        r.full = run_training(r.data.train, with_ablation(TrainConfig{}, Ablation::Full), hooks);
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return r;
    }();
    return run;
}

}  // namespace

TEST_CASE("full default run finishes well under five minutes") {
    const DefaultRun& r = default_run();
    MESSAGE("full default run: " << r.seconds << " s");
    CHECK(r.seconds < 300.0);
}

TEST_CASE("pretraining loss descends") {
    const auto& epochs = default_run().full.log.epochs;
    REQUIRE(epochs.size() == 80);
    CHECK(epochs[0].phase == TrainPhase::Pretrain);
    CHECK(epochs[59].phase == TrainPhase::Pretrain);
    CHECK(epochs[59].total < epochs[0].total);
}

TEST_CASE("gcn fine-tune keeps validation F1") {
    const auto& epochs = default_run().full.log.epochs;
    REQUIRE(epochs.size() == 80);
    const double pre = *epochs[59].val_f1_ensemble;
    const double post = *epochs.back().val_f1_ensemble;
    MESSAGE("validation ensemble F1 after pretrain " << pre << ", after fine-tune " << post);
    CHECK(post >= pre - 0.01);
}

TEST_CASE("full method beats the supervised baseline") {
    const DefaultRun& r = default_run();
    const TrainResult base = run_training(r.data.train, with_ablation(TrainConfig{}, Ablation::Baseline));
    const double b = evaluate_model(base.model, r.data.test, EvalOptions{false, true, kDefaultThreshold}).ensemble.mean_f1;
    const double f = evaluate_model(r.full.model, r.data.test, EvalOptions{true, false, kDefaultThreshold}).ensemble.mean_f1;
    MESSAGE("test ensemble F1 baseline " << b << ", full " << f);
    CHECK(f > b);
}
