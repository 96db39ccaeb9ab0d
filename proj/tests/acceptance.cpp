// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "coreg/cli.hpp"
#include "coreg/eval.hpp"
#include "coreg/gradsuite.hpp"
#include "coreg/losses.hpp"
#include "coreg/relgraph.hpp"
#include "coreg/train.hpp"
#include "reference_loop.hpp"
#include "support.hpp"

using namespace coreg;
namespace fs = std::filesystem;

namespace {

constexpr int kSeeds = 5;

struct Outcome {
    bool pass;
    std::string detail;
};

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), f, a);
    return buf;
}

std::string list(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt("%.4f", v[i]);
    return s + "]";
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SynthSpec seeded_spec(int s, bool clustered) {
    SynthSpec spec;
    spec.seed = 100 + s;
    spec.mixing_seed = 7 + s;
    if (clustered) {
        spec.direction_mode = DirectionMode::Clustered;
        spec.max_angle = std::numbers::pi / 6;
    }
    return spec;
}

TrainConfig seeded_config(int s, Ablation a) {
    TrainConfig c;
    c.seed_view1 = 10 * s + 1;
    c.seed_view2 = 10 * s + 2;
    c.seed_data = s;
    c.seed_gcn = 10 * s + 3;
    return with_ablation(c, a);
}

// ---------------------------------------------------------------------------

Outcome gradient_suite() {
    const auto t0 = std::chrono::steady_clock::now();
    std::string failing;
    double worst = 0.0;
    GradSuiteConfig minimal;
    minimal.samples = 3;
    minimal.labels = 1;
    minimal.input_dim = 2;
    minimal.hidden = 2;
    minimal.feature_dim = 2;
    for (const GradSuiteConfig& g : {GradSuiteConfig{}, minimal}) {
        for (const auto& r : run_gradient_suite(g)) {
            worst = std::max(worst, r.report.max_rel_error);
            if (!r.report.passed) failing += " " + r.term;
        }
    }
    const double t = seconds_since(t0);
    return {failing.empty() && t < 30.0,
            "max rel error " + fmt("%.2e", worst) + ", " + fmt("%.2f s", t) +
                (failing.empty() ? "" : ", failing:" + failing)};
}

Outcome loss_bounds() {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> size(1, 8);
    double cr_lo = 1.0, cr_hi = 0.0, cr_self = 0.0;
    for (int t = 0; t < 10000; ++t) {
        const std::size_t n = size(rng), c = size(rng);
        const Matrix p = testing::random_matrix(n, c, rng, 0.0, 1.0);
        const Matrix q = testing::random_matrix(n, c, rng, 0.0, 1.0);
        const double l = coreg_loss(p, q);
        cr_lo = std::min(cr_lo, l);
        cr_hi = std::max(cr_hi, l);
        cr_self = std::max(cr_self, std::abs(coreg_loss(p, p)));
    }
    double mv_abs = 0.0, mv_self = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t c = size(rng), d = size(rng) + 1;
        const Matrix a = testing::random_matrix(c, d, rng);
        const Matrix b = testing::random_matrix(c, d, rng);
        mv_abs = std::max(mv_abs, std::abs(multiview_loss(a, b)));
        mv_self = std::max(mv_self, std::abs(multiview_loss(a, a) - 1.0));
    }
    const bool ok = cr_lo >= 0.0 && cr_hi <= std::numbers::ln2 + 1e-9 && cr_self <= 1e-12 && mv_abs <= 1.0 &&
                    mv_self <= 1e-12;
    return {ok, "L_cr in [" + fmt("%.3g", cr_lo) + ", " + fmt("%.6f", cr_hi) + "], agree " + fmt("%.1e", cr_self) +
                    "; max |L_mv| " + fmt("%.6f", mv_abs) + ", self " + fmt("%.1e", mv_self)};
}

Outcome adjacency_oracle() {
    bool ok = true;
    const Matrix anti = adjacency_from_dependency(dependency_matrix(testing::labels_from({{1, 1}, {1, 0}, {0, 1}, {0, 0}})));
    ok = ok && anti(0, 1) == 0.0 && anti(1, 0) == 0.0;
    const Matrix same = adjacency_from_dependency(dependency_matrix(testing::labels_from({{1, 1}, {0, 0}, {1, 1}})));
    ok = ok && same(0, 1) == 1.0 && same(1, 0) == 1.0;
    const Matrix opp = adjacency_from_dependency(dependency_matrix(testing::labels_from({{1, 0}, {0, 1}, {0, 1}})));
    ok = ok && opp(0, 1) == 1.0 && opp(1, 0) == 1.0;

    // Diagonal over random labeled sets, including constant labels.
    std::mt19937_64 rng(99);
    std::bernoulli_distribution coin(0.5);
    std::uniform_int_distribution<std::size_t> size(1, 10);
    int sets = 0;
    for (int t = 0; t < 2000; ++t, ++sets) {
        const std::size_t n = size(rng), c = size(rng);
        LabelMatrix y(n, c);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j) y(i, j) = coin(rng) ? Label::Present : Label::Absent;
        if (t % 3 == 0)
            for (std::size_t i = 0; i < n; ++i) y(i, 0) = Label::Present;
        const Matrix a = adjacency_from_dependency(dependency_matrix(y));
        for (std::size_t j = 0; j < c; ++j) ok = ok && a(j, j) == 1.0;
    }
    return {ok, "anti-pattern 0, correlated 1, anti-correlated 1, unit diagonal on " + std::to_string(sets) + " sets"};
}

struct SeedRuns {
    // Default spec.
    double baseline = 0, coreg = 0, coreg_mv_ensemble = 0, coreg_mv_average = 0;
    double cos_coreg = 0, cos_coreg_mv = 0;
    // Clustered spec.
    double no_gcn = 0, gcn = 0, no_gcn_cross = 0, gcn_cross = 0;
};

std::vector<SeedRuns> run_trend_experiments(double& default_seconds, double& clustered_seconds) {
    std::vector<SeedRuns> runs(kSeeds);
    auto t0 = std::chrono::steady_clock::now();
    for (int s = 1; s <= kSeeds; ++s) {
        SeedRuns& r = runs[s - 1];
        const SynthData d = generate_synthetic(seeded_spec(s, false));
        const EvalOptions two_view{false, false, kDefaultThreshold};

        const TrainResult base = run_training(d.train, seeded_config(s, Ablation::Baseline));
        r.baseline = evaluate_model(base.model, d.test, EvalOptions{false, true, kDefaultThreshold}).ensemble.mean_f1;

        const TrainResult cr = run_training(d.train, seeded_config(s, Ablation::CoReg));
        r.coreg = evaluate_model(cr.model, d.test, two_view).ensemble.mean_f1;
        r.cos_coreg = mean_abs_cosine(cr.model, false);

        const TrainResult mv = run_training(d.train, seeded_config(s, Ablation::CoRegMultiview));
        const MetricsReport mvr = evaluate_model(mv.model, d.test, two_view);
        r.coreg_mv_ensemble = mvr.ensemble.mean_f1;
        r.coreg_mv_average = mvr.average.mean_f1;
        r.cos_coreg_mv = mean_abs_cosine(mv.model, false);
        std::printf("  seed %d default: baseline %.4f  coreg %.4f  coreg_mv %.4f/%.4f (ens/avg)  |cos| %.3f vs %.3f\n",
                    s, r.baseline, r.coreg, r.coreg_mv_ensemble, r.coreg_mv_average, r.cos_coreg_mv, r.cos_coreg);
        std::fflush(stdout);
    }
    default_seconds = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    for (int s = 1; s <= kSeeds; ++s) {
        SeedRuns& r = runs[s - 1];
        const SynthData d = generate_synthetic(seeded_spec(s, true));
        // Second domain: same labels and mixing, features offset.
        const Dataset shifted = with_feature_shift(d.test, 0.3, 1.0);
        LabelMap shared;
        for (std::size_t j = 0; j < 3; ++j) shared.emplace_back(d.train.label_names()[j], d.train.label_names()[j]);

        // Full shares the coreg_mv pretrain, so fine-tune a copy of it.
        const TrainConfig mv_cfg = seeded_config(s, Ablation::CoRegMultiview);
        const TrainResult mv = run_training(d.train, mv_cfg);
        TwoViewModel full = mv.model;
        finetune_gcn(full, d.train, seeded_config(s, Ablation::Full));

        const EvalOptions off{false, false, kDefaultThreshold};
        const EvalOptions on{true, false, kDefaultThreshold};
        r.no_gcn = evaluate_model(mv.model, d.test, off).ensemble.mean_f1;
        r.gcn = evaluate_model(full, d.test, on).ensemble.mean_f1;
        r.no_gcn_cross = cross_dataset_eval(mv.model, shifted, shared, off).ensemble.mean_f1;
        r.gcn_cross = cross_dataset_eval(full, shifted, shared, on).ensemble.mean_f1;
        std::printf("  seed %d clustered: no-gcn %.4f  gcn %.4f  shifted no-gcn %.4f  gcn %.4f\n", s, r.no_gcn, r.gcn,
                    r.no_gcn_cross, r.gcn_cross);
        std::fflush(stdout);
    }
    clustered_seconds = seconds_since(t0);
    return runs;
}

template <class F>
std::vector<double> pick(const std::vector<SeedRuns>& runs, F f) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(f(r));
    return v;
}

Outcome semi_supervised_trend(const std::vector<SeedRuns>& runs, double seconds) {
    const auto base = pick(runs, [](const SeedRuns& r) { return r.baseline; });
    const auto cr = pick(runs, [](const SeedRuns& r) { return r.coreg; });
    const double gap = median(cr) - median(base);
    return {gap >= 0.02 && seconds < 300.0, "median +L_cr " + fmt("%.4f", median(cr)) + " vs baseline " +
                                                fmt("%.4f", median(base)) + " (gap " + fmt("%+.4f", gap) +
                                                ", need >= 0.02); " + fmt("%.0f s", seconds)};
}

Outcome orthogonality(const std::vector<SeedRuns>& runs) {
    bool ok = true;
    for (const auto& r : runs) ok = ok && r.cos_coreg_mv < r.cos_coreg;
    return {ok, "mean |cos| lambda_mv=400 " + list(pick(runs, [](const SeedRuns& r) { return r.cos_coreg_mv; })) +
                    " vs lambda_mv=0 " + list(pick(runs, [](const SeedRuns& r) { return r.cos_coreg; }))};
}

Outcome ensemble_effect(const std::vector<SeedRuns>& runs) {
    const double ens = median(pick(runs, [](const SeedRuns& r) { return r.coreg_mv_ensemble; }));
    const double avg = median(pick(runs, [](const SeedRuns& r) { return r.coreg_mv_average; }));
    return {ens >= avg, "median ensemble " + fmt("%.4f", ens) + " vs single-view " + fmt("%.4f", avg)};
}

Outcome gcn_trend(const std::vector<SeedRuns>& runs) {
    const double on = median(pick(runs, [](const SeedRuns& r) { return r.gcn; }));
    const double off = median(pick(runs, [](const SeedRuns& r) { return r.no_gcn; }));
    const double on_x = median(pick(runs, [](const SeedRuns& r) { return r.gcn_cross; }));
    const double off_x = median(pick(runs, [](const SeedRuns& r) { return r.no_gcn_cross; }));
    return {on >= off && on_x >= off_x, "median GCN " + fmt("%.4f", on) + " vs " + fmt("%.4f", off) +
                                            "; shifted mapped-label " + fmt("%.4f", on_x) + " vs " +
                                            fmt("%.4f", off_x)};
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "coreg_acceptance_determinism";
    fs::remove_all(root);
    RunConfig c = resolve_config(nlohmann::json::object(),
                                 {"train.epochs_pretrain=10", "train.epochs_finetune=5", "synth.seed=3"});
    std::ostringstream sink;
    c.out = root / "a";
    cmd_train(c, sink);
    c.out = root / "b";
    cmd_train(c, sink);
    bool ok = true;
    for (const char* f : {"metrics.json", "metrics.txt", "checkpoint.txt", "train_log.jsonl"}) {
        const std::string a = slurp(root / "a" / f);
        ok = ok && !a.empty() && a == slurp(root / "b" / f);
    }
    fs::remove_all(root);
    return {ok, "two cmd_train runs compared on metrics, checkpoint and log"};
}

Outcome reduction() {
    const Dataset ds = testing::random_dataset(24, 0, 3, 3, 16);
    TrainConfig c = with_ablation(TrainConfig{}, Ablation::Baseline);
    c.hidden_layers = {5};
    c.feature_dim = 4;
    c.lambda_mv = 0.0;
    c.lambda_cr = 0.0;
    c.batch_size = 64;
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
        testing::reference_step(net, adam, x, y);
        ++steps;
    };
    pretrain(m, ds, c, hooks);
    worst = std::max(worst, testing::reference_distance(net, m));
    return {steps == 10 && worst < 1e-10, std::to_string(steps) + " steps, max parameter difference " + fmt("%.2e", worst)};
}

}  // namespace

int main() {
    int failures = 0;
    auto report = [&](int n, const char* name, const std::function<Outcome()>& f) {
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("criterion %d %s: %s (%s)\n", n, name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
    };

    report(1, "gradient suite", gradient_suite);
    report(2, "loss bounds", loss_bounds);
    report(3, "adjacency oracle", adjacency_oracle);

    std::printf("training trend runs (%d seeds)\n", kSeeds);
    double default_seconds = 0, clustered_seconds = 0;
    std::vector<SeedRuns> runs;
    try {
        runs = run_trend_experiments(default_seconds, clustered_seconds);
    } catch (const std::exception& e) {
        std::printf("  trend runs aborted: %s\n", e.what());
    }
    auto trend = [&](int n, const char* name, std::function<Outcome()> f) {
        if (runs.empty()) f = [] { return Outcome{false, "no runs"}; };
        report(n, name, f);
    };
    trend(4, "semi-supervised trend", [&] { return semi_supervised_trend(runs, default_seconds); });
    trend(5, "orthogonality", [&] { return orthogonality(runs); });
    trend(6, "ensemble effect", [&] { return ensemble_effect(runs); });
    trend(7, "gcn trend", [&] { return gcn_trend(runs); });

    report(8, "determinism", determinism);
    report(9, "reduction", reduction);

    std::printf("%d of 9 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
