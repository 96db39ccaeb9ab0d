#include "coreg/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include "coreg/eval.hpp"
#include "coreg/relgraph.hpp"

#include "CLI11.hpp"

namespace coreg {

using nlohmann::json;

namespace {

const char* to_string(DirectionMode m) { return m == DirectionMode::Random ? "random" : "clustered"; }

DirectionMode direction_mode(const std::string& s) {
    if (s == "random") return DirectionMode::Random;
    if (s == "clustered") return DirectionMode::Clustered;
    fail(ErrorKind::Config, "synth.direction_mode must be random or clustered, got '" + s + "'");
}

const char* to_string(GcnInit i) {
    switch (i) {
        case GcnInit::Glorot: return "glorot";
        case GcnInit::Identity: return "identity";
        case GcnInit::SignSplit: return "sign_split";
    }
    return "?";
}

GcnInit gcn_init(const std::string& s) {
    if (s == "glorot") return GcnInit::Glorot;
    if (s == "identity") return GcnInit::Identity;
    if (s == "sign_split") return GcnInit::SignSplit;
    fail(ErrorKind::Config, "train.gcn_init must be glorot, identity or sign_split, got '" + s + "'");
}

Ablation preset(const std::string& s) {
    for (Ablation a : {Ablation::Baseline, Ablation::CoReg, Ablation::CoRegMultiview, Ablation::Full}) {
        if (s == to_string(a)) return a;
    }
    fail(ErrorKind::Config, "ablation.preset must be baseline, coreg, coreg_mv or full, got '" + s + "'");
}

json ablation_json(const RunConfig& c, bool resolved) {
    json j;
    j["preset"] = c.preset;
    for (const char* k : {"use_mv", "use_cr", "use_gcn", "single_view", "use_unlabeled"}) j[k] = nullptr;
    if (resolved) {
        const AblationFlags& f = c.train.flags;
        j["use_mv"] = f.use_mv;
        j["use_cr"] = f.use_cr;
        j["use_gcn"] = f.use_gcn;
        j["single_view"] = f.single_view;
        j["use_unlabeled"] = f.use_unlabeled;
    }
    return j;
}

json config_json(const RunConfig& c, bool resolved) {
    json j;
    j["out"] = c.out.string();
    j["data"] = {{"train_csv", c.train_csv}, {"test_csv", c.test_csv}};

    const SynthSpec& s = c.synth;
    j["synth"] = {{"latent_dim", s.latent_dim},   {"label_count", s.label_count},
                  {"feature_dim", s.feature_dim}, {"label_directions", s.label_directions},
                  {"direction_mode", to_string(s.direction_mode)},
                  {"max_angle", s.max_angle},     {"mixing_seed", s.mixing_seed},
                  {"noise_std", s.noise_std},     {"n_labeled", s.n_labeled},
                  {"n_unlabeled", s.n_unlabeled}, {"n_test", s.n_test},
                  {"seed", s.seed}};

    const TrainConfig& t = c.train;
    json tj = {{"lambda_mv", t.lambda_mv},
               {"lambda_cr", t.lambda_cr},
               {"lr_pretrain", t.lr_pretrain},
               {"lr_gcn", t.lr_gcn},
               {"lr_generators_finetune", t.lr_generators_finetune},
               {"epochs_pretrain", t.epochs_pretrain},
               {"epochs_finetune", t.epochs_finetune},
               {"batch_size", t.batch_size},
               {"adam_beta1", t.adam_beta1},
               {"adam_beta2", t.adam_beta2},
               {"adam_eps", t.adam_eps},
               {"seed_view1", t.seed_view1},
               {"seed_view2", t.seed_view2},
               {"seed_data", t.seed_data},
               {"seed_gcn", t.seed_gcn},
               {"unlabeled_cap", nullptr},
               {"hidden_layers", t.hidden_layers},
               {"feature_dim", t.feature_dim},
               {"leaky_slope", t.leaky_slope},
               {"gcn_init", to_string(t.gcn_init)},
               {"gcn_hidden", t.gcn_hidden}};
    if (t.unlabeled_cap) tj["unlabeled_cap"] = *t.unlabeled_cap;
    j["train"] = tj;
    j["ablation"] = ablation_json(c, resolved);

    json map = json::array();
    for (const auto& [a, b] : c.label_map) map.push_back(json::array({a, b}));
    j["eval"] = {{"checkpoint", c.checkpoint},
                 {"threshold", c.threshold},
                 {"label_map", map},
                 {"shift_offset", c.shift_offset},
                 {"shift_gain", c.shift_gain}};

    const GradSuiteConfig& g = c.gradcheck;
    j["gradcheck"] = {{"samples", g.samples}, {"labels", g.labels}, {"input_dim", g.input_dim},
                      {"hidden", g.hidden},   {"feature_dim", g.feature_dim}, {"eps", g.eps},
                      {"tol", g.tol},         {"seed", g.seed},         {"corrupt", g.corrupt}};
    return j;
}

// Objects recurse; everything else (scalars, arrays, nulls) is a leaf.
void merge(json& base, const json& user, const std::string& path) {
    if (!user.is_object()) fail(ErrorKind::Config, "config" + (path.empty() ? "" : " key '" + path + "'") + " must be an object");
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!base.contains(it.key())) fail(ErrorKind::Config, "unknown config key '" + key + "'");
        json& slot = base[it.key()];
        if (slot.is_object()) {
            merge(slot, it.value(), key);
        } else {
            slot = it.value();
        }
    }
}

void set_dotted(json& tree, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) fail(ErrorKind::Config, "--set expects key=value, got '" + assignment + "'");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    json* node = &tree;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!node->is_object() || !node->contains(part)) fail(ErrorKind::Config, "unknown config key '" + key + "'");
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    if (node->is_object()) fail(ErrorKind::Config, "config key '" + key + "' is a section, not a value");
    *node = std::move(value);
}

template <class T>
T get(const json& j, const char* section, const char* key) {
    try {
        return j.at(section).at(key).get<T>();
    } catch (const json::exception&) {
        fail(ErrorKind::Config, std::string("config key '") + section + "." + key + "' has the wrong type");
    }
}

std::optional<bool> flag(const json& j, const char* key) {
    const json& v = j.at("ablation").at(key);
    if (v.is_null()) return std::nullopt;
    if (!v.is_boolean()) fail(ErrorKind::Config, std::string("config key 'ablation.") + key + "' must be a boolean");
    return v.get<bool>();
}

RunConfig from_tree(const json& j) {
    RunConfig c;
    if (!j.at("out").is_string()) fail(ErrorKind::Config, "config key 'out' must be a string");
    c.out = j.at("out").get<std::string>();
    c.train_csv = get<std::string>(j, "data", "train_csv");
    c.test_csv = get<std::string>(j, "data", "test_csv");

    SynthSpec& s = c.synth;
    s.latent_dim = get<std::size_t>(j, "synth", "latent_dim");
    s.label_count = get<std::size_t>(j, "synth", "label_count");
    s.feature_dim = get<std::size_t>(j, "synth", "feature_dim");
    s.label_directions = get<std::vector<std::vector<double>>>(j, "synth", "label_directions");
    s.direction_mode = direction_mode(get<std::string>(j, "synth", "direction_mode"));
    s.max_angle = get<double>(j, "synth", "max_angle");
    s.mixing_seed = get<std::uint64_t>(j, "synth", "mixing_seed");
    s.noise_std = get<double>(j, "synth", "noise_std");
    s.n_labeled = get<std::size_t>(j, "synth", "n_labeled");
    s.n_unlabeled = get<std::size_t>(j, "synth", "n_unlabeled");
    s.n_test = get<std::size_t>(j, "synth", "n_test");
    s.seed = get<std::uint64_t>(j, "synth", "seed");

    TrainConfig& t = c.train;
    t.lambda_mv = get<double>(j, "train", "lambda_mv");
    t.lambda_cr = get<double>(j, "train", "lambda_cr");
    t.lr_pretrain = get<double>(j, "train", "lr_pretrain");
    t.lr_gcn = get<double>(j, "train", "lr_gcn");
    t.lr_generators_finetune = get<double>(j, "train", "lr_generators_finetune");
    t.epochs_pretrain = get<std::size_t>(j, "train", "epochs_pretrain");
    t.epochs_finetune = get<std::size_t>(j, "train", "epochs_finetune");
    t.batch_size = get<std::size_t>(j, "train", "batch_size");
    t.adam_beta1 = get<double>(j, "train", "adam_beta1");
    t.adam_beta2 = get<double>(j, "train", "adam_beta2");
    t.adam_eps = get<double>(j, "train", "adam_eps");
    t.seed_view1 = get<std::uint64_t>(j, "train", "seed_view1");
    t.seed_view2 = get<std::uint64_t>(j, "train", "seed_view2");
    t.seed_data = get<std::uint64_t>(j, "train", "seed_data");
    t.seed_gcn = get<std::uint64_t>(j, "train", "seed_gcn");
    const json& cap = j.at("train").at("unlabeled_cap");
    if (!cap.is_null()) t.unlabeled_cap = get<std::size_t>(j, "train", "unlabeled_cap");
    t.hidden_layers = get<std::vector<std::size_t>>(j, "train", "hidden_layers");
    t.feature_dim = get<std::size_t>(j, "train", "feature_dim");
    t.leaky_slope = get<double>(j, "train", "leaky_slope");
    t.gcn_init = gcn_init(get<std::string>(j, "train", "gcn_init"));
    t.gcn_hidden = get<std::size_t>(j, "train", "gcn_hidden");

    c.preset = get<std::string>(j, "ablation", "preset");
    t = with_ablation(t, preset(c.preset));
    if (auto v = flag(j, "use_mv")) t.flags.use_mv = *v;
    if (auto v = flag(j, "use_cr")) t.flags.use_cr = *v;
    if (auto v = flag(j, "use_gcn")) t.flags.use_gcn = *v;
    if (auto v = flag(j, "single_view")) t.flags.single_view = *v;
    if (auto v = flag(j, "use_unlabeled")) t.flags.use_unlabeled = *v;

    c.checkpoint = get<std::string>(j, "eval", "checkpoint");
    c.threshold = get<double>(j, "eval", "threshold");
    for (const auto& pair : get<std::vector<std::vector<std::string>>>(j, "eval", "label_map")) {
        if (pair.size() != 2) fail(ErrorKind::Config, "eval.label_map entries must be [training, test] pairs");
        c.label_map.emplace_back(pair[0], pair[1]);
    }
    c.shift_offset = get<double>(j, "eval", "shift_offset");
    c.shift_gain = get<double>(j, "eval", "shift_gain");

    GradSuiteConfig& g = c.gradcheck;
    g.samples = get<std::size_t>(j, "gradcheck", "samples");
    g.labels = get<std::size_t>(j, "gradcheck", "labels");
    g.input_dim = get<std::size_t>(j, "gradcheck", "input_dim");
    g.hidden = get<std::size_t>(j, "gradcheck", "hidden");
    g.feature_dim = get<std::size_t>(j, "gradcheck", "feature_dim");
    g.eps = get<double>(j, "gradcheck", "eps");
    g.tol = get<double>(j, "gradcheck", "tol");
    g.seed = get<std::uint64_t>(j, "gradcheck", "seed");
    g.corrupt = get<std::string>(j, "gradcheck", "corrupt");

    validate(c.synth);
    validate(c.train);
    if (!(c.threshold > 0.0 && c.threshold < 1.0)) fail(ErrorKind::Config, "eval.threshold must lie in (0, 1)");
    if (c.train_csv.empty() != c.test_csv.empty()) {
        fail(ErrorKind::Config, "data.train_csv and data.test_csv must be given together");
    }
    return c;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::Io, "cannot write " + path.string());
    f << text;
    if (!f) fail(ErrorKind::Io, "write failed for " + path.string());
}

void prepare_out(const RunConfig& config) {
    std::error_code ec;
    std::filesystem::create_directories(config.out, ec);
    if (ec) fail(ErrorKind::Io, "cannot create output directory " + config.out.string() + ": " + ec.message());
    std::filesystem::remove(config.out / "FAILED", ec);
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), f, v);
    return buf;
}

void print_matrix(std::ostream& log, const Matrix& m, const std::vector<std::string>& names) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-10s", "");
    log << buf;
    for (const auto& n : names) {
        std::snprintf(buf, sizeof(buf), " %8.8s", n.c_str());
        log << buf;
    }
    log << '\n';
    for (std::size_t i = 0; i < m.rows(); ++i) {
        std::snprintf(buf, sizeof(buf), "%-10.10s", names[i].c_str());
        log << buf;
        for (std::size_t j = 0; j < m.cols(); ++j) log << ' ' << fmt("%8.4f", m(i, j));
        log << '\n';
    }
}

}  // namespace

json default_config_json() { return config_json(RunConfig{}, false); }

json to_json(const RunConfig& config) { return config_json(config, true); }

RunConfig resolve_config(const json& user, const std::vector<std::string>& overrides) {
    json tree = default_config_json();
    if (!user.is_null()) merge(tree, user, "");
    for (const auto& o : overrides) set_dotted(tree, o);
    return from_tree(tree);
}

void apply_master_seed(json& tree, std::uint64_t seed) {
    tree["synth"]["seed"] = seed;
    tree["train"]["seed_view1"] = seed;
    tree["train"]["seed_view2"] = seed + 1;
    tree["train"]["seed_data"] = seed + 2;
    tree["train"]["seed_gcn"] = seed + 3;
    tree["gradcheck"]["seed"] = seed;
}

json load_config_file(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) fail(ErrorKind::Config, "cannot open config " + path.string());
    json j = json::parse(f, nullptr, false);
    if (j.is_discarded()) fail(ErrorKind::Config, "config " + path.string() + " is not valid JSON");
    return j;
}

int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config:
        case ErrorKind::State:
        case ErrorKind::Contract: return 1;
        case ErrorKind::Data:
        case ErrorKind::Dimension:
        case ErrorKind::Io: return 2;
        case ErrorKind::Numerical: return 3;
    }
    return 1;
}

SynthData load_data(const RunConfig& config) {
    if (config.train_csv.empty()) return generate_synthetic(config.synth);
    SynthData d{load_csv(config.train_csv), Dataset()};
    d.test = load_csv(config.test_csv, CsvSchema{d.train.feature_dim(), d.train.label_count()});
    return d;
}

void cmd_synth(const RunConfig& config, std::ostream& log) {
    prepare_out(config);
    const SynthData d = generate_synthetic(config.synth);
    save_csv(config.out / "train.csv", d.train);
    save_csv(config.out / "test.csv", d.test);

    const auto dirs = label_directions(config.synth);
    const auto& names = d.train.label_names();
    log << "wrote " << d.train.size() << " training (" << d.train.labeled_count() << " labeled) and "
        << d.test.size() << " test samples to " << config.out.string() << '\n';
    log << "label positive rates (labeled train):";
    const LabelMatrix labels = d.train.labeled_only().all_labels();
    for (std::size_t j = 0; j < labels.cols(); ++j) {
        std::size_t pos = 0;
        for (std::size_t i = 0; i < labels.rows(); ++i) pos += labels(i, j) == Label::Present;
        log << ' ' << names[j] << '=' << fmt("%.3f", static_cast<double>(pos) / static_cast<double>(labels.rows()));
    }
    log << "\npairwise agreement (observed / expected 1 - angle/pi):\n";
    for (std::size_t a = 0; a < dirs.size(); ++a) {
        for (std::size_t b = a + 1; b < dirs.size(); ++b) {
            double dot = 0.0;
            for (std::size_t k = 0; k < dirs[a].size(); ++k) dot += dirs[a][k] * dirs[b][k];
            const double expected = 1.0 - std::acos(std::clamp(dot, -1.0, 1.0)) / std::numbers::pi;
            log << "  " << names[a] << '-' << names[b] << ' ' << fmt("%.3f", label_agreement(d.train, a, b)) << " / "
                << fmt("%.3f", expected) << '\n';
        }
    }
}

void cmd_train(const RunConfig& config, std::ostream& log) {
    prepare_out(config);
    write_text(config.out / "config.json", to_json(config).dump(2) + "\n");
    try {
        const SynthData d = load_data(config);
        const Matrix adjacency = adjacency_from_dependency(dependency_matrix(d.train));
        export_correlation_map(config.out / "correlation_map.csv", adjacency, d.train.label_names());

        const TrainResult result = run_training(d.train, config.train);
        save_checkpoint(config.out / "checkpoint.txt", result.model);
        std::ostringstream train_log;
        write_train_log(train_log, result.log);
        write_text(config.out / "train_log.jsonl", train_log.str());

        const EvalOptions opts{config.train.flags.use_gcn, config.train.flags.single_view, config.threshold};
        const MetricsReport report = evaluate_model(result.model, d.test, opts);
        write_text(config.out / "metrics.json", to_json(report).dump(2) + "\n");
        std::ostringstream table;
        write_metrics_table(table, report);
        write_text(config.out / "metrics.txt", table.str());
        log << table.str();
    } catch (const Error& e) {
        write_text(config.out / "FAILED", std::string(to_string(e.kind())) + ": " + e.what() + "\n");
        throw;
    }
}

void cmd_eval(const RunConfig& config, std::ostream& log) {
    prepare_out(config);
    const std::filesystem::path ckpt =
        config.checkpoint.empty() ? config.out / "checkpoint.txt" : std::filesystem::path(config.checkpoint);
    const TwoViewModel model = load_checkpoint(ckpt);
    Dataset test = load_data(config).test;
    if (config.shift_offset != 0.0 || config.shift_gain != 1.0) {
        test = with_feature_shift(test, config.shift_offset, config.shift_gain);
    }
    if (test.feature_dim() != model.input_dim()) {
        fail(ErrorKind::Data, "eval: test features have dimension " + std::to_string(test.feature_dim()) +
                                  ", model expects " + std::to_string(model.input_dim()));
    }
    const EvalOptions opts{model.gcn_active, config.train.flags.single_view, config.threshold};
    const MetricsReport report = config.label_map.empty() ? evaluate_model(model, test, opts)
                                                          : cross_dataset_eval(model, test, config.label_map, opts);
    write_text(config.out / "eval_metrics.json", to_json(report).dump(2) + "\n");
    std::ostringstream table;
    write_metrics_table(table, report);
    write_text(config.out / "eval_metrics.txt", table.str());
    log << table.str();
}

void cmd_adjacency(const RunConfig& config, std::ostream& log) {
    prepare_out(config);
    const Dataset train = load_data(config).train;
    const Matrix dep = dependency_matrix(train);
    const Matrix adj = adjacency_from_dependency(dep);
    export_correlation_map(config.out / "correlation_map.csv", adj, train.label_names());
    log << "adjacency over " << train.labeled_count() << " labeled samples\n";
    print_matrix(log, adj, train.label_names());
}

void cmd_gradcheck(const RunConfig& config, std::ostream& log) {
    const auto results = run_gradient_suite(config.gradcheck);
    std::string failing;
    for (const auto& r : results) {
        char buf[200];
        std::snprintf(buf, sizeof(buf), "%-14s max_rel_error=%.3e coords=%zu worst=%s %s\n", r.term.c_str(),
                      r.report.max_rel_error, r.report.coords_checked, r.report.worst.c_str(),
                      r.report.passed ? "PASS" : "FAIL");
        log << buf;
        if (!r.report.passed) failing += (failing.empty() ? "" : ", ") + r.term;
    }
    if (!failing.empty()) fail(ErrorKind::Numerical, "gradient check failed for: " + failing);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Two-view multi-label co-regularization"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> sets;
    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--seed", seed, "Master seed for every random stream");
    app.add_option("--set", sets, "Override one key, e.g. train.lambda_cr=10 (repeatable)");
    for (const char* name : {"synth", "train", "eval", "adjacency", "gradcheck"}) app.add_subcommand(name);
    app.add_subcommand("config", "Print the effective configuration");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        json tree = default_config_json();
        if (!config_path.empty()) merge(tree, load_config_file(config_path), "");
        if (seed) apply_master_seed(tree, *seed);
        if (!out_dir.empty()) tree["out"] = out_dir;
        for (const auto& s : sets) set_dotted(tree, s);
        const RunConfig config = from_tree(tree);

        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "synth") cmd_synth(config, out);
        else if (cmd == "train") cmd_train(config, out);
        else if (cmd == "eval") cmd_eval(config, out);
        else if (cmd == "adjacency") cmd_adjacency(config, out);
        else if (cmd == "gradcheck") cmd_gradcheck(config, out);
        else out << to_json(config).dump(2) << '\n';
        return 0;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return exit_code(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace coreg
