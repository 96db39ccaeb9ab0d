#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "coreg/cli.hpp"
#include "support.hpp"

using namespace coreg;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun cli(std::vector<std::string> args) {
    args.insert(args.begin(), "coreg_cli");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("coreg_cli_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

const std::vector<std::string> kTiny = {
    "--set", "synth.n_labeled=40",          "--set", "synth.n_unlabeled=40",  "--set", "synth.n_test=60",
    "--set", "synth.label_count=3",         "--set", "train.epochs_pretrain=2", "--set", "train.epochs_finetune=1",
    "--set", "train.hidden_layers=[6]",     "--set", "train.feature_dim=3",   "--set", "train.batch_size=20",
};

std::vector<std::string> with_tiny(std::vector<std::string> args) {
    args.insert(args.end(), kTiny.begin(), kTiny.end());
    return args;
}

}  // namespace

TEST_CASE("resolve config layers defaults, file and overrides") {
    const RunConfig d = resolve_config(nlohmann::json::object());
    CHECK(d.train.lambda_mv == 400.0);
    CHECK(d.train.flags.use_gcn);
    CHECK(d.preset == "full");

    const RunConfig c = resolve_config({{"train", {{"lambda_cr", 5}}}, {"ablation", {{"preset", "baseline"}}}},
                                       {"train.lambda_cr=7", "out=elsewhere", "synth.direction_mode=clustered"});
    CHECK(c.train.lambda_cr == 7.0);
    CHECK(c.out == fs::path("elsewhere"));
    CHECK(c.synth.direction_mode == DirectionMode::Clustered);
    CHECK(c.train.flags.single_view);
    CHECK_FALSE(c.train.flags.use_unlabeled);

    const RunConfig explicit_flag = resolve_config({{"ablation", {{"preset", "coreg_mv"}, {"use_gcn", true}}}});
    CHECK(explicit_flag.train.flags.use_gcn);
    CHECK(explicit_flag.train.flags.use_mv);
}

TEST_CASE("config errors") {
    auto kind = [](const nlohmann::json& j, std::vector<std::string> sets = {}) {
        return testing::error_kind_of([&] { resolve_config(j, sets); });
    };
    CHECK(kind({{"trian", {{"lambda_cr", 1}}}}) == ErrorKind::Config);
    CHECK(kind({{"train", {{"lambda_crr", 1}}}}) == ErrorKind::Config);
    CHECK(kind({{"train", {{"lambda_cr", "ten"}}}}) == ErrorKind::Config);
    CHECK(kind({{"train", 3}}) == ErrorKind::Config);
    CHECK(kind({}, {"train.epochs_pretrain"}) == ErrorKind::Config);
    CHECK(kind({}, {"train.nope=1"}) == ErrorKind::Config);
    CHECK(kind({}, {"train.seed_view2=1"}) == ErrorKind::Config);
    CHECK(kind({}, {"ablation.preset=everything"}) == ErrorKind::Config);
    CHECK(kind({}, {"train.gcn_init=zeros"}) == ErrorKind::Config);
    CHECK(kind({}, {"data.train_csv=a.csv"}) == ErrorKind::Config);
}

TEST_CASE("master seed fans out") {
    nlohmann::json tree = default_config_json();
    apply_master_seed(tree, 10);
    const RunConfig c = resolve_config(tree);
    CHECK(c.synth.seed == 10);
    CHECK(c.train.seed_view1 == 10);
    CHECK(c.train.seed_view2 == 11);
    CHECK(c.train.seed_data == 12);
    CHECK(c.train.seed_gcn == 13);
}

TEST_CASE("exit code mapping") {
    CHECK(exit_code(ErrorKind::Config) == 1);
    CHECK(exit_code(ErrorKind::State) == 1);
    CHECK(exit_code(ErrorKind::Data) == 2);
    CHECK(exit_code(ErrorKind::Dimension) == 2);
    CHECK(exit_code(ErrorKind::Numerical) == 3);
}

TEST_CASE("usage errors exit 1") {
    CHECK(cli({}).code == 1);
    CHECK(cli({"frobnicate"}).code == 1);
    CHECK(cli({"train", "--set", "train.unknown=1"}).code == 1);
    CHECK(cli({"train", "--config", "/nonexistent/config.json"}).code != 0);
    const CliRun r = cli({"synth", "--out", scratch("zero").string(), "--set", "synth.n_labeled=0"});
    CHECK(r.code == 1);
    CHECK(r.err.find("n_labeled") != std::string::npos);
}

TEST_CASE("gradcheck command") {
    const CliRun ok = cli({"gradcheck"});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("combined") != std::string::npos);
    CHECK(ok.out.find("FAIL") == std::string::npos);

    const CliRun bad = cli({"gradcheck", "--set", "gradcheck.corrupt=coreg"});
    CHECK(bad.code == 3);
    CHECK(bad.err.find("coreg") != std::string::npos);
}

TEST_CASE("config command echoes a re-runnable config") {
    const CliRun r = cli({"config", "--seed", "5", "--set", "ablation.preset=coreg"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["train"]["seed_view2"] == 6);
    CHECK(j["ablation"]["use_mv"] == false);

    const fs::path dir = scratch("echo");
    fs::create_directories(dir);
    std::ofstream(dir / "c.json") << r.out;
    const CliRun again = cli({"config", "--config", (dir / "c.json").string()});
    REQUIRE(again.code == 0);
    CHECK(nlohmann::json::parse(again.out) == j);
}

TEST_CASE("synth, train and eval round trip") {
    const fs::path data = scratch("data");
    REQUIRE(cli(with_tiny({"synth", "--out", data.string()})).code == 0);
    CHECK(fs::exists(data / "train.csv"));
    CHECK(fs::exists(data / "test.csv"));

    const std::vector<std::string> csv = {"--set", "data.train_csv=" + (data / "train.csv").string(), "--set",
                                          "data.test_csv=" + (data / "test.csv").string()};
    auto train_args = [&](const fs::path& out) {
        std::vector<std::string> a = with_tiny({"train", "--out", out.string()});
        a.insert(a.end(), csv.begin(), csv.end());
        return a;
    };
    const fs::path run1 = scratch("run1");
    const fs::path run2 = scratch("run2");
    const CliRun t1 = cli(train_args(run1));
    REQUIRE_MESSAGE(t1.code == 0, t1.err);
    REQUIRE(cli(train_args(run2)).code == 0);
    for (const char* f : {"config.json", "checkpoint.txt", "train_log.jsonl", "metrics.json", "correlation_map.csv"}) {
        CHECK_MESSAGE(fs::exists(run1 / f), f);
    }
    CHECK(slurp(run1 / "metrics.json") == slurp(run2 / "metrics.json"));
    CHECK(slurp(run1 / "checkpoint.txt") == slurp(run2 / "checkpoint.txt"));

    std::vector<std::string> eval = {"eval", "--out", run1.string()};
    eval.insert(eval.end(), csv.begin(), csv.end());
    const CliRun e = cli(eval);
    REQUIRE_MESSAGE(e.code == 0, e.err);
    const auto train_metrics = nlohmann::json::parse(slurp(run1 / "metrics.json"));
    const auto eval_metrics = nlohmann::json::parse(slurp(run1 / "eval_metrics.json"));
    CHECK(train_metrics["ensemble"]["mean_f1"] == eval_metrics["ensemble"]["mean_f1"]);

    // The echoed config reproduces the run.
    const fs::path run3 = scratch("run3");
    REQUIRE(cli({"train", "--config", (run1 / "config.json").string(), "--out", run3.string()}).code == 0);
    CHECK(slurp(run1 / "metrics.json") == slurp(run3 / "metrics.json"));

    std::vector<std::string> mapped = eval;
    mapped.insert(mapped.end(), {"--set", "eval.label_map=[[\"L0\",\"nope\"]]"});
    CHECK(cli(mapped).code == 1);
}

TEST_CASE("data errors exit 2 and leave a FAILED marker") {
    const fs::path dir = scratch("bad");
    fs::create_directories(dir);
    std::ofstream(dir / "bad.csv") << "id,f0,label:a\ns0,notanumber,1\n";
    const CliRun r = cli({"train", "--out", (dir / "run").string(), "--set",
                          "data.train_csv=" + (dir / "bad.csv").string(), "--set",
                          "data.test_csv=" + (dir / "bad.csv").string()});
    CHECK(r.code == 2);
    CHECK(fs::exists(dir / "run" / "FAILED"));
    CHECK(fs::exists(dir / "run" / "config.json"));

    CHECK(cli({"adjacency", "--out", (dir / "adj").string(), "--set", "data.train_csv=" + (dir / "missing.csv").string(),
               "--set", "data.test_csv=" + (dir / "missing.csv").string()})
              .code == 2);
}
