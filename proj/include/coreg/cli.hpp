#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "coreg/data.hpp"
#include "coreg/error.hpp"
#include "coreg/eval.hpp"
#include "coreg/gradsuite.hpp"
#include "coreg/train.hpp"

#include "json.hpp"

namespace coreg {

/// Everything a command reads. The JSON form nests these as "data", "synth",
/// "train", "ablation", "eval" and "gradcheck" plus a top-level "out".
struct RunConfig {
    std::filesystem::path out = "run";
    /// Both empty: generate from `synth`.
    std::string train_csv;
    std::string test_csv;
    SynthSpec synth;
    TrainConfig train;
    /// One of baseline, coreg, coreg_mv, full. Explicit flags override it.
    std::string preset = "full";

    std::string checkpoint;
    double threshold = 0.5;
    LabelMap label_map;
    double shift_offset = 0.0;
    double shift_gain = 1.0;

    GradSuiteConfig gradcheck;
};

/// Fully defaulted configuration tree; also the schema for unknown-key checks.
nlohmann::json default_config_json();
nlohmann::json to_json(const RunConfig& config);

/// Layers `user` over the defaults, then dotted `key=value` overrides (values
/// parsed as JSON, falling back to a plain string). Unknown keys, bad types and
/// invalid values throw ErrorKind::Config.
RunConfig resolve_config(const nlohmann::json& user, const std::vector<std::string>& overrides = {});
/// Seeds every random stream from one integer: synth.seed = n, views n and
/// n + 1, batches n + 2, GCN n + 3, gradient suite n.
void apply_master_seed(nlohmann::json& tree, std::uint64_t seed);
nlohmann::json load_config_file(const std::filesystem::path& path);

/// 0 ok, 1 usage/config, 2 data, 3 numerical.
int exit_code(ErrorKind kind);

/// Train and test sets from CSV or the synthetic generator.
SynthData load_data(const RunConfig& config);

// Commands write their artifacts under config.out and report on `log`.
void cmd_synth(const RunConfig& config, std::ostream& log);
void cmd_train(const RunConfig& config, std::ostream& log);
void cmd_eval(const RunConfig& config, std::ostream& log);
void cmd_adjacency(const RunConfig& config, std::ostream& log);
/// Throws ErrorKind::Numerical listing the failing terms.
void cmd_gradcheck(const RunConfig& config, std::ostream& log);

/// Full command line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace coreg
