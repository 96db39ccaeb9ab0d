#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "coreg/data.hpp"
#include "coreg/labels.hpp"
#include "coreg/matrix.hpp"
#include "coreg/model.hpp"

#include "json.hpp"

namespace coreg {

inline constexpr double kDefaultThreshold = 0.5;

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    /// 2TP / (2TP + FP + FN), 0 when the denominator is 0.
    double f1() const noexcept;
    bool operator==(const Confusion&) const = default;
};

/// Present where p >= threshold.
LabelMatrix threshold_probs(const Matrix& probs, double threshold = kDefaultThreshold);

/// Throws ErrorKind::Contract on Unknown entries, ErrorKind::Dimension on shape mismatch.
std::vector<Confusion> confusion_per_label(const LabelMatrix& predictions, const LabelMatrix& truth);
std::vector<double> f1_per_label(const LabelMatrix& predictions, const LabelMatrix& truth);
double mean(const std::vector<double>& values);

enum class FusionMode {
    /// Threshold each view separately; metrics are averaged afterwards.
    Average,
    /// Threshold the mean of the two views' probabilities.
    Ensemble,
};

struct Fusion {
    /// Average: {view1, view2}. Ensemble: {fused}.
    std::vector<LabelMatrix> predictions;
};

Fusion fuse_views(const Matrix& probs1, const Matrix& probs2, FusionMode mode, double threshold = kDefaultThreshold);

struct VariantMetrics {
    std::vector<double> f1;
    double mean_f1 = 0.0;
    std::vector<Confusion> confusion;
};

struct MetricsReport {
    std::vector<std::string> label_names;
    double threshold = kDefaultThreshold;
    std::size_t samples = 0;
    VariantMetrics view1;
    VariantMetrics view2;
    /// Per-label mean of the two views' F1; mean_f1 is the mean of the two views' mean F1.
    VariantMetrics average;
    VariantMetrics ensemble;
    /// Training labels left out by a cross-dataset label map.
    std::vector<std::string> skipped_labels;
};

MetricsReport evaluate_probs(const Matrix& probs1, const Matrix& probs2, const LabelMatrix& truth,
                             std::vector<std::string> label_names, double threshold = kDefaultThreshold);

struct EvalOptions {
    bool use_gcn = false;
    /// Reuse view 1 for both views.
    bool single_view = false;
    double threshold = kDefaultThreshold;
};

/// Both views' probabilities on every sample of `dataset`.
std::pair<Matrix, Matrix> predict_dataset(const TwoViewModel& model, const Dataset& dataset,
                                          const EvalOptions& options);

/// Requires a fully labeled dataset (ErrorKind::Contract otherwise).
MetricsReport evaluate_model(const TwoViewModel& model, const Dataset& dataset, const EvalOptions& options);

/// (training label name, test label name) pairs.
using LabelMap = std::vector<std::pair<std::string, std::string>>;

/// Evaluates only mapped labels; unmapped training labels are listed as skipped.
/// Throws ErrorKind::Config for an empty or unresolvable mapping.
MetricsReport cross_dataset_eval(const TwoViewModel& model, const Dataset& test, const LabelMap& label_map,
                                 const EvalOptions& options);

/// Pairs every training label with the same-named test label.
LabelMap identity_label_map(const std::vector<std::string>& names);

nlohmann::json to_json(const MetricsReport& report);
void write_metrics_table(std::ostream& out, const MetricsReport& report);

}  // namespace coreg
