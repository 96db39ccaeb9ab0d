#include "coreg/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>

#include "coreg/error.hpp"

namespace coreg {

double Confusion::f1() const noexcept {
    const std::size_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

LabelMatrix threshold_probs(const Matrix& probs, double threshold) {
    LabelMatrix out(probs.rows(), probs.cols());
    for (std::size_t i = 0; i < probs.rows(); ++i)
        for (std::size_t j = 0; j < probs.cols(); ++j)
            out(i, j) = probs(i, j) >= threshold ? Label::Present : Label::Absent;
    return out;
}

std::vector<Confusion> confusion_per_label(const LabelMatrix& predictions, const LabelMatrix& truth) {
    if (predictions.rows() != truth.rows() || predictions.cols() != truth.cols()) {
        fail(ErrorKind::Dimension, "f1: predictions and truth differ in shape");
    }
    std::vector<Confusion> out(truth.cols());
    for (std::size_t i = 0; i < truth.rows(); ++i) {
        for (std::size_t j = 0; j < truth.cols(); ++j) {
            const Label t = truth(i, j);
            const Label p = predictions(i, j);
            if (t == Label::Unknown || p == Label::Unknown) {
                fail(ErrorKind::Contract, "f1: unknown entry at row " + std::to_string(i));
            }
            Confusion& c = out[j];
            if (p == Label::Present) {
                (t == Label::Present ? c.tp : c.fp) += 1;
            } else {
                (t == Label::Present ? c.fn : c.tn) += 1;
            }
        }
    }
    return out;
}

std::vector<double> f1_per_label(const LabelMatrix& predictions, const LabelMatrix& truth) {
    const auto conf = confusion_per_label(predictions, truth);
    std::vector<double> out;
    out.reserve(conf.size());
    for (const auto& c : conf) out.push_back(c.f1());
    return out;
}

double mean(const std::vector<double>& values) {
    if (values.empty()) return 0.0;
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
}

Fusion fuse_views(const Matrix& probs1, const Matrix& probs2, FusionMode mode, double threshold) {
    if (!probs1.same_shape(probs2)) {
        fail(ErrorKind::Dimension, "fuse_views: " + probs1.shape() + " vs " + probs2.shape());
    }
    if (!(threshold > 0.0 && threshold < 1.0)) fail(ErrorKind::Config, "fuse_views: threshold must lie in (0, 1)");
    Fusion f;
    if (mode == FusionMode::Average) {
        f.predictions.push_back(threshold_probs(probs1, threshold));
        f.predictions.push_back(threshold_probs(probs2, threshold));
    } else {
        f.predictions.push_back(threshold_probs(scale(add(probs1, probs2), 0.5), threshold));
    }
    return f;
}

namespace {

VariantMetrics variant(const LabelMatrix& predictions, const LabelMatrix& truth) {
    VariantMetrics m;
    m.confusion = confusion_per_label(predictions, truth);
    for (const auto& c : m.confusion) m.f1.push_back(c.f1());
    m.mean_f1 = mean(m.f1);
    return m;
}

void require_labeled(const Dataset& dataset) {
    for (const Sample& s : dataset.samples()) {
        if (!s.labeled()) fail(ErrorKind::Contract, "evaluation set contains unlabeled sample '" + s.id + "'");
    }
}

}  // namespace

MetricsReport evaluate_probs(const Matrix& probs1, const Matrix& probs2, const LabelMatrix& truth,
                             std::vector<std::string> label_names, double threshold) {
    if (probs1.rows() != truth.rows() || probs1.cols() != truth.cols()) {
        fail(ErrorKind::Dimension, "evaluate: probabilities and truth differ in shape");
    }
    MetricsReport r;
    r.label_names = std::move(label_names);
    r.threshold = threshold;
    r.samples = truth.rows();

    const Fusion avg = fuse_views(probs1, probs2, FusionMode::Average, threshold);
    r.view1 = variant(avg.predictions[0], truth);
    r.view2 = variant(avg.predictions[1], truth);
    for (std::size_t j = 0; j < r.view1.f1.size(); ++j) r.average.f1.push_back(0.5 * (r.view1.f1[j] + r.view2.f1[j]));
    r.average.mean_f1 = 0.5 * (r.view1.mean_f1 + r.view2.mean_f1);

    const Fusion ens = fuse_views(probs1, probs2, FusionMode::Ensemble, threshold);
    r.ensemble = variant(ens.predictions[0], truth);
    return r;
}

std::pair<Matrix, Matrix> predict_dataset(const TwoViewModel& model, const Dataset& dataset,
                                          const EvalOptions& options) {
    const Matrix x = dataset.all_features();
    Matrix p1 = predict_from_inputs(model, View::First, x, options.use_gcn);
    Matrix p2 = options.single_view ? p1 : predict_from_inputs(model, View::Second, x, options.use_gcn);
    return {std::move(p1), std::move(p2)};
}

MetricsReport evaluate_model(const TwoViewModel& model, const Dataset& dataset, const EvalOptions& options) {
    require_labeled(dataset);
    if (dataset.label_count() != model.label_count()) {
        fail(ErrorKind::Data, "evaluate: dataset has " + std::to_string(dataset.label_count()) +
                                  " labels, model has " + std::to_string(model.label_count()));
    }
    auto [p1, p2] = predict_dataset(model, dataset, options);
    return evaluate_probs(p1, p2, dataset.all_labels(), dataset.label_names(), options.threshold);
}

MetricsReport cross_dataset_eval(const TwoViewModel& model, const Dataset& test, const LabelMap& label_map,
                                 const EvalOptions& options) {
    if (label_map.empty()) fail(ErrorKind::Config, "cross_dataset_eval: empty label mapping");
    require_labeled(test);
    auto find = [](const std::vector<std::string>& names, const std::string& n, const char* side) {
        auto it = std::find(names.begin(), names.end(), n);
        if (it == names.end()) fail(ErrorKind::Config, std::string("cross_dataset_eval: unknown ") + side + " label '" + n + "'");
        return static_cast<std::size_t>(it - names.begin());
    };

    std::vector<std::size_t> train_cols;
    std::vector<std::size_t> test_cols;
    std::vector<std::string> names;
    for (const auto& [train_name, test_name] : label_map) {
        const std::size_t tc = find(model.label_names, train_name, "training");
        if (std::find(train_cols.begin(), train_cols.end(), tc) != train_cols.end()) {
            fail(ErrorKind::Config, "cross_dataset_eval: training label '" + train_name + "' mapped twice");
        }
        train_cols.push_back(tc);
        test_cols.push_back(find(test.label_names(), test_name, "test"));
        names.push_back(train_name);
    }

    auto [p1, p2] = predict_dataset(model, test, options);
    const LabelMatrix all_truth = test.all_labels();
    Matrix q1(p1.rows(), train_cols.size());
    Matrix q2(p1.rows(), train_cols.size());
    LabelMatrix truth(p1.rows(), train_cols.size());
    for (std::size_t i = 0; i < p1.rows(); ++i) {
        for (std::size_t k = 0; k < train_cols.size(); ++k) {
            q1(i, k) = p1(i, train_cols[k]);
            q2(i, k) = p2(i, train_cols[k]);
            truth(i, k) = all_truth(i, test_cols[k]);
        }
    }
    MetricsReport r = evaluate_probs(q1, q2, truth, names, options.threshold);
    for (std::size_t j = 0; j < model.label_names.size(); ++j) {
        if (std::find(train_cols.begin(), train_cols.end(), j) == train_cols.end()) {
            r.skipped_labels.push_back(model.label_names[j]);
        }
    }
    return r;
}

LabelMap identity_label_map(const std::vector<std::string>& names) {
    LabelMap m;
    for (const auto& n : names) m.emplace_back(n, n);
    return m;
}

namespace {

nlohmann::json variant_json(const VariantMetrics& v, bool with_confusion) {
    nlohmann::json j;
    j["f1"] = v.f1;
    j["mean_f1"] = v.mean_f1;
    if (with_confusion) {
        nlohmann::json conf = nlohmann::json::array();
        for (const auto& c : v.confusion) conf.push_back({{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}});
        j["confusion"] = conf;
    }
    return j;
}

}  // namespace

nlohmann::json to_json(const MetricsReport& report) {
    nlohmann::json j;
    j["labels"] = report.label_names;
    j["threshold"] = report.threshold;
    j["samples"] = report.samples;
    j["view1"] = variant_json(report.view1, true);
    j["view2"] = variant_json(report.view2, true);
    j["average"] = variant_json(report.average, false);
    j["ensemble"] = variant_json(report.ensemble, true);
    j["skipped_labels"] = report.skipped_labels;
    return j;
}

void write_metrics_table(std::ostream& out, const MetricsReport& report) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-12s %8s %8s %8s %8s\n", "label", "view1", "view2", "average", "ensemble");
    out << buf;
    for (std::size_t j = 0; j < report.label_names.size(); ++j) {
        std::snprintf(buf, sizeof(buf), "%-12s %8.4f %8.4f %8.4f %8.4f\n", report.label_names[j].c_str(),
                      report.view1.f1[j], report.view2.f1[j], report.average.f1[j], report.ensemble.f1[j]);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "%-12s %8.4f %8.4f %8.4f %8.4f\n", "avg", report.view1.mean_f1,
                  report.view2.mean_f1, report.average.mean_f1, report.ensemble.mean_f1);
    out << buf;
    if (!report.skipped_labels.empty()) {
        out << "skipped:";
        for (const auto& s : report.skipped_labels) out << ' ' << s;
        out << '\n';
    }
}

}  // namespace coreg
