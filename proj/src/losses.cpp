#include "coreg/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "coreg/error.hpp"

namespace coreg {

namespace {

constexpr double kLn2 = 0.69314718055994530942;

bool clamped(double p) noexcept { return p < kProbClamp || p > 1.0 - kProbClamp; }

// dH/dp = ln((1 - p) / p)
double entropy_derivative(double p) noexcept { return std::log1p(-p) - std::log(p); }

void require_same(const char* op, const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        fail(ErrorKind::Dimension, std::string(op) + ": shapes " + a.shape() + " and " + b.shape() + " differ");
    }
}

void check_bce_inputs(const Matrix& probs, const LabelMatrix& labels, const BalanceWeights& weights) {
    if (probs.rows() != labels.rows() || probs.cols() != labels.cols()) {
        fail(ErrorKind::Dimension, "selective_bce: probabilities " + probs.shape() + " vs labels " +
                                       std::to_string(labels.rows()) + "x" + std::to_string(labels.cols()));
    }
    if (weights.positive.size() != probs.cols() || weights.negative.size() != probs.cols()) {
        fail(ErrorKind::Dimension, "selective_bce: need one balancing weight pair per label");
    }
    for (std::size_t i = 0; i < labels.rows(); ++i) {
        if (!labels.row_known(i)) {
            fail(ErrorKind::Contract, "selective_bce: row " + std::to_string(i) + " has unknown labels");
        }
    }
}

double row_norm(const Matrix& m, std::size_t r) {
    double s = 0.0;
    for (double v : m.row(r)) s += v * v;
    return std::sqrt(s);
}

void check_heads(const Matrix& h1, const Matrix& h2) {
    require_same("multiview_loss", h1, h2);
    if (h1.rows() == 0) fail(ErrorKind::Dimension, "multiview_loss: heads have no rows");
    for (std::size_t j = 0; j < h1.rows(); ++j) {
        if (row_norm(h1, j) == 0.0 || row_norm(h2, j) == 0.0) {
            fail(ErrorKind::Numerical, "multiview_loss: classifier row for label " + std::to_string(j) +
                                           " has zero norm");
        }
    }
}

}  // namespace

double clamp_probability(double p) noexcept {
    return p < kProbClamp ? kProbClamp : (p > 1.0 - kProbClamp ? 1.0 - kProbClamp : p);
}

double bernoulli_entropy(double p) noexcept {
    p = clamp_probability(p);
    return -(p * std::log(p) + (1.0 - p) * std::log1p(-p));
}

BalanceWeights BalanceWeights::uniform(std::size_t label_count) {
    return BalanceWeights{std::vector<double>(label_count, 1.0), std::vector<double>(label_count, 1.0)};
}

std::pair<double, double> balancing_weights(const LabelMatrix& labels, std::size_t label) {
    if (label >= labels.cols()) fail(ErrorKind::Contract, "balancing_weights: label index out of range");
    std::size_t pos = 0;
    std::size_t neg = 0;
    for (std::size_t i = 0; i < labels.rows(); ++i) {
        if (labels(i, label) == Label::Present) ++pos;
        if (labels(i, label) == Label::Absent) ++neg;
    }
    if (pos + neg == 0) fail(ErrorKind::Contract, "balancing_weights: batch has no labeled samples");
    if (pos == 0 || neg == 0) return {1.0, 1.0};
    const double total = static_cast<double>(pos + neg);
    return {total / (2.0 * static_cast<double>(pos)), total / (2.0 * static_cast<double>(neg))};
}

BalanceWeights balancing_weights(const LabelMatrix& labels) {
    BalanceWeights w;
    for (std::size_t j = 0; j < labels.cols(); ++j) {
        const auto [p, n] = balancing_weights(labels, j);
        w.positive.push_back(p);
        w.negative.push_back(n);
    }
    return w;
}

double selective_bce(const Matrix& probs, const LabelMatrix& labels, const BalanceWeights& weights) {
    check_bce_inputs(probs, labels, weights);
    if (probs.rows() == 0 || probs.cols() == 0) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        for (std::size_t j = 0; j < probs.cols(); ++j) {
            const double q = clamp_probability(probs(i, j));
            total += labels(i, j) == Label::Present ? -weights.positive[j] * std::log(q)
                                                    : -weights.negative[j] * std::log1p(-q);
        }
    }
    return total / static_cast<double>(probs.rows() * probs.cols());
}

Matrix selective_bce_gradient(const Matrix& probs, const LabelMatrix& labels, const BalanceWeights& weights) {
    check_bce_inputs(probs, labels, weights);
    Matrix g(probs.rows(), probs.cols());
    if (probs.rows() == 0 || probs.cols() == 0) return g;
    const double norm = 1.0 / static_cast<double>(probs.rows() * probs.cols());
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        for (std::size_t j = 0; j < probs.cols(); ++j) {
            const double q = probs(i, j);
            if (clamped(q)) continue;
            g(i, j) = labels(i, j) == Label::Present ? -norm * weights.positive[j] / q
                                                     : norm * weights.negative[j] / (1.0 - q);
        }
    }
    return g;
}

double coreg_loss(const Matrix& probs1, const Matrix& probs2) {
    require_same("coreg_loss", probs1, probs2);
    if (probs1.size() == 0) return 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k < probs1.size(); ++k) {
        const double a = clamp_probability(probs1.data()[k]);
        const double b = clamp_probability(probs2.data()[k]);
        const double js = bernoulli_entropy(0.5 * (a + b)) - 0.5 * (bernoulli_entropy(a) + bernoulli_entropy(b));
        // Rounding can push identical inputs a hair below zero.
        total += std::min(std::max(js, 0.0), kLn2);
    }
    return total / static_cast<double>(probs1.size());
}

std::pair<Matrix, Matrix> coreg_loss_gradient(const Matrix& probs1, const Matrix& probs2) {
    require_same("coreg_loss", probs1, probs2);
    Matrix g1(probs1.rows(), probs1.cols());
    Matrix g2(probs1.rows(), probs1.cols());
    if (probs1.size() == 0) return {g1, g2};
    const double norm = 1.0 / static_cast<double>(probs1.size());
    for (std::size_t k = 0; k < probs1.size(); ++k) {
        const double a = probs1.data()[k];
        const double b = probs2.data()[k];
        const double ac = clamp_probability(a);
        const double bc = clamp_probability(b);
        const double mid = entropy_derivative(0.5 * (ac + bc));
        if (!clamped(a)) g1.data()[k] = 0.5 * norm * (mid - entropy_derivative(ac));
        if (!clamped(b)) g2.data()[k] = 0.5 * norm * (mid - entropy_derivative(bc));
    }
    return {g1, g2};
}

double multiview_loss(const Matrix& head1, const Matrix& head2) {
    check_heads(head1, head2);
    double total = 0.0;
    for (std::size_t j = 0; j < head1.rows(); ++j) {
        double d = 0.0;
        for (std::size_t k = 0; k < head1.cols(); ++k) d += head1(j, k) * head2(j, k);
        total += d / (row_norm(head1, j) * row_norm(head2, j));
    }
    return total / static_cast<double>(head1.rows());
}

std::pair<Matrix, Matrix> multiview_loss_gradient(const Matrix& head1, const Matrix& head2) {
    check_heads(head1, head2);
    Matrix g1(head1.rows(), head1.cols());
    Matrix g2(head1.rows(), head1.cols());
    const double inv_c = 1.0 / static_cast<double>(head1.rows());
    for (std::size_t j = 0; j < head1.rows(); ++j) {
        const double n1 = row_norm(head1, j);
        const double n2 = row_norm(head2, j);
        double d = 0.0;
        for (std::size_t k = 0; k < head1.cols(); ++k) d += head1(j, k) * head2(j, k);
        const double cos = d / (n1 * n2);
        // d cos / d a = b / (|a||b|) - cos a / |a|^2
        for (std::size_t k = 0; k < head1.cols(); ++k) {
            g1(j, k) = inv_c * (head2(j, k) / (n1 * n2) - cos * head1(j, k) / (n1 * n1));
            g2(j, k) = inv_c * (head1(j, k) / (n1 * n2) - cos * head2(j, k) / (n2 * n2));
        }
    }
    return {g1, g2};
}

Var record_selective_bce(Tape& tape, Var probs, LabelMatrix labels, BalanceWeights weights) {
    const double v = selective_bce(tape.value(probs), labels, weights);
    return tape.custom(Matrix(1, 1, v), {probs},
                       [&tape, probs, labels = std::move(labels), weights = std::move(weights)](const Matrix& g) {
                           return std::vector<Matrix>{
                               scale(selective_bce_gradient(tape.value(probs), labels, weights), g(0, 0))};
                       });
}

Var record_coreg_loss(Tape& tape, Var probs1, Var probs2) {
    const double v = coreg_loss(tape.value(probs1), tape.value(probs2));
    return tape.custom(Matrix(1, 1, v), {probs1, probs2}, [&tape, probs1, probs2](const Matrix& g) {
        auto [g1, g2] = coreg_loss_gradient(tape.value(probs1), tape.value(probs2));
        return std::vector<Matrix>{scale(g1, g(0, 0)), scale(g2, g(0, 0))};
    });
}

Var record_multiview_loss(Tape& tape, Var head1, Var head2) {
    const double v = multiview_loss(tape.value(head1), tape.value(head2));
    return tape.custom(Matrix(1, 1, v), {head1, head2}, [&tape, head1, head2](const Matrix& g) {
        auto [g1, g2] = multiview_loss_gradient(tape.value(head1), tape.value(head2));
        return std::vector<Matrix>{scale(g1, g(0, 0)), scale(g2, g(0, 0))};
    });
}

// ---------------------------------------------------------------------------

namespace {

struct Recorded {
    LossBreakdown breakdown;
    Var total;
};

Recorded record_combined(Tape& tape, ModelGraph& graph, const Matrix& inputs, const LabelMatrix& labels,
                         const LossOptions& options) {
    if (labels.rows() != inputs.rows()) fail(ErrorKind::Dimension, "combined_loss: inputs and labels disagree");
    Recorded r;
    LossBreakdown& b = r.breakdown;
    b.members = inputs.rows();

    std::vector<std::size_t> labeled_rows;
    for (std::size_t i = 0; i < labels.rows(); ++i)
        if (labels.row_known(i)) labeled_rows.push_back(i);
    b.labeled = labeled_rows.size();

    LabelMatrix known(labeled_rows.size(), labels.cols());
    for (std::size_t i = 0; i < labeled_rows.size(); ++i)
        for (std::size_t j = 0; j < labels.cols(); ++j) known(i, j) = labels(labeled_rows[i], j);
    if (!labeled_rows.empty()) b.weights = balancing_weights(known);

    const std::size_t views = options.single_view ? 1 : 2;
    const Var x = tape.constant(inputs);
    std::array<Var, 2> probs{};
    for (std::size_t v = 0; v < views; ++v) {
        const View view = static_cast<View>(v);
        probs[v] = graph.probs(view, graph.encode(view, x), options.use_gcn);
    }

    std::vector<Var> terms;
    std::vector<double> coeffs;
    const double view_coeff = options.single_view ? 1.0 : 0.5;
    if (!labeled_rows.empty()) {
        for (std::size_t v = 0; v < views; ++v) {
            const Var p = tape.select_rows(probs[v], labeled_rows);
            const Var lv = record_selective_bce(tape, p, known, b.weights);
            (v == 0 ? b.l_v1 : b.l_v2) = tape.scalar(lv);
            terms.push_back(lv);
            coeffs.push_back(view_coeff);
        }
    }
    if (!options.single_view) {
        const Var mv = record_multiview_loss(tape, graph.classifier(View::First, options.use_gcn),
                                             graph.classifier(View::Second, options.use_gcn));
        b.l_mv = tape.scalar(mv);
        if (options.lambda_mv != 0.0) {
            terms.push_back(mv);
            coeffs.push_back(options.lambda_mv);
        }
        if (inputs.rows() > 0) {
            const Var cr = record_coreg_loss(tape, probs[0], probs[1]);
            b.l_cr = tape.scalar(cr);
            if (options.lambda_cr != 0.0) {
                terms.push_back(cr);
                coeffs.push_back(options.lambda_cr);
            }
        }
    }
    r.total = tape.linear_combination(terms, coeffs);
    b.total = tape.scalar(r.total);
    return r;
}

void check_options(const LossOptions& options) {
    if (!std::isfinite(options.lambda_mv) || !std::isfinite(options.lambda_cr)) {
        fail(ErrorKind::Config, "combined_loss: loss weights must be finite");
    }
}

}  // namespace

LossWithGradients combined_loss_with_gradients(const Matrix& inputs, const LabelMatrix& labels,
                                               const TwoViewModel& model, const LossOptions& options) {
    check_options(options);
    Tape tape;
    ModelGraph graph(tape, model, options.single_view);
    Recorded r = record_combined(tape, graph, inputs, labels, options);
    tape.backward(r.total);
    return {std::move(r.breakdown), graph.gradients()};
}

LossWithGradients combined_loss_with_gradients(const Dataset& dataset, const Batch& batch, const TwoViewModel& model,
                                               const LossOptions& options) {
    return combined_loss_with_gradients(dataset.features(batch.indices), dataset.labels(batch.indices), model,
                                        options);
}

LossBreakdown combined_loss(const Dataset& dataset, const Batch& batch, const TwoViewModel& model,
                            const LossOptions& options) {
    check_options(options);
    Tape tape;
    ModelGraph graph(tape, model, options.single_view);
    return record_combined(tape, graph, dataset.features(batch.indices), dataset.labels(batch.indices), options)
        .breakdown;
}

}  // namespace coreg
