#pragma once

#include <utility>
#include <vector>

#include "coreg/data.hpp"
#include "coreg/labels.hpp"
#include "coreg/matrix.hpp"
#include "coreg/model.hpp"
#include "coreg/tape.hpp"

namespace coreg {

/// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before any log.
inline constexpr double kProbClamp = 1e-7;

double clamp_probability(double p) noexcept;

/// Bernoulli entropy in nats.
double bernoulli_entropy(double p) noexcept;

/// Per-label class weights for the balanced BCE.
struct BalanceWeights {
    std::vector<double> positive;
    std::vector<double> negative;

    static BalanceWeights uniform(std::size_t label_count);
    std::size_t size() const noexcept { return positive.size(); }
};

/// Weights (w+, w-) for one label over the known rows of `labels`. With N+
/// positives, N- negatives and B = N+ + N-, both classes present gives
/// w+ = B / (2 N+), w- = B / (2 N-); otherwise both are 1.
/// Throws ErrorKind::Contract if no row is known.
std::pair<double, double> balancing_weights(const LabelMatrix& labels, std::size_t label);
BalanceWeights balancing_weights(const LabelMatrix& labels);

// Each loss comes as a value function and a closed-form gradient with respect
// to its inputs. Gradients vanish on clamped entries.

/// Mean over rows of -(1/C) sum_j a_j [p_j ln q_j + (1 - p_j) ln(1 - q_j)].
/// Throws ErrorKind::Contract on Unknown labels.
double selective_bce(const Matrix& probs, const LabelMatrix& labels, const BalanceWeights& weights);
Matrix selective_bce_gradient(const Matrix& probs, const LabelMatrix& labels, const BalanceWeights& weights);

/// Mean over rows of (1/C) sum_j JS(Bernoulli(p1_j) || Bernoulli(p2_j)).
double coreg_loss(const Matrix& probs1, const Matrix& probs2);
std::pair<Matrix, Matrix> coreg_loss_gradient(const Matrix& probs1, const Matrix& probs2);

/// (1/C) sum_j cos(W1_j, W2_j) over full rows including the bias column.
/// Throws ErrorKind::Numerical naming the label if a row has zero norm.
double multiview_loss(const Matrix& head1, const Matrix& head2);
std::pair<Matrix, Matrix> multiview_loss_gradient(const Matrix& head1, const Matrix& head2);

/// Tape wrappers: record the loss as a 1x1 node backed by the closed forms above.
Var record_selective_bce(Tape& tape, Var probs, LabelMatrix labels, BalanceWeights weights);
Var record_coreg_loss(Tape& tape, Var probs1, Var probs2);
Var record_multiview_loss(Tape& tape, Var head1, Var head2);

// ---------------------------------------------------------------------------

struct LossOptions {
    double lambda_mv = 400.0;
    double lambda_cr = 100.0;
    bool use_gcn = false;
    /// Only view 1 is trained; total = L_v1 and the cross-view terms vanish.
    bool single_view = false;
};

struct LossBreakdown {
    double l_v1 = 0.0;
    double l_v2 = 0.0;
    double l_mv = 0.0;
    double l_cr = 0.0;
    /// 0.5 (l_v1 + l_v2) + lambda_mv l_mv + lambda_cr l_cr; l_v1 alone for single_view.
    double total = 0.0;
    BalanceWeights weights;
    std::size_t labeled = 0;
    std::size_t members = 0;
};

/// L_v over labeled members only (0 when there are none), L_cr over all
/// members, L_mv on the current (raw or refined) classifiers.
LossBreakdown combined_loss(const Dataset& dataset, const Batch& batch, const TwoViewModel& model,
                            const LossOptions& options);

struct LossWithGradients {
    LossBreakdown breakdown;
    /// One per parameters(model, options.single_view) entry, same order.
    std::vector<Matrix> gradients;
};

LossWithGradients combined_loss_with_gradients(const Dataset& dataset, const Batch& batch, const TwoViewModel& model,
                                               const LossOptions& options);

/// Same as above on explicit inputs rather than a dataset batch.
LossWithGradients combined_loss_with_gradients(const Matrix& inputs, const LabelMatrix& labels,
                                               const TwoViewModel& model, const LossOptions& options);

}  // namespace coreg
