#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "coreg/matrix.hpp"
#include "coreg/tape.hpp"

namespace coreg {

/// Which of the two pipelines. Stored as an index into TwoViewModel arrays.
enum class View : std::size_t { First = 0, Second = 1 };

inline std::size_t index(View v) { return static_cast<std::size_t>(v); }

struct DenseLayer {
    Matrix weight;  // fan_in x fan_out
    Matrix bias;    // 1 x fan_out
};

/// Multilayer perceptron feature generator: leaky-relu on hidden layers,
/// identity on the output layer. layer_sizes = [d_in, h1, ..., d_feat]; a
/// single entry means the identity map.
struct Encoder {
    std::vector<std::size_t> layer_sizes;
    std::vector<DenseLayer> layers;
    double leaky_slope = 0.01;

    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t output_dim() const { return layer_sizes.back(); }
};

/// Row j is [w_j b_j], the classifier for label j.
struct ClassifierHead {
    Matrix weights;  // C x (d_feat + 1)

    std::size_t label_count() const { return weights.rows(); }
};

/// Two-layer graph convolution over classifier rows, shared by both views.
struct GcnParams {
    Matrix h0;  // (d_feat + 1) x hidden
    Matrix h1;  // hidden x (d_feat + 1)
    double leaky_slope = 0.01;
};

enum class GcnInit {
    /// Glorot-uniform H0 and H1.
    Glorot,
    /// H0 = H1 = I, hidden = d_feat + 1. Reproduces the raw head when the
    /// adjacency is the identity and propagated weights are nonnegative.
    Identity,
    /// H0 = [I, -I], H1 = [I; -I] / (1 + slope), hidden = 2 (d_feat + 1). The
    /// leaky-relu pair cancels exactly, so W_t = A A W_0 at initialization.
    SignSplit,
};

struct TwoViewModel {
    std::array<Encoder, 2> encoders;
    std::array<ClassifierHead, 2> heads;
    std::optional<GcnParams> gcn;
    std::optional<Matrix> adjacency;
    bool gcn_active = false;
    std::vector<std::string> label_names;

    std::size_t label_count() const { return heads[0].label_count(); }
    std::size_t input_dim() const { return encoders[0].input_dim(); }
    std::size_t feature_dim() const { return encoders[0].output_dim(); }
};

struct ModelSpec {
    /// [d_in, hidden..., d_feat]
    std::vector<std::size_t> layer_sizes;
    std::size_t label_count = 0;
    double leaky_slope = 0.01;
};

/// Independent Glorot-uniform draws for the two views, zero biases, no GCN.
/// Throws ErrorKind::Config when seed1 == seed2.
TwoViewModel init_two_view(const ModelSpec& spec, std::uint64_t seed1, std::uint64_t seed2);

/// Glorot-uniform fill in [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))].
Matrix glorot_uniform(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
                      std::uint64_t seed);

Matrix encode(const Encoder& encoder, const Matrix& x);
Matrix encode(const TwoViewModel& model, View view, const Matrix& x);

/// W_t = A * LeakyReLU(A * W_0 * H0) * H1.
ClassifierHead refine_weights(const ClassifierHead& head, const GcnParams& gcn, const Matrix& adjacency);

/// sigma([f 1] W^T) with the raw or GCN-refined classifier.
/// Throws ErrorKind::State if use_gcn is set on a model without an active GCN.
Matrix predict_probs(const TwoViewModel& model, View view, const Matrix& features, bool use_gcn);
Matrix predict_probs(const ClassifierHead& head, const Matrix& features);

/// Encodes raw inputs and predicts in one call.
Matrix predict_from_inputs(const TwoViewModel& model, View view, const Matrix& x, bool use_gcn);

GcnParams make_gcn(std::size_t classifier_width, GcnInit init, std::size_t hidden, double leaky_slope,
                   std::uint64_t seed);
/// Sets gcn, adjacency and gcn_active. hidden = 0 selects the init's default width.
void attach_gcn(TwoViewModel& model, Matrix adjacency, GcnInit init, std::size_t hidden, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Parameters and tape recording.

enum class ParamGroup { Encoder, Classifier, Gcn };

struct ParamRef {
    std::string name;
    ParamGroup group;
    Matrix* value;
};

/// Trainable parameters in a stable order. With single_view only view-1
/// parameters are listed; GCN parameters appear only when gcn_active.
std::vector<ParamRef> parameters(TwoViewModel& model, bool single_view = false);

/// Records the model's parameters on a tape and builds forward expressions.
/// Parameter order matches parameters(model, single_view).
class ModelGraph {
public:
    ModelGraph(Tape& tape, const TwoViewModel& model, bool single_view = false);

    Var encode(View view, Var x);
    /// Raw head or refined head (refinement recorded once per view and reused).
    Var classifier(View view, bool use_gcn);
    Var probs(View view, Var features, bool use_gcn);

    /// Gradient per parameter after tape.backward(), same order as parameters().
    std::vector<Matrix> gradients() const;
    const std::vector<Var>& parameter_vars() const { return params_; }

private:
    struct EncoderVars {
        std::vector<Var> weights;
        std::vector<Var> biases;
    };

    Tape& tape_;
    const TwoViewModel& model_;
    bool single_view_;
    std::array<EncoderVars, 2> encoders_;
    std::array<Var, 2> heads_{};
    Var h0_{};
    Var h1_{};
    Var adjacency_{};
    std::array<std::optional<Var>, 2> refined_;
    std::vector<Var> params_;
};

// ---------------------------------------------------------------------------
// Checkpoints: versioned line-oriented text, matrices in row-major order with
// shape headers and round-trip exact ("%.17g") values.

void write_checkpoint(std::ostream& out, const TwoViewModel& model);
TwoViewModel read_checkpoint(std::istream& in);
/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const TwoViewModel& model);
TwoViewModel load_checkpoint(const std::filesystem::path& path);

}  // namespace coreg
