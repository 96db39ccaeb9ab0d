#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "coreg/labels.hpp"
#include "coreg/matrix.hpp"

namespace coreg {

struct Sample {
    std::string id;
    std::vector<double> features;
    std::vector<Label> labels;

    /// Labeled iff no entry is Unknown.
    bool labeled() const noexcept;
};

/// Immutable-after-construction collection of samples sharing d and C.
/// Every sample is either fully labeled (member of L) or fully unknown (member of U).
class Dataset {
public:
    Dataset() = default;
    Dataset(std::size_t feature_dim, std::vector<std::string> label_names);

    /// Validates dimensions and rejects partially labeled samples (ErrorKind::Data).
    void add(Sample sample);

    std::size_t size() const noexcept { return samples_.size(); }
    std::size_t feature_dim() const noexcept { return feature_dim_; }
    std::size_t label_count() const noexcept { return label_names_.size(); }
    const std::vector<std::string>& label_names() const noexcept { return label_names_; }
    const std::vector<Sample>& samples() const noexcept { return samples_; }
    const Sample& operator[](std::size_t i) const { return samples_.at(i); }

    std::vector<std::size_t> labeled_indices() const;
    std::vector<std::size_t> unlabeled_indices() const;
    std::size_t labeled_count() const;

    Matrix features(std::span<const std::size_t> indices) const;
    Matrix all_features() const;
    LabelMatrix labels(std::span<const std::size_t> indices) const;
    LabelMatrix all_labels() const;

    /// New dataset holding only the given samples, in order.
    Dataset subset(std::span<const std::size_t> indices) const;
    Dataset labeled_only() const;

    bool operator==(const Dataset& other) const;

private:
    std::size_t feature_dim_ = 0;
    std::vector<std::string> label_names_;
    std::vector<Sample> samples_;
};

// ---------------------------------------------------------------------------
// CSV: header "id,f0,...,f{d-1},label:<name0>,...,label:<name{C-1}>".
// Label cells are "1" (Present), "0" (Absent) or empty (Unknown).

struct CsvSchema {
    std::optional<std::size_t> feature_dim;
    std::optional<std::size_t> label_count;
};

Dataset read_csv(std::istream& in, const CsvSchema& schema = {});
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
void write_csv(std::ostream& out, const Dataset& dataset);
void save_csv(const std::filesystem::path& path, const Dataset& dataset);

// ---------------------------------------------------------------------------
// Synthetic correlated multi-label data.

enum class DirectionMode {
    Random,     // independent uniform directions on the unit sphere
    Clustered,  // all directions within max_angle of each other
};

struct SynthSpec {
    std::size_t latent_dim = 8;
    std::size_t label_count = 6;
    std::size_t feature_dim = 16;
    /// Explicit unit label directions (label_count rows of latent_dim); generated when empty.
    std::vector<std::vector<double>> label_directions;
    DirectionMode direction_mode = DirectionMode::Random;
    /// Upper bound on pairwise angles for DirectionMode::Clustered, radians.
    double max_angle = 0.5235987755982988;
    /// Seeds the label directions and the mixing matrix.
    std::uint64_t mixing_seed = 7;
    double noise_std = 0.3;
    std::size_t n_labeled = 200;
    std::size_t n_unlabeled = 2000;
    std::size_t n_test = 1000;
    /// Seeds the samples.
    std::uint64_t seed = 1;
};

struct SynthData {
    Dataset train;
    Dataset test;
};

/// Throws ErrorKind::Config on invalid specs.
void validate(const SynthSpec& spec);
/// The unit label directions implied by the spec (explicit or generated).
std::vector<std::vector<double>> label_directions(const SynthSpec& spec);
/// The d x k mixing matrix with unit-norm rows.
Matrix mixing_matrix(const SynthSpec& spec);
SynthData generate_synthetic(const SynthSpec& spec);

/// Copy of `dataset` with every feature mapped to gain * x + offset. Used to
/// build shifted-domain test sets.
Dataset with_feature_shift(const Dataset& dataset, double offset, double gain);

/// Fraction of labeled samples on which labels a and b agree.
double label_agreement(const Dataset& dataset, std::size_t a, std::size_t b);

// ---------------------------------------------------------------------------
// Batching.

enum class Phase { Mixed, LabeledOnly };

struct Batch {
    std::vector<std::size_t> indices;
    std::vector<bool> labeled_mask;

    std::size_t size() const noexcept { return indices.size(); }
    std::size_t labeled_count() const noexcept;
};

/// One shuffled pass. Mixed draws from L and U together (U optionally capped
/// to a seeded subset of `unlabeled_cap` samples); LabeledOnly draws from L.
/// The final partial batch is kept.
std::vector<Batch> epoch_batches(const Dataset& dataset, std::size_t batch_size, Phase phase, std::uint64_t seed,
                                 std::optional<std::size_t> unlabeled_cap = std::nullopt);

}  // namespace coreg
