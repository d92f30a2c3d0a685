#ifndef STWF_DATA_HPP
#define STWF_DATA_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stwf/common.hpp"
#include "stwf/models.hpp"

namespace stwf {

struct Sample {
    Vector x;
    int y = 0;
    int z = 0;
};

/// Per-feature affine map x -> (x - offset) / scale. Identity where not applied.
struct NormalizationStats {
    Vector offset;
    Vector scale;

    static NormalizationStats identity(Index dim) {
        return {Vector::Zero(dim), Vector::Ones(dim)};
    }
    Vector normalize(const Vector& x) const { return (x - offset).cwiseQuotient(scale); }
    Vector denormalize(const Vector& x) const { return x.cwiseProduct(scale) + offset; }
    Matrix normalize_rows(const Matrix& rows) const;
};

/*
 * Immutable tabular population: features (n x d), binary labels and an
 * optional binary group attribute, plus the metadata the response model
 * needs (domain box, improvable mask).
 */
class Dataset {
public:
    Dataset() = default;
    Dataset(Matrix features, Eigen::VectorXi labels, Eigen::VectorXi groups,
            std::vector<std::string> feature_names);

    Index size() const { return features_.rows(); }
    Index dim() const { return features_.cols(); }
    bool empty() const { return size() == 0; }
    bool has_groups() const { return groups_.size() == size() && size() > 0; }

    const Matrix& features() const { return features_; }
    const Eigen::VectorXi& labels() const { return labels_; }
    const Eigen::VectorXi& groups() const { return groups_; }
    const std::vector<std::string>& feature_names() const { return feature_names_; }
    const NormalizationStats& stats() const { return stats_; }
    const Box& domain() const { return domain_; }
    const Vector& improvable_mask() const { return improvable_; }
    const std::vector<bool>& continuous() const { return continuous_; }
    const std::string& provenance() const { return provenance_; }

    Sample sample(Index i) const;
    Dataset subset(const std::vector<Index>& rows) const;

    Dataset with_domain(Box box) const;
    Dataset with_improvable(Vector mask) const;
    Dataset with_continuous(std::vector<bool> flags) const;
    Dataset with_provenance(std::string tag) const;
    /// Replaces the features by `stats` applied to them and records the stats.
    Dataset normalized(const NormalizationStats& stats) const;

private:
    Matrix features_;
    Eigen::VectorXi labels_;
    Eigen::VectorXi groups_;
    std::vector<std::string> feature_names_;
    NormalizationStats stats_;
    Box domain_;
    Vector improvable_;
    std::vector<bool> continuous_;
    std::string provenance_;
};

struct SyntheticSpec {
    Index n = 10000;
    double group1_fraction = 0.2;
    Vector mean0 = Vector::Constant(2, 0.3);
    Vector mean1 = Vector::Constant(2, 0.5);
    Matrix cov0 = 0.04 * Matrix::Identity(2, 2);
    Matrix cov1 = 0.06 * Matrix::Identity(2, 2);
    /// Labeler coefficients over MonomialBasis(2, labeler_order).
    int labeler_order = 2;
    Vector labeler_coefficients;
    double cost_scale = 5.0;
    std::uint64_t seed = 0;

    /// The shipped preset used by the CLI and the experiment suite.
    static SyntheticSpec preset(std::uint64_t seed = 0);
    LabelingModel labeler() const;
};

Dataset gen_synthetic(const SyntheticSpec& spec);

struct CsvSchema {
    std::vector<std::string> features;
    std::string label;
    std::string group;  // empty: no group attribute
    std::vector<std::string> improvable;
    std::optional<std::string> positive_label_value;
    std::optional<double> group_threshold;
    /// Columns integer-coded by sorted distinct value. Absent: auto-detect.
    std::optional<std::vector<std::string>> categorical;
};

CsvSchema load_schema(const std::string& path);
CsvSchema parse_schema(const std::string& json_text);
std::string schema_to_json(const CsvSchema& schema);

/// Reads a header-first comma-separated file. Rows with an empty, "?" or
/// "NA" cell in a schema column are dropped.
Dataset load_csv(const std::string& path, const CsvSchema& schema);
Dataset parse_csv(const std::string& text, const CsvSchema& schema);

/// Writes features (in the dataset's current units), label and group.
void write_csv(const Dataset& data, const std::string& path, const std::string& comment = {});
CsvSchema default_schema(const Dataset& data);

struct SplitOptions {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    bool normalize = true;      // z-score continuous features using train stats
    double box_padding = 0.05;  // fraction of the observed train range
};

/// Shuffled disjoint split; normalisation and domain box fitted on train.
std::pair<Dataset, Dataset> split(const Dataset& data, const SplitOptions& opts);

}  // namespace stwf

#endif  // STWF_DATA_HPP
