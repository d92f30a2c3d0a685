#include "stwf/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

namespace stwf {

using nlohmann::json;

Matrix NormalizationStats::normalize_rows(const Matrix& rows) const {
    Matrix out = rows.rowwise() - offset.transpose();
    return out.array().rowwise() / scale.transpose().array();
}

Dataset::Dataset(Matrix features, Eigen::VectorXi labels, Eigen::VectorXi groups,
                 std::vector<std::string> feature_names)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      groups_(std::move(groups)),
      feature_names_(std::move(feature_names)) {
    require(labels_.size() == features_.rows(), "labels and features disagree on sample count");
    require(groups_.size() == 0 || groups_.size() == features_.rows(),
            "groups and features disagree on sample count");
    require(features_.allFinite(), "dataset features must be finite");
    require((labels_.array() == 0 || labels_.array() == 1).all(), "labels must be binary");
    require((groups_.array() == 0 || groups_.array() == 1).all(), "group attribute must be binary");
    const Index d = features_.cols();
    if (feature_names_.empty()) {
        for (Index i = 0; i < d; ++i) {
            feature_names_.push_back("x" + std::to_string(i + 1));
        }
    }
    require(static_cast<Index>(feature_names_.size()) == d, "feature name count mismatch");
    stats_ = NormalizationStats::identity(d);
    domain_ = Box::unbounded(d);
    improvable_ = Vector::Ones(d);
    continuous_.assign(d, true);
}

Sample Dataset::sample(Index i) const {
    require(i >= 0 && i < size(), "sample index out of range");
    return {features_.row(i).transpose(), labels_[i], has_groups() ? groups_[i] : 0};
}

Dataset Dataset::subset(const std::vector<Index>& rows) const {
    Dataset out = *this;
    out.features_.resize(static_cast<Index>(rows.size()), dim());
    out.labels_.resize(static_cast<Index>(rows.size()));
    if (has_groups()) {
        out.groups_.resize(static_cast<Index>(rows.size()));
    }
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const Index src = rows[r];
        require(src >= 0 && src < size(), "subset index out of range");
        out.features_.row(static_cast<Index>(r)) = features_.row(src);
        out.labels_[static_cast<Index>(r)] = labels_[src];
        if (has_groups()) {
            out.groups_[static_cast<Index>(r)] = groups_[src];
        }
    }
    return out;
}

Dataset Dataset::with_domain(Box box) const {
    require(box.dim() == dim(), "domain box dimension mismatch");
    Dataset out = *this;
    out.domain_ = std::move(box);
    return out;
}

Dataset Dataset::with_improvable(Vector mask) const {
    require(mask.size() == dim(), "improvable mask dimension mismatch");
    require((mask.array() == 0.0 || mask.array() == 1.0).all(), "improvable mask must be 0/1");
    Dataset out = *this;
    out.improvable_ = std::move(mask);
    return out;
}

Dataset Dataset::with_continuous(std::vector<bool> flags) const {
    require(static_cast<Index>(flags.size()) == dim(), "continuous flag count mismatch");
    Dataset out = *this;
    out.continuous_ = std::move(flags);
    return out;
}

Dataset Dataset::with_provenance(std::string tag) const {
    Dataset out = *this;
    out.provenance_ = std::move(tag);
    return out;
}

Dataset Dataset::normalized(const NormalizationStats& stats) const {
    require(stats.offset.size() == dim() && stats.scale.size() == dim(), "normalisation stats mismatch");
    Dataset out = *this;
    out.features_ = stats.normalize_rows(features_);
    out.stats_ = stats;
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic population

SyntheticSpec SyntheticSpec::preset(std::uint64_t seed) {
    SyntheticSpec spec;
    // h(x) = 0.5 - 8 (x1 - 0.35)^2 + 0.7 x2, clamped to [0, 1]
    spec.labeler_order = 2;
    spec.labeler_coefficients.resize(6);
    spec.labeler_coefficients << -0.48, 5.6, 0.7, -8.0, 0.0, 0.0;
    spec.seed = seed;
    return spec;
}

LabelingModel SyntheticSpec::labeler() const {
    return LabelingModel::closed_polynomial(static_cast<int>(mean0.size()), labeler_order, labeler_coefficients);
}

Dataset gen_synthetic(const SyntheticSpec& spec) {
    require(spec.n > 0, "synthetic population size must be positive");
    require(spec.group1_fraction >= 0.0 && spec.group1_fraction <= 1.0, "group fraction must be in [0, 1]");
    const Index d = spec.mean0.size();
    require(spec.mean1.size() == d && spec.cov0.rows() == d && spec.cov0.cols() == d &&
                spec.cov1.rows() == d && spec.cov1.cols() == d,
            "synthetic spec dimension mismatch");
    Eigen::LLT<Matrix> llt0(spec.cov0);
    Eigen::LLT<Matrix> llt1(spec.cov1);
    if (llt0.info() != Eigen::Success || llt1.info() != Eigen::Success ||
        !spec.cov0.isApprox(spec.cov0.transpose()) || !spec.cov1.isApprox(spec.cov1.transpose())) {
        throw ValidationError("synthetic covariance matrices must be symmetric positive definite");
    }
    const LabelingModel h = spec.labeler();
    const Matrix l0 = llt0.matrixL();
    const Matrix l1 = llt1.matrixL();

    std::mt19937_64 rng(spec.seed);
    const Index n1 = static_cast<Index>(std::llround(static_cast<double>(spec.n) * spec.group1_fraction));
    Eigen::VectorXi groups = Eigen::VectorXi::Zero(spec.n);
    groups.head(n1).setOnes();
    std::shuffle(groups.data(), groups.data() + groups.size(), rng);

    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix features(spec.n, d);
    Eigen::VectorXi labels(spec.n);
    Vector noise(d);
    for (Index i = 0; i < spec.n; ++i) {
        for (Index k = 0; k < d; ++k) {
            noise[k] = normal(rng);
        }
        const Vector x = groups[i] == 1 ? Vector(spec.mean1 + l1 * noise) : Vector(spec.mean0 + l0 * noise);
        features.row(i) = x.transpose();
        labels[i] = h.eval(x) >= 0.5 ? 1 : 0;
    }
    Dataset data(std::move(features), std::move(labels), std::move(groups), {});
    return data.with_provenance("synthetic:seed=" + std::to_string(spec.seed));
}

// ---------------------------------------------------------------------------
// CSV ingestion

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cell.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cell.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell.push_back(c);
        }
    }
    cells.push_back(cell);
    for (auto& s : cells) {
        const auto first = s.find_first_not_of(" \t");
        const auto last = s.find_last_not_of(" \t");
        s = first == std::string::npos ? std::string() : s.substr(first, last - first + 1);
    }
    return cells;
}

std::optional<double> parse_number(const std::string& s) {
    if (s.empty()) {
        return std::nullopt;
    }
    double v = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    if (*begin == '+') {
        ++begin;
    }
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

bool is_missing(const std::string& s) { return s.empty() || s == "?" || s == "NA"; }

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace

CsvSchema parse_schema(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("schema is not valid JSON: ") + e.what());
    }
    CsvSchema schema;
    try {
        schema.features = j.at("features").get<std::vector<std::string>>();
        schema.label = j.at("label").get<std::string>();
        if (j.contains("group") && !j["group"].is_null()) {
            schema.group = j["group"].get<std::string>();
        }
        if (j.contains("improvable")) {
            schema.improvable = j["improvable"].get<std::vector<std::string>>();
        } else {
            schema.improvable = schema.features;
        }
        if (j.contains("positive_label_value") && !j["positive_label_value"].is_null()) {
            const auto& v = j["positive_label_value"];
            schema.positive_label_value = v.is_string() ? v.get<std::string>() : v.dump();
        }
        if (j.contains("group_threshold") && !j["group_threshold"].is_null()) {
            schema.group_threshold = j["group_threshold"].get<double>();
        }
        if (j.contains("categorical")) {
            schema.categorical = j["categorical"].get<std::vector<std::string>>();
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("schema is missing a required field: ") + e.what());
    }
    require(!schema.features.empty(), "schema lists no feature columns");
    for (const auto& name : schema.improvable) {
        require(std::find(schema.features.begin(), schema.features.end(), name) != schema.features.end(),
                "improvable column '" + name + "' is not a feature");
    }
    return schema;
}

CsvSchema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open schema file '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_schema(ss.str());
}

std::string schema_to_json(const CsvSchema& schema) {
    json j;
    j["features"] = schema.features;
    j["label"] = schema.label;
    j["group"] = schema.group.empty() ? json(nullptr) : json(schema.group);
    j["improvable"] = schema.improvable;
    j["positive_label_value"] =
        schema.positive_label_value ? json(*schema.positive_label_value) : json(nullptr);
    if (schema.group_threshold) {
        j["group_threshold"] = *schema.group_threshold;
    }
    if (schema.categorical) {
        j["categorical"] = *schema.categorical;
    }
    return j.dump(2);
}

Dataset parse_csv(const std::string& text, const CsvSchema& schema) {
    std::istringstream in(text);
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] == '#') {
            continue;  // provenance comment
        }
        have_header = line.find_first_not_of(" \t\r") != std::string::npos;
        break;
    }
    if (!have_header) {
        throw ValidationError("CSV input is empty");
    }
    const auto header = split_csv_line(line);
    std::map<std::string, std::size_t> column;
    for (std::size_t c = 0; c < header.size(); ++c) {
        column.emplace(header[c], c);
    }
    auto locate = [&](const std::string& name, const char* role) {
        auto it = column.find(name);
        if (it == column.end()) {
            throw ValidationError(std::string("CSV is missing ") + role + " column '" + name + "'");
        }
        return it->second;
    };
    std::vector<std::size_t> feature_cols;
    for (const auto& f : schema.features) {
        feature_cols.push_back(locate(f, "feature"));
    }
    const std::size_t label_col = locate(schema.label, "label");
    const bool has_group = !schema.group.empty();
    const std::size_t group_col = has_group ? locate(schema.group, "group") : 0;

    std::vector<std::vector<std::string>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') {
            continue;
        }
        auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw ValidationError("CSV line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                                  " cells, header has " + std::to_string(header.size()));
        }
        bool missing = is_missing(cells[label_col]) || (has_group && is_missing(cells[group_col]));
        for (auto c : feature_cols) {
            missing = missing || is_missing(cells[c]);
        }
        if (!missing) {
            rows.push_back(std::move(cells));
        }
    }
    if (rows.empty()) {
        throw ValidationError("CSV contains no complete data rows");
    }
    const Index n = static_cast<Index>(rows.size());
    const Index d = static_cast<Index>(feature_cols.size());

    // Column coding: numeric, or integer codes by sorted distinct value.
    auto column_is_numeric = [&](std::size_t c) {
        return std::all_of(rows.begin(), rows.end(), [&](const auto& r) { return parse_number(r[c]).has_value(); });
    };
    auto categorical_codes = [&](std::size_t c) {
        std::set<std::string> distinct;
        for (const auto& r : rows) {
            distinct.insert(r[c]);
        }
        std::map<std::string, int> codes;
        int k = 0;
        for (const auto& v : distinct) {
            codes[v] = k++;
        }
        return codes;
    };

    Matrix features(n, d);
    std::vector<bool> continuous(static_cast<std::size_t>(d), true);
    for (Index k = 0; k < d; ++k) {
        const std::size_t c = feature_cols[static_cast<std::size_t>(k)];
        const std::string& name = schema.features[static_cast<std::size_t>(k)];
        bool categorical = false;
        if (schema.categorical) {
            categorical = std::find(schema.categorical->begin(), schema.categorical->end(), name) !=
                          schema.categorical->end();
        } else {
            categorical = !column_is_numeric(c);
        }
        if (categorical) {
            continuous[static_cast<std::size_t>(k)] = false;
            const auto codes = categorical_codes(c);
            for (Index r = 0; r < n; ++r) {
                features(r, k) = codes.at(rows[static_cast<std::size_t>(r)][c]);
            }
        } else {
            for (Index r = 0; r < n; ++r) {
                const auto& cell = rows[static_cast<std::size_t>(r)][c];
                auto v = parse_number(cell);
                if (!v) {
                    throw ValidationError("non-numeric cell '" + cell + "' in column '" + name + "'");
                }
                features(r, k) = *v;
            }
        }
    }

    Eigen::VectorXi labels(n);
    for (Index r = 0; r < n; ++r) {
        const auto& cell = rows[static_cast<std::size_t>(r)][label_col];
        if (schema.positive_label_value) {
            auto a = parse_number(cell);
            auto b = parse_number(*schema.positive_label_value);
            labels[r] = (a && b) ? (*a == *b) : (cell == *schema.positive_label_value);
        } else {
            auto v = parse_number(cell);
            if (!v || (*v != 0.0 && *v != 1.0)) {
                throw ValidationError("label column '" + schema.label + "' must be 0/1 without positive_label_value");
            }
            labels[r] = static_cast<int>(*v);
        }
    }

    Eigen::VectorXi groups;
    if (has_group) {
        groups.resize(n);
        if (schema.group_threshold) {
            for (Index r = 0; r < n; ++r) {
                const auto& cell = rows[static_cast<std::size_t>(r)][group_col];
                auto v = parse_number(cell);
                if (!v) {
                    throw ValidationError("non-numeric cell '" + cell + "' in column '" + schema.group + "'");
                }
                groups[r] = *v >= *schema.group_threshold ? 1 : 0;
            }
        } else {
            const bool numeric = column_is_numeric(group_col);
            std::set<std::string> distinct;
            for (const auto& row : rows) {
                distinct.insert(row[group_col]);
            }
            if (distinct.size() > 2) {
                throw ValidationError("group column '" + schema.group +
                                      "' has more than two values; set group_threshold");
            }
            bool zero_one = numeric;
            if (numeric) {
                for (const auto& v : distinct) {
                    const double x = *parse_number(v);
                    zero_one = zero_one && (x == 0.0 || x == 1.0);
                }
            }
            const auto codes = categorical_codes(group_col);
            for (Index r = 0; r < n; ++r) {
                const auto& cell = rows[static_cast<std::size_t>(r)][group_col];
                groups[r] = zero_one ? static_cast<int>(*parse_number(cell)) : codes.at(cell);
            }
        }
    }

    Vector mask = Vector::Zero(d);
    for (const auto& name : schema.improvable) {
        auto it = std::find(schema.features.begin(), schema.features.end(), name);
        if (it == schema.features.end()) {
            throw ValidationError("improvable column '" + name + "' is not a feature");
        }
        mask[it - schema.features.begin()] = 1.0;
    }

    Dataset data(std::move(features), std::move(labels), std::move(groups), schema.features);
    return data.with_improvable(mask).with_continuous(continuous).with_provenance("csv");
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open CSV file '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str(), schema).with_provenance("csv:" + path);
}

CsvSchema default_schema(const Dataset& data) {
    CsvSchema schema;
    schema.features = data.feature_names();
    schema.label = "y";
    schema.group = data.has_groups() ? "z" : "";
    for (Index k = 0; k < data.dim(); ++k) {
        if (data.improvable_mask()[k] != 0.0) {
            schema.improvable.push_back(data.feature_names()[static_cast<std::size_t>(k)]);
        }
    }
    schema.positive_label_value = "1";
    schema.categorical = std::vector<std::string>{};
    return schema;
}

void write_csv(const Dataset& data, const std::string& path, const std::string& comment) {
    std::ofstream out(path);
    if (!out) {
        throw RuntimeFailure("cannot write '" + path + "'");
    }
    if (!comment.empty()) {
        out << "# " << comment << '\n';
    }
    for (const auto& name : data.feature_names()) {
        out << name << ',';
    }
    out << 'y';
    if (data.has_groups()) {
        out << ",z";
    }
    out << '\n';
    for (Index r = 0; r < data.size(); ++r) {
        for (Index k = 0; k < data.dim(); ++k) {
            out << format_double(data.features()(r, k)) << ',';
        }
        out << data.labels()[r];
        if (data.has_groups()) {
            out << ',' << data.groups()[r];
        }
        out << '\n';
    }
}

std::pair<Dataset, Dataset> split(const Dataset& data, const SplitOptions& opts) {
    require(opts.train_fraction > 0.0 && opts.train_fraction < 1.0, "train fraction must be in (0, 1)");
    const Index n = data.size();
    const Index n_train = static_cast<Index>(std::llround(opts.train_fraction * static_cast<double>(n)));
    if (n_train < 1 || n_train >= n) {
        throw ValidationError("dataset of " + std::to_string(n) + " samples is too small to split");
    }
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::mt19937_64 rng(opts.seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Index> train_rows(perm.begin(), perm.begin() + n_train);
    std::vector<Index> test_rows(perm.begin() + n_train, perm.end());
    Dataset train = data.subset(train_rows);
    Dataset test = data.subset(test_rows);

    const Index d = data.dim();
    NormalizationStats stats = NormalizationStats::identity(d);
    if (opts.normalize) {
        const Matrix& x = train.features();
        for (Index k = 0; k < d; ++k) {
            if (!data.continuous()[static_cast<std::size_t>(k)]) {
                continue;
            }
            const double mean = x.col(k).mean();
            const double var = (x.col(k).array() - mean).square().sum() / static_cast<double>(x.rows());
            stats.offset[k] = mean;
            stats.scale[k] = var > 0.0 ? std::sqrt(var) : 1.0;
        }
    }
    train = train.normalized(stats);
    test = test.normalized(stats);

    const Matrix& xt = train.features();
    Vector lo = xt.colwise().minCoeff().transpose();
    Vector hi = xt.colwise().maxCoeff().transpose();
    const Vector pad = (hi - lo) * opts.box_padding;
    Box box{lo - pad, hi + pad};
    return {train.with_domain(box), test.with_domain(box)};
}

}  // namespace stwf
