#pragma once

// Tabular regression data: CSV ingestion, standardization, splitting and the
// synthetic grinding surrogate.

#include "ofr/common.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ofr {

/// N samples by M features plus one target per sample.
struct Dataset {
    Matrix features;  // N x M
    Vector targets;   // N
    std::vector<std::string> column_names;  // M feature labels

    std::size_t rows() const { return static_cast<std::size_t>(features.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(features.cols()); }

    void validate() const {
        if (features.rows() < 1 || features.cols() < 1)
            throw std::invalid_argument("dataset needs at least one sample and one feature");
        if (targets.size() != features.rows())
            throw std::invalid_argument("dataset target count does not match sample count");
        if (column_names.size() != cols())
            throw std::invalid_argument("dataset column name count does not match feature count");
        if (!features.allFinite() || !targets.allFinite())
            throw std::invalid_argument("dataset contains non-finite values");
    }

    Dataset subset(std::span<const std::size_t> row_ids) const {
        Dataset out;
        out.features.resize(static_cast<Eigen::Index>(row_ids.size()), features.cols());
        out.targets.resize(static_cast<Eigen::Index>(row_ids.size()));
        for (std::size_t i = 0; i < row_ids.size(); ++i) {
            auto r = static_cast<Eigen::Index>(row_ids[i]);
            auto dst = static_cast<Eigen::Index>(i);
            out.features.row(dst) = features.row(r);
            out.targets(dst) = targets(r);
        }
        out.column_names = column_names;
        return out;
    }
};

inline Dataset concat(const Dataset& a, const Dataset& b) {
    if (a.cols() != b.cols()) throw std::invalid_argument("concat: feature count mismatch");
    Dataset out;
    out.features.resize(a.features.rows() + b.features.rows(), a.features.cols());
    out.features << a.features, b.features;
    out.targets.resize(a.targets.size() + b.targets.size());
    out.targets << a.targets, b.targets;
    out.column_names = a.column_names;
    return out;
}

/// Reads a header + numeric rows file; the last column is the target.
inline Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line) || trim(line).empty())
        throw ParseError(path + ": missing header row");
    std::vector<std::string> header;
    for (auto f : split_fields(trim(line))) header.emplace_back(trim(f));
    if (header.size() < 2) throw ParseError(path + ": need at least one feature and a target column");

    std::vector<double> values;
    std::size_t n = 0;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        ++n;
        auto fields = split_fields(trim(line));
        if (fields.size() != header.size())
            throw ParseError(path + ": row " + std::to_string(n) + " (line " + std::to_string(line_no) +
                             ") has " + std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(header.size()));
        for (std::size_t c = 0; c < fields.size(); ++c) {
            double v = 0.0;
            if (!parse_double(fields[c], v))
                throw ParseError(path + ": row " + std::to_string(n) + ", column \"" + header[c] +
                                 "\": not a number: '" + std::string(trim(fields[c])) + "'");
            values.push_back(v);
        }
    }
    if (n == 0) throw ParseError(path + ": no samples");

    const auto m = header.size() - 1;
    Dataset data;
    data.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
    data.targets.resize(static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < m; ++c)
            data.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * (m + 1) + c];
        data.targets(static_cast<Eigen::Index>(r)) = values[r * (m + 1) + m];
    }
    data.column_names.assign(header.begin(), header.end() - 1);
    return data;
}

inline void write_csv(const Dataset& data, std::ostream& out, const std::string& target_name = "y") {
    for (const auto& name : data.column_names) out << name << ',';
    out << target_name << '\n';
    for (Eigen::Index r = 0; r < data.features.rows(); ++r) {
        for (Eigen::Index c = 0; c < data.features.cols(); ++c) out << format_double(data.features(r, c)) << ',';
        out << format_double(data.targets(r)) << '\n';
    }
}

/// Per-column centering and scaling with population statistics.
struct Standardizer {
    Vector means;
    Vector stddevs;

    static constexpr double kDegenerateStddev = 1e-12;

    Dataset apply(const Dataset& data) const {
        if (data.features.cols() != means.size())
            throw std::invalid_argument("standardizer: expected " + std::to_string(means.size()) +
                                        " features, got " + std::to_string(data.features.cols()));
        Dataset out = data;
        out.features = ((data.features.rowwise() - means.transpose()).array().rowwise() /
                        stddevs.transpose().array())
                           .matrix();
        return out;
    }

    Matrix invert(const Matrix& z) const {
        if (z.cols() != means.size()) throw std::invalid_argument("standardizer: dimension mismatch");
        return ((z.array().rowwise() * stddevs.transpose().array()).rowwise() + means.transpose().array()).matrix();
    }
};

/// Fit on the training rows only. Constant columns keep stddev 1.
inline Standardizer fit_standardizer(const Dataset& data) {
    if (data.rows() < 2) throw std::invalid_argument("fit_standardizer: need at least 2 samples");
    Standardizer s;
    const double n = static_cast<double>(data.rows());
    s.means = data.features.colwise().mean().transpose();
    s.stddevs.resize(s.means.size());
    for (Eigen::Index c = 0; c < data.features.cols(); ++c) {
        double ss = (data.features.col(c).array() - s.means(c)).square().sum();
        double sd = std::sqrt(ss / n);
        s.stddevs(c) = sd < Standardizer::kDegenerateStddev ? 1.0 : sd;
    }
    return s;
}

struct DataSplit {
    Dataset train;
    Dataset validation;
    Dataset test;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> validation_rows;
    std::vector<std::size_t> test_rows;
};

inline std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

/// Seeded shuffle, then floor(r0*N) train rows, floor(r1*N) validation rows,
/// and the remainder to test.
inline DataSplit holdout_split(const Dataset& data, std::array<double, 3> ratios, std::uint64_t seed) {
    for (double r : ratios)
        if (!(r > 0.0)) throw std::invalid_argument("holdout_split: ratios must be positive");
    if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
        throw std::invalid_argument("holdout_split: ratios must sum to 1");
    const auto n = data.rows();
    // The small epsilon keeps exact products such as 0.7 * 100 from flooring to 69.
    auto take = [n](double r) { return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9)); };
    const auto n_train = take(ratios[0]);
    const auto n_val = take(ratios[1]);
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n)
        throw std::invalid_argument("holdout_split: a split would be empty for N=" + std::to_string(n));

    auto idx = shuffled_indices(n, seed);
    DataSplit split;
    split.train_rows.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.validation_rows.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                                 idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    split.test_rows.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
    split.train = data.subset(split.train_rows);
    split.validation = data.subset(split.validation_rows);
    split.test = data.subset(split.test_rows);
    return split;
}

struct FoldSet {
    std::size_t k = 0;
    std::vector<std::vector<std::size_t>> fold_indices;
};

/// Seeded shuffle then contiguous chunks; the first N mod k folds get one extra row.
inline FoldSet kfold_split(std::size_t n, std::size_t k, std::uint64_t seed) {
    if (k < 2 || k > n)
        throw std::invalid_argument("kfold_split: k=" + std::to_string(k) + " out of range [2, " + std::to_string(n) + "]");
    auto idx = shuffled_indices(n, seed);
    FoldSet folds;
    folds.k = k;
    const auto base = n / k;
    const auto extra = n % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const auto size = base + (f < extra ? 1 : 0);
        folds.fold_indices.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                                        idx.begin() + static_cast<std::ptrdiff_t>(pos + size));
        pos += size;
    }
    return folds;
}

inline FoldSet kfold_split(const Dataset& data, std::size_t k, std::uint64_t seed) {
    return kfold_split(data.rows(), k, seed);
}

/// Process-parameter ranges of the surrogate. Each feature is uniform on its interval.
struct SurrogateFeature {
    const char* name;
    double low;
    double high;
};

inline constexpr std::array<SurrogateFeature, 12> kSurrogateFeatures{{
    {"work_height", 5.0, 20.0},               // mm
    {"blade_angle", 20.0, 40.0},              // deg
    {"feed_velocity", 0.5, 5.0},              // mm/s
    {"diametral_removal", 0.05, 0.5},         // mm
    {"work_length", 10.0, 100.0},             // mm
    {"work_diameter", 5.0, 40.0},             // mm
    {"grinding_wheel_diameter", 400.0, 600.0},  // mm
    {"control_wheel_diameter", 200.0, 350.0},   // mm
    {"control_wheel_velocity", 0.2, 0.8},       // m/s
    {"grinding_specific_energy", 20.0, 60.0},   // J/mm^3
    {"edge_force_component", 1.0, 10.0},        // N/mm^2
    {"grit_stiffness", 0.5, 5.0},               // N/um
}};

/// Smooth kinematic stand-in. u holds the 12 features mapped to [0, 1].
inline double surrogate_low_fidelity(std::span<const double, 12> u) {
    using std::numbers::pi;
    return 1.5 + 0.8 * std::sin(pi * (u[0] + 0.6 * u[1])) + 0.5 * u[2] * u[3] + 0.3 * std::cos(pi * u[5]);
}

/// Non-smooth correction the low-fidelity term misses (instability onset).
inline double surrogate_interaction(std::span<const double, 12> u) {
    return 1.2 * std::max(0.0, u[2] + u[9] - 1.1) + 0.4 * std::abs(u[0] - u[5]) +
           0.3 * std::max(0.0, u[8] - 0.6);
}

/// 12 process features plus "low_fidelity" as feature 13; target is
/// max(0, low_fidelity + interaction + noise_level * N(0,1)).
/// work_length, both wheel diameters, edge force and grit stiffness do not
/// influence the target.
inline Dataset generate_surrogate(std::size_t n_samples, double noise_level, std::uint64_t seed) {
    if (n_samples < 1) throw std::invalid_argument("generate_surrogate: n_samples must be >= 1");
    if (!(noise_level >= 0.0)) throw std::invalid_argument("generate_surrogate: noise_level must be >= 0");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Dataset data;
    const auto n = static_cast<Eigen::Index>(n_samples);
    data.features.resize(n, 13);
    data.targets.resize(n);
    for (const auto& f : kSurrogateFeatures) data.column_names.emplace_back(f.name);
    data.column_names.emplace_back("low_fidelity");

    std::array<double, 12> u{};
    for (Eigen::Index r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < u.size(); ++c) {
            u[c] = unit(rng);
            const auto& f = kSurrogateFeatures[c];
            data.features(r, static_cast<Eigen::Index>(c)) = f.low + u[c] * (f.high - f.low);
        }
        const double lf = surrogate_low_fidelity(u);
        const double eps = gauss(rng);
        data.features(r, 12) = lf;
        data.targets(r) = std::max(0.0, lf + surrogate_interaction(u) + noise_level * eps);
    }
    return data;
}

}  // namespace ofr
