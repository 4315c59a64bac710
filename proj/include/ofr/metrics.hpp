#pragma once

#include "ofr/common.hpp"
#include "ofr/data.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace ofr {

namespace detail {

inline void check_pair(std::span<const double> p, std::span<const double> t, const char* what) {
    if (p.size() != t.size())
        throw std::invalid_argument(std::string(what) + ": length mismatch (" + std::to_string(p.size()) + " vs " +
                                    std::to_string(t.size()) + ")");
    if (p.empty()) throw std::invalid_argument(std::string(what) + ": empty input");
}

}  // namespace detail

inline double rmse(std::span<const double> predictions, std::span<const double> targets) {
    detail::check_pair(predictions, targets, "rmse");
    double ss = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const double r = predictions[i] - targets[i];
        ss += r * r;
    }
    return std::sqrt(ss / static_cast<double>(predictions.size()));
}

inline double mae(std::span<const double> predictions, std::span<const double> targets) {
    detail::check_pair(predictions, targets, "mae");
    double s = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) s += std::abs(predictions[i] - targets[i]);
    return s / static_cast<double>(predictions.size());
}

/// 1 - SS_res / SS_tot; negative when worse than predicting the target mean.
inline double r_squared(std::span<const double> predictions, std::span<const double> targets) {
    detail::check_pair(predictions, targets, "r_squared");
    if (targets.size() < 2) throw std::invalid_argument("r_squared: need at least 2 samples");
    const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(targets.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        ss_res += (predictions[i] - targets[i]) * (predictions[i] - targets[i]);
        ss_tot += (targets[i] - mean) * (targets[i] - mean);
    }
    if (ss_tot == 0.0) throw std::invalid_argument("r_squared: targets are constant");
    return 1.0 - ss_res / ss_tot;
}

inline double rmse(const Vector& p, const Vector& t) { return rmse(as_span(p), as_span(t)); }
inline double mae(const Vector& p, const Vector& t) { return mae(as_span(p), as_span(t)); }
inline double r_squared(const Vector& p, const Vector& t) { return r_squared(as_span(p), as_span(t)); }

struct CvReport {
    std::vector<double> per_fold_scores;  // test-fold R^2
    double mean = 0.0;
    double std = 0.0;  // population (divide by k)
    double train_r2 = 0.0;

    static CvReport from_scores(std::vector<double> scores, double train_r2) {
        if (scores.size() < 2) throw std::invalid_argument("cv report: need at least 2 fold scores");
        CvReport r;
        r.per_fold_scores = std::move(scores);
        const double k = static_cast<double>(r.per_fold_scores.size());
        r.mean = std::accumulate(r.per_fold_scores.begin(), r.per_fold_scores.end(), 0.0) / k;
        double ss = 0.0;
        for (double s : r.per_fold_scores) ss += (s - r.mean) * (s - r.mean);
        r.std = std::sqrt(ss / k);
        r.train_r2 = train_r2;
        return r;
    }

    bool operator==(const CvReport&) const = default;
};

/// Fold-wise average of repeated CV runs over the same folds.
inline CvReport average_reports(std::span<const CvReport> reports) {
    if (reports.empty()) throw std::invalid_argument("average_reports: no reports");
    const auto k = reports.front().per_fold_scores.size();
    std::vector<double> scores(k, 0.0);
    double train = 0.0;
    for (const auto& r : reports) {
        if (r.per_fold_scores.size() != k) throw std::invalid_argument("average_reports: fold count mismatch");
        for (std::size_t f = 0; f < k; ++f) scores[f] += r.per_fold_scores[f];
        train += r.train_r2;
    }
    const double n = static_cast<double>(reports.size());
    for (double& s : scores) s /= n;
    return CvReport::from_scores(std::move(scores), train / n);
}

/// A fitted model: maps an N x M feature matrix to N predictions.
using Predictor = std::function<Vector(const Matrix&)>;
/// Fits a model on the given rows; must be deterministic in (data, seed).
using Recipe = std::function<Predictor(const Dataset&, std::uint64_t)>;

/// Trains on every fold complement and scores R^2 on the held-out fold.
/// train_r2 is the mean R^2 of each fold model on its own training rows.
/// Fold f receives seed derive_seed(seed, f).
inline CvReport cross_validate(const Recipe& recipe, const Dataset& data, const FoldSet& folds, std::uint64_t seed,
                               unsigned threads = 1) {
    if (folds.k < 2 || folds.fold_indices.size() != folds.k)
        throw std::invalid_argument("cross_validate: need at least 2 folds");
    for (std::size_t f = 0; f < folds.k; ++f)
        if (folds.fold_indices[f].size() < 2)
            throw std::invalid_argument("cross_validate: fold " + std::to_string(f + 1) + " has fewer than 2 rows");

    std::vector<double> test_scores(folds.k), train_scores(folds.k);
    parallel_for(folds.k, threads, [&](std::size_t f) {
        std::vector<char> in_fold(data.rows(), 0);
        for (auto i : folds.fold_indices[f]) in_fold.at(i) = 1;
        std::vector<std::size_t> train_rows;
        train_rows.reserve(data.rows());
        for (std::size_t i = 0; i < data.rows(); ++i)
            if (!in_fold[i]) train_rows.push_back(i);
        const Dataset train = data.subset(train_rows);
        const Dataset test = data.subset(folds.fold_indices[f]);
        const Predictor model = recipe(train, derive_seed(seed, f));
        test_scores[f] = r_squared(model(test.features), test.targets);
        train_scores[f] = r_squared(model(train.features), train.targets);
    });
    const double train_r2 =
        std::accumulate(train_scores.begin(), train_scores.end(), 0.0) / static_cast<double>(folds.k);
    return CvReport::from_scores(std::move(test_scores), train_r2);
}

/// One named row of a comparison table.
struct MethodReport {
    std::string method;
    CvReport report;
};

/// Aligned text table: Method | R² (Train) | CV Mean | CV Std.
inline std::string render_cv_table(std::span<const MethodReport> rows) {
    std::string out;
    char buf[160];
    out += "Method   |  R² (Train) |   CV Mean |    CV Std\n";
    out += "---------+-------------+-----------+----------\n";
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-8s | %11.6f | %9.6f | %9.6f\n", r.method.c_str(), r.report.train_r2,
                      r.report.mean, r.report.std);
        out += buf;
    }
    return out;
}

inline std::string cv_csv_header() { return "method,r2_train,cv_mean,cv_std"; }

inline std::string to_csv_row(const MethodReport& r) {
    return r.method + ',' + format_double(r.report.train_r2) + ',' + format_double(r.report.mean) + ',' +
           format_double(r.report.std);
}

/// Relative change of the CV mean, in percent.
inline double improvement_percent(double ofr_mean, double base_mean) {
    return 100.0 * (ofr_mean - base_mean) / base_mean;
}

}  // namespace ofr
