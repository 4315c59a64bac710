#pragma once

// Exact ordinary least squares with intercept. Serves as a convex reference
// learner: a positive column rescaling is absorbed by its coefficients.

#include "ofr/common.hpp"
#include "ofr/data.hpp"

namespace ofr {

struct LinearModel {
    Vector coefficients;  // one per feature
    double intercept = 0.0;

    Vector predict(const Matrix& features) const {
        if (features.cols() != coefficients.size()) throw std::invalid_argument("linear model: dimension mismatch");
        return (features * coefficients).array() + intercept;
    }
};

inline LinearModel fit_least_squares(const Matrix& features, const Vector& targets) {
    if (features.rows() != targets.size()) throw std::invalid_argument("least squares: row count mismatch");
    Matrix design(features.rows(), features.cols() + 1);
    design << features, Vector::Ones(features.rows());
    Vector beta = design.colPivHouseholderQr().solve(targets);
    LinearModel m;
    m.coefficients = beta.head(features.cols());
    m.intercept = beta(features.cols());
    return m;
}

inline LinearModel fit_least_squares(const Dataset& data) { return fit_least_squares(data.features, data.targets); }

}  // namespace ofr
