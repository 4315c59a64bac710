#pragma once

// Per-feature scale factors: log10 genomes, column rescaling and folding the
// scales into the first network layer.

#include "ofr/common.hpp"
#include "ofr/ffnn.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace ofr {

inline constexpr double kGeneLow = -3.0;
inline constexpr double kGeneHigh = 3.0;

/// log10 scale exponents, one per feature.
struct Genome {
    std::vector<double> genes;

    std::size_t size() const { return genes.size(); }
    bool operator==(const Genome&) const = default;
};

/// Strictly positive multipliers, one per feature.
struct ScaleVector {
    std::vector<double> scales;

    std::size_t size() const { return scales.size(); }
    bool operator==(const ScaleVector&) const = default;

    static ScaleVector identity(std::size_t m) { return {std::vector<double>(m, 1.0)}; }

    ScaleVector reciprocal() const {
        ScaleVector r = *this;
        for (double& s : r.scales) s = 1.0 / s;
        return r;
    }
};

/// s_i = 10^g_i. Genes must lie in [-3, 3].
inline ScaleVector decode_genome(const Genome& g) {
    ScaleVector s;
    s.scales.reserve(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double gene = g.genes[i];
        if (!(gene >= kGeneLow && gene <= kGeneHigh))
            throw std::out_of_range("gene " + std::to_string(i) + " = " + format_double(gene) + " outside [-3, 3]");
        // pow(10, 0) is exactly 1, so the zero genome decodes to the identity.
        s.scales.push_back(std::pow(10.0, gene));
    }
    return s;
}

/// Column i of the result is s_i times column i of X.
inline Matrix rescale(const Matrix& features, const ScaleVector& s) {
    if (static_cast<std::size_t>(features.cols()) != s.size())
        throw std::invalid_argument("rescale: " + std::to_string(features.cols()) + " columns but " +
                                    std::to_string(s.size()) + " scale factors");
    const Eigen::Map<const Eigen::RowVectorXd> row(s.scales.data(), static_cast<Eigen::Index>(s.size()));
    return (features.array().rowwise() * row.array()).matrix();
}

inline Dataset rescale(const Dataset& data, const ScaleVector& s) {
    Dataset out = data;
    out.features = rescale(data.features, s);
    return out;
}

/// Copy of net whose first-layer weights absorb the scales: w(j, k) * s_k.
inline Network fold_first_layer(const Network& net, const ScaleVector& s) {
    if (net.layers.empty()) throw std::invalid_argument("fold_first_layer: empty network");
    if (static_cast<std::size_t>(net.input_width()) != s.size())
        throw std::invalid_argument("fold_first_layer: network takes " + std::to_string(net.input_width()) +
                                    " inputs but " + std::to_string(s.size()) + " scale factors were given");
    Network folded = net;
    folded.layers.front().weights = rescale(net.layers.front().weights, s);
    return folded;
}

inline std::string to_csv_row(const Genome& g) { return to_csv_row(std::span<const double>(g.genes)); }
inline std::string to_csv_row(const ScaleVector& s) { return to_csv_row(std::span<const double>(s.scales)); }

inline Genome parse_genome(std::string_view row) { return {parse_csv_row(row)}; }

inline ScaleVector parse_scales(std::string_view row) {
    ScaleVector s{parse_csv_row(row)};
    for (double v : s.scales)
        if (!(v > 0.0)) throw ParseError("scale factors must be positive, got " + format_double(v));
    return s;
}

}  // namespace ofr
