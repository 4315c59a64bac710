#include "ofr/linear_model.hpp"
#include "ofr/metrics.hpp"
#include "ofr/scaling.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace ofr;

namespace {

Network random_net(std::mt19937_64& rng, int inputs) {
    std::uniform_int_distribution<int> width(1, 8), depth(1, 3);
    std::vector<int> widths{inputs};
    const int hidden = depth(rng) - 1;
    for (int i = 0; i < hidden; ++i) widths.push_back(width(rng));
    widths.push_back(1);
    std::vector<Activation> acts(widths.size() - 1, Activation::relu);
    acts.back() = Activation::linear;
    Network net = init_network(widths, acts, rng());
    std::normal_distribution<double> g(0.0, 0.5);
    for (auto& layer : net.layers) layer.biases = layer.biases.unaryExpr([&](double) { return g(rng); });
    return net;
}

}  // namespace

TEST(DecodeGenome, KnownValues) {
    EXPECT_EQ(decode_genome({{0.0, 0.0}}).scales, (std::vector<double>{1.0, 1.0}));
    EXPECT_DOUBLE_EQ(decode_genome({{3.0}}).scales[0], 1000.0);
    EXPECT_DOUBLE_EQ(decode_genome({{-3.0}}).scales[0], 0.001);
}

TEST(DecodeGenome, RejectsOutOfRangeGenes) {
    EXPECT_THROW(decode_genome({{3.0000001}}), std::out_of_range);
    EXPECT_THROW(decode_genome({{-4.0}}), std::out_of_range);
}

TEST(DecodeGenome, ZeroGenomeIsExactIdentity) {
    EXPECT_EQ(decode_genome({std::vector<double>(13, 0.0)}), ScaleVector::identity(13));
}

TEST(DecodeGenome, MonotoneAndInRange) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> gene(-3.0, 3.0);
    for (int i = 0; i < 1000; ++i) {
        double a = gene(rng), b = gene(rng);
        if (a > b) std::swap(a, b);
        auto s = decode_genome({{a, b}}).scales;
        if (a < b) {
            EXPECT_LT(s[0], s[1]);
        }
        for (double v : s) {
            EXPECT_GE(v, 1e-3 * (1 - 1e-15));
            EXPECT_LE(v, 1e3 * (1 + 1e-15));
        }
    }
}

TEST(Rescale, IdentityAndColumnMultiply) {
    Matrix x(2, 2);
    x << 1, 2, 3, 4;
    EXPECT_EQ(rescale(x, ScaleVector::identity(2)), x);
    Matrix expected(2, 2);
    expected << 2, 1, 6, 2;
    EXPECT_EQ(rescale(x, ScaleVector{{2.0, 0.5}}), expected);
    EXPECT_THROW(rescale(x, ScaleVector{{2.0}}), std::invalid_argument);
}

TEST(Rescale, ReciprocalUndoesScaling) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> gene(-3.0, 3.0);
    Matrix x = Matrix::Random(20, 6);
    for (int trial = 0; trial < 50; ++trial) {
        Genome g;
        for (int i = 0; i < 6; ++i) g.genes.push_back(gene(rng));
        auto s = decode_genome(g);
        Matrix back = rescale(rescale(x, s), s.reciprocal());
        EXPECT_LE((back - x).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(FoldFirstLayer, HandExample) {
    Network net;
    Layer first;
    first.weights.resize(2, 2);
    first.weights << 1, 2, 3, 4;
    first.biases = Vector::Constant(2, 0.5);
    first.activation = Activation::relu;
    Layer out;
    out.weights = Matrix::Ones(1, 2);
    out.biases = Vector::Zero(1);
    net.layers = {first, out};

    Network folded = fold_first_layer(net, ScaleVector{{10.0, 0.1}});
    Matrix expected(2, 2);
    expected << 10, 0.2, 30, 0.4;
    EXPECT_LE((folded.layers[0].weights - expected).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(folded.layers[0].biases, net.layers[0].biases);
    EXPECT_EQ(folded.layers[1].weights, net.layers[1].weights);
    // original untouched
    EXPECT_EQ(net.layers[0].weights(0, 0), 1.0);

    EXPECT_EQ(fold_first_layer(net, ScaleVector::identity(2)), net);
    EXPECT_THROW(fold_first_layer(net, ScaleVector::identity(3)), std::invalid_argument);
}

TEST(FoldFirstLayer, EquivalentToRescaledInputs) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> gene(-3.0, 3.0);
    std::normal_distribution<double> xs(0.0, 1.0);
    std::uniform_int_distribution<int> inputs(1, 13);
    for (int trial = 0; trial < 1000; ++trial) {
        const int m = inputs(rng);
        Network net = random_net(rng, m);
        Genome g;
        std::vector<double> x(m), sx(m);
        for (int i = 0; i < m; ++i) {
            g.genes.push_back(gene(rng));
            x[i] = xs(rng);
        }
        auto s = decode_genome(g);
        for (int i = 0; i < m; ++i) sx[i] = s.scales[i] * x[i];
        const double a = forward(fold_first_layer(net, s), x);
        const double b = forward(net, sx);
        ASSERT_LT(std::abs(a - b), 1e-10) << "trial " << trial;
    }
}

TEST(AffineInvariance, LeastSquaresAbsorbsAnyPositiveRescaling) {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> gene(-3.0, 3.0);
    Matrix xtr = Matrix::Random(80, 5), xva = Matrix::Random(30, 5);
    Vector w(5);
    w << 1.0, -2.0, 0.5, 0.0, 3.0;
    Vector noise_tr = 0.3 * Vector::Random(80), noise_va = 0.3 * Vector::Random(30);
    Vector ytr = xtr * w + noise_tr, yva = xva * w + noise_va;
    const double base = rmse(fit_least_squares(xtr, ytr).predict(xva), yva);
    for (int trial = 0; trial < 100; ++trial) {
        Genome g;
        for (int i = 0; i < 5; ++i) g.genes.push_back(gene(rng));
        auto s = decode_genome(g);
        const double v = rmse(fit_least_squares(rescale(xtr, s), ytr).predict(rescale(xva, s)), yva);
        EXPECT_NEAR(v, base, 1e-8);
    }
}

TEST(ScaleSerialization, CsvRow) {
    ScaleVector s{{1.0, 0.001, 1000.0, 3.1622776601683795}};
    EXPECT_EQ(parse_scales(to_csv_row(s)), s);
    Genome g{{0.1, -3.0, 2.5}};
    EXPECT_EQ(parse_genome(to_csv_row(g)), g);
    EXPECT_THROW(parse_scales("1,-2"), ParseError);
    EXPECT_THROW(parse_scales("1,abc"), ParseError);
}
