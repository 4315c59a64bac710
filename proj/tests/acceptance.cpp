// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Usage: acceptance [criterion numbers...]

#include "ofr/cli.hpp"
#include "ofr/linear_model.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>

using namespace ofr;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

Network random_net(std::mt19937_64& rng, int inputs, int max_width, int max_layers) {
    std::uniform_int_distribution<int> width(1, max_width), depth(1, max_layers);
    std::normal_distribution<double> g(0.0, 0.5);
    std::vector<int> widths{inputs};
    const int layers = depth(rng);
    for (int l = 0; l + 1 < layers; ++l) widths.push_back(width(rng));
    widths.push_back(1);
    std::vector<Activation> acts(widths.size() - 1, Activation::relu);
    acts.back() = Activation::linear;
    Network net = init_network(widths, acts, rng());
    for (auto& layer : net.layers) layer.biases = layer.biases.unaryExpr([&](double) { return g(rng); });
    return net;
}

Genome random_genome(std::mt19937_64& rng, std::size_t m) {
    std::uniform_real_distribution<double> gene(-3.0, 3.0);
    Genome g;
    for (std::size_t i = 0; i < m; ++i) g.genes.push_back(gene(rng));
    return g;
}

Verdict ga_budget() {
    GaConfig cfg;
    cfg.genes = 13;
    cfg.seed = 1;
    std::atomic<std::size_t> calls{0};
    Stopwatch clock;
    auto result = ga_run(
        [&](const Genome& g) {
            ++calls;
            double s = 0;
            for (double v : g.genes) s += v * v;
            return s;
        },
        cfg);
    const double t = clock.seconds();
    const bool ok = calls.load() == 2020 && result.evaluation_count == 2020 && t < 60.0;
    return {ok, fmt("%zu objective calls (expected 2020), %.3f s", calls.load(), t)};
}

Verdict folding() {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> inputs(1, 13);
    std::normal_distribution<double> xs(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int m = inputs(rng);
        Network net = random_net(rng, m, 10, 3);
        const auto s = decode_genome(random_genome(rng, static_cast<std::size_t>(m)));
        std::vector<double> x(m), sx(m);
        for (int i = 0; i < m; ++i) {
            x[i] = xs(rng);
            sx[i] = s.scales[i] * x[i];
        }
        worst = std::max(worst, std::abs(forward(fold_first_layer(net, s), x) - forward(net, sx)));
    }
    return {worst < 1e-10, fmt("1000 triples, max |difference| = %.3e (limit 1e-10)", worst)};
}

Verdict gradients() {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> batch(1, 8), loss_pick(0, 1);
    std::normal_distribution<double> g(0.0, 1.0);
    const double h = 1e-5;
    int nets = 0, attempts = 0;
    std::size_t components = 0;
    double worst_ratio = 0.0, worst_abs = 0.0;
    bool ok = true;
    Stopwatch clock;
    while (nets < 120 && attempts < 1000) {
        ++attempts;
        const Loss loss = loss_pick(rng) ? Loss::mae : Loss::mse;
        std::uniform_int_distribution<int> in_width(1, 10);
        Network net = random_net(rng, in_width(rng), 10, 3);
        const int n = batch(rng);
        Matrix x = Matrix::NullaryExpr(n, net.input_width(), [&] { return g(rng); });
        Vector y = Vector::NullaryExpr(n, [&] { return g(rng); });

        // Finite differences are meaningless across a relu or |.| kink; skip those draws.
        bool near_kink = false;
        Matrix a = x.transpose();
        for (const auto& layer : net.layers) {
            Matrix z = layer.weights * a;
            z.colwise() += layer.biases;
            if (layer.activation == Activation::relu) {
                near_kink |= z.cwiseAbs().minCoeff() < 1e-3;
                z = z.cwiseMax(0.0);
            }
            a = z;
        }
        if (loss == Loss::mae) near_kink |= (predict(net, x) - y).cwiseAbs().minCoeff() < 1e-3;
        if (near_kink) continue;

        const auto grads = gradient(net, x, y, loss);
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            for (int bias = 0; bias < 2; ++bias) {
                const Eigen::Index rows = net.layers[l].weights.rows();
                const Eigen::Index cols = bias ? 1 : net.layers[l].weights.cols();
                for (Eigen::Index i = 0; i < rows; ++i) {
                    for (Eigen::Index j = 0; j < cols; ++j) {
                        Network plus = net, minus = net;
                        double& p = bias ? plus.layers[l].biases(i) : plus.layers[l].weights(i, j);
                        double& q = bias ? minus.layers[l].biases(i) : minus.layers[l].weights(i, j);
                        p += h;
                        q -= h;
                        const double fd = (batch_loss(plus, x, y, loss) - batch_loss(minus, x, y, loss)) / (2 * h);
                        const double bp = bias ? grads.biases[l](i) : grads.weights[l](i, j);
                        // relative 1e-5, absolute 1e-8 floor near zero
                        const double tol = std::max(1e-5 * std::max(std::abs(fd), std::abs(bp)), 1e-8);
                        const double diff = std::abs(fd - bp);
                        worst_ratio = std::max(worst_ratio, diff / tol);
                        worst_abs = std::max(worst_abs, diff);
                        ok &= diff < tol;
                        ++components;
                    }
                }
            }
        }
        ++nets;
    }
    ok &= nets >= 100;
    return {ok && clock.seconds() < 60.0,
            fmt("%d nets, %zu components, max |fd - backprop| %.2e, worst error/tolerance %.3f, %.2f s", nets,
                components, worst_abs, worst_ratio, clock.seconds())};
}

Verdict affine_invariance() {
    const Dataset data = generate_surrogate(400, 0.1, 5);
    const auto p = prepare(data, preset_config("test3"));
    auto solver = [](const Dataset& tr, const Dataset& va) { return fit_least_squares(tr).predict(va.features); };
    const double base = ofr_objective(Genome{std::vector<double>(13, 0.0)}, p.train, p.validation, solver);
    std::mt19937_64 rng(9);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial)
        worst = std::max(worst, std::abs(ofr_objective(random_genome(rng, 13), p.train, p.validation, solver) - base));
    return {worst < 1e-8, fmt("validation RMSE %.6f, max deviation over 100 genomes %.3e (limit 1e-8)", base, worst)};
}

Verdict baseline_reduction() {
    const Dataset data = generate_surrogate(300, 0.1, 6);
    OfrConfig cfg = preset_config("test3");
    cfg.train.epochs = 300;
    cfg.train.patience = 20;
    cfg.repetitions = 2;
    cfg.ga.iterations = 0;
    cfg.ga.population_size = 3;
    cfg.ga.offspring_count = 3;
    OfrHooks hooks;
    hooks.initial_population = std::vector<Genome>(3, Genome{std::vector<double>(13, 0.0)});
    const OfrResult r = run_ofr(data, cfg, hooks);
    const CvReport base = run_baseline(data, cfg);

    const auto p = prepare(data, cfg);
    const auto solver = FfnnSolver::from(cfg, 13);
    const double direct = rmse(solver(p.train, p.validation), p.validation.targets);
    const double via_objective = ofr_objective(Genome{std::vector<double>(13, 0.0)}, p.train, p.validation, cfg);

    const bool ok = r.ofr_report == r.baseline_report && r.ofr_report == base && direct == via_objective &&
                    r.best_val_rmse == direct;
    return {ok, fmt("OFR CV mean %.17g vs BASE %.17g; objective %.17g vs direct %.17g", r.ofr_report.mean, base.mean,
                    via_objective, direct)};
}

Verdict early_stopping() {
    Dataset tr, va;
    tr.features = Matrix::Ones(1, 1);
    tr.targets = Vector::Ones(1);
    tr.column_names = {"x"};
    va = tr;
    va.targets = Vector::Constant(1, -1.0);  // every step toward the training target worsens validation
    Network start;
    start.layers = {Layer{Matrix::Zero(1, 1), Vector::Zero(1), Activation::linear}};

    TrainConfig one;
    one.epochs = 1;
    const Network after_first = train(start, tr, va, one).net;
    const double best_loss = batch_loss(after_first, va.features, va.targets, Loss::mae);

    bool ok = true;
    std::string detail;
    for (int p : {1, 3, 7, 25}) {
        TrainConfig cfg;
        cfg.epochs = 200;
        cfg.patience = p;
        const auto r = train(start, tr, va, cfg);
        bool monotone = true;
        for (std::size_t e = 1; e < r.report.val_loss_history.size(); ++e)
            monotone &= r.report.val_loss_history[e] > r.report.val_loss_history[e - 1];
        const double restored = batch_loss(r.net, va.features, va.targets, Loss::mae);
        ok &= monotone && r.report.early_stopped && r.report.best_epoch == 1 && r.report.stopped_epoch == 1 + p &&
              std::abs(restored - best_loss) < 1e-12 && r.net == after_first;
        detail += fmt("p=%d stop=%d ", p, r.report.stopped_epoch);
    }
    return {ok, detail + "(expected best 1 + p, best weights restored)"};
}

Verdict operator_algebra() {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> alpha(-0.1, 0.1);
    bool ok = true;
    double worst_sum = 0.0;
    GaConfig cfg;
    cfg.genes = 8;
    for (int trial = 0; trial < 2000; ++trial) {
        const Genome x1 = random_genome(rng, 8), x2 = random_genome(rng, 8);
        auto [i1, i2] = uniform_crossover(x1, x2, 1.0);
        auto [s1, s2] = uniform_crossover(x1, x2, 0.0);
        ok &= i1 == x1 && i2 == x2 && s1 == x2 && s2 == x1;
        auto [y1, y2] = uniform_crossover(x1, x2, alpha(rng));
        for (std::size_t i = 0; i < 8; ++i) {
            // the sum identity holds whenever neither child was clamped
            const bool clamped = std::abs(y1.genes[i]) == 3.0 || std::abs(y2.genes[i]) == 3.0;
            if (!clamped) worst_sum = std::max(worst_sum, std::abs(y1.genes[i] + y2.genes[i] - x1.genes[i] - x2.genes[i]));
            ok &= std::abs(y1.genes[i]) <= 3.0 && std::abs(y2.genes[i]) <= 3.0;
        }
        GaConfig off = cfg;
        off.mutation_rate = 0.0;
        ok &= mutate(x1, off, rng) == x1;
        off = cfg;
        off.mutation_rate = 1.0;
        off.mutation_sigma = 0.0;
        ok &= mutate(x1, off, rng) == x1;
        GaConfig wild = cfg;
        wild.mutation_rate = 1.0;
        wild.mutation_sigma = 10.0;
        for (double v : mutate(x1, wild, rng).genes) ok &= v >= -3.0 && v <= 3.0;
    }
    ok &= worst_sum < 1e-12;
    return {ok, fmt("2000 parent pairs; max |y1+y2-x1-x2| = %.2e; identities and bounds hold", worst_sum)};
}

Verdict sphere() {
    int successes = 0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        GaConfig cfg;
        cfg.genes = 5;
        cfg.iterations = 50;
        cfg.seed = seed;
        auto r = ga_run(
            [](const Genome& g) {
                double s = 0;
                for (double v : g.genes) s += v * v;
                return s;
            },
            cfg);
        const double ratio = r.best_history.back() / r.best_history.front();
        successes += ratio < 0.1;
        detail += fmt("%.2e ", ratio);
    }
    return {successes >= 4, fmt("%d/5 seeds below 10%% of initial best (ratios ", successes) + detail + ")"};
}

Verdict desk_ofr() {
    int wins = 0;
    std::string detail;
    Stopwatch clock;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        cli::Settings s;
        s.command = "ofr";
        s.preset = "test3";
        s.seed = seed;
        s.epochs = 1000;
        s.ga_pop = 8;
        s.ga_iters = 10;
        s.reps = 5;
        const OfrConfig cfg = cli::resolve_config(s);
        const Dataset data = generate_surrogate(1000, 0.1, seed);
        const OfrResult r = run_ofr(data, cfg);
        const bool win = r.ofr_report.mean >= r.baseline_report.mean;
        wins += win;
        detail += fmt("seed %llu: %.4f vs %.4f; ", static_cast<unsigned long long>(seed), r.ofr_report.mean,
                      r.baseline_report.mean);
        std::fprintf(stderr, "  desk OFR seed %llu done (%.0f s)\n", static_cast<unsigned long long>(seed),
                     clock.seconds());
    }
    return {wins >= 3, fmt("OFR >= BASE CV mean in %d/5 seeds, %.0f s total; ", wins, clock.seconds()) + detail};
}

Verdict metrics_truth() {
    const double a = rmse(std::vector<double>{0, 0}, std::vector<double>{3, 4});
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(3.0, 2.0);
    Vector t = Vector::NullaryExpr(500, [&] { return g(rng); });
    const double b = r_squared(Vector(Vector::Constant(500, t.mean())), t);
    const double c = r_squared(std::vector<double>{1, 2, 2}, std::vector<double>{1, 2, 3});
    const bool ok = std::abs(a - std::sqrt(12.5)) <= 1e-12 && std::abs(b) <= 1e-12 && std::abs(c - 0.5) <= 1e-12;
    return {ok, fmt("rmse %.15f, mean-predictor R2 %.2e, R2 %.15f", a, b, c)};
}

Verdict split_correctness() {
    const Dataset d = generate_surrogate(4069, 0.1, 7);
    const auto split = holdout_split(d, kHoldoutRatios, 3);
    std::multiset<std::size_t> rows(split.train_rows.begin(), split.train_rows.end());
    rows.insert(split.validation_rows.begin(), split.validation_rows.end());
    rows.insert(split.test_rows.begin(), split.test_rows.end());
    bool ok = split.train_rows.size() == 2848 && split.validation_rows.size() == 610 && split.test_rows.size() == 611 &&
              rows.size() == 4069 && std::set<std::size_t>(rows.begin(), rows.end()).size() == 4069;

    const auto folds = kfold_split(4069, 10, 3);
    std::multiset<std::size_t> sizes;
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (const auto& f : folds.fold_indices) {
        sizes.insert(f.size());
        seen.insert(f.begin(), f.end());
        total += f.size();
    }
    ok &= sizes.count(407) == 9 && sizes.count(406) == 1 && total == 4069 && seen.size() == 4069 &&
          *seen.rbegin() == 4068;
    return {ok, fmt("hold-out %zu/%zu/%zu, folds 407x%zu + 406x%zu, exact partitions", split.train_rows.size(),
                    split.validation_rows.size(), split.test_rows.size(), sizes.count(407), sizes.count(406))};
}

Verdict replay_determinism() {
    const fs::path dir = fs::temp_directory_path() / "ofr_acceptance_replay";
    fs::remove_all(dir);
    fs::create_directories(dir);
    auto p = [&](const std::string& name) { return (dir / name).string(); };
    auto run = [](std::vector<std::string> args, std::string& out) {
        std::ostringstream o, e;
        const int code = cli::run(args, o, e);
        out = o.str();
        return code;
    };
    std::string out1, out2, ignored;
    bool ok = run({"generate", "--n", "300", "--noise", "0.1", "--seed", "12", "--out", p("data.csv")}, ignored) == 0;
    ok &= run({"ofr", "--data", p("data.csv"), "--epochs", "200", "--patience", "20", "--reps", "2", "--folds", "5",
               "--ga-pop", "6", "--ga-iters", "3", "--seed", "12", "--out", p("run.csv")},
              out1) == 0;
    const std::vector<std::string> artifacts{"run.csv", "run.csv.scales.csv", "run.csv.ga_log.csv"};
    std::vector<std::string> first;
    for (const auto& a : artifacts) first.push_back(cli::read_text_file(p(a)));
    auto strip_comments = [](const std::string& text) {
        std::istringstream in(text);
        std::string line, kept;
        while (std::getline(in, line))
            if (!line.empty() && line[0] != '#') kept += line + "\n";
        return kept;
    };
    const std::string manifest = cli::read_text_file(p("run.csv.manifest"));
    fs::copy_file(p("run.csv.manifest"), p("saved.manifest"));
    for (const auto& a : artifacts) fs::remove(p(a));

    ok &= run({"replay", "--manifest", p("saved.manifest")}, out2) == 0;
    std::size_t identical = 0;
    for (std::size_t i = 0; i < artifacts.size(); ++i) identical += cli::read_text_file(p(artifacts[i])) == first[i];
    ok &= identical == artifacts.size();
    ok &= strip_comments(cli::read_text_file(p("run.csv.manifest"))) == strip_comments(manifest);
    ok &= out1 == out2;
    fs::remove_all(dir);
    return {ok, fmt("%zu/%zu artifacts byte-identical after replay; stdout %s", identical, artifacts.size(),
                    out1 == out2 ? "identical" : "differs")};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> check;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "GA budget exactness", ga_budget},
        {2, "folding equivalence", folding},
        {3, "gradient correctness", gradients},
        {4, "affine-invariance oracle", affine_invariance},
        {5, "baseline reduction", baseline_reduction},
        {6, "early-stopping contract", early_stopping},
        {7, "crossover/mutation algebra", operator_algebra},
        {8, "GA sphere sanity", sphere},
        {9, "desk-scale OFR benefit", desk_ofr},
        {10, "metrics ground truth", metrics_truth},
        {11, "split/CV correctness", split_correctness},
        {12, "end-to-end determinism", replay_determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        Verdict v;
        try {
            v = c.check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failures += !v.pass;
        std::printf("%s [%2d] %s: %s\n", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
