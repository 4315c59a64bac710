#pragma once

// Optimal feature rescaling: a GA searches log10 scale factors; each candidate
// is scored by training a network on the rescaled training split and taking
// the validation RMSE.

#include "ofr/common.hpp"
#include "ofr/data.hpp"
#include "ofr/ffnn.hpp"
#include "ofr/ga.hpp"
#include "ofr/metrics.hpp"
#include "ofr/scaling.hpp"

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace ofr {

/// Fitness assigned to a candidate whose training diverged.
inline constexpr double kPenaltyFitness = 1e12;

inline constexpr std::array<double, 3> kHoldoutRatios{0.70, 0.15, 0.15};

struct OfrConfig {
    std::string preset = "test3";
    std::vector<int> hidden_widths{13, 100};  // layer widths after the input, excluding the output neuron
    Activation hidden_activation = Activation::relu;
    TrainConfig train;
    GaConfig ga;
    std::uint64_t split_seed = 0;
    std::uint64_t cv_seed = 0;
    std::size_t repetitions = 10;
    std::size_t folds = 10;
    double es_holdout = 0.15;  // share of each CV training portion held out for early stopping
    unsigned threads = 1;

    std::vector<int> widths(std::size_t inputs) const {
        std::vector<int> w{static_cast<int>(inputs)};
        w.insert(w.end(), hidden_widths.begin(), hidden_widths.end());
        w.push_back(1);
        return w;
    }

    std::vector<Activation> activations() const {
        std::vector<Activation> a(hidden_widths.size(), hidden_activation);
        a.push_back(Activation::linear);
        return a;
    }
};

/// The three experiment configurations:
///   test1: 128-256-256-256 relu, 500 epochs, no early stopping
///   test2: same net, 10000 epochs, patience 100
///   test3: 13-100 relu, 10000 epochs, patience 200
inline OfrConfig preset_config(std::string_view name) {
    OfrConfig cfg;
    cfg.preset = std::string(name);
    if (name == "test1" || name == "test2") {
        cfg.hidden_widths = {128, 256, 256, 256};
        cfg.train.epochs = name == "test1" ? 500 : 10000;
        cfg.train.patience = name == "test1" ? 0 : 100;
    } else if (name == "test3") {
        cfg.hidden_widths = {13, 100};
        cfg.train.epochs = 10000;
        cfg.train.patience = 200;
    } else {
        throw std::invalid_argument("unknown preset '" + std::string(name) + "' (expected test1, test2 or test3)");
    }
    cfg.repetitions = name == "test1" ? 100 : 10;
    return cfg;
}

/// Inner solver: trains a freshly initialized network (fixed seed) on the
/// training rows, early-stopping against the validation rows.
struct FfnnSolver {
    std::vector<int> widths;
    std::vector<Activation> activations;
    TrainConfig train_config;

    static FfnnSolver from(const OfrConfig& cfg, std::size_t inputs) {
        return {cfg.widths(inputs), cfg.activations(), cfg.train};
    }

    TrainResult fit(const Dataset& train_set, const Dataset& val_set) const {
        Network net = init_network(widths, activations, train_config.weight_init_seed);
        return train(std::move(net), train_set, val_set, train_config);
    }

    Vector operator()(const Dataset& train_set, const Dataset& val_set) const {
        return predict(fit(train_set, val_set).net, val_set.features);
    }
};

/// Validation RMSE after training on the rescaled training rows. `solve`
/// maps (train, validation) to validation predictions. Diverged training
/// yields kPenaltyFitness.
template <class Solver>
double ofr_objective(const Genome& genome, const Dataset& train_set, const Dataset& val_set, const Solver& solve) {
    const ScaleVector s = decode_genome(genome);
    const Dataset train_scaled = rescale(train_set, s);
    const Dataset val_scaled = rescale(val_set, s);
    try {
        const Vector predictions = solve(train_scaled, val_scaled);
        const double value = rmse(predictions, val_scaled.targets);
        return std::isfinite(value) ? value : kPenaltyFitness;
    } catch (const TrainingError&) {
        return kPenaltyFitness;
    } catch (const std::domain_error&) {
        return kPenaltyFitness;
    }
}

inline double ofr_objective(const Genome& genome, const Dataset& train_set, const Dataset& val_set,
                            const OfrConfig& cfg) {
    return ofr_objective(genome, train_set, val_set, FfnnSolver::from(cfg, train_set.cols()));
}

/// CV recipe: rescale, carve an early-stopping holdout when patience > 0,
/// train from a seed-initialized network, predict on rescaled inputs.
inline Recipe ffnn_recipe(const OfrConfig& cfg, ScaleVector scales) {
    return [cfg, scales = std::move(scales)](const Dataset& data, std::uint64_t seed) -> Predictor {
        TrainConfig tc = cfg.train;
        tc.weight_init_seed = seed;
        const Dataset scaled = rescale(data, scales);
        Network net = init_network(cfg.widths(data.cols()), cfg.activations(), seed);
        TrainResult fitted;
        if (tc.patience > 0) {
            const auto n = scaled.rows();
            const auto n_es = std::max<std::size_t>(1, static_cast<std::size_t>(cfg.es_holdout * static_cast<double>(n)));
            if (n_es >= n) throw std::invalid_argument("ffnn recipe: too few rows for an early-stopping holdout");
            auto idx = shuffled_indices(n, derive_seed(seed, 1));
            std::vector<std::size_t> es_rows(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_es));
            std::vector<std::size_t> fit_rows(idx.begin() + static_cast<std::ptrdiff_t>(n_es), idx.end());
            fitted = train(std::move(net), scaled.subset(fit_rows), scaled.subset(es_rows), tc);
        } else {
            fitted = train(std::move(net), scaled, nullptr, tc);
        }
        return [net = std::move(fitted.net), scales](const Matrix& x) { return predict(net, rescale(x, scales)); };
    };
}

/// Cross-validation averaged over `seeds` (one full CV run per seed, same folds).
inline CvReport repeated_cross_validate(const Recipe& recipe, const Dataset& data, const FoldSet& folds,
                                        std::span<const std::uint64_t> seeds, unsigned threads) {
    std::vector<CvReport> reports;
    reports.reserve(seeds.size());
    for (auto seed : seeds) reports.push_back(cross_validate(recipe, data, folds, seed, threads));
    return average_reports(reports);
}

/// Standardized train/validation/test portions of the hold-out split.
struct PreparedData {
    DataSplit raw;
    Standardizer standardizer;
    Dataset train;
    Dataset validation;
    Dataset test;

    Dataset cv_pool() const { return concat(train, validation); }
};

inline PreparedData prepare(const Dataset& data, const OfrConfig& cfg) {
    data.validate();
    PreparedData p;
    p.raw = holdout_split(data, kHoldoutRatios, cfg.split_seed);
    p.standardizer = fit_standardizer(p.raw.train);
    p.train = p.standardizer.apply(p.raw.train);
    p.validation = p.standardizer.apply(p.raw.validation);
    p.test = p.standardizer.apply(p.raw.test);
    return p;
}

inline std::vector<std::uint64_t> repetition_seeds(const OfrConfig& cfg) {
    if (cfg.repetitions < 1) throw std::invalid_argument("repetitions must be >= 1");
    std::vector<std::uint64_t> seeds;
    for (std::size_t r = 0; r < cfg.repetitions; ++r) seeds.push_back(derive_seed(cfg.train.weight_init_seed, r + 1));
    return seeds;
}

/// Cross-validated report for a given scale vector on the train+validation pool.
inline CvReport evaluate_scales(const PreparedData& prepared, const OfrConfig& cfg, const ScaleVector& scales) {
    const Dataset pool = prepared.cv_pool();
    const FoldSet folds = kfold_split(pool, cfg.folds, cfg.cv_seed);
    const auto seeds = repetition_seeds(cfg);
    return repeated_cross_validate(ffnn_recipe(cfg, scales), pool, folds, seeds, cfg.threads);
}

/// Standardized baseline: identity scales through the same CV protocol.
inline CvReport run_baseline(const Dataset& data, const OfrConfig& cfg) {
    const auto prepared = prepare(data, cfg);
    return evaluate_scales(prepared, cfg, ScaleVector::identity(data.cols()));
}

struct OfrTiming {
    double ga_seconds = 0.0;
    double baseline_cv_seconds = 0.0;
    double ofr_cv_seconds = 0.0;
};

struct OfrResult {
    Genome best_genome;
    ScaleVector best_scales;
    double best_val_rmse = 0.0;
    std::vector<double> ga_history;
    std::size_t evaluation_count = 0;
    std::size_t penalized_evaluations = 0;
    CvReport baseline_report;
    CvReport ofr_report;
    OfrTiming timing;
    std::vector<std::string> column_names;
};

struct OfrHooks {
    GaObserver observer;
    std::optional<std::vector<Genome>> initial_population;
};

inline OfrResult run_ofr(const Dataset& data, OfrConfig cfg, const OfrHooks& hooks = {}) {
    const auto prepared = prepare(data, cfg);
    cfg.ga.genes = data.cols();
    cfg.ga.threads = cfg.threads;
    const FfnnSolver solver = FfnnSolver::from(cfg, data.cols());

    std::atomic<std::size_t> penalized{0};
    auto objective = [&](const Genome& g) {
        const double f = ofr_objective(g, prepared.train, prepared.validation, solver);
        if (f == kPenaltyFitness) ++penalized;
        return f;
    };

    std::optional<std::vector<Individual>> initial;
    if (hooks.initial_population) {
        initial.emplace();
        for (const auto& g : *hooks.initial_population) initial->push_back({g, std::nullopt});
    }

    OfrResult result;
    result.column_names = data.column_names;
    Stopwatch ga_clock;
    GaResult ga = ga_run(objective, cfg.ga, hooks.observer, std::move(initial));
    result.timing.ga_seconds = ga_clock.seconds();
    result.best_genome = ga.best.genome;
    result.best_scales = decode_genome(ga.best.genome);
    result.best_val_rmse = *ga.best.fitness;
    result.ga_history = ga.best_history;
    result.evaluation_count = ga.evaluation_count;
    result.penalized_evaluations = penalized.load();

    Stopwatch base_clock;
    result.baseline_report = evaluate_scales(prepared, cfg, ScaleVector::identity(data.cols()));
    result.timing.baseline_cv_seconds = base_clock.seconds();
    Stopwatch ofr_clock;
    result.ofr_report = evaluate_scales(prepared, cfg, result.best_scales);
    result.timing.ofr_cv_seconds = ofr_clock.seconds();
    return result;
}

struct EfficiencyRow {
    std::string method;
    double r2_train = 0.0;
    double r2_test = 0.0;
    double seconds = 0.0;
    int stopped_epoch = 0;
};

/// Trains one network per method (OFR with `scales`, BASE with identity) from
/// the same initial weights; scores the train and test splits and times training.
inline std::vector<EfficiencyRow> efficiency_benchmark(const Dataset& data, const OfrConfig& cfg,
                                                       const ScaleVector& scales) {
    if (scales.size() != data.cols())
        throw std::invalid_argument("efficiency benchmark: " + std::to_string(scales.size()) + " scales for " +
                                    std::to_string(data.cols()) + " features");
    const auto prepared = prepare(data, cfg);
    const FfnnSolver solver = FfnnSolver::from(cfg, data.cols());
    std::vector<EfficiencyRow> rows;
    for (const auto& [name, s] : {std::pair{std::string("OFR"), scales},
                                  std::pair{std::string("BASE"), ScaleVector::identity(data.cols())}}) {
        const Dataset tr = rescale(prepared.train, s);
        const Dataset va = rescale(prepared.validation, s);
        const Dataset te = rescale(prepared.test, s);
        const TrainResult fitted = solver.fit(tr, va);
        EfficiencyRow row;
        row.method = name;
        row.r2_train = r_squared(predict(fitted.net, tr.features), tr.targets);
        row.r2_test = r_squared(predict(fitted.net, te.features), te.targets);
        row.seconds = fitted.report.wall_time_seconds;
        row.stopped_epoch = fitted.report.stopped_epoch;
        rows.push_back(row);
    }
    return rows;
}

inline std::string render_efficiency_table(std::span<const EfficiencyRow> rows) {
    std::string out = "Method   |  R² (Train) |   R² (Test) |     Time [s]\n";
    out += "---------+-------------+-------------+-------------\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-8s | %11.6f | %11.6f | %12.6f\n", r.method.c_str(), r.r2_train, r.r2_test,
                      r.seconds);
        out += buf;
    }
    return out;
}

}  // namespace ofr
