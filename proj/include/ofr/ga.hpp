#pragma once

// Real-valued elitist genetic algorithm over bounded genomes.

#include "ofr/common.hpp"
#include "ofr/scaling.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace ofr {

struct GaConfig {
    std::size_t genes = 0;  // genome length (feature count)
    std::size_t population_size = 20;
    std::size_t offspring_count = 20;
    std::size_t iterations = 100;
    double gene_low = kGeneLow;
    double gene_high = kGeneHigh;
    double alpha_low = -0.1;
    double alpha_high = 0.1;
    double mutation_rate = 0.2;
    double mutation_sigma = 0.1;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    void validate() const {
        if (genes < 1) throw std::invalid_argument("ga config: genome length must be >= 1");
        if (population_size < 2) throw std::invalid_argument("ga config: population size must be >= 2");
        if (!(gene_low < gene_high)) throw std::invalid_argument("ga config: gene bounds must satisfy low < high");
        if (!(alpha_low <= alpha_high)) throw std::invalid_argument("ga config: crossover alpha range is empty");
        if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0))
            throw std::invalid_argument("ga config: mutation rate must lie in [0, 1]");
        if (!(mutation_sigma >= 0.0)) throw std::invalid_argument("ga config: mutation sigma must be >= 0");
    }

    std::size_t expected_evaluations() const { return population_size + iterations * offspring_count; }
};

struct Individual {
    Genome genome;
    std::optional<double> fitness;  // empty until evaluated
};

struct GaResult {
    Individual best;
    std::vector<double> best_history;  // entry 0 is the initial population, then one per iteration
    std::size_t evaluation_count = 0;
    std::vector<Individual> final_population;
};

/// Genes i.i.d. uniform on the gene bounds.
inline std::vector<Individual> init_population(const GaConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    std::uniform_real_distribution<double> dist(cfg.gene_low, cfg.gene_high);
    std::vector<Individual> pop(cfg.population_size);
    for (auto& ind : pop) {
        ind.genome.genes.resize(cfg.genes);
        for (double& g : ind.genome.genes) g = dist(rng);
    }
    return pop;
}

inline std::vector<Individual> init_population(const GaConfig& cfg) {
    std::mt19937_64 rng(cfg.seed);
    return init_population(cfg, rng);
}

/// y1 = a*x1 + (1-a)*x2, y2 = a*x2 + (1-a)*x1, each clamped to [low, high].
inline std::pair<Genome, Genome> uniform_crossover(const Genome& x1, const Genome& x2, double alpha,
                                                   double low = kGeneLow, double high = kGeneHigh) {
    if (x1.size() != x2.size()) throw std::invalid_argument("uniform_crossover: parent length mismatch");
    std::pair<Genome, Genome> out;
    out.first.genes.resize(x1.size());
    out.second.genes.resize(x1.size());
    for (std::size_t i = 0; i < x1.size(); ++i) {
        out.first.genes[i] = std::clamp(alpha * x1.genes[i] + (1.0 - alpha) * x2.genes[i], low, high);
        out.second.genes[i] = std::clamp(alpha * x2.genes[i] + (1.0 - alpha) * x1.genes[i], low, high);
    }
    return out;
}

/// Adds a drawn perturbation; out-of-range results snap to the nearest bound.
inline double mutate_gene(double gene, double delta, double low = kGeneLow, double high = kGeneHigh) {
    return std::clamp(gene + delta, low, high);
}

/// Each gene mutates with probability mutation_rate by adding N(0, sigma^2).
inline Genome mutate(Genome y, const GaConfig& cfg, std::mt19937_64& rng) {
    std::bernoulli_distribution hit(cfg.mutation_rate);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (double& g : y.genes) {
        if (!hit(rng)) continue;
        g = mutate_gene(g, cfg.mutation_sigma * noise(rng), cfg.gene_low, cfg.gene_high);
    }
    return y;
}

/// Raised when the objective returns a non-finite value.
class ObjectiveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using Objective = std::function<double(const Genome&)>;

/// Called after initialization (iteration 0) and after every iteration with
/// the sorted population.
using GaObserver = std::function<void(std::size_t iteration, std::span<const Individual> population,
                                      std::size_t evaluations)>;

namespace detail {

inline void evaluate_all(std::vector<Individual>& individuals, const Objective& objective, const GaConfig& cfg) {
    parallel_for(individuals.size(), cfg.threads, [&](std::size_t i) {
        auto& ind = individuals[i];
        for (double g : ind.genome.genes)
            if (!(g >= cfg.gene_low && g <= cfg.gene_high))
                throw std::logic_error("ga: genome left the gene bounds: " + to_csv_row(ind.genome));
        const double f = objective(ind.genome);
        if (!std::isfinite(f))
            throw ObjectiveError("objective returned " + format_double(f) + " for genome " + to_csv_row(ind.genome));
        ind.fitness = f;
    });
}

inline void sort_population(std::vector<Individual>& pop) {
    std::stable_sort(pop.begin(), pop.end(),
                     [](const Individual& a, const Individual& b) { return *a.fitness < *b.fitness; });
}

}  // namespace detail

inline double median_fitness(std::span<const Individual> pop) {
    std::vector<double> f;
    for (const auto& ind : pop) f.push_back(*ind.fitness);
    std::sort(f.begin(), f.end());
    const auto n = f.size();
    return n % 2 ? f[n / 2] : 0.5 * (f[n / 2 - 1] + f[n / 2]);
}

/// Minimizes `objective`. Each iteration draws parent pairs (two distinct
/// members, uniformly), crosses them with a fresh alpha per pair, mutates both
/// children, evaluates them, merges with the population, stable-sorts by
/// fitness (incumbents first on ties) and keeps the best population_size.
inline GaResult ga_run(const Objective& objective, const GaConfig& cfg, const GaObserver& observer = {},
                       std::optional<std::vector<Individual>> initial = std::nullopt) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::vector<Individual> pop = init_population(cfg, rng);
    if (initial) {
        if (initial->size() != cfg.population_size) throw std::invalid_argument("ga_run: initial population size");
        pop = std::move(*initial);
        for (const auto& ind : pop)
            if (ind.genome.size() != cfg.genes) throw std::invalid_argument("ga_run: initial genome length");
    }

    GaResult result;
    detail::evaluate_all(pop, objective, cfg);
    result.evaluation_count = pop.size();
    detail::sort_population(pop);
    result.best_history.push_back(*pop.front().fitness);
    if (observer) observer(0, pop, result.evaluation_count);

    std::uniform_int_distribution<std::size_t> pick(0, cfg.population_size - 1);
    std::uniform_int_distribution<std::size_t> pick_other(0, cfg.population_size - 2);
    std::uniform_real_distribution<double> alpha_dist(cfg.alpha_low, cfg.alpha_high);

    for (std::size_t it = 1; it <= cfg.iterations; ++it) {
        std::vector<Individual> children;
        children.reserve(cfg.offspring_count);
        while (children.size() < cfg.offspring_count) {
            const auto a = pick(rng);
            auto b = pick_other(rng);
            if (b >= a) ++b;
            const double alpha = alpha_dist(rng);
            auto [y1, y2] = uniform_crossover(pop[a].genome, pop[b].genome, alpha, cfg.gene_low, cfg.gene_high);
            children.push_back({mutate(std::move(y1), cfg, rng), std::nullopt});
            if (children.size() < cfg.offspring_count) children.push_back({mutate(std::move(y2), cfg, rng), std::nullopt});
        }
        detail::evaluate_all(children, objective, cfg);
        result.evaluation_count += children.size();

        pop.insert(pop.end(), std::make_move_iterator(children.begin()), std::make_move_iterator(children.end()));
        detail::sort_population(pop);
        pop.resize(cfg.population_size);
        result.best_history.push_back(*pop.front().fitness);
        if (observer) observer(it, pop, result.evaluation_count);
    }

    result.best = pop.front();
    result.final_population = std::move(pop);
    return result;
}

inline std::string ga_log_header() { return "iteration,best_fitness,median_fitness,evaluations"; }

inline std::string ga_log_line(std::size_t iteration, std::span<const Individual> pop, std::size_t evaluations) {
    return std::to_string(iteration) + ',' + format_double(*pop.front().fitness) + ',' +
           format_double(median_fitness(pop)) + ',' + std::to_string(evaluations);
}

}  // namespace ofr
