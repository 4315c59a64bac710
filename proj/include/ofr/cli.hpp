#pragma once

#include "ofr/pipeline.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

namespace ofr::cli {

/// Bad flags or missing inputs. Exit status 2.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Everything a command needs. Unset optionals fall back to the preset.
struct Settings {
    std::string command;
    std::string data;
    std::string out;
    std::string scales;
    std::string preset = "test3";
    std::uint64_t seed = 0;
    std::optional<std::size_t> ga_iters, ga_pop, ga_offspring;
    unsigned threads = 1;
    std::optional<std::size_t> n;
    double noise = 0.1;
    std::optional<int> epochs, patience;
    std::optional<std::size_t> reps, folds;
    std::optional<double> lr;
};

// ---------------------------------------------------------------- key = value files

struct KeyValue {
    std::string key;
    std::string value;
};

/// Parses "key = value" lines. Blank lines and lines starting with '#' are skipped.
inline std::vector<KeyValue> parse_key_values(std::string_view text, const std::string& source) {
    std::vector<KeyValue> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        const auto line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ParseError(source + ":" + std::to_string(line_no) + ": expected 'key = value'");
        std::string key(trim(line.substr(0, eq)));
        if (key.empty()) throw ParseError(source + ":" + std::to_string(line_no) + ": empty key");
        std::replace(key.begin(), key.end(), '_', '-');
        out.push_back({key, std::string(trim(line.substr(eq + 1)))});
    }
    return out;
}

inline std::string one_line(std::string_view msg) {
    std::string s(trim(msg));
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------- outputs

/// Files produced by a command, committed together at the end so a failure
/// leaves nothing half-written.
class OutputSet {
public:
    void add(std::string path, std::string content) { files_.emplace_back(std::move(path), std::move(content)); }

    std::vector<std::string> paths() const {
        std::vector<std::string> p;
        for (const auto& f : files_) p.push_back(f.first);
        return p;
    }

    void commit() const {
        std::vector<std::string> written;
        try {
            for (const auto& [path, content] : files_) {
                write_atomic(path, content);
                written.push_back(path);
            }
        } catch (...) {
            std::error_code ec;
            for (const auto& p : written) std::filesystem::remove(p, ec);
            throw;
        }
    }

    static void write_atomic(const std::string& path, const std::string& content) {
        const std::string tmp = path + ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw std::runtime_error(path + ": cannot write file");
            out << content;
            out.flush();
            if (!out) {
                std::error_code ec;
                std::filesystem::remove(tmp, ec);
                throw std::runtime_error(path + ": write failed");
            }
        }
        std::error_code ec;
        std::filesystem::rename(tmp, path, ec);
        if (ec) {
            std::filesystem::remove(tmp, ec);
            throw std::runtime_error(path + ": cannot write file");
        }
    }

private:
    std::vector<std::pair<std::string, std::string>> files_;
};

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
    const std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Replayable run record. `entries` are the effective settings; `notes`
/// (derived seeds, artifact paths, timings) are written as comments and
/// ignored when the manifest is read back.
struct RunManifest {
    std::vector<KeyValue> entries;
    std::vector<KeyValue> notes;

    void set(std::string key, std::string value) { entries.push_back({std::move(key), std::move(value)}); }
    void note(std::string key, std::string value) { notes.push_back({std::move(key), std::move(value)}); }

    std::string render() const {
        std::string out = "# ofr run manifest\n";
        for (const auto& e : entries) out += e.key + " = " + e.value + "\n";
        for (const auto& n : notes) out += "# " + n.key + " = " + n.value + "\n";
        return out;
    }
};

inline std::string manifest_path(const std::string& out) { return out + ".manifest"; }

// ---------------------------------------------------------------- settings -> config

struct DerivedSeeds {
    std::uint64_t split, cv, weights, ga;
};

inline DerivedSeeds derive_seeds(std::uint64_t master) {
    return {derive_seed(master, 1), derive_seed(master, 2), derive_seed(master, 3), derive_seed(master, 4)};
}

inline OfrConfig resolve_config(const Settings& s) {
    OfrConfig cfg = preset_config(s.preset);
    const auto seeds = derive_seeds(s.seed);
    cfg.split_seed = seeds.split;
    cfg.cv_seed = seeds.cv;
    cfg.train.weight_init_seed = seeds.weights;
    cfg.ga.seed = seeds.ga;
    if (s.ga_iters) cfg.ga.iterations = *s.ga_iters;
    if (s.ga_pop) {
        cfg.ga.population_size = *s.ga_pop;
        cfg.ga.offspring_count = *s.ga_pop;
    }
    if (s.ga_offspring) cfg.ga.offspring_count = *s.ga_offspring;
    if (s.epochs) cfg.train.epochs = *s.epochs;
    if (s.patience) cfg.train.patience = *s.patience;
    if (s.reps) cfg.repetitions = *s.reps;
    if (s.folds) cfg.folds = *s.folds;
    if (s.lr) cfg.train.learning_rate = *s.lr;
    cfg.threads = s.threads;
    try {
        cfg.train.validate();
        GaConfig ga = cfg.ga;
        ga.genes = 1;
        ga.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    if (cfg.repetitions < 1) throw UsageError("--reps must be >= 1");
    if (cfg.folds < 2) throw UsageError("--folds must be >= 2");
    return cfg;
}

inline void record_model_settings(RunManifest& m, const Settings& s, const OfrConfig& cfg) {
    m.set("data", s.data);
    m.set("out", s.out);
    m.set("preset", s.preset);
    m.set("seed", std::to_string(s.seed));
    m.set("epochs", std::to_string(cfg.train.epochs));
    m.set("patience", std::to_string(cfg.train.patience));
    m.set("lr", format_double(cfg.train.learning_rate));
    m.set("reps", std::to_string(cfg.repetitions));
    m.set("folds", std::to_string(cfg.folds));
    m.set("threads", std::to_string(cfg.threads));
    m.note("split_seed", std::to_string(cfg.split_seed));
    m.note("cv_seed", std::to_string(cfg.cv_seed));
    m.note("weight_init_seed", std::to_string(cfg.train.weight_init_seed));
}

inline Dataset load_data(const Settings& s) {
    if (s.data.empty()) throw UsageError("--data is required for '" + s.command + "'");
    return load_csv(s.data);
}

/// Scales file: header row of feature names, then one row of positive factors.
inline ScaleVector read_scales_file(const std::string& path, std::size_t expected) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const ParseError&) {
        throw ParseError(path + ": cannot open scales file");
    }
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto end = std::min(text.find('\n', pos), text.size());
        const auto line = trim(std::string_view(text).substr(pos, end - pos));
        if (!line.empty()) lines.push_back(line);
        pos = end + 1;
    }
    if (lines.size() != 2) throw ParseError(path + ": expected a header row and one row of scales");
    ScaleVector s;
    try {
        s = parse_scales(lines[1]);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (split_fields(lines[0]).size() != s.size()) throw ParseError(path + ": header and scales differ in length");
    if (s.size() != expected)
        throw ParseError(path + ": " + std::to_string(s.size()) + " scales for " + std::to_string(expected) +
                         " features");
    return s;
}

inline std::string scales_csv(const std::vector<std::string>& names, const ScaleVector& s) {
    std::string header;
    for (std::size_t i = 0; i < names.size(); ++i) header += (i ? "," : "") + names[i];
    return header + "\n" + to_csv_row(s) + "\n";
}

// ---------------------------------------------------------------- commands

struct Context {
    std::ostream& out;
    std::ostream& err;
};

inline std::string cv_results_csv(std::span<const MethodReport> rows) {
    std::string csv = cv_csv_header() + "\n";
    for (const auto& r : rows) csv += to_csv_row(r) + "\n";
    return csv;
}

inline std::string improvement_line(const CvReport& ofr, const CvReport& base) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "improvement: %+.2f %%\n", improvement_percent(ofr.mean, base.mean));
    return buf;
}

inline int cmd_generate(const Settings& s, Context ctx) {
    if (!s.n) throw UsageError("--n is required for 'generate'");
    if (*s.n == 0) throw UsageError("--n must be positive");
    if (!(s.noise >= 0.0) || !std::isfinite(s.noise)) throw UsageError("--noise must be a finite value >= 0");
    if (s.out.empty()) throw UsageError("--out is required for 'generate'");
    const auto started = std::chrono::system_clock::now();
    const Dataset d = generate_surrogate(*s.n, s.noise, s.seed);
    std::ostringstream csv;
    write_csv(d, csv);

    RunManifest m;
    m.set("command", "generate");
    m.set("n", std::to_string(*s.n));
    m.set("noise", format_double(s.noise));
    m.set("seed", std::to_string(s.seed));
    m.set("out", s.out);
    m.note("started", utc_timestamp(started));
    m.note("finished", utc_timestamp(std::chrono::system_clock::now()));
    m.note("artifact", s.out);

    OutputSet files;
    files.add(s.out, csv.str());
    files.add(manifest_path(s.out), m.render());
    files.commit();
    ctx.out << "wrote " << d.rows() << " rows x " << d.cols() << " features to " << s.out << "\n";
    return kExitOk;
}

inline int cmd_baseline(const Settings& s, Context ctx) {
    const OfrConfig cfg = resolve_config(s);
    const Dataset d = load_data(s);
    const auto started = std::chrono::system_clock::now();
    Stopwatch clock;
    const CvReport base = run_baseline(d, cfg);
    const double seconds = clock.seconds();

    const std::vector<MethodReport> rows{{"BASE", base}};
    RunManifest m;
    m.set("command", "baseline");
    record_model_settings(m, s, cfg);
    m.note("started", utc_timestamp(started));
    m.note("finished", utc_timestamp(std::chrono::system_clock::now()));
    m.note("cv_seconds", format_double(seconds));
    m.note("artifact", s.out);

    OutputSet files;
    files.add(s.out, cv_results_csv(rows));
    files.add(manifest_path(s.out), m.render());
    files.commit();
    ctx.out << render_cv_table(rows);
    return kExitOk;
}

inline int cmd_ofr(const Settings& s, Context ctx) {
    const OfrConfig cfg = resolve_config(s);
    const Dataset d = load_data(s);
    const auto started = std::chrono::system_clock::now();

    std::string ga_log = ga_log_header() + "\n";
    OfrHooks hooks;
    hooks.observer = [&](std::size_t it, std::span<const Individual> pop, std::size_t evals) {
        ga_log += ga_log_line(it, pop, evals) + "\n";
        ctx.err << "generation " << it << "/" << cfg.ga.iterations << " best " << format_double(*pop.front().fitness)
                << "\n";
    };
    const OfrResult r = run_ofr(d, cfg, hooks);

    const std::vector<MethodReport> rows{{"OFR", r.ofr_report}, {"BASE", r.baseline_report}};
    const std::string scales_path = s.out + ".scales.csv";
    const std::string log_path = s.out + ".ga_log.csv";

    RunManifest m;
    m.set("command", "ofr");
    record_model_settings(m, s, cfg);
    m.set("ga-iters", std::to_string(cfg.ga.iterations));
    m.set("ga-pop", std::to_string(cfg.ga.population_size));
    m.set("ga-offspring", std::to_string(cfg.ga.offspring_count));
    m.note("ga_seed", std::to_string(cfg.ga.seed));
    m.note("started", utc_timestamp(started));
    m.note("finished", utc_timestamp(std::chrono::system_clock::now()));
    m.note("ga_seconds", format_double(r.timing.ga_seconds));
    m.note("baseline_cv_seconds", format_double(r.timing.baseline_cv_seconds));
    m.note("ofr_cv_seconds", format_double(r.timing.ofr_cv_seconds));
    m.note("artifact", s.out);
    m.note("artifact", scales_path);
    m.note("artifact", log_path);

    OutputSet files;
    files.add(s.out, cv_results_csv(rows));
    files.add(scales_path, scales_csv(d.column_names, r.best_scales));
    files.add(log_path, ga_log);
    files.add(manifest_path(s.out), m.render());
    files.commit();

    ctx.out << render_cv_table(rows);
    ctx.out << improvement_line(r.ofr_report, r.baseline_report);
    ctx.out << "evaluations: " << r.evaluation_count << " (penalized " << r.penalized_evaluations << ")\n";
    ctx.out << "best validation rmse: " << format_double(r.best_val_rmse) << "\n";
    ctx.out << "scales:\n";
    for (std::size_t i = 0; i < r.best_scales.size(); ++i)
        ctx.out << "  " << d.column_names[i] << " = " << format_double(r.best_scales.scales[i]) << "\n";
    return kExitOk;
}

inline int cmd_bench(const Settings& s, Context ctx) {
    const OfrConfig cfg = resolve_config(s);
    if (s.scales.empty()) throw UsageError("--scales is required for 'bench'");
    const Dataset d = load_data(s);
    const ScaleVector scales = read_scales_file(s.scales, d.cols());
    const auto started = std::chrono::system_clock::now();
    const auto rows = efficiency_benchmark(d, cfg, scales);

    std::string csv = "method,r2_train,r2_test,seconds,stopped_epoch\n";
    for (const auto& r : rows)
        csv += r.method + "," + format_double(r.r2_train) + "," + format_double(r.r2_test) + "," +
               format_double(r.seconds) + "," + std::to_string(r.stopped_epoch) + "\n";

    RunManifest m;
    m.set("command", "bench");
    record_model_settings(m, s, cfg);
    m.set("scales", s.scales);
    m.note("started", utc_timestamp(started));
    m.note("finished", utc_timestamp(std::chrono::system_clock::now()));
    m.note("artifact", s.out);

    OutputSet files;
    files.add(s.out, csv);
    files.add(manifest_path(s.out), m.render());
    files.commit();
    ctx.out << render_efficiency_table(rows);
    return kExitOk;
}

// ---------------------------------------------------------------- argument parsing

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"generate", "baseline", "ofr", "bench", "replay"};
    return names;
}

inline std::string usage() {
    return "usage: ofr <generate|baseline|ofr|bench|replay> [options]\n"
           "  ofr <command> --help   lists the options of a command\n";
}

/// Expands --config FILE into "--key value" tokens placed ahead of the
/// remaining arguments, so explicit flags win.
inline std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::vector<std::string> prefix, rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        std::string path;
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw UsageError("--config needs a file path");
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
            continue;
        }
        for (const auto& kv : parse_key_values(read_text_file(path), path)) {
            if (kv.key == "command") continue;  // manifests double as config files
            prefix.push_back("--" + kv.key);
            prefix.push_back(kv.value);
        }
    }
    prefix.insert(prefix.end(), rest.begin(), rest.end());
    return prefix;
}

inline void add_options(CLI::App& app, Settings& s, const std::string& command) {
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.add_option("--seed", s.seed, "master seed; all other seeds derive from it");
    app.add_option("--threads", s.threads, "worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", s.out, "output file (a .manifest is written next to it)");
    if (command == "generate") {
        app.add_option("--n", s.n, "number of samples");
        app.add_option("--noise", s.noise, "noise standard deviation");
        return;
    }
    app.add_option("--data", s.data, "input CSV (last column is the target)");
    app.add_option("--preset", s.preset, "test1, test2 or test3")->check(CLI::IsMember({"test1", "test2", "test3"}));
    app.add_option("--epochs", s.epochs, "training epochs");
    app.add_option("--patience", s.patience, "early-stopping patience (0 disables)");
    app.add_option("--lr", s.lr, "ADAM learning rate");
    app.add_option("--reps", s.reps, "repetitions averaged per CV fold");
    app.add_option("--folds", s.folds, "cross-validation folds");
    if (command == "ofr") {
        app.add_option("--ga-iters", s.ga_iters, "GA iterations");
        app.add_option("--ga-pop", s.ga_pop, "GA population size (also sets offspring count)");
        app.add_option("--ga-offspring", s.ga_offspring, "GA offspring per iteration");
    }
    if (command == "bench") app.add_option("--scales", s.scales, "scales CSV written by 'ofr'");
}

inline int dispatch(const Settings& s, Context ctx) {
    if (s.command == "generate") return cmd_generate(s, ctx);
    if (s.command == "baseline") return cmd_baseline(s, ctx);
    if (s.command == "ofr") return cmd_ofr(s, ctx);
    if (s.command == "bench") return cmd_bench(s, ctx);
    throw UsageError("unknown command '" + s.command + "'");
}

inline Settings parse_settings(const std::string& command, const std::vector<std::string>& args, Context ctx,
                               bool& help_shown) {
    Settings s;
    s.command = command;
    if (command != "generate") s.out = command + "_results.csv";
    CLI::App app("ofr " + command, "ofr " + command);
    add_options(app, s, command);
    std::vector<std::string> tokens = expand_config(args);
    app.add_option("--config", "key = value file; explicit flags override it");
    std::reverse(tokens.begin(), tokens.end());
    try {
        app.parse(tokens);
    } catch (const CLI::CallForHelp&) {
        ctx.out << app.help();
        help_shown = true;
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }
    return s;
}

/// Runs one command. Returns the process exit status; diagnostics go to `err`
/// as a single line.
inline int run(const std::vector<std::string>& argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    Context ctx{out, err};
    try {
        if (argv.empty() || argv[0] == "--help" || argv[0] == "-h") {
            (argv.empty() ? err : out) << usage();
            return argv.empty() ? kExitUsage : kExitOk;
        }
        std::string command = argv[0];
        std::vector<std::string> args(argv.begin() + 1, argv.end());
        if (std::find(command_names().begin(), command_names().end(), command) == command_names().end())
            throw UsageError("unknown command '" + command + "'");

        if (command == "replay") {
            // ofr replay --manifest FILE [flags that override the manifest]
            std::string manifest;
            std::vector<std::string> rest;
            for (std::size_t i = 0; i < args.size(); ++i) {
                if (args[i] == "--manifest" && i + 1 < args.size()) manifest = args[++i];
                else rest.push_back(args[i]);
            }
            if (manifest.empty()) throw UsageError("replay needs --manifest FILE");
            std::string recorded;
            for (const auto& kv : parse_key_values(read_text_file(manifest), manifest))
                if (kv.key == "command") recorded = kv.value;
            if (recorded.empty() || recorded == "replay") throw ParseError(manifest + ": no command recorded");
            command = recorded;
            rest.insert(rest.begin(), {"--config", manifest});
            args = std::move(rest);
        }

        bool help_shown = false;
        const Settings s = parse_settings(command, args, ctx, help_shown);
        if (help_shown) return kExitOk;
        return dispatch(s, ctx);
    } catch (const UsageError& e) {
        err << "ofr: usage error: " << one_line(e.what()) << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "ofr: error: " << one_line(e.what()) << "\n";
        return kExitFailure;
    }
}

}  // namespace ofr::cli
