#include "cli.hpp"

#include "manifest.hpp"
#include "svg_plot.hpp"

#include "qiv/error.hpp"
#include "qiv/pipeline.hpp"
#include "qiv/predictor.hpp"
#include "qiv/serialize.hpp"
#include "qiv/simulator.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cstdlib>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace qiv::cli {

namespace {

// ------------------------------------------------------------ flag values

struct SelectFlags {
    std::string data;
    std::string out;
    std::string lambda = "empirical";
    int realizations = 20;
    std::optional<double> sigma;
    double tau = 0.1;
    std::optional<int> sis;
    std::uint64_t seed = 1;
};

struct FitFlags {
    std::string method = "m1";
    std::string d = "auto";
    int d_max = 5;
    std::string bandwidth = "gcv";
    double c = 2.0;
    double ck = 0.2;
    double rank_tol = kDefaultRankTol;
    bool no_noise_floor = false;
    double level = 0.95;
};

struct PredictFlags {
    std::string fit;
    std::string data;
    std::string out;
};

struct SimulateFlags {
    std::string config;
    std::string out;
    std::optional<int> reps;
    std::optional<std::uint64_t> seed;
    int threads = 1;
    bool plot = false;
};

double parse_positive(const std::string& text, const std::string& flag) {
    double v = 0.0;
    const char* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || !(v > 0.0) || !std::isfinite(v))
        throw validation_error("InvalidArgument", flag + " expects a positive number, got '" + text + "'");
    return v;
}

SelectionOptions selection_options(const SelectFlags& f) {
    SelectionOptions o;
    if (f.lambda == "empirical") {
        o.lambda.mode = LambdaMode::Empirical;
    } else if (f.lambda == "theoretical") {
        o.lambda.mode = LambdaMode::Theoretical;
    } else {
        o.lambda.mode = LambdaMode::Fixed;
        o.lambda.value = parse_positive(f.lambda, "--lambda");
    }
    if (f.realizations < 1) throw validation_error("InvalidArgument", "--realizations must be >= 1");
    o.lambda.realizations = f.realizations;
    if (f.sigma) {
        if (!(*f.sigma > 0.0)) throw validation_error("InvalidArgument", "--sigma must be positive");
        o.lambda.sigma = f.sigma;
    }
    if (!(f.tau >= 0.0)) throw validation_error("InvalidArgument", "--tau must be >= 0");
    o.tau = f.tau;
    if (f.sis && *f.sis < 1) throw validation_error("InvalidArgument", "--sis must be >= 1");
    o.sis_keep = f.sis;
    return o;
}

InstrumentOptions instrument_options(const FitFlags& f) {
    InstrumentOptions o;
    if (f.method == "m1") o.method = InstrumentMethod::Method1;
    else if (f.method == "m2") o.method = InstrumentMethod::Method2;
    else throw validation_error("InvalidArgument", "--method expects m1 or m2");
    if (f.d != "auto") {
        int d = 0;
        const char* end = f.d.data() + f.d.size();
        const auto [ptr, ec] = std::from_chars(f.d.data(), end, d);
        if (ec != std::errc() || ptr != end || d < 1)
            throw validation_error("InvalidArgument", "--d expects auto or a positive integer");
        o.d = d;
    }
    if (f.d_max < 1) throw validation_error("InvalidArgument", "--d-max must be >= 1");
    o.d_max = f.d_max;
    if (f.bandwidth != "gcv") o.bandwidth = parse_positive(f.bandwidth, "--bandwidth");
    if (!(f.c > 0.0) || !(f.ck > 0.0))
        throw validation_error("InvalidArgument", "--c and --ck must be positive");
    o.c = f.c;
    o.c_k = f.ck;
    if (!(f.rank_tol > 0.0 && f.rank_tol < 1.0))
        throw validation_error("InvalidArgument", "--rank-tol must lie in (0, 1)");
    o.rank_tol = f.rank_tol;
    o.noise_floor = !f.no_noise_floor;
    if (!(f.level > 0.0 && f.level < 1.0))
        throw validation_error("InvalidArgument", "--level must lie in (0, 1)");
    return o;
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }
Json optional_json(const std::optional<int>& v) { return v ? Json(*v) : Json(nullptr); }

Json select_arguments(const SelectFlags& f) {
    return Json{{"data", f.data},       {"out", f.out},
                {"lambda", f.lambda},   {"realizations", f.realizations},
                {"sigma", optional_json(f.sigma)}, {"tau", f.tau},
                {"sis", optional_json(f.sis)},     {"seed", f.seed}};
}

Json fit_arguments(const SelectFlags& s, const FitFlags& f) {
    Json j = select_arguments(s);
    j["method"] = f.method;
    j["d"] = f.d;
    j["d_max"] = f.d_max;
    j["bandwidth"] = f.bandwidth;
    j["c"] = f.c;
    j["ck"] = f.ck;
    j["rank_tol"] = f.rank_tol;
    j["noise_floor"] = !f.no_noise_floor;
    j["level"] = f.level;
    return j;
}

Json base_manifest(const std::string& command, const Json& arguments, const std::string& started) {
    Json m;
    m["tool"] = "qiv";
    m["version"] = kToolVersion;
    m["command"] = command;
    m["config_sha256"] = sha256_hex(arguments.dump());
    m["arguments"] = arguments;
    m["started_at"] = started;
    return m;
}

Json input_entry(const std::string& path) {
    return Json{{"path", path}, {"sha256", sha256_hex(read_file(path))}};
}

std::string variable(int index) { return "x" + std::to_string(index + 1); }

// ------------------------------------------------------------ commands

struct SelectRun {
    Dataset raw;
    Dataset data;
    SelectionStage stage;
};

SelectRun run_select_stage(const SelectFlags& f) {
    const SelectionOptions options = selection_options(f);
    Dataset raw = read_dataset(f.data);
    Dataset data = standardize(raw);
    SelectionStage stage = run_selection(data, options, f.seed);
    return {std::move(raw), std::move(data), std::move(stage)};
}

Json selection_summary(const SelectRun& r) {
    Json sel = Json::array();
    for (int j : r.stage.selection.selected) sel.push_back(j + 1);
    Json j{{"n", r.data.n()},
           {"p", r.data.p()},
           {"lambda", r.stage.lambda.lambda},
           {"sigma_hat", optional_json(r.stage.lambda.sigma)},
           {"selected", sel}};
    if (r.stage.selection.screened) {
        Json s = Json::array();
        for (int k : *r.stage.selection.screened) s.push_back(k + 1);
        j["screened"] = s;
    }
    return j;
}

int cmd_select(const SelectFlags& f, std::ostream& out) {
    const std::string started = utc_timestamp();
    const SelectRun r = run_select_stage(f);
    const Vector& beta = r.stage.selection.beta_full;
    const Vector& scales = r.data.column_scales();

    std::ostringstream beta_csv;
    beta_csv << "variable,beta_standardized,beta\n";
    for (int j = 0; j < r.data.p(); ++j)
        beta_csv << variable(j) << ',' << format_double(beta(j)) << ','
                 << format_double(beta(j) / scales(j)) << '\n';
    std::ostringstream sel_csv;
    sel_csv << "index,variable\n";
    for (int j : r.stage.selection.selected) sel_csv << j + 1 << ',' << variable(j) << '\n';

    OutputSet outputs(f.out);
    outputs.add("beta_full.csv", beta_csv.str());
    outputs.add("selected_indices.csv", sel_csv.str());

    Json m = base_manifest("select", select_arguments(f), started);
    m["master_seed"] = f.seed;
    m["inputs"] = Json::array({input_entry(f.data)});
    m["selection"] = selection_summary(r);
    m["warnings"] = r.stage.selection.warnings;
    outputs.commit(std::move(m));
    out << "selected " << r.stage.selection.selected.size() << " of " << r.data.p()
        << " predictors; outputs in " << f.out << '\n';
    return 0;
}

int cmd_fit(const SelectFlags& s, const FitFlags& f, std::ostream& out) {
    const std::string started = utc_timestamp();
    const InstrumentOptions options = instrument_options(f);
    const SelectRun r = run_select_stage(s);
    const Partition& part = r.stage.partition;
    const Vector y_raw = r.data.raw_y();
    const InstrumentStage st = run_instrument(part, y_raw, options);

    FitArtifact artifact;
    artifact.p = r.data.p();
    artifact.column_means = r.data.column_means();
    artifact.column_scales = r.data.column_scales();
    artifact.z_indices = part.z_indices;
    artifact.u_indices = part.u_indices;
    artifact.plan = st.plan;
    artifact.fit = st.fit;
    artifact.theta_ls = least_squares_coefficients(part.Z, y_raw);

    const auto ci = confidence_intervals(st.fit, f.level);
    std::ostringstream theta_csv;
    theta_csv << "variable,theta,std_error,ci_lower,ci_upper,theta_standardized\n";
    for (int k = 0; k < st.fit.q(); ++k) {
        const double scale = r.data.column_scales()(part.z_indices[k]);
        theta_csv << variable(part.z_indices[k]) << ','
                  << format_double(st.fit.theta_hat(k) / scale) << ','
                  << format_double(std::sqrt(st.fit.asym_cov(k, k)) / scale) << ','
                  << format_double(ci[static_cast<std::size_t>(k)].first / scale) << ','
                  << format_double(ci[static_cast<std::size_t>(k)].second / scale) << ','
                  << format_double(st.fit.theta_hat(k)) << '\n';
    }

    OutputSet outputs(s.out);
    outputs.add("fit.json", to_json(artifact).dump(2) + "\n");
    outputs.add("theta.csv", theta_csv.str());

    Json m = base_manifest("fit", fit_arguments(s, f), started);
    m["master_seed"] = s.seed;
    m["inputs"] = Json::array({input_entry(s.data)});
    m["selection"] = selection_summary(r);
    Json inst{{"method", to_string(st.plan.method)},
              {"d", st.plan.whiten.d()},
              {"rank", st.plan.rank},
              {"bandwidth", st.fit.h},
              {"bandwidth_source", st.bandwidth_from_gcv ? "gcv" : "fixed"},
              {"sigma_v_sq", st.fit.sigma_v_sq}};
    if (!st.d_selection.ranks.empty()) inst["d_selection_ranks"] = st.d_selection.ranks;
    m["instrument"] = std::move(inst);
    std::vector<std::string> warnings = r.stage.selection.warnings;
    warnings.insert(warnings.end(), st.warnings.begin(), st.warnings.end());
    m["warnings"] = warnings;
    outputs.commit(std::move(m));
    out << "fitted " << st.fit.q() << " coefficients with " << to_string(st.plan.method)
        << " (rank " << st.plan.rank << ", h = " << format_double(st.fit.h) << "); outputs in "
        << s.out << '\n';
    return 0;
}

int cmd_predict(const PredictFlags& f, std::ostream& out) {
    const std::string started = utc_timestamp();
    Json doc;
    try {
        doc = Json::parse(read_file(f.fit));
    } catch (const Json::parse_error& e) {
        throw validation_error("MalformedFit", f.fit + ": " + e.what());
    }
    const FitArtifact a = fit_artifact_from_json(doc);
    const CsvTable table = read_csv(f.data);
    const Eigen::Index n = table.values.rows();
    if (n < 1) throw validation_error("MalformedCsv", f.data + ": no data rows");

    std::map<int, int> position;  // zero-based variable -> CSV column
    int y_col = -1;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        const std::string& h = table.header[c];
        if (h == "y") {
            y_col = static_cast<int>(c);
            continue;
        }
        int j = 0;
        const char* end = h.data() + h.size();
        const auto [ptr, ec] = h.size() > 1 && h[0] == 'x'
                                   ? std::from_chars(h.data() + 1, end, j)
                                   : std::from_chars_result{h.data(), std::errc::invalid_argument};
        if (ec != std::errc() || ptr != end || j < 1 || j > a.p)
            throw validation_error("MalformedCsv", f.data + ": unexpected column '" + h + "'");
        position[j - 1] = static_cast<int>(c);
    }

    auto standardized_column = [&](int j) -> Vector {
        const Vector raw = table.values.col(position.at(j));
        return (raw.array() - a.column_means(j)) / a.column_scales(j);
    };
    Matrix Z(n, a.fit.q());
    for (int k = 0; k < a.z_indices.size(); ++k) {
        const int j = a.z_indices[k];
        if (!position.count(j))
            throw validation_error("MissingZColumns", "kept predictor " + variable(j) + " is absent");
        Z.col(k) = standardized_column(j);
    }
    Matrix U = Matrix::Zero(n, a.u_indices.size());
    std::vector<std::string> missing;
    for (int pos : a.plan.whiten.ustar_indices) {
        const int j = a.u_indices[pos];
        if (!position.count(j)) missing.push_back(variable(j));
        else U.col(pos) = standardized_column(j);
    }
    if (!missing.empty()) {
        std::string list;
        for (const auto& v : missing) list += (list.empty() ? "" : ", ") + v;
        throw validation_error("MissingUStarColumns", "instrument needs " + list);
    }

    std::size_t degenerate = 0;
    PredictionBundle b;
    b.y_adjusted = predict_adjusted(a.fit, a.plan, Z, U, &degenerate);
    b.y_working = predict_working(a.fit, Z);
    b.y_ls = Z * a.theta_ls;

    std::ostringstream csv;
    csv << "row_id,y_adjusted,y_working,y_ls\n";
    for (Eigen::Index i = 0; i < n; ++i)
        csv << i + 1 << ',' << format_double(b.y_adjusted(i)) << ',' << format_double(b.y_working(i))
            << ',' << format_double(b.y_ls(i)) << '\n';

    OutputSet outputs(f.out);
    outputs.add("predictions.csv", csv.str());
    Json m = base_manifest("predict", Json{{"fit", f.fit}, {"data", f.data}, {"out", f.out}}, started);
    m["inputs"] = Json::array({input_entry(f.fit), input_entry(f.data)});
    m["rows"] = n;
    m["degenerate_weight_rows"] = degenerate;
    std::vector<std::string> warnings;
    if (degenerate > 0)
        warnings.push_back(std::to_string(degenerate) +
                           " rows fell outside the kernel support; g_hat used uniform weights");
    if (y_col >= 0) {
        const Vector y = table.values.col(y_col);
        const double pe_a = prediction_error(y, b.y_adjusted);
        const double pe_w = prediction_error(y, b.y_working);
        const double pe_l = prediction_error(y, b.y_ls);
        std::ostringstream pe;
        pe << "predictor,pe\nadjusted," << format_double(pe_a) << "\nworking," << format_double(pe_w)
           << "\nls," << format_double(pe_l) << '\n';
        outputs.add("prediction_error.csv", pe.str());
        m["prediction_error"] = {{"adjusted", pe_a}, {"working", pe_w}, {"ls", pe_l}};
    }
    m["warnings"] = warnings;
    outputs.commit(std::move(m));
    out << "predicted " << n << " rows; outputs in " << f.out << '\n';
    return 0;
}

int resolve_threads(int flag) {
    int threads = flag;
    if (const char* env = std::getenv("QIV_THREADS"); env && *env) {
        const std::string text(env);
        const char* end = text.data() + text.size();
        const auto [ptr, ec] = std::from_chars(text.data(), end, threads);
        if (ec != std::errc() || ptr != end)
            throw validation_error("InvalidArgument", "QIV_THREADS must be a positive integer");
    }
    if (threads < 1) throw validation_error("InvalidArgument", "thread count must be >= 1");
    return threads;
}

int cmd_simulate(const SimulateFlags& f, std::ostream& out) {
    const std::string started = utc_timestamp();
    const std::string text = read_file(f.config);
    Json doc;
    try {
        doc = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw validation_error("InvalidConfig", "<root>: not valid JSON (" + std::string(e.what()) + ")");
    }
    if (f.reps) doc["reps"] = *f.reps;
    if (f.seed) doc["seed"] = *f.seed;
    const ExperimentConfig config = experiment_config_from_json(doc);
    const int threads = resolve_threads(f.threads);

    const MetricsTable table = run_experiment(config, threads);

    OutputSet outputs(f.out);
    outputs.add("metrics.csv", metrics_csv(table));
    outputs.add("report.json", metrics_report(table, config).dump(2) + "\n");
    if (f.plot) outputs.add("metrics.svg", metrics_svg(table, config.name));

    const Json effective = to_json(config);
    Json args{{"config", f.config},
              {"out", f.out},
              {"reps", optional_json(f.reps)},
              {"seed", f.seed ? Json(*f.seed) : Json(nullptr)},
              {"threads", threads},
              {"plot", f.plot}};
    Json m = base_manifest("simulate", args, started);
    m["config_sha256"] = sha256_hex(effective.dump());
    m["config"] = effective;
    m["master_seed"] = config.seed;
    m["inputs"] = Json::array({input_entry(f.config)});
    m["reps_ok"] = table.reps_ok;
    m["reps_failed"] = table.reps_failed;
    m["sigma"] = table.sigma;
    m["r2"] = table.r2;
    m["warnings"] = table.warnings;
    outputs.commit(std::move(m));
    out << metrics_csv(table);
    return 0;
}

// ------------------------------------------------------------ plumbing

const char* category_name(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Validation: return "validation";
        case ErrorCategory::Numerical: return "numerical";
        case ErrorCategory::Io: return "io";
    }
    return "unknown";
}

int report(std::ostream& err, const std::string& kind, const char* category, int code,
           const std::string& message) {
    err << Json{{"error", kind}, {"category", category}, {"exit_code", code}, {"message", message}}.dump()
        << '\n';
    return code;
}

void add_select_flags(CLI::App* cmd, SelectFlags& f) {
    cmd->add_option("--data", f.data, "input CSV with columns y,x1..xp")->required();
    cmd->add_option("--out", f.out, "output directory")->required();
    cmd->add_option("--lambda", f.lambda, "empirical | theoretical | <constraint level>");
    cmd->add_option("--realizations", f.realizations, "draws of z for the empirical rule");
    cmd->add_option("--sigma", f.sigma, "noise level for the lambda rules (estimated if absent)");
    cmd->add_option("--tau", f.tau, "selection threshold on |beta|");
    cmd->add_option("--sis", f.sis, "keep this many predictors after screening");
    cmd->add_option("--seed", f.seed, "master seed");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Quasi-instrumental-variable bias correction for post-selection regression", "qiv"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kToolVersion);

    SelectFlags select_flags;
    auto* select = app.add_subcommand("select", "Dantzig-selector model selection");
    add_select_flags(select, select_flags);

    SelectFlags fit_select;
    FitFlags fit_flags;
    auto* fit = app.add_subcommand("fit", "selection, instrument construction and PLM fit");
    add_select_flags(fit, fit_select);
    fit->add_option("--method", fit_flags.method, "m1 | m2");
    fit->add_option("--d", fit_flags.d, "auto | <int>");
    fit->add_option("--d-max", fit_flags.d_max, "upper limit for automatic d");
    fit->add_option("--bandwidth", fit_flags.bandwidth, "gcv | <value>");
    fit->add_option("--c", fit_flags.c, "Method-2 constant c");
    fit->add_option("--ck", fit_flags.ck, "Method-2 ridge constant c_k");
    fit->add_option("--rank-tol", fit_flags.rank_tol, "relative eigenvalue cut for the rank");
    fit->add_flag("--no-noise-floor", fit_flags.no_noise_floor,
                  "use rank-tol alone, without the negative-eigenvalue noise floor");
    fit->add_option("--level", fit_flags.level, "confidence level for theta.csv");

    PredictFlags predict_flags;
    auto* predict = app.add_subcommand("predict", "apply a saved fit to new rows");
    predict->add_option("--fit", predict_flags.fit, "fit.json from the fit command")->required();
    predict->add_option("--data", predict_flags.data, "CSV with x columns (and optionally y)")
        ->required();
    predict->add_option("--out", predict_flags.out, "output directory")->required();

    SimulateFlags sim_flags;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo experiment from a JSON config");
    simulate->add_option("--config", sim_flags.config, "experiment config (JSON)")->required();
    simulate->add_option("--out", sim_flags.out, "output directory")->required();
    simulate->add_option("--reps", sim_flags.reps, "override the replication count");
    simulate->add_option("--seed", sim_flags.seed, "override the master seed");
    simulate->add_option("--threads", sim_flags.threads, "worker threads (QIV_THREADS overrides)");
    simulate->add_flag("--plot", sim_flags.plot, "also write metrics.svg");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        return report(err, "InvalidArguments", "validation", 2, e.what());
    }

    try {
        if (select->parsed()) return cmd_select(select_flags, out);
        if (fit->parsed()) return cmd_fit(fit_select, fit_flags, out);
        if (predict->parsed()) return cmd_predict(predict_flags, out);
        if (simulate->parsed()) return cmd_simulate(sim_flags, out);
    } catch (const Error& e) {
        return report(err, e.kind(), category_name(e.category()), e.exit_code(), e.what());
    } catch (const std::bad_alloc&) {
        return report(err, "OutOfMemory", "numerical", 3, "allocation failed");
    } catch (const std::exception& e) {
        return report(err, "InternalError", "io", 4, e.what());
    }
    return report(err, "InvalidArguments", "validation", 2, "no command given");
}

}  // namespace qiv::cli
