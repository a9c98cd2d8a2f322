#include "cli_support.hpp"

#include "qiv/serialize.hpp"

#include <doctest.h>

#include <chrono>
#include <cstdlib>

using namespace qiv;
using namespace qiv::test;
using qiv::Json;

namespace {

Json read_json(const std::string& path) { return Json::parse(slurp(path)); }

Json error_line(const std::string& err) {
    REQUIRE_FALSE(err.empty());
    return Json::parse(err.substr(0, err.find('\n')));
}

std::string config_path(const std::string& name) {
    return std::string(QIV_SOURCE_DIR) + "/configs/" + name;
}

}  // namespace

TEST_CASE("help and argument errors") {
    CHECK(run({"--help"}).code == 0);
    CHECK(run({"--version"}).code == 0);
    const CliResult none = run({});
    CHECK(none.code == 2);
    const CliResult bogus = run({"frobnicate"});
    CHECK(bogus.code == 2);
    CHECK(error_line(bogus.err)["exit_code"] == 2);
    CHECK(run({"select", "--data", "x.csv"}).code == 2);
}

TEST_CASE("select: happy path, determinism and manifest inventory") {
    TempDir dir("select");
    write_simulated_csv(dir / "train.csv", 50, 100, 0.1, false, 3);
    const std::vector<std::string> base{"select", "--data", dir / "train.csv", "--lambda", "5.0", "--seed", "4"};
    auto with_out = [&](const std::string& out) {
        auto a = base;
        a.push_back("--out");
        a.push_back(out);
        return a;
    };
    const CliResult r1 = run(with_out(dir / "a"));
    REQUIRE(r1.code == 0);
    CHECK(r1.err.empty());
    for (const char* f : {"beta_full.csv", "selected_indices.csv", "manifest.json"})
        CHECK(std::filesystem::exists(dir.path() / "a" / f));
    CHECK(inventory_matches(dir.path() / "a"));
    const Json m = read_json(dir / "a/manifest.json");
    CHECK(m["command"] == "select");
    CHECK(m["master_seed"] == 4);
    CHECK(m["selection"]["lambda"] == 5.0);
    CHECK(m["arguments"]["lambda"] == "5.0");
    CHECK(m["inputs"][0]["sha256"] == cli::sha256_hex(slurp(dir / "train.csv")));

    REQUIRE(run(with_out(dir / "b")).code == 0);
    CHECK(outputs_without_manifest(dir.path() / "a") == outputs_without_manifest(dir.path() / "b"));

    // Empirical and theoretical rules run too.
    CHECK(run({"select", "--data", dir / "train.csv", "--out", dir / "c", "--lambda", "theoretical"}).code == 0);
    CHECK(run({"select", "--data", dir / "train.csv", "--out", dir / "d", "--sis", "20"}).code == 0);
    CHECK(read_json(dir / "d/manifest.json")["selection"]["screened"].size() == 20);
}

TEST_CASE("select: constant column fails with no partial outputs") {
    TempDir dir("constant");
    std::mt19937_64 rng(1);
    Matrix X = gaussian_matrix(20, 4, rng);
    X.col(2).setConstant(3.0);
    write_dataset(dir / "c.csv", X, gaussian_vector(20, rng));
    const CliResult r = run({"select", "--data", dir / "c.csv", "--out", dir / "out"});
    CHECK(r.code == 2);
    const Json e = error_line(r.err);
    CHECK(e["error"] == "ZeroVarianceColumn");
    CHECK(e["category"] == "validation");
    CHECK(e["exit_code"] == 2);
    CHECK_FALSE(std::filesystem::exists(dir.path() / "out"));
}

TEST_CASE("select: unreadable input is an I/O error") {
    TempDir dir("io");
    const CliResult r = run({"select", "--data", dir / "missing.csv", "--out", dir / "out"});
    CHECK(r.code == 4);
    CHECK(error_line(r.err)["error"] == "FileNotReadable");
    CHECK_FALSE(std::filesystem::exists(dir.path() / "out"));
}

TEST_CASE("fit: outputs, method 2 and fixed bandwidth") {
    TempDir dir("fit");
    write_simulated_csv(dir / "train.csv", 50, 100, 0.1, false, 5);
    REQUIRE(run({"fit", "--data", dir / "train.csv", "--out", dir / "m1"}).code == 0);
    CHECK(inventory_matches(dir.path() / "m1"));
    const Json m = read_json(dir / "m1/manifest.json");
    CHECK(m["instrument"]["bandwidth_source"] == "gcv");
    CHECK(m["instrument"]["method"] == "m1");
    const std::string theta_text = slurp(dir / "m1/theta.csv");
    CHECK(theta_text.rfind("variable,theta,std_error,ci_lower,ci_upper,theta_standardized\n", 0) == 0);
    const auto theta = read_theta(dir / "m1/theta.csv");
    CHECK(!theta.empty());
    for (const auto& row : theta) {
        REQUIRE(row.values.size() == 5);
        CHECK(row.variable.front() == 'x');
        CHECK(row.values[2] <= row.values[0]);
        CHECK(row.values[0] <= row.values[3]);
    }

    REQUIRE(run({"fit", "--data", dir / "train.csv", "--out", dir / "m2", "--method", "m2",
                 "--bandwidth", "0.5"}).code == 0);
    const Json fit = read_json(dir / "m2/fit.json");
    CHECK(fit["plan"]["rank"] == 1);
    CHECK(fit["plan"]["method"] == "m2");
    const Json m2 = read_json(dir / "m2/manifest.json");
    CHECK(m2["instrument"]["bandwidth_source"] == "fixed");
    CHECK(m2["instrument"]["bandwidth"] == 0.5);
    CHECK(fit["fit"]["bandwidth"] == 0.5);

    REQUIRE(run({"fit", "--data", dir / "train.csv", "--out", dir / "again"}).code == 0);
    CHECK(outputs_without_manifest(dir.path() / "m1") == outputs_without_manifest(dir.path() / "again"));

    const CliResult bad = run({"fit", "--data", dir / "train.csv", "--out", dir / "bad", "--d", "zero"});
    CHECK(bad.code == 2);
    CHECK_FALSE(std::filesystem::exists(dir.path() / "bad"));
}

TEST_CASE("predict: round trip on the training data reproduces the in-sample fit") {
    TempDir dir("predict");
    write_simulated_csv(dir / "train.csv", 50, 100, 0.1, false, 6);
    REQUIRE(run({"fit", "--data", dir / "train.csv", "--out", dir / "fit"}).code == 0);
    REQUIRE(run({"predict", "--fit", dir / "fit/fit.json", "--data", dir / "train.csv", "--out",
                 dir / "pred"}).code == 0);
    CHECK(inventory_matches(dir.path() / "pred"));

    const FitArtifact a = fit_artifact_from_json(read_json(dir / "fit/fit.json"));
    const Dataset raw = read_dataset(dir / "train.csv");
    const Matrix Xs = (raw.X().rowwise() - a.column_means.transpose()).array().rowwise() /
                      a.column_scales.transpose().array();
    const Matrix Z = gather_columns(Xs, a.z_indices);
    const Vector expected = Z * a.fit.theta_hat + a.fit.g_hat(a.fit.V_train);
    const CsvTable pred = read_csv(dir / "pred/predictions.csv");
    REQUIRE(pred.values.rows() == raw.n());
    CHECK((pred.values.col(1) - expected).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((pred.values.col(2).array() - (Z * a.fit.theta_hat).array() - a.fit.g_bar).abs().maxCoeff() < 1e-9);
    CHECK((pred.values.col(3) - Z * a.theta_ls).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::filesystem::exists(dir.path() / "pred/prediction_error.csv"));
    CHECK(read_json(dir / "pred/manifest.json")["degenerate_weight_rows"] == 0);
}

TEST_CASE("predict: fresh data, missing U* columns and malformed fits") {
    TempDir dir("predict2");
    write_simulated_csv(dir / "train.csv", 50, 100, 0.1, false, 7);
    write_simulated_csv(dir / "test.csv", 200, 100, 0.1, false, 8);
    REQUIRE(run({"fit", "--data", dir / "train.csv", "--out", dir / "fit"}).code == 0);
    REQUIRE(run({"predict", "--fit", dir / "fit/fit.json", "--data", dir / "test.csv", "--out",
                 dir / "pred"}).code == 0);
    const Json m = read_json(dir / "pred/manifest.json");
    CHECK(m["prediction_error"]["adjusted"].get<double>() < m["prediction_error"]["ls"].get<double>());

    // Drop one U* column from the test file.
    const Json fit = read_json(dir / "fit/fit.json");
    const int pos = fit["plan"]["whiten"]["ustar_positions"][0].get<int>() - 1;
    const int var = fit["u_columns"][pos].get<int>();
    const CsvTable t = read_csv(dir / "test.csv");
    std::ostringstream csv;
    bool first = true;
    for (std::size_t c = 0; c < t.header.size(); ++c) {
        if (t.header[c] == "x" + std::to_string(var)) continue;
        csv << (first ? "" : ",") << t.header[c];
        first = false;
    }
    csv << '\n';
    for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
        first = true;
        for (std::size_t c = 0; c < t.header.size(); ++c) {
            if (t.header[c] == "x" + std::to_string(var)) continue;
            csv << (first ? "" : ",") << format_double(t.values(i, static_cast<Eigen::Index>(c)));
            first = false;
        }
        csv << '\n';
    }
    spit(dir / "short.csv", csv.str());
    const CliResult r = run({"predict", "--fit", dir / "fit/fit.json", "--data", dir / "short.csv",
                             "--out", dir / "short"});
    CHECK(r.code == 2);
    CHECK(error_line(r.err)["error"] == "MissingUStarColumns");
    CHECK_FALSE(std::filesystem::exists(dir.path() / "short"));

    spit(dir / "broken.json", "{\"format\": \"qiv-fit\"}");
    const CliResult b = run({"predict", "--fit", dir / "broken.json", "--data", dir / "test.csv",
                             "--out", dir / "broken"});
    CHECK(b.code == 2);
    CHECK(error_line(b.err)["error"] == "MalformedFit");
}

TEST_CASE("simulate: malformed configs are rejected before any work") {
    TempDir dir("badconfig");
    spit(dir / "bad.json", R"({"n": 50, "p": "x", "target_r2": 0.9})");
    const CliResult r = run({"simulate", "--config", dir / "bad.json", "--out", dir / "out"});
    CHECK(r.code == 2);
    const Json e = error_line(r.err);
    CHECK(e["error"] == "InvalidConfig");
    CHECK(e["message"].get<std::string>().find("p: expected an integer") != std::string::npos);
    CHECK_FALSE(std::filesystem::exists(dir.path() / "out"));

    spit(dir / "unknown.json", R"({"n": 50, "p": 100, "target_r2": 0.9, "foo": 1})");
    const CliResult u = run({"simulate", "--config", dir / "unknown.json", "--out", dir / "out"});
    CHECK(u.code == 2);
    CHECK(error_line(u.err)["message"].get<std::string>().find("foo: unknown field") != std::string::npos);

    spit(dir / "notjson.json", "{ nope");
    CHECK(run({"simulate", "--config", dir / "notjson.json", "--out", dir / "out"}).code == 2);
    CHECK_FALSE(std::filesystem::exists(dir.path() / "out"));
}

TEST_CASE("simulate: identical outputs for 1 and 8 threads, plot and QIV_THREADS") {
    TempDir dir("threads");
    const std::string cfg = config_path("experiment1_typeI.json");
    REQUIRE(run({"simulate", "--config", cfg, "--out", dir / "t1", "--reps", "8", "--threads", "1"}).code == 0);
    REQUIRE(run({"simulate", "--config", cfg, "--out", dir / "t8", "--reps", "8", "--threads", "8", "--plot"}).code == 0);
    CHECK(slurp(dir / "t1/metrics.csv") == slurp(dir / "t8/metrics.csv"));
    CHECK(slurp(dir / "t1/report.json") == slurp(dir / "t8/report.json"));
    CHECK(inventory_matches(dir.path() / "t8"));
    CHECK(slurp(dir / "t8/metrics.svg").rfind("<svg", 0) == 0);
    const Json m = read_json(dir / "t8/manifest.json");
    CHECK(m["reps_ok"].get<int>() + m["reps_failed"].get<int>() == 8);
    CHECK(m["arguments"]["threads"] == 8);

    setenv("QIV_THREADS", "2", 1);
    const CliResult env = run({"simulate", "--config", cfg, "--out", dir / "env", "--reps", "2", "--threads", "8"});
    unsetenv("QIV_THREADS");
    REQUIRE(env.code == 0);
    CHECK(read_json(dir / "env/manifest.json")["arguments"]["threads"] == 2);
}

TEST_CASE("simulate: bundled experiment-1 config with 10 replications within 60 s") {
    TempDir dir("budget");
    const auto start = std::chrono::steady_clock::now();
    const CliResult r = run({"simulate", "--config", config_path("experiment1_typeI.json"), "--out",
                             dir / "out", "--reps", "10"});
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    REQUIRE(r.code == 0);
    CHECK(seconds < 60.0);
    MESSAGE("experiment1_typeI, 10 replications: " << seconds << " s");
}

TEST_CASE("fit: confidence intervals cover the truth on an oracle design") {
    // Sparse model with three strong predictors: selection recovers them and
    // the working model is correctly specified.
    TempDir dir("coverage");
    int covered = 0;
    const int runs = 100;
    for (int run_id = 0; run_id < runs; ++run_id) {
        const int n = 200, p = 10;
        const DesignSampler sampler(p, 0.5, Vector::Zero(p));
        const Matrix X = sampler.sample(n, 5000 + static_cast<std::uint64_t>(run_id));
        std::mt19937_64 rng(9000 + static_cast<std::uint64_t>(run_id));
        const Vector y = X.col(0) + 0.8 * X.col(1) - 0.6 * X.col(2) + gaussian_vector(n, rng);
        const std::string csv = dir / ("d" + std::to_string(run_id) + ".csv");
        const std::string out = dir / ("o" + std::to_string(run_id));
        write_dataset(csv, X, y);
        const CliResult r = run({"fit", "--data", csv, "--out", out});
        if (r.code != 0) continue;
        for (const auto& row : read_theta(out + "/theta.csv"))
            if (row.variable == "x1" && row.values[2] <= 1.0 && 1.0 <= row.values[3]) ++covered;
    }
    MESSAGE("x1 interval covered the truth in " << covered << " of " << runs << " runs");
    CHECK(covered >= 90);
}
