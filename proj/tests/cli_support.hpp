#pragma once

#include "support.hpp"

#include "cli.hpp"
#include "manifest.hpp"

#include "qiv/simulator.hpp"

#include <map>
#include <set>
#include <sstream>

namespace qiv::test {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

inline CliResult run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    CliResult r;
    r.code = qiv::cli::run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

/// Simulated training CSV from the type-I design with target R^2 0.97.
inline void write_simulated_csv(const std::string& path, int n, int p, double rho, bool sparse,
                                std::uint64_t seed) {
    const CoefficientDraw coef = gen_coefficients({BetaType::I, sparse, 1}, p);
    const DesignSampler sampler(p, rho, design_mean(p, coef.true_support));
    const double sigma = sigma_for_r2(coef.beta, design_covariance(p, rho), 0.97);
    const Matrix X = sampler.sample(n, seed);
    write_dataset(path, X, gen_response(X, coef.beta, sigma, seed + 7));
}

/// Contents of every regular file in `dir` except manifest.json.
inline std::map<std::string, std::string> outputs_without_manifest(const std::filesystem::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const std::string name = e.path().filename().string();
        if (name != "manifest.json") files[name] = slurp(e.path().string());
    }
    return files;
}

/// True when the manifest inventory lists exactly the other files with
/// matching sizes and digests.
inline bool inventory_matches(const std::filesystem::path& dir) {
    const auto manifest = nlohmann::ordered_json::parse(slurp((dir / "manifest.json").string()));
    const auto files = outputs_without_manifest(dir);
    if (!manifest.contains("outputs") || manifest["outputs"].size() != files.size()) return false;
    for (const auto& o : manifest["outputs"]) {
        const std::string name = o["file"];
        auto it = files.find(name);
        if (it == files.end()) return false;
        if (o["bytes"] != it->second.size()) return false;
        if (o["sha256"] != qiv::cli::sha256_hex(it->second)) return false;
    }
    return true;
}


struct ThetaRow {
    std::string variable;
    std::vector<double> values;
};

/// theta.csv rows: a variable name followed by numeric columns.
inline std::vector<ThetaRow> read_theta(const std::string& path) {
    std::istringstream in(slurp(path));
    std::string line;
    std::getline(in, line);
    std::vector<ThetaRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        ThetaRow row;
        std::getline(fields, row.variable, ',');
        std::string cell;
        while (std::getline(fields, cell, ',')) row.values.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace qiv::test
