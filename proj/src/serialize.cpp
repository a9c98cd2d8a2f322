#include "qiv/serialize.hpp"

#include "qiv/error.hpp"

#include <set>
#include <sstream>

namespace qiv {

namespace {

Error malformed(const std::string& field, const std::string& why) {
    return validation_error("MalformedFit", field + ": " + why);
}

const Json& member(const Json& j, const std::string& key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw malformed(where + key, "missing");
    return j.at(key);
}

double number(const Json& j, const std::string& field) {
    if (!j.is_number()) throw malformed(field, "expected a number");
    return j.get<double>();
}

int integer(const Json& j, const std::string& field) {
    if (!j.is_number_integer()) throw malformed(field, "expected an integer");
    return j.get<int>();
}

Json index_set_to_json(const IndexSet& s) {
    Json out = Json::array();
    for (int j : s) out.push_back(j + 1);
    return out;
}

IndexSet index_set_from_json(const Json& j, const std::string& field) {
    if (!j.is_array()) throw malformed(field, "expected an array of one-based indices");
    std::vector<int> v;
    for (const auto& e : j) {
        const int k = integer(e, field);
        if (k < 1) throw malformed(field, "indices are one-based");
        v.push_back(k - 1);
    }
    return IndexSet(std::move(v));
}

}  // namespace

Json matrix_to_json(const Matrix& M) {
    Json data = Json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index k = 0; k < M.cols(); ++k) row.push_back(M(i, k));
        data.push_back(std::move(row));
    }
    return Json{{"rows", M.rows()}, {"cols", M.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const Json& j, const std::string& field) {
    const int rows = integer(member(j, "rows", field + "."), field + ".rows");
    const int cols = integer(member(j, "cols", field + "."), field + ".cols");
    const Json& data = member(j, "data", field + ".");
    if (rows < 0 || cols < 0 || !data.is_array() || static_cast<int>(data.size()) != rows)
        throw malformed(field, "data does not match rows");
    Matrix M(rows, cols);
    for (int i = 0; i < rows; ++i) {
        const Json& row = data[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<int>(row.size()) != cols)
            throw malformed(field, "row " + std::to_string(i) + " does not match cols");
        for (int k = 0; k < cols; ++k) M(i, k) = number(row[static_cast<std::size_t>(k)], field);
    }
    return M;
}

Json vector_to_json(const Vector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Vector vector_from_json(const Json& j, const std::string& field) {
    if (!j.is_array()) throw malformed(field, "expected an array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], field);
    return v;
}

const char* to_string(InstrumentMethod method) {
    return method == InstrumentMethod::Method1 ? "m1" : "m2";
}

Json to_json(const InstrumentPlan& plan) {
    Json w;
    w["ustar_positions"] = index_set_to_json(plan.whiten.ustar_indices);
    w["sigma_ustar_ustar"] = matrix_to_json(plan.whiten.sigma_ustar_ustar);
    w["sigma_ustar_z"] = matrix_to_json(plan.whiten.sigma_ustar_z);
    w["whitener"] = matrix_to_json(plan.whiten.whitener);
    Json j;
    j["method"] = to_string(plan.method);
    j["q"] = plan.whiten.q();
    j["d"] = plan.whiten.d();
    j["rank"] = plan.rank;
    j["whiten"] = std::move(w);
    j["A"] = matrix_to_json(plan.A);
    j["Q1"] = matrix_to_json(plan.Q1);
    j["Q12"] = matrix_to_json(plan.Q12);
    j["eigenvalues"] = vector_to_json(plan.eigenvalues);
    return j;
}

InstrumentPlan instrument_plan_from_json(const Json& j) {
    InstrumentPlan plan;
    const std::string m = member(j, "method", "plan.").is_string() ? j.at("method").get<std::string>() : "";
    if (m == "m1") plan.method = InstrumentMethod::Method1;
    else if (m == "m2") plan.method = InstrumentMethod::Method2;
    else throw malformed("plan.method", "expected \"m1\" or \"m2\"");
    const Json& w = member(j, "whiten", "plan.");
    plan.whiten.ustar_indices =
        index_set_from_json(member(w, "ustar_positions", "plan.whiten."), "plan.whiten.ustar_positions");
    plan.whiten.sigma_ustar_ustar =
        matrix_from_json(member(w, "sigma_ustar_ustar", "plan.whiten."), "plan.whiten.sigma_ustar_ustar");
    plan.whiten.sigma_ustar_z =
        matrix_from_json(member(w, "sigma_ustar_z", "plan.whiten."), "plan.whiten.sigma_ustar_z");
    plan.whiten.whitener = matrix_from_json(member(w, "whitener", "plan.whiten."), "plan.whiten.whitener");
    plan.A = matrix_from_json(member(j, "A", "plan."), "plan.A");
    plan.Q1 = matrix_from_json(member(j, "Q1", "plan."), "plan.Q1");
    plan.Q12 = matrix_from_json(member(j, "Q12", "plan."), "plan.Q12");
    plan.rank = integer(member(j, "rank", "plan."), "plan.rank");
    plan.eigenvalues = vector_from_json(member(j, "eigenvalues", "plan."), "plan.eigenvalues");

    const int d = plan.whiten.d();
    const int q = static_cast<int>(plan.whiten.sigma_ustar_z.cols());
    if (plan.whiten.sigma_ustar_z.rows() != d || plan.whiten.sigma_ustar_ustar.rows() != d ||
        plan.whiten.sigma_ustar_ustar.cols() != d || plan.whiten.whitener.rows() != d ||
        plan.whiten.whitener.cols() != d)
        throw malformed("plan.whiten", "dimensions disagree with ustar_positions");
    if (plan.A.rows() != plan.rank || plan.A.cols() != q + d)
        throw malformed("plan.A", "expected rank x (q + d)");
    return plan;
}

Json to_json(const PLMFit& fit) {
    Json j;
    j["q"] = fit.q();
    j["theta_hat"] = vector_to_json(fit.theta_hat);
    j["bandwidth"] = fit.h;
    j["sigma_v_sq"] = fit.sigma_v_sq;
    j["g_bar"] = fit.g_bar;
    j["asym_cov"] = matrix_to_json(fit.asym_cov);
    j["V_train"] = matrix_to_json(fit.V_train);
    j["g_residual_table"] = vector_to_json(fit.g_residual_table);
    return j;
}

PLMFit plm_fit_from_json(const Json& j) {
    PLMFit fit;
    fit.theta_hat = vector_from_json(member(j, "theta_hat", "fit."), "fit.theta_hat");
    fit.h = number(member(j, "bandwidth", "fit."), "fit.bandwidth");
    fit.sigma_v_sq = number(member(j, "sigma_v_sq", "fit."), "fit.sigma_v_sq");
    fit.g_bar = number(member(j, "g_bar", "fit."), "fit.g_bar");
    fit.asym_cov = matrix_from_json(member(j, "asym_cov", "fit."), "fit.asym_cov");
    fit.V_train = matrix_from_json(member(j, "V_train", "fit."), "fit.V_train");
    fit.g_residual_table = vector_from_json(member(j, "g_residual_table", "fit."), "fit.g_residual_table");
    if (!(fit.h > 0.0)) throw malformed("fit.bandwidth", "must be positive");
    if (fit.g_residual_table.size() != fit.V_train.rows())
        throw malformed("fit.g_residual_table", "length differs from V_train rows");
    if (fit.asym_cov.rows() != fit.q() || fit.asym_cov.cols() != fit.q())
        throw malformed("fit.asym_cov", "expected q x q");
    return fit;
}

Json to_json(const FitArtifact& a) {
    Json j;
    j["format"] = "qiv-fit";
    j["version"] = 1;
    j["p"] = a.p;
    j["z_columns"] = index_set_to_json(a.z_indices);
    j["u_columns"] = index_set_to_json(a.u_indices);
    j["column_means"] = vector_to_json(a.column_means);
    j["column_scales"] = vector_to_json(a.column_scales);
    j["plan"] = to_json(a.plan);
    j["fit"] = to_json(a.fit);
    j["theta_ls"] = vector_to_json(a.theta_ls);
    return j;
}

FitArtifact fit_artifact_from_json(const Json& j) {
    if (!j.is_object() || j.value("format", "") != "qiv-fit")
        throw malformed("format", "not a qiv fit document");
    FitArtifact a;
    a.p = integer(member(j, "p", ""), "p");
    a.z_indices = index_set_from_json(member(j, "z_columns", ""), "z_columns");
    a.u_indices = index_set_from_json(member(j, "u_columns", ""), "u_columns");
    a.column_means = vector_from_json(member(j, "column_means", ""), "column_means");
    a.column_scales = vector_from_json(member(j, "column_scales", ""), "column_scales");
    a.plan = instrument_plan_from_json(member(j, "plan", ""));
    a.fit = plm_fit_from_json(member(j, "fit", ""));
    a.theta_ls = vector_from_json(member(j, "theta_ls", ""), "theta_ls");
    if (a.column_means.size() != a.p || a.column_scales.size() != a.p)
        throw malformed("column_means", "length differs from p");
    if (a.z_indices.size() + a.u_indices.size() != a.p)
        throw malformed("z_columns", "z and u columns do not cover p");
    a.z_indices.check_bounds(a.p);
    a.u_indices.check_bounds(a.p);
    if (a.fit.q() != a.z_indices.size() || a.theta_ls.size() != a.fit.q() ||
        a.plan.whiten.q() != a.fit.q())
        throw malformed("fit.theta_hat", "length differs from the number of z columns");
    return a;
}

// ---------------------------------------------------------------- config

const char* to_string(BetaType type) {
    switch (type) {
        case BetaType::I: return "I";
        case BetaType::II: return "II";
        case BetaType::III: return "III";
        case BetaType::IV: return "IV";
    }
    return "?";
}

const char* to_string(LambdaMode mode) {
    switch (mode) {
        case LambdaMode::Empirical: return "empirical";
        case LambdaMode::Theoretical: return "theoretical";
        case LambdaMode::Fixed: return "fixed";
    }
    return "?";
}

const char* to_string(MseTarget target) {
    return target == MseTarget::Selected ? "selected" : "true_support";
}

namespace {

Error schema(const std::string& field, const std::string& why) {
    return validation_error("InvalidConfig", field + ": " + why);
}

class Reader {
public:
    Reader(const Json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
        if (!j_.is_object()) throw schema(prefix_.empty() ? "<root>" : prefix_, "expected an object");
    }

    void allow(std::initializer_list<const char*> keys) const {
        std::set<std::string> ok(keys.begin(), keys.end());
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!ok.count(it.key())) throw schema(prefix_ + it.key(), "unknown field");
    }

    bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
    const Json& at(const std::string& key) const { return j_.at(key); }
    std::string name(const std::string& key) const { return prefix_ + key; }

    void get(const std::string& key, double& out) const {
        if (!has(key)) return;
        if (!j_.at(key).is_number()) throw schema(name(key), "expected a number");
        out = j_.at(key).get<double>();
    }
    void get(const std::string& key, std::optional<double>& out) const {
        if (!has(key)) return;
        double v = 0.0;
        get(key, v);
        out = v;
    }
    void get(const std::string& key, int& out) const {
        if (!has(key)) return;
        if (!j_.at(key).is_number_integer()) throw schema(name(key), "expected an integer");
        out = j_.at(key).get<int>();
    }
    void get(const std::string& key, std::optional<int>& out) const {
        if (!has(key)) return;
        int v = 0;
        get(key, v);
        out = v;
    }
    void get(const std::string& key, std::uint64_t& out) const {
        if (!has(key)) return;
        if (!j_.at(key).is_number_unsigned()) throw schema(name(key), "expected a non-negative integer");
        out = j_.at(key).get<std::uint64_t>();
    }
    void get(const std::string& key, bool& out) const {
        if (!has(key)) return;
        if (!j_.at(key).is_boolean()) throw schema(name(key), "expected a boolean");
        out = j_.at(key).get<bool>();
    }
    void get(const std::string& key, std::string& out) const {
        if (!has(key)) return;
        if (!j_.at(key).is_string()) throw schema(name(key), "expected a string");
        out = j_.at(key).get<std::string>();
    }

private:
    const Json& j_;
    std::string prefix_;
};

template <class E>
E parse_enum(const Reader& r, const std::string& key, E current,
             std::initializer_list<std::pair<const char*, E>> options) {
    std::string s;
    r.get(key, s);
    if (s.empty()) return current;
    std::string allowed;
    for (const auto& [label, value] : options) {
        if (s == label) return value;
        allowed += (allowed.empty() ? "" : ", ") + std::string(label);
    }
    throw schema(r.name(key), "expected one of " + allowed);
}

}  // namespace

Json to_json(const ExperimentConfig& c) {
    Json j;
    j["name"] = c.name;
    j["n"] = c.n;
    j["p"] = c.p;
    j["rho"] = c.rho;
    j["beta"] = {{"type", to_string(c.beta.type)}, {"sparse", c.beta.sparse}, {"seed", c.beta.seed}};
    j["sigma"] = c.sigma ? Json(*c.sigma) : Json(nullptr);
    j["target_r2"] = c.target_r2 ? Json(*c.target_r2) : Json(nullptr);
    j["reps"] = c.reps;
    j["methods"] = {{"m1", c.methods.m1},
                    {"m2", c.methods.m2},
                    {"ds_baseline", c.methods.ds_baseline},
                    {"ls_baseline", c.methods.ls_baseline}};
    const auto& lr = c.selection.lambda;
    Json lambda{{"mode", to_string(lr.mode)},
                {"value", lr.value},
                {"realizations", lr.realizations},
                {"sigma", lr.sigma ? Json(*lr.sigma) : Json(nullptr)}};
    j["selection"] = {{"lambda", std::move(lambda)},
                      {"tau", c.selection.tau},
                      {"sis_keep", c.selection.sis_keep ? Json(*c.selection.sis_keep) : Json(nullptr)},
                      {"lp_tolerance", c.selection.lp_tolerance}};
    const auto& in = c.instrument;
    j["instrument"] = {{"d", in.d ? Json(*in.d) : Json(nullptr)},
                       {"d_max", in.d_max},
                       {"rank_tol", in.rank_tol},
                       {"c", in.c},
                       {"c_k", in.c_k},
                       {"bandwidth", in.bandwidth ? Json(*in.bandwidth) : Json(nullptr)}};
    j["seed"] = c.seed;
    j["test_size"] = c.test_size;
    j["mse_target"] = to_string(c.mse_target);
    return j;
}

ExperimentConfig experiment_config_from_json(const Json& j) {
    ExperimentConfig c;
    const Reader r(j, "");
    r.allow({"name", "n", "p", "rho", "beta", "sigma", "target_r2", "reps", "methods", "selection",
             "instrument", "seed", "test_size", "mse_target", "$schema", "description"});
    r.get("name", c.name);
    r.get("n", c.n);
    r.get("p", c.p);
    r.get("rho", c.rho);
    r.get("sigma", c.sigma);
    r.get("target_r2", c.target_r2);
    r.get("reps", c.reps);
    r.get("seed", c.seed);
    r.get("test_size", c.test_size);
    c.mse_target = parse_enum(r, "mse_target", c.mse_target,
                              {{"selected", MseTarget::Selected}, {"true_support", MseTarget::TrueSupport}});
    if (r.has("beta")) {
        const Reader b(r.at("beta"), "beta.");
        b.allow({"type", "sparse", "seed"});
        c.beta.type = parse_enum(b, "type", c.beta.type,
                                 {{"I", BetaType::I}, {"II", BetaType::II}, {"III", BetaType::III},
                                  {"IV", BetaType::IV}});
        b.get("sparse", c.beta.sparse);
        b.get("seed", c.beta.seed);
    }
    if (r.has("methods")) {
        const Reader m(r.at("methods"), "methods.");
        m.allow({"m1", "m2", "ds_baseline", "ls_baseline"});
        m.get("m1", c.methods.m1);
        m.get("m2", c.methods.m2);
        m.get("ds_baseline", c.methods.ds_baseline);
        m.get("ls_baseline", c.methods.ls_baseline);
    }
    if (r.has("selection")) {
        const Reader s(r.at("selection"), "selection.");
        s.allow({"lambda", "tau", "sis_keep", "lp_tolerance"});
        s.get("tau", c.selection.tau);
        s.get("sis_keep", c.selection.sis_keep);
        s.get("lp_tolerance", c.selection.lp_tolerance);
        if (s.has("lambda")) {
            const Reader l(s.at("lambda"), "selection.lambda.");
            l.allow({"mode", "value", "realizations", "sigma"});
            auto& rule = c.selection.lambda;
            rule.mode = parse_enum(l, "mode", rule.mode,
                                   {{"empirical", LambdaMode::Empirical},
                                    {"theoretical", LambdaMode::Theoretical},
                                    {"fixed", LambdaMode::Fixed}});
            l.get("value", rule.value);
            l.get("realizations", rule.realizations);
            l.get("sigma", rule.sigma);
            if (rule.sigma && !(*rule.sigma > 0.0)) throw schema("selection.lambda.sigma", "must be positive");
        }
    }
    if (r.has("instrument")) {
        const Reader in(r.at("instrument"), "instrument.");
        in.allow({"d", "d_max", "rank_tol", "c", "c_k", "bandwidth"});
        in.get("d", c.instrument.d);
        in.get("d_max", c.instrument.d_max);
        in.get("rank_tol", c.instrument.rank_tol);
        in.get("c", c.instrument.c);
        in.get("c_k", c.instrument.c_k);
        in.get("bandwidth", c.instrument.bandwidth);
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------- metrics

std::string metrics_csv(const MetricsTable& table) {
    std::ostringstream out;
    out << "estimator,predictor,mse,std_mse,pe,std_pe,reps_ok,reps_failed\n";
    auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    for (const auto& row : table.rows) {
        out << row.estimator << ',' << row.predictor << ',' << cell(row.mse) << ','
            << cell(row.std_mse) << ',' << cell(row.pe) << ',' << cell(row.std_pe) << ','
            << table.reps_ok << ',' << table.reps_failed << '\n';
    }
    return out.str();
}

Json metrics_report(const MetricsTable& table, const ExperimentConfig& config) {
    auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
    Json rows = Json::array();
    for (const auto& row : table.rows)
        rows.push_back({{"estimator", row.estimator},
                        {"predictor", row.predictor},
                        {"mse", opt(row.mse)},
                        {"std_mse", opt(row.std_mse)},
                        {"pe", opt(row.pe)},
                        {"std_pe", opt(row.std_pe)}});
    Json reps = Json::array();
    for (const auto& rec : table.records) {
        Json r{{"rep", rec.rep}, {"ok", rec.ok}};
        if (!rec.ok) {
            r["failure"] = rec.failure;
        } else {
            r["selected"] = index_set_to_json(rec.selected);
            r["lambda"] = rec.lambda;
            r["mse"] = rec.mse;
            r["pe"] = rec.pe;
            r["bandwidth"] = rec.bandwidth;
            if (config.methods.m1) {
                r["d_m1"] = rec.d_m1;
                r["rank_m1"] = rec.rank_m1;
            }
        }
        reps.push_back(std::move(r));
    }
    Json j;
    j["config"] = to_json(config);
    j["seed"] = table.seed;
    j["sigma"] = table.sigma;
    j["r2"] = table.r2;
    j["reps"] = table.reps;
    j["reps_ok"] = table.reps_ok;
    j["reps_failed"] = table.reps_failed;
    j["metrics"] = std::move(rows);
    j["selection_frequency"] = table.selection_frequency;
    j["replications"] = std::move(reps);
    j["warnings"] = table.warnings;
    return j;
}

}  // namespace qiv
