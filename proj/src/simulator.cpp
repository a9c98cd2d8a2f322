#include "qiv/simulator.hpp"

#include "qiv/error.hpp"
#include "qiv/predictor.hpp"
#include "qiv/stats.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

namespace qiv {

namespace {

struct BetaLayout {
    std::vector<double> values;
    std::vector<int> support;  // one-based
};

BetaLayout layout(BetaType type) {
    const std::vector<double> base{1.0, 0.4, 0.3, 0.5, 0.3, 0.3, 0.3};
    switch (type) {
        case BetaType::I:
            return {base, {1, 2, 3, 4, 5, 6, 7}};
        case BetaType::II:
            return {base, {1, 17, 33, 49, 65, 81, 97}};
        case BetaType::III:
            return {{1.0, 0.4, -0.3, -0.5, 0.3, 0.3, -0.3}, {1, 2, 3, 4, 5, 6, 7}};
        case BetaType::IV:
            return {{1.0, -1.5, 2.0, 1.1, -3.0, 1.2, 1.8, -2.5, -2.0, 1.0},
                    {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}};
    }
    throw validation_error("InvalidConfig", "unknown beta type");
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

enum Stream : std::uint64_t {
    kTrainDesign = 1,
    kTrainNoise = 2,
    kTestDesign = 3,
    kTestNoise = 4,
    kLambda = 5,
};

}  // namespace

CoefficientDraw gen_coefficients(const BetaSpec& spec, int p) {
    const BetaLayout lay = layout(spec.type);
    if (p <= lay.support.back())
        throw validation_error("IncompatibleDimensions",
                               "p = " + std::to_string(p) + " cannot hold the support of this type");
    CoefficientDraw out;
    out.beta = Vector::Zero(p);
    std::vector<int> support;
    for (std::size_t k = 0; k < lay.values.size(); ++k) {
        out.beta(lay.support[k] - 1) = lay.values[k];
        support.push_back(lay.support[k] - 1);
    }
    out.true_support = IndexSet(std::move(support));
    if (!spec.sparse) {
        std::mt19937_64 rng(spec.seed);
        std::uniform_real_distribution<double> unif(-0.5, 0.15);
        for (int j = 0; j < p; ++j) {
            if (out.true_support.contains(j)) continue;
            out.beta(j) = std::max(0.0, unif(rng));
        }
    }
    return out;
}

Matrix design_covariance(int p, double rho) {
    Matrix S(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) S(i, j) = std::pow(-rho, std::abs(i - j));
    return S;
}

Vector design_mean(int p, const IndexSet& support) {
    Vector mu = Vector::Constant(p, 2.0);
    for (int j : support) mu(j) = 0.0;
    return mu;
}

DesignSampler::DesignSampler(int p, double rho, Vector mu)
    : p_(p), rho_(rho), mu_(std::move(mu)), use_cholesky_(p <= kCholeskyLimit) {
    if (!(std::abs(rho) < 1.0)) throw validation_error("InvalidConfig", "rho must satisfy |rho| < 1");
    if (mu_.size() != p) throw validation_error("LengthMismatch", "mean vector length differs from p");
    if (use_cholesky_) {
        Eigen::LLT<Matrix> llt(design_covariance(p, rho));
        if (llt.info() != Eigen::Success)
            throw numerical_error("NotPositiveDefinite", "design covariance is not positive definite");
        lower_ = llt.matrixL();
    }
}

Matrix DesignSampler::sample(int n, std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix E(n, p_);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p_; ++j) E(i, j) = normal(rng);

    Matrix X;
    if (use_cholesky_) {
        X = E * lower_.transpose();
    } else {
        const double phi = -rho_;
        const double innov = std::sqrt(1.0 - phi * phi);
        X.resize(n, p_);
        X.col(0) = E.col(0);
        for (int j = 1; j < p_; ++j) X.col(j) = phi * X.col(j - 1) + innov * E.col(j);
    }
    return X.rowwise() + mu_.transpose();
}

Matrix gen_design(int n, int p, double rho, const Vector& mu, std::uint64_t seed) {
    return DesignSampler(p, rho, mu).sample(n, seed);
}

Vector gen_response(const Matrix& X, const Vector& beta, double sigma, std::uint64_t seed) {
    if (!(sigma >= 0.0)) throw validation_error("InvalidSigma", "sigma must be >= 0");
    Vector y = X * beta;
    if (sigma == 0.0) return y;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, sigma);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += normal(rng);
    return y;
}

double r_squared(const Vector& beta, const Matrix& Sigma, double sigma) {
    const double signal = beta.dot(Sigma * beta);
    const double total = signal + sigma * sigma;
    return total > 0.0 ? signal / total : 0.0;
}

double sigma_for_r2(const Vector& beta, const Matrix& Sigma, double target_r2) {
    if (!(target_r2 > 0.0 && target_r2 < 1.0))
        throw validation_error("InvalidConfig", "target_r2 must lie in (0, 1)");
    const double signal = beta.dot(Sigma * beta);
    if (!(signal > 0.0)) throw validation_error("ZeroSignal", "beta' Sigma beta is zero");
    return std::sqrt(signal * (1.0 - target_r2) / target_r2);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replication, std::uint64_t stream) {
    return splitmix64(splitmix64(splitmix64(master) ^ replication) ^ (stream * 0x632BE59BD9B4E019ULL));
}

void ExperimentConfig::validate() const {
    auto bad = [](const std::string& field, const std::string& why) {
        return validation_error("InvalidConfig", field + ": " + why);
    };
    if (n < 3) throw bad("n", "must be >= 3");
    if (p < 2) throw bad("p", "must be >= 2");
    if (!(rho >= 0.0 && rho < 1.0)) throw bad("rho", "must lie in [0, 1)");
    if (sigma.has_value() == target_r2.has_value())
        throw bad("sigma", "exactly one of sigma and target_r2 must be given");
    if (sigma && !(*sigma >= 0.0)) throw bad("sigma", "must be >= 0");
    if (target_r2 && !(*target_r2 > 0.0 && *target_r2 < 1.0)) throw bad("target_r2", "must lie in (0, 1)");
    if (reps < 1) throw bad("reps", "must be >= 1");
    if (test_size < 1) throw bad("test_size", "must be >= 1");
    if (!(methods.m1 || methods.m2 || methods.ds_baseline || methods.ls_baseline))
        throw bad("methods", "no method enabled");
    if (!(selection.tau >= 0.0)) throw bad("selection.tau", "must be >= 0");
    if (!(selection.lp_tolerance > 0.0 && selection.lp_tolerance <= 1e-3))
        throw bad("selection.lp_tolerance", "must lie in (0, 1e-3]");
    if (selection.sis_keep && (*selection.sis_keep < 1 || *selection.sis_keep > p))
        throw bad("selection.sis_keep", "must lie in [1, p]");
    if (selection.lambda.mode == LambdaMode::Fixed && !(selection.lambda.value > 0.0))
        throw bad("selection.lambda.value", "fixed lambda must be positive");
    if (selection.lambda.realizations < 1) throw bad("selection.lambda.realizations", "must be >= 1");
    if (instrument.d && *instrument.d < 1) throw bad("instrument.d", "must be >= 1");
    if (instrument.d_max < 1) throw bad("instrument.d_max", "must be >= 1");
    if (!(instrument.rank_tol > 0.0 && instrument.rank_tol < 1.0)) throw bad("instrument.rank_tol", "must lie in (0, 1)");
    if (!(instrument.c > 0.0)) throw bad("instrument.c", "must be positive");
    if (!(instrument.c_k > 0.0)) throw bad("instrument.c_k", "must be positive");
    if (instrument.bandwidth && !(*instrument.bandwidth > 0.0)) throw bad("instrument.bandwidth", "must be positive");
    if (p <= layout(beta.type).support.back()) throw bad("p", "too small for the beta type");
}

const MetricsRow* MetricsTable::find(const std::string& estimator,
                                     const std::string& predictor) const {
    for (const auto& r : rows)
        if (r.estimator == estimator && r.predictor == predictor) return &r;
    return nullptr;
}

namespace {

double coefficient_error(const Vector& estimate_raw, const IndexSet& selected,
                         const CoefficientDraw& coef, MseTarget target) {
    if (target == MseTarget::Selected) {
        return (estimate_raw - gather(coef.beta, selected)).squaredNorm();
    }
    double err = 0.0;
    std::vector<int> all = selected.values();
    all.insert(all.end(), coef.true_support.begin(), coef.true_support.end());
    for (int j : IndexSet(all)) {
        double est = 0.0;
        auto it = std::find(selected.begin(), selected.end(), j);
        if (it != selected.end()) est = estimate_raw(static_cast<Eigen::Index>(it - selected.begin()));
        const double truth = coef.true_support.contains(j) ? coef.beta(j) : 0.0;
        err += (est - truth) * (est - truth);
    }
    return err;
}

}  // namespace

ReplicationRecord run_replication(const ExperimentConfig& config, const CoefficientDraw& coef,
                                  const DesignSampler& sampler, double sigma, int rep) {
    ReplicationRecord rec;
    rec.rep = rep;
    const auto seed = [&](Stream s) {
        return derive_seed(config.seed, static_cast<std::uint64_t>(rep), s);
    };
    try {
        const Matrix X = sampler.sample(config.n, seed(kTrainDesign));
        const Vector y = gen_response(X, coef.beta, sigma, seed(kTrainNoise));
        const Dataset data = standardize(Dataset(X, y));
        const Vector y_raw = data.raw_y();

        const SelectionStage sel = run_selection(data, config.selection, seed(kLambda));
        rec.selected = sel.selection.selected;
        rec.lambda = sel.lambda.lambda;
        rec.warnings = sel.selection.warnings;
        const Partition& part = sel.partition;
        const Vector scales = gather(data.column_scales(), part.z_indices);

        const Matrix X_test_raw = sampler.sample(config.test_size, seed(kTestDesign));
        const Vector y_test = gen_response(X_test_raw, coef.beta, sigma, seed(kTestNoise));
        const Partition test = partition(data.transform(X_test_raw), part.z_indices);

        auto run_method = [&](InstrumentMethod method, const std::string& key) {
            InstrumentOptions opts = config.instrument;
            opts.method = method;
            const InstrumentStage st = run_instrument(part, y_raw, opts);
            const Vector theta_raw = st.fit.theta_hat.cwiseQuotient(scales);
            rec.mse[key] = coefficient_error(theta_raw, part.z_indices, coef, config.mse_target);
            rec.pe[key + ":adjusted"] =
                prediction_error(y_test, predict_adjusted(st.fit, st.plan, test.Z, test.U));
            rec.pe[key + ":working"] = prediction_error(y_test, predict_working(st.fit, test.Z));
            rec.bandwidth[key] = st.fit.h;
            for (const auto& w : st.warnings) rec.warnings.push_back(key + ": " + w);
            if (method == InstrumentMethod::Method1) {
                rec.d_m1 = st.d_selection.d;
                rec.rank_m1 = st.plan.rank;
            }
        };
        if (config.methods.m1) run_method(InstrumentMethod::Method1, "m1");
        if (config.methods.m2) run_method(InstrumentMethod::Method2, "m2");
        if (config.methods.ds_baseline) {
            const Vector ds_raw =
                gather(sel.selection.beta_full, part.z_indices).cwiseQuotient(scales);
            rec.mse["ds_baseline"] =
                coefficient_error(ds_raw, part.z_indices, coef, config.mse_target);
        }
        if (config.methods.ls_baseline) {
            rec.pe["ls_baseline:ls"] = prediction_error(y_test, predict_ls(part.Z, y_raw, test.Z));
        }
        rec.ok = true;
    } catch (const Error& e) {
        rec.ok = false;
        rec.failure = e.what();
        rec.mse.clear();
        rec.pe.clear();
    }
    return rec;
}

MetricsTable run_experiment(const ExperimentConfig& config, int threads) {
    config.validate();
    const CoefficientDraw coef = gen_coefficients(config.beta, config.p);
    const Vector mu = design_mean(config.p, coef.true_support);
    const DesignSampler sampler(config.p, config.rho, mu);

    // Exact covariance for the R^2 bookkeeping; banded products suffice at
    // large p because (-rho)^k underflows long before p.
    const Matrix Sigma = design_covariance(config.p, config.rho);
    const double sigma =
        config.sigma ? *config.sigma : sigma_for_r2(coef.beta, Sigma, *config.target_r2);

    std::vector<ReplicationRecord> records(static_cast<std::size_t>(config.reps));
    const int workers = std::max(1, std::min(threads, config.reps));
    std::atomic<int> next{0};
    auto work = [&] {
        for (int r = next++; r < config.reps; r = next++)
            records[static_cast<std::size_t>(r)] = run_replication(config, coef, sampler, sigma, r);
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < workers; ++t) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    MetricsTable table;
    table.seed = config.seed;
    table.reps = config.reps;
    table.sigma = sigma;
    table.r2 = r_squared(coef.beta, Sigma, sigma);
    for (const auto& rec : records) {
        if (rec.ok) {
            ++table.reps_ok;
            for (int j : rec.selected) ++table.selection_frequency["x" + std::to_string(j + 1)];
        } else {
            ++table.reps_failed;
            table.warnings.push_back("replication " + std::to_string(rec.rep) +
                                     " failed: " + rec.failure);
        }
    }
    if (table.reps_failed * 5 > config.reps)
        throw numerical_error("TooManyFailedReplications",
                              std::to_string(table.reps_failed) + " of " +
                                  std::to_string(config.reps) + " replications failed; first: " +
                                  table.warnings.front());

    auto collect = [&](const std::map<std::string, double> ReplicationRecord::*field,
                       const std::string& key) {
        std::vector<double> v;
        for (const auto& rec : records)
            if (rec.ok) v.push_back((rec.*field).at(key));
        return v;
    };
    auto add_row = [&](const std::string& est, const std::string& pred,
                       const std::optional<std::string>& mse_key,
                       const std::optional<std::string>& pe_key) {
        MetricsRow row{est, pred, {}, {}, {}, {}};
        if (mse_key) {
            const auto v = collect(&ReplicationRecord::mse, *mse_key);
            row.mse = mean(v);
            row.std_mse = sample_sd(v);
        }
        if (pe_key) {
            const auto v = collect(&ReplicationRecord::pe, *pe_key);
            row.pe = mean(v);
            row.std_pe = sample_sd(v);
        }
        table.rows.push_back(std::move(row));
    };
    if (config.methods.m1) {
        add_row("m1", "adjusted", "m1", "m1:adjusted");
        add_row("m1", "working", "m1", "m1:working");
    }
    if (config.methods.m2) {
        add_row("m2", "adjusted", "m2", "m2:adjusted");
        add_row("m2", "working", "m2", "m2:working");
    }
    if (config.methods.ds_baseline) add_row("ds_baseline", "none", "ds_baseline", std::nullopt);
    if (config.methods.ls_baseline) add_row("ls_baseline", "ls", std::nullopt, "ls_baseline:ls");

    for (auto& rec : records)
        for (const auto& w : rec.warnings)
            table.warnings.push_back("replication " + std::to_string(rec.rep) + ": " + w);
    table.records = std::move(records);
    return table;
}

}  // namespace qiv
