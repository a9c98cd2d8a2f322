#pragma once

#include "qiv/dataset.hpp"
#include "qiv/pipeline.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qiv {

/// Significant-coefficient layouts. I-III are the p = 100 designs; IV is
/// the ten-coefficient layout of the screening experiment.
enum class BetaType { I, II, III, IV };

struct BetaSpec {
    BetaType type = BetaType::I;
    /// When false, coefficients off the true support are U(-0.5, 0.15)
    /// draws with negatives set to zero.
    bool sparse = false;
    std::uint64_t seed = 1;
};

struct CoefficientDraw {
    Vector beta;
    IndexSet true_support;
};

/// Throws IncompatibleDimensions when p cannot hold the support.
CoefficientDraw gen_coefficients(const BetaSpec& spec, int p);

/// Sigma_ij = (-rho)^|i-j|.
Matrix design_covariance(int p, double rho);

/// Mean vector: 0 on the support, 2 elsewhere.
Vector design_mean(int p, const IndexSet& support);

/// Draws rows x ~ N_p(mu, Sigma) with Sigma_ij = (-rho)^|i-j|. Uses the
/// Cholesky factor of the explicit covariance for p <= 2000 and the exact
/// AR(1) recursion with coefficient -rho above that.
class DesignSampler {
public:
    DesignSampler(int p, double rho, Vector mu);

    Matrix sample(int n, std::uint64_t seed) const;
    bool uses_cholesky() const { return use_cholesky_; }

    static constexpr int kCholeskyLimit = 2000;

private:
    int p_;
    double rho_;
    Vector mu_;
    bool use_cholesky_;
    Matrix lower_;
};

Matrix gen_design(int n, int p, double rho, const Vector& mu, std::uint64_t seed);

/// y = X beta + eps, eps ~ N(0, sigma^2).
Vector gen_response(const Matrix& X, const Vector& beta, double sigma, std::uint64_t seed);

/// (Var(Y) - sigma^2) / Var(Y) with Var(Y) = beta' Sigma beta + sigma^2.
double r_squared(const Vector& beta, const Matrix& Sigma, double sigma);

/// Inverse of r_squared in sigma; throws ZeroSignal when beta' Sigma beta = 0.
double sigma_for_r2(const Vector& beta, const Matrix& Sigma, double target_r2);

/// Independent stream seed for (master, replication, purpose).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t replication, std::uint64_t stream);

enum class MseTarget {
    /// ||theta - beta[I_hat]||^2
    Selected,
    /// Squared error over I u I_hat, estimate zero off I_hat, target zero off I.
    TrueSupport,
};

struct MethodFlags {
    bool m1 = true;
    bool m2 = true;
    bool ds_baseline = true;
    bool ls_baseline = true;
};

struct ExperimentConfig {
    std::string name = "experiment";
    int n = 50;
    int p = 100;
    double rho = 0.1;
    BetaSpec beta;
    /// Exactly one of sigma / target_r2.
    std::optional<double> sigma;
    std::optional<double> target_r2;
    int reps = 10;
    MethodFlags methods;
    SelectionOptions selection;
    /// Method-1 options; Method 2 reuses rank_tol, c, c_k and bandwidth.
    InstrumentOptions instrument;
    std::uint64_t seed = 1;
    int test_size = 1000;
    MseTarget mse_target = MseTarget::Selected;

    /// Throws InvalidConfig naming the offending field.
    void validate() const;
};

struct ReplicationRecord {
    int rep = 0;
    bool ok = false;
    std::string failure;
    IndexSet selected;
    double lambda = 0.0;
    std::map<std::string, double> mse;
    std::map<std::string, double> pe;
    int d_m1 = 0;
    int rank_m1 = 0;
    std::map<std::string, double> bandwidth;
    std::vector<std::string> warnings;
};

struct MetricsRow {
    std::string estimator;
    std::string predictor;
    std::optional<double> mse;
    std::optional<double> std_mse;
    std::optional<double> pe;
    std::optional<double> std_pe;
};

struct MetricsTable {
    std::vector<MetricsRow> rows;
    std::uint64_t seed = 0;
    int reps = 0;
    int reps_ok = 0;
    int reps_failed = 0;
    double sigma = 0.0;
    double r2 = 0.0;
    /// Selection frequency of each predictor (one-based name -> count).
    std::map<std::string, int> selection_frequency;
    std::vector<ReplicationRecord> records;
    std::vector<std::string> warnings;

    const MetricsRow* find(const std::string& estimator, const std::string& predictor) const;
};

/// One replication; never throws for numerical failures, which are recorded.
ReplicationRecord run_replication(const ExperimentConfig& config, const CoefficientDraw& coef,
                                  const DesignSampler& sampler, double sigma, int rep);

/// Runs every replication (in parallel across `threads` workers) and
/// aggregates by replication index, so the table does not depend on the
/// thread count. Throws TooManyFailedReplications when more than 20% fail.
MetricsTable run_experiment(const ExperimentConfig& config, int threads = 1);

}  // namespace qiv
