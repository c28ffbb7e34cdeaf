#pragma once

#include <cstdint>
#include <vector>

#include "covsem/optim.hpp"
#include "covsem/types.hpp"

namespace covsem {

/// Negative log-likelihood of the two self-covariance blocks,
///   l_x + l_y = log|Sigma_xx| + tr(S_xx Sigma_xx^-1)
///             + log|Sigma_yy| + tr(S_yy Sigma_yy^-1).
/// Throws std::runtime_error if a Sigma block cannot be factorized.
double neg_loglik_self(const FactorParams& theta, const CovBlocks& s);

/// Unconstrained packing of FactorParams for the optimizer:
/// [lambda_x[1..p1-1], log theta_delta, lambda_y[1..p2-1], log theta_eps, log tau].
struct SelfParamPacking {
    Index p1 = 0;
    Index p2 = 0;

    Index dim() const { return 2 * p1 + 2 * p2 - 1; }
    Vector pack(const FactorParams& theta) const;
    FactorParams unpack(const Vector& v) const;
};

/// Self-likelihood objective in packed coordinates with analytic gradient.
/// Returns +infinity when a Sigma block is numerically singular.
class SelfObjective {
public:
    explicit SelfObjective(CovBlocks s);

    double operator()(const Vector& packed, Vector* grad) const;
    const SelfParamPacking& packing() const { return packing_; }

private:
    CovBlocks s_;
    SelfParamPacking packing_;
};

struct Candidate {
    FactorParams theta;
    double ell_self = 0.0;
};

/// Multi-start minimization of the self-covariance likelihood. Returns each
/// usable local optimum as a candidate, sorted ascending by ell_self.
/// Preconditions: n > p1, n > p2 and both S blocks positive definite
/// (std::invalid_argument names the offending block otherwise).
std::vector<Candidate> fit_self_mle(const CovBlocks& s, int n_init, std::uint64_t seed);

struct EpsCalibration {
    double eps_n = 0.0;
    std::vector<double> deltas;  // one likelihood gap per bootstrap replicate
    int redraws = 0;
};

/// Bootstrap calibration of the likelihood slack:
///   delta_b = ell_self(theta_hat; S^(b)) - ell_self(theta_hat^(b); S^(b)),
///   eps_n   = Quantile_{1-alpha}(delta_1, ..., delta_B).
/// Each replicate refit warm-starts from theta_hat (which makes delta_b >= 0
/// by the descent contract) plus two random restarts. Replicates whose
/// resampled covariance cannot support a finite refit are redrawn, up to
/// 10*B attempts in total.
EpsCalibration calibrate_eps_n(const DataBlocks& data, const FactorParams& theta_hat,
                               int B, double alpha, std::uint64_t seed);

struct FeasiblePool {
    std::vector<Candidate> candidates;  // ascending by ell_self
    double ell_hat = 0.0;
    double eps_n = 0.0;
    double alpha = 0.05;
};

/// Retains exactly the candidates with ell_self <= ell_hat + eps_n (ties
/// within 1e-12 kept). The minimizer is always retained.
FeasiblePool build_feasible_pool(std::vector<Candidate> candidates, double eps_n,
                                 double alpha = 0.05);

/// Approximates the continuum of near-optimal parameters: evaluates
/// `per_candidate` Gaussian perturbations (relative scale `rel_scale`, in
/// packed coordinates) of every pool member and keeps those that still pass
/// the eps_n threshold.
FeasiblePool enrich_pool(const FeasiblePool& pool, const CovBlocks& s, int per_candidate,
                         double rel_scale, std::uint64_t seed);

}  // namespace covsem
