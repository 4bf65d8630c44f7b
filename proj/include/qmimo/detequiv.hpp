// SPDX-License-Identifier: Apache-2.0
//
// Deterministic equivalent of the per-user uplink SE under the proposed
// quantization-aware MMSE receiver.
//
// The effective columns Lambda g_k have covariance beta_k Lambda Lambda^H, so
// the resolvent machinery is applied to
//     A = Lambda G G^H Lambda^H + Z + theta I
// with per-column covariances R_k = M beta_k Lambda Lambda^H and Z, theta
// left unscaled. Under that convention
//     S      = (sum_i beta_i L / (1 + delta_i) + Z + theta I)^{-1},  L = Lambda Lambda^H
//     delta_k = beta_k tr(L S),   Gamma1 = tr(L S)
// and every matrix involved is diagonal, so S and S' are kept as their
// diagonals.

#ifndef QMIMO_DETEQUIV_HPP
#define QMIMO_DETEQUIV_HPP

#include "aqnm.hpp"
#include "channel.hpp"
#include "core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace qmimo {

class ConvergenceError : public NumericalError {
public:
    ConvergenceError(int iterations, double residual)
        : NumericalError("fixed point did not converge after " + std::to_string(iterations) +
                         " iterations (residual " + std::to_string(residual) + ")"),
          iterations_(iterations), residual_(residual) {}

    int iterations() const { return iterations_; }
    double residual() const { return residual_; }

private:
    int iterations_;
    double residual_;
};

struct FixedPointOptions {
    double tol = 1e-9;   // max relative change in delta
    int max_iter = 500;
    bool newton = true;  // Newton proposals using the map's Jacobian (J below)
};

struct DetEqState {
    RVector betas;
    RVector lambda_sq;  // diagonal of L = Lambda Lambda^H
    RVector z;          // diagonal of Z
    double reg = 0.0;   // theta

    RVector delta;
    RVector S;  // diagonal of S
    double gamma1 = 0.0;
    int iterations_used = 0;
    double residual = 0.0;

    // Filled by solve_sprime.
    bool sprime_ready = false;
    RVector Theta;
    RMatrix J;
    RVector v;
    RVector delta_prime;
    RVector S_prime;
    double j_spectral_radius = 0.0;
    double condition_estimate = 1.0;
    bool sprime_flagged = false;  // spectral radius of J >= 1

    Eigen::Index antennas() const { return lambda_sq.size(); }
    Eigen::Index users() const { return betas.size(); }
};

namespace detail {

inline RVector resolvent_diag(const DetEqState& st, const RVector& delta) {
    double load = 0.0;
    for (Eigen::Index i = 0; i < delta.size(); ++i) load += st.betas[i] / (1.0 + delta[i]);
    RVector denom = st.lambda_sq * load + st.z;
    denom.array() += st.reg;
    return denom.cwiseInverse();
}

inline double max_relative_change(const RVector& next, const RVector& prev) {
    double r = 0.0;
    for (Eigen::Index k = 0; k < next.size(); ++k) {
        const double scale = std::max(std::abs(next[k]), std::abs(prev[k]));
        if (scale > 0.0) r = std::max(r, std::abs(next[k] - prev[k]) / scale);
    }
    return r;
}

// J_kl = beta_k beta_l tr(L S L S) / (1 + delta_l)^2, which is also the
// Jacobian of the fixed-point map delta -> beta tr(L S(delta)).
inline RMatrix coupling_matrix(const RVector& betas, const RVector& delta, const RVector& lambda_sq,
                               const RVector& S) {
    const double t = (lambda_sq.cwiseProduct(S)).squaredNorm();
    const RVector col = betas.cwiseQuotient((RVector::Ones(delta.size()) + delta).cwiseAbs2());
    return t * betas * col.transpose();
}

} // namespace detail

// Solves the resolvent fixed point for delta, starting from 1/theta.
inline DetEqState solve_gamma1(const RVector& betas, const RVector& lambda, const RVector& z,
                               double theta, const FixedPointOptions& opts = {}) {
    detail::require(theta > 0.0, "solve_gamma1: theta must be positive");
    detail::require(opts.tol > 0.0, "solve_gamma1: tol must be positive");
    detail::require(opts.max_iter >= 1, "solve_gamma1: max_iter must be >= 1");
    detail::require_dims(z.size() == lambda.size(), "solve_gamma1: Z and Lambda sizes differ");
    detail::require((betas.array() >= 0.0).all(), "solve_gamma1: betas must be nonnegative");

    DetEqState st;
    st.betas = betas;
    st.lambda_sq = lambda.cwiseAbs2();
    st.z = z;
    st.reg = theta;

    const Eigen::Index K = betas.size();
    auto map = [&](const RVector& d, RVector& S) {
        S = detail::resolvent_diag(st, d);
        return RVector(betas * st.lambda_sq.dot(S));
    };

    RVector delta = RVector::Constant(K, 1.0 / theta);
    RVector S;
    double residual = std::numeric_limits<double>::infinity();
    int it = 0;
    bool converged = false;
    while (it < opts.max_iter) {
        ++it;
        const RVector next = map(delta, S);
        residual = detail::max_relative_change(next, delta);
        if (residual <= opts.tol) {
            delta = next;
            converged = true;
            break;
        }
        if (opts.newton && K > 0) {
            const RMatrix J = detail::coupling_matrix(betas, delta, st.lambda_sq, S);
            const RMatrix IJ = RMatrix::Identity(K, K) - J;
            const RVector step = IJ.partialPivLu().solve(next - delta);
            const RVector cand = delta + step;
            if (cand.allFinite() && (cand.array() >= 0.0).all()) {
                RVector S_cand;
                const RVector cand_next = map(cand, S_cand);
                if (detail::max_relative_change(cand_next, cand) < residual) {
                    delta = cand;
                    continue;
                }
            }
        }
        delta = next;
    }
    if (!converged) throw ConvergenceError(it, residual);

    st.delta = delta;
    st.S = detail::resolvent_diag(st, delta);
    st.gamma1 = st.lambda_sq.dot(st.S);
    st.iterations_used = it;
    st.residual = residual;
    return st;
}

// Builds J and v for the given Theta (diagonal), solves (I - J) delta' = v and
// assembles S' = S Theta S + S [sum_k beta_k L delta'_k / (1 + delta_k)^2] S.
inline DetEqState solve_sprime(DetEqState st, const RVector& Theta) {
    detail::require_dims(Theta.size() == st.antennas(), "solve_sprime: Theta size mismatch");
    const Eigen::Index K = st.users();
    const RVector& L = st.lambda_sq;
    const RVector& S = st.S;

    st.Theta = Theta;
    st.J = detail::coupling_matrix(st.betas, st.delta, L, S);
    st.v = st.betas * (L.cwiseProduct(S).cwiseProduct(Theta).cwiseProduct(S)).sum();

    if (K > 0) {
        const RMatrix IJ = RMatrix::Identity(K, K) - st.J;
        Eigen::JacobiSVD<RMatrix> svd(IJ);
        const auto& sv = svd.singularValues();
        const double smin = sv[sv.size() - 1];
        st.condition_estimate =
            smin > 0.0 ? sv[0] / smin : std::numeric_limits<double>::infinity();
        if (!std::isfinite(st.condition_estimate) || smin <= sv[0] * 1e-15)
            throw NumericalError("solve_sprime: I - J is singular (condition estimate " +
                                 std::to_string(st.condition_estimate) + ")");

        const Eigen::EigenSolver<RMatrix> eig(st.J, false);
        st.j_spectral_radius = eig.eigenvalues().cwiseAbs().maxCoeff();
        st.sprime_flagged = st.j_spectral_radius >= 1.0;

        const auto lu = IJ.fullPivLu();
        st.delta_prime = lu.solve(st.v);
        if (st.condition_estimate > 1e8) {
            for (int pass = 0; pass < 3; ++pass)
                st.delta_prime += lu.solve(st.v - IJ * st.delta_prime);
        }
    } else {
        st.J.resize(0, 0);
        st.delta_prime.resize(0);
        st.j_spectral_radius = 0.0;
        st.condition_estimate = 1.0;
    }

    double weight = 0.0;
    for (Eigen::Index k = 0; k < K; ++k)
        weight += st.betas[k] * st.delta_prime[k] / std::pow(1.0 + st.delta[k], 2);
    st.S_prime = S.cwiseProduct(Theta).cwiseProduct(S) + weight * S.cwiseProduct(L).cwiseProduct(S);
    st.sprime_ready = true;
    return st;
}

struct DetEqReport {
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double gamma3 = 0.0;
    RVector sinr_asym;
    RVector rates_asym;
    double sum_se_asym = 0.0;
};

// Gamma2 = tr(L S'), Gamma3 = tr(Rbar S') with Theta = L, and
//   Rbar_k = log2(1 + p_u beta_k Gamma1^2 /
//                 (p_u sum_{i != k} beta_i Gamma2 / (1 + beta_i Gamma1)^2 + Gamma2 + Gamma3)).
inline DetEqReport gammas_and_rates(const DetEqState& st, const RVector& betas,
                                    const QuantNoiseCov& rbar, double pu) {
    detail::require(st.sprime_ready, "gammas_and_rates: solve_sprime has not been run");
    detail::require(pu > 0.0, "gammas_and_rates: p_u must be positive");
    detail::require_dims(betas.size() == st.users(), "gammas_and_rates: betas size mismatch");
    detail::require_dims(rbar.size() == st.antennas(), "gammas_and_rates: Rbar size mismatch");

    DetEqReport r;
    r.gamma1 = st.gamma1;
    r.gamma2 = st.lambda_sq.dot(st.S_prime);
    r.gamma3 = rbar.diag_entries.dot(st.S_prime);

    const Eigen::Index K = betas.size();
    RVector interf_terms(K);
    for (Eigen::Index i = 0; i < K; ++i)
        interf_terms[i] = betas[i] * r.gamma2 / std::pow(1.0 + betas[i] * r.gamma1, 2);
    const double interf_total = interf_terms.sum();

    r.sinr_asym.resize(K);
    r.rates_asym.resize(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        const double denom = pu * (interf_total - interf_terms[k]) + r.gamma2 + r.gamma3;
        r.sinr_asym[k] = pu * betas[k] * r.gamma1 * r.gamma1 / denom;
        r.rates_asym[k] = std::log2(1.0 + r.sinr_asym[k]);
    }
    r.sum_se_asym = r.rates_asym.sum();
    return r;
}

struct DetEqResult {
    DetEqState state;
    DetEqReport report;
};

// Full pipeline for one drop: Z and Rbar from (Lambda, beta, p_u), then
// Gamma1, S', and the per-user asymptotic rates.
inline DetEqResult deterministic_equivalent(const LargeScaleProfile& profile,
                                            const RVector& lambda, double pu,
                                            const FixedPointOptions& opts = {}) {
    detail::require(pu > 0.0, "deterministic_equivalent: p_u must be positive");
    const QuantNoiseCov rbar = avg_quant_noise_cov(lambda, profile, pu);
    const RVector z = rbar.diag_entries / pu;
    DetEqResult out;
    out.state = solve_gamma1(profile.betas, lambda, z, 1.0 / pu, opts);
    out.state = solve_sprime(std::move(out.state), lambda.cwiseAbs2());
    out.report = gammas_and_rates(out.state, profile.betas, rbar, pu);
    return out;
}

} // namespace qmimo

#endif
