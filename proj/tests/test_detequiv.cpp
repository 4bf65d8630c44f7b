// SPDX-License-Identifier: Apache-2.0

#include "oracles.hpp"

#include <qmimo/detequiv.hpp>
#include <qmimo/receiver.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace qmimo;

TEST(SolveGamma1, QuadraticClosedForm) {
    // alpha = 1, z = 0, beta = 1, M = 4, K = 2, theta = 0.1:
    // 0.1 g^2 - 1.9 g - 4 = 0.
    const auto st = solve_gamma1(RVector::Ones(2), RVector::Ones(4), RVector::Zero(4), 0.1);
    EXPECT_NEAR(st.gamma1, 20.912712210513327, 1e-8);
    EXPECT_LE(st.residual, 1e-9);
    EXPECT_NEAR(st.delta[0], st.gamma1, 1e-8);
}

TEST(SolveGamma1, HomogeneousMatchesScalarBisection) {
    for (double alpha : {0.6366, 0.8825, 1.0})
        for (double z : {0.0, 0.05, 2.0})
            for (double theta : {1e-4, 0.1, 3.0}) {
                const int M = 32, K = 6;
                const double beta = 0.7;
                const auto st = solve_gamma1(RVector::Constant(K, beta), RVector::Constant(M, alpha),
                                             RVector::Constant(M, z), theta);
                const double ref = oracle::scalar_gamma1(M, K, alpha, beta, z, theta);
                EXPECT_NEAR(st.gamma1, ref, 1e-8 * ref) << alpha << " " << z << " " << theta;
            }
}

TEST(SolveGamma1, NoUserLimit) {
    const RVector lambda = (RVector(3) << 0.6366, 0.8825, 1.0).finished();
    const RVector z = (RVector(3) << 0.3, 0.1, 0.0).finished();
    const double theta = 0.5;
    const double limit = (lambda.cwiseAbs2().array() / (z.array() + theta)).sum();
    const auto tiny = solve_gamma1(RVector::Constant(4, 1e-12), lambda, z, theta);
    EXPECT_NEAR(tiny.gamma1, limit, 1e-9);
    const auto none = solve_gamma1(RVector(0), lambda, z, theta);
    EXPECT_NEAR(none.gamma1, limit, 1e-15);
}

TEST(SolveGamma1, DecreasesWithTheta) {
    const RVector betas = (RVector(3) << 0.01, 0.3, 1.2).finished();
    const RVector lambda = AdcProfile::uniform(20, AdcResolution::bits(2)).alphas;
    const RVector z = RVector::Constant(20, 0.02);
    double prev = std::numeric_limits<double>::infinity();
    for (double theta : {1e-6, 1e-4, 1e-2, 1.0, 10.0}) {
        const double g = solve_gamma1(betas, lambda, z, theta).gamma1;
        EXPECT_LT(g, prev);
        prev = g;
    }
}

TEST(SolveGamma1, ErrorPaths) {
    EXPECT_THROW(solve_gamma1(RVector::Ones(2), RVector::Ones(4), RVector::Zero(4), 0.0), InvalidArgument);
    FixedPointOptions bad;
    bad.tol = 0.0;
    EXPECT_THROW(solve_gamma1(RVector::Ones(2), RVector::Ones(4), RVector::Zero(4), 0.1, bad), InvalidArgument);
    FixedPointOptions one;
    one.max_iter = 1;
    one.newton = false;
    try {
        solve_gamma1(RVector::Ones(2), RVector::Ones(4), RVector::Zero(4), 0.1, one);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError& e) {
        EXPECT_EQ(e.iterations(), 1);
        EXPECT_GT(e.residual(), 1e-9);
    }
}

TEST(SolveGamma1, NewtonAndPlainIterationAgree) {
    const RVector betas = (RVector(4) << 0.002, 0.05, 0.4, 1.0).finished();
    const RVector lambda = AdcProfile::from_bits({AdcResolution::bits(1), AdcResolution::bits(3),
                                                  AdcResolution::ideal(), AdcResolution::bits(2),
                                                  AdcResolution::bits(2), AdcResolution::bits(1)})
                               .alphas;
    const RVector z = distortion_weights(lambda) * 2.0;
    FixedPointOptions plain;
    plain.newton = false;
    plain.max_iter = 100000;
    plain.tol = 1e-13;
    FixedPointOptions newton;
    newton.tol = 1e-13;
    const auto a = solve_gamma1(betas, lambda, z, 0.01, plain);
    const auto b = solve_gamma1(betas, lambda, z, 0.01, newton);
    EXPECT_NEAR(a.gamma1, b.gamma1, 1e-10 * a.gamma1);
    EXPECT_LE(b.iterations_used, a.iterations_used);
}

TEST(SolveSprime, EmptyUserSetGivesSThetaS) {
    const RVector lambda = (RVector(3) << 0.6366, 0.8825, 1.0).finished();
    const RVector z = (RVector(3) << 0.3, 0.1, 0.0).finished();
    const RVector Theta = (RVector(3) << 2.0, 0.5, 1.0).finished();
    auto st = solve_sprime(solve_gamma1(RVector(0), lambda, z, 0.5), Theta);
    EXPECT_LT((st.S_prime - st.S.cwiseProduct(Theta).cwiseProduct(st.S)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(SolveSprime, HomogeneousMatchesImplicitDerivative) {
    const int M = 24, K = 5;
    for (double alpha : {0.6366, 0.96546})
        for (double theta : {0.01, 0.5}) {
            const double beta = 0.8, z = 0.04;
            auto st = solve_gamma1(RVector::Constant(K, beta), RVector::Constant(M, alpha), RVector::Constant(M, z),
                                   theta);
            st = solve_sprime(std::move(st), RVector::Constant(M, alpha * alpha));
            const double ref = oracle::scalar_delta_prime(M, K, alpha, beta, z, theta);
            for (int k = 0; k < K; ++k) EXPECT_NEAR(st.delta_prime[k], ref, 1e-8 * std::abs(ref));
            EXPECT_LT(st.j_spectral_radius, 1.0);
            EXPECT_FALSE(st.sprime_flagged);
        }
}

TEST(SolveSprime, MatchesFiniteDifferenceOfResolvent) {
    // S' = d/dx (sum beta L/(1+delta(x)) + Z + theta I - x Theta)^{-1} at x = 0.
    const RVector betas = (RVector(3) << 0.2, 1.0, 3.0).finished();
    const RVector lambda = AdcProfile::from_bits({AdcResolution::bits(1), AdcResolution::bits(2),
                                                  AdcResolution::bits(3), AdcResolution::ideal(),
                                                  AdcResolution::bits(1), AdcResolution::bits(2),
                                                  AdcResolution::bits(2), AdcResolution::bits(3)})
                               .alphas;
    const RVector z = distortion_weights(lambda) * 1.5;
    const double theta = 0.2;
    const RVector Theta = (RVector(8) << 1, 2, 0.5, 0.1, 3, 0.7, 1.1, 0.2).finished();
    FixedPointOptions tight;
    tight.tol = 1e-14;
    const auto st = solve_sprime(solve_gamma1(betas, lambda, z, theta, tight), Theta);
    const double h = 1e-5;
    const auto up = solve_gamma1(betas, lambda, z - h * Theta, theta, tight);
    const auto dn = solve_gamma1(betas, lambda, z + h * Theta, theta, tight);
    const RVector fd_S = (up.S - dn.S) / (2 * h);
    const RVector fd_delta = (up.delta - dn.delta) / (2 * h);
    EXPECT_LT(((fd_S - st.S_prime).cwiseAbs().array() / st.S_prime.cwiseAbs().array()).maxCoeff(), 1e-6);
    EXPECT_LT(((fd_delta - st.delta_prime).cwiseAbs().array() / st.delta_prime.cwiseAbs().array()).maxCoeff(), 1e-6);
}

TEST(SolveSprime, Gamma3RoutesAgree) {
    // tr(Rbar S'[Theta = L]) equals tr(L S'[Theta = Rbar]) for diagonal inputs.
    const RVector betas = (RVector(4) << 0.01, 0.2, 1.0, 2.0).finished();
    const RVector lambda = AdcProfile::from_bits({AdcResolution::bits(1), AdcResolution::bits(2),
                                                  AdcResolution::bits(3), AdcResolution::bits(1),
                                                  AdcResolution::bits(2), AdcResolution::bits(3)})
                               .alphas;
    LargeScaleProfile p;
    p.betas = betas;
    const double pu = 50.0;
    const RVector rbar = avg_quant_noise_cov(lambda, p, pu).diag_entries;
    const auto base = solve_gamma1(betas, lambda, rbar / pu, 1.0 / pu);
    const RVector L = lambda.cwiseAbs2();
    const auto a = solve_sprime(base, L);
    const auto b = solve_sprime(base, rbar);
    EXPECT_NEAR(rbar.dot(a.S_prime), L.dot(b.S_prime), 1e-12 * rbar.dot(a.S_prime));
}

TEST(GammasAndRates, IdealAdcsHaveNoQuantizationTerm) {
    LargeScaleProfile p;
    p.betas = (RVector(3) << 0.1, 0.5, 1.0).finished();
    const auto r = deterministic_equivalent(p, RVector::Ones(16), 10.0).report;
    EXPECT_EQ(r.gamma3, 0.0);
    EXPECT_GT(r.gamma1, 0.0);
    EXPECT_GT(r.gamma2, 0.0);
}

TEST(GammasAndRates, SingleUserStructure) {
    LargeScaleProfile p;
    p.betas = RVector::Constant(1, 0.3);
    const double pu = 20.0;
    const RVector lambda = AdcProfile::uniform(12, AdcResolution::bits(2)).alphas;
    const auto r = deterministic_equivalent(p, lambda, pu).report;
    EXPECT_NEAR(r.rates_asym[0],
                std::log2(1.0 + pu * 0.3 * r.gamma1 * r.gamma1 / (r.gamma2 + r.gamma3)), 1e-12);
    EXPECT_DOUBLE_EQ(r.sum_se_asym, r.rates_asym[0]);
}

TEST(GammasAndRates, RequiresSprime) {
    const auto st = solve_gamma1(RVector::Ones(2), RVector::Ones(4), RVector::Zero(4), 0.1);
    EXPECT_THROW(gammas_and_rates(st, RVector::Ones(2), QuantNoiseCov{RVector::Zero(4)}, 10.0), InvalidArgument);
}

TEST(DetEquiv, StatesAreHermitianAndPositive) {
    LargeScaleProfile p;
    p.betas = (RVector(4) << 0.001, 0.02, 0.3, 1.0).finished();
    const RVector lambda = AdcProfile::uniform(64, AdcResolution::bits(1)).alphas;
    const auto res = deterministic_equivalent(p, lambda, db_to_linear(30));
    EXPECT_GT(res.state.S.minCoeff(), 0.0);
    EXPECT_GT(res.state.delta.minCoeff(), 0.0);
    EXPECT_GT(res.state.S_prime.minCoeff(), 0.0);
    EXPECT_GT(res.report.gamma3, 0.0);
}

namespace {

// Mean over channel draws of tr(L V) and of g_k^H L^{1/2} V_(k) L^{1/2} g_k for
// the proposed receiver at one large-system point.
struct ChainStats {
    double trace_LV = 0;
    RVector quad;
};

ChainStats chain_stats(const LargeScaleProfile& p, const RVector& lambda, double pu, int draws, std::uint64_t seed) {
    RandomStream rng(seed);
    const Eigen::Index M = lambda.size(), K = p.users();
    ChainStats s;
    s.quad = RVector::Zero(K);
    for (int d = 0; d < draws; ++d) {
        const auto ch = draw_channel(p, M, rng);
        const auto ctx = build_receiver(ReceiverKind::ProposedMmse, ch, lambda, p, pu);
        s.trace_LV += (lambda.cwiseAbs2().cast<cdouble>().asDiagonal() * (*ctx.V)).trace().real();
        const CMatrix A = lambda.asDiagonal() * ch.G;
        for (Eigen::Index k = 0; k < K; ++k) {
            // V_(k) through Sherman-Morrison: a^H V_(k) a = q / (1 - q), q = a^H V a.
            const cdouble q = (A.col(k).adjoint() * (*ctx.V) * A.col(k))(0, 0);
            s.quad[k] += q.real() / (1.0 - q.real());
        }
    }
    s.trace_LV /= draws;
    s.quad /= draws;
    return s;
}

} // namespace

TEST(DetEquiv, ConsistencyChainAtLargeM) {
    LargeScaleProfile p;
    p.betas = (RVector(8) << 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0, 1.5).finished();
    RandomStream bits_rng(3);
    std::vector<AdcResolution> bits;
    for (int m = 0; m < 256; ++m) bits.push_back(AdcResolution::bits(bits_rng.uniform_int(1, 3)));
    const RVector lambda = AdcProfile::from_bits(bits).alphas;
    const double pu = 10.0;
    const auto de = deterministic_equivalent(p, lambda, pu);
    for (std::uint64_t seed : {1, 2, 3}) {
        const auto s = chain_stats(p, lambda, pu, 40, seed);
        EXPECT_LT(std::abs(s.trace_LV - de.report.gamma1) / de.report.gamma1, 0.05);
        for (int k = 0; k < 8; ++k) {
            const double target = p.betas[k] * de.report.gamma1;
            EXPECT_LT(std::abs(s.quad[k] - target) / target, 0.05) << "seed " << seed << " user " << k;
        }
    }
}
