// SPDX-License-Identifier: Apache-2.0
//
// Linear receivers for the quantized uplink and their exact per-realization
// SINR and rates.

#ifndef QMIMO_RECEIVER_HPP
#define QMIMO_RECEIVER_HPP

#include "aqnm.hpp"
#include "channel.hpp"
#include "core.hpp"
#include "random.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <string_view>

namespace qmimo {

enum class ReceiverKind {
    ProposedMmse,  // suppresses AWGN and average quantization noise
    AwgnOnlyMmse,  // same structure without the quantization-noise term Z
    Mrc,
};

inline std::string_view to_string(ReceiverKind kind) {
    switch (kind) {
    case ReceiverKind::ProposedMmse: return "proposed";
    case ReceiverKind::AwgnOnlyMmse: return "awgn_only";
    case ReceiverKind::Mrc: return "mrc";
    }
    return "unknown";
}

inline ReceiverKind parse_receiver_kind(std::string_view name) {
    if (name == "proposed") return ReceiverKind::ProposedMmse;
    if (name == "awgn_only") return ReceiverKind::AwgnOnlyMmse;
    if (name == "mrc") return ReceiverKind::Mrc;
    throw InvalidArgument("unknown receiver '" + std::string(name) +
                          "' (expected proposed, awgn_only or mrc)");
}

struct ReceiverContext {
    ReceiverKind kind = ReceiverKind::ProposedMmse;
    CMatrix W;                // K x M combining matrix
    std::optional<CMatrix> V; // (Lambda G G^H Lambda^H + Z + theta I)^{-1}, ProposedMmse only
    RVector Z;                // diagonal of Z
    double theta = 0.0;       // 1 / p_u
};

// Z = (1/p_u) Lambda (I - Lambda) (p_u tr(D) + 1), i.e. Rbar_nq / p_u.
inline RVector noise_shaping_term(const RVector& lambda, const LargeScaleProfile& profile,
                                  double pu) {
    return avg_quant_noise_cov(lambda, profile, pu).diag_entries / pu;
}

namespace detail {

inline CMatrix quantized_channel(const CMatrix& G, const RVector& lambda) {
    return lambda.asDiagonal() * G;
}

inline Eigen::LLT<CMatrix> factor_core(const CMatrix& A, const RVector& diag_load) {
    const Eigen::Index m = A.rows();
    CMatrix core = CMatrix::Zero(m, m);
    core.selfadjointView<Eigen::Lower>().rankUpdate(A);
    core.diagonal() += diag_load.cast<cdouble>();
    Eigen::LLT<CMatrix> llt(core.selfadjointView<Eigen::Lower>());
    if (llt.info() != Eigen::Success)
        throw NumericalError("build_receiver: core matrix is not positive definite");
    return llt;
}

} // namespace detail

inline ReceiverContext build_receiver(ReceiverKind kind, const CMatrix& G, const RVector& lambda,
                                      const LargeScaleProfile& profile, double pu) {
    detail::require(pu > 0.0, "build_receiver: p_u must be positive");
    detail::require_dims(G.rows() == lambda.size(), "build_receiver: G rows != Lambda size");
    detail::require_dims(G.cols() == profile.users(), "build_receiver: G cols != number of users");
    if (!G.allFinite() || !lambda.allFinite() || !profile.betas.allFinite())
        throw NumericalError("build_receiver: non-finite channel, gain or large-scale input");

    ReceiverContext ctx;
    ctx.kind = kind;
    ctx.theta = 1.0 / pu;
    ctx.Z = noise_shaping_term(lambda, profile, pu);

    const CMatrix A = detail::quantized_channel(G, lambda);
    const Eigen::Index m = G.rows();
    switch (kind) {
    case ReceiverKind::ProposedMmse: {
        const RVector load = ctx.Z + RVector::Constant(m, ctx.theta);
        auto llt = detail::factor_core(A, load);
        CMatrix V = llt.solve(CMatrix::Identity(m, m));
        V = (0.5 * (V + V.adjoint())).eval();
        ctx.W = A.adjoint() * V;
        ctx.V = std::move(V);
        break;
    }
    case ReceiverKind::AwgnOnlyMmse: {
        auto llt = detail::factor_core(A, RVector::Constant(m, ctx.theta));
        ctx.W = llt.solve(A).adjoint();
        break;
    }
    case ReceiverKind::Mrc:
        ctx.W = A.adjoint();
        break;
    }
    return ctx;
}

inline ReceiverContext build_receiver(ReceiverKind kind, const ChannelRealization& ch,
                                      const RVector& lambda, const LargeScaleProfile& profile,
                                      double pu) {
    return build_receiver(kind, ch.G, lambda, profile, pu);
}

struct SinrBreakdown {
    RVector signal;
    RVector interuser;
    RVector awgn;
    RVector quant;

    Eigen::Index users() const { return signal.size(); }
    RVector interference_plus_noise() const { return interuser + awgn + quant; }
    RVector sinr() const { return signal.cwiseQuotient(interference_plus_noise()); }
};

// Per-user powers at the combiner output r = W y_q for row w_k of W:
//   signal   = p_u |w_k Lambda g_k|^2
//   interuser= p_u sum_{i != k} |w_k Lambda g_i|^2
//   awgn     = w_k Lambda Lambda^H w_k^H
//   quant    = w_k R_nq w_k^H
inline SinrBreakdown sinr_breakdown(const ReceiverContext& ctx, const CMatrix& G,
                                    const RVector& lambda, const QuantNoiseCov& rnq, double pu) {
    detail::require_dims(ctx.W.cols() == G.rows() && ctx.W.rows() == G.cols(),
                         "sinr_breakdown: W shape does not match G");
    detail::require_dims(lambda.size() == G.rows() && rnq.size() == G.rows(),
                         "sinr_breakdown: Lambda / R_nq size does not match G");
    const Eigen::Index k_users = G.cols();
    const CMatrix WA = ctx.W * detail::quantized_channel(G, lambda);
    const RMatrix W_pow = ctx.W.cwiseAbs2();
    const RMatrix WA_pow = WA.cwiseAbs2();

    SinrBreakdown out;
    out.signal = pu * WA_pow.diagonal();
    out.interuser.resize(k_users);
    for (Eigen::Index k = 0; k < k_users; ++k) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < k_users; ++i)
            if (i != k) acc += WA_pow(k, i);
        out.interuser[k] = pu * acc;
    }
    out.awgn = W_pow * lambda.cwiseAbs2();
    out.quant = W_pow * rnq.diag_entries;
    return out;
}

struct RateReport {
    RVector rates;  // bits/s/Hz per user
    double sum_se = 0.0;
};

inline RateReport rates(const SinrBreakdown& b) {
    RateReport r;
    const RVector sinr = b.sinr();
    r.rates = sinr.unaryExpr([](double s) { return std::log2(1.0 + s); });
    r.sum_se = r.rates.sum();
    return r;
}

// One transmission through y = sqrt(p_u) G x + n and the AQNM quantizer.
struct ReceivedSample {
    CVector x;
    CVector n;
    CVector y;
    CVector y_q;
};

inline ReceivedSample draw_received_sample(const CMatrix& G, const RVector& lambda,
                                           const QuantNoiseCov& rnq, double pu,
                                           RandomStream& rng) {
    ReceivedSample s;
    s.x.resize(G.cols());
    for (Eigen::Index k = 0; k < G.cols(); ++k) s.x[k] = rng.complex_normal();
    s.n.resize(G.rows());
    for (Eigen::Index m = 0; m < G.rows(); ++m) s.n[m] = rng.complex_normal();
    s.y = std::sqrt(pu) * (G * s.x) + s.n;
    s.y_q = apply_aqnm(s.y, lambda, rnq, rng);
    return s;
}

} // namespace qmimo

#endif
