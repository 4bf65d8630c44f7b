// SPDX-License-Identifier: Apache-2.0
//
// Additive quantization noise model: y_q = Lambda y + n_q with
// Lambda = diag(1 - rho_m) and n_q uncorrelated with y.

#ifndef QMIMO_AQNM_HPP
#define QMIMO_AQNM_HPP

#include "channel.hpp"
#include "core.hpp"
#include "random.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace qmimo {

// ADC resolution in bits, or ideal (infinite resolution).
class AdcResolution {
public:
    static constexpr AdcResolution ideal() { return AdcResolution(0); }
    static AdcResolution bits(int b) {
        detail::require(b >= 1, "AdcResolution: bits must be >= 1, got " + std::to_string(b));
        return AdcResolution(b);
    }

    constexpr bool is_ideal() const { return bits_ == 0; }
    // Only meaningful when !is_ideal().
    constexpr int count() const { return bits_; }

    std::string label() const { return is_ideal() ? "INF" : std::to_string(bits_); }

    friend constexpr bool operator==(AdcResolution, AdcResolution) = default;

private:
    constexpr explicit AdcResolution(int b) : bits_(b) {}
    int bits_;
};

// Distortion factors for 1..5 bits (non-uniform optimal quantizer).
inline constexpr std::array<double, 5> kRhoTable = {0.3634, 0.1175, 0.03454, 0.009497, 0.002499};

// Inverse SQNR rho for a b-bit ADC. Above 5 bits the uniform-quantizer
// asymptote (pi*sqrt(3)/2) * 2^{-2b} is used.
inline double rho_for_bits(AdcResolution b) {
    if (b.is_ideal()) return 0.0;
    if (b.count() <= 5) return kRhoTable[static_cast<std::size_t>(b.count() - 1)];
    return std::numbers::pi * std::sqrt(3.0) / 2.0 * std::pow(2.0, -2.0 * b.count());
}

inline double rho_for_bits(int b) { return rho_for_bits(AdcResolution::bits(b)); }

struct AdcProfile {
    std::vector<AdcResolution> bits;
    RVector rhos;
    RVector alphas;

    Eigen::Index antennas() const { return alphas.size(); }

    static AdcProfile from_bits(std::vector<AdcResolution> bits) {
        AdcProfile p;
        const auto m = static_cast<Eigen::Index>(bits.size());
        p.rhos.resize(m);
        p.alphas.resize(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            p.rhos[i] = rho_for_bits(bits[static_cast<std::size_t>(i)]);
            p.alphas[i] = 1.0 - p.rhos[i];
        }
        p.bits = std::move(bits);
        return p;
    }

    static AdcProfile uniform(Eigen::Index antennas, AdcResolution b) {
        return from_bits(std::vector<AdcResolution>(static_cast<std::size_t>(antennas), b));
    }

    bool all_ideal() const {
        for (auto b : bits)
            if (!b.is_ideal()) return false;
        return true;
    }
};

// Diagonal of Lambda.
inline RVector gain_matrix(const AdcProfile& profile) { return profile.alphas; }

// Diagonal of Lambda (I - Lambda), each entry in [0, 1/4].
inline RVector distortion_weights(const RVector& lambda) {
    return lambda.cwiseProduct((RVector::Ones(lambda.size()) - lambda));
}

// Diagonal quantization-noise covariance. Off-diagonal entries are
// identically zero and never stored.
struct QuantNoiseCov {
    RVector diag_entries;

    Eigen::Index size() const { return diag_entries.size(); }
};

// R_nq = Lambda (I - Lambda) diag(p_u G G^H + I), conditioned on G.
inline QuantNoiseCov quant_noise_cov(const CMatrix& G, const RVector& lambda, double pu) {
    detail::require(pu > 0.0, "quant_noise_cov: p_u must be positive");
    detail::require_dims(G.rows() == lambda.size(),
                         "quant_noise_cov: G has " + std::to_string(G.rows()) +
                             " rows but Lambda has " + std::to_string(lambda.size()) + " entries");
    const RVector row_power = G.rowwise().squaredNorm();
    QuantNoiseCov out;
    out.diag_entries =
        distortion_weights(lambda).cwiseProduct(pu * row_power + RVector::Ones(lambda.size()));
    return out;
}

inline QuantNoiseCov quant_noise_cov(const ChannelRealization& ch, const RVector& lambda,
                                     double pu) {
    return quant_noise_cov(ch.G, lambda, pu);
}

// Expectation of R_nq over G: Lambda (I - Lambda) (p_u tr(D) + 1).
inline QuantNoiseCov avg_quant_noise_cov(const RVector& lambda, const LargeScaleProfile& profile,
                                         double pu) {
    detail::require(pu > 0.0, "avg_quant_noise_cov: p_u must be positive");
    QuantNoiseCov out;
    out.diag_entries = distortion_weights(lambda) * (pu * profile.trace() + 1.0);
    return out;
}

// Draws y_q = Lambda y + n_q with n_q ~ CN(0, R_nq). Demonstration and
// validation only; rate computations use the covariances analytically.
inline CVector apply_aqnm(const CVector& y, const RVector& lambda, const QuantNoiseCov& rnq,
                          RandomStream& rng) {
    detail::require_dims(y.size() == lambda.size() && y.size() == rnq.size(),
                         "apply_aqnm: y, Lambda and R_nq sizes differ");
    CVector out(y.size());
    for (Eigen::Index m = 0; m < y.size(); ++m)
        out[m] = lambda[m] * y[m] + rng.complex_normal(rnq.diag_entries[m]);
    return out;
}

} // namespace qmimo

#endif
