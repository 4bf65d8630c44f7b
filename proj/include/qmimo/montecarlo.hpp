// SPDX-License-Identifier: Apache-2.0
//
// Seeded, parallel Monte Carlo estimation of the exact sum SE and its
// comparison against the deterministic equivalent.
//
// Trial t always draws from RandomStream::derive(seed, Trial, t) and results
// are reduced in trial order, so estimates are bitwise identical for any
// worker count.

#ifndef QMIMO_MONTECARLO_HPP
#define QMIMO_MONTECARLO_HPP

#include "aqnm.hpp"
#include "channel.hpp"
#include "core.hpp"
#include "detequiv.hpp"
#include "random.hpp"
#include "receiver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

namespace qmimo {

enum class PowerMode { Fixed, ScaledByM };

struct UniformBits {
    AdcResolution bits;
};
struct RandomBits {
    int min_bits = 1;
    int max_bits = 3;
};
struct ExplicitBits {
    std::vector<AdcResolution> bits;
};
using AdcPolicy = std::variant<UniformBits, RandomBits, ExplicitBits>;

struct FixedDrop {
    std::uint64_t seed = 1;
};
struct AverageOverDrops {
    int count = 1;
};
using DropMode = std::variant<FixedDrop, AverageOverDrops>;

inline constexpr int kMaxSupportedBits = 16;

struct SystemConfig {
    Eigen::Index M = 60;
    Eigen::Index K = 8;
    PowerMode power_mode = PowerMode::Fixed;
    double pu = 10.0;    // linear, used when power_mode == Fixed
    double Eu = 1000.0;  // linear, used when power_mode == ScaledByM
    AdcPolicy adc = RandomBits{1, 3};
    CellConfig cell;
    DropMode drop = FixedDrop{1};

    double effective_pu() const {
        return power_mode == PowerMode::Fixed ? pu : Eu / static_cast<double>(M);
    }
    double pu_db() const { return linear_to_db(effective_pu()); }

    void validate() const {
        detail::require(K >= 1, "SystemConfig: K must be >= 1");
        detail::require(M >= K, "SystemConfig: need M >= K");
        detail::require(effective_pu() > 0.0 && std::isfinite(effective_pu()),
                        "SystemConfig: p_u must be positive");
        cell.validate();
        if (const auto* rb = std::get_if<RandomBits>(&adc)) {
            detail::require(rb->min_bits >= 1 && rb->min_bits <= rb->max_bits &&
                                rb->max_bits <= kMaxSupportedBits,
                            "SystemConfig: RandomBits bounds must satisfy 1 <= min <= max <= " +
                                std::to_string(kMaxSupportedBits));
        }
        if (const auto* eb = std::get_if<ExplicitBits>(&adc)) {
            detail::require(static_cast<Eigen::Index>(eb->bits.size()) == M,
                            "SystemConfig: explicit bit list length must equal M");
        }
        if (const auto* ad = std::get_if<AverageOverDrops>(&drop))
            detail::require(ad->count >= 1, "SystemConfig: drop count must be >= 1");
    }
};

// u<b> uniform, r<min>-<max> random, x<b1.b2...> explicit.
inline std::string bits_spec(const AdcPolicy& policy) {
    if (const auto* u = std::get_if<UniformBits>(&policy)) return "u" + u->bits.label();
    if (const auto* r = std::get_if<RandomBits>(&policy))
        return "r" + std::to_string(r->min_bits) + "-" + std::to_string(r->max_bits);
    const auto& e = std::get<ExplicitBits>(policy);
    std::string s = "x";
    for (std::size_t i = 0; i < e.bits.size(); ++i) {
        if (i) s += '.';
        s += e.bits[i].label();
    }
    return s;
}

// One realization of user positions, shadowing and ADC bit assignment.
struct Drop {
    LargeScaleProfile profile;
    AdcProfile adc;
    std::uint64_t seed = 0;
    std::uint64_t index = 0;
};

inline Drop make_drop(const SystemConfig& cfg, std::uint64_t seed, std::uint64_t index) {
    cfg.validate();
    Drop d;
    d.seed = seed;
    d.index = index;
    auto geo = RandomStream::derive(seed, StreamTag::Drop, index);
    d.profile = generate_large_scale(cfg.cell, cfg.K, geo);

    const auto m = static_cast<std::size_t>(cfg.M);
    std::vector<AdcResolution> bits;
    if (const auto* u = std::get_if<UniformBits>(&cfg.adc)) {
        bits.assign(m, u->bits);
    } else if (const auto* r = std::get_if<RandomBits>(&cfg.adc)) {
        auto adc_rng = RandomStream::derive(seed, StreamTag::Adc, index);
        bits.reserve(m);
        for (std::size_t i = 0; i < m; ++i)
            bits.push_back(AdcResolution::bits(adc_rng.uniform_int(r->min_bits, r->max_bits)));
    } else {
        bits = std::get<ExplicitBits>(cfg.adc).bits;
    }
    d.adc = AdcProfile::from_bits(std::move(bits));
    return d;
}

// Drops used by a run: the configured fixed drop, or `count` drops derived
// from the run seed.
inline std::vector<Drop> make_drops(const SystemConfig& cfg, std::uint64_t run_seed) {
    std::vector<Drop> out;
    if (const auto* fd = std::get_if<FixedDrop>(&cfg.drop)) {
        out.push_back(make_drop(cfg, fd->seed, 0));
    } else {
        const int n = std::get<AverageOverDrops>(cfg.drop).count;
        for (int i = 0; i < n; ++i) out.push_back(make_drop(cfg, run_seed, static_cast<std::uint64_t>(i)));
    }
    return out;
}

inline std::string drop_label(const SystemConfig& cfg, std::uint64_t run_seed) {
    if (const auto* fd = std::get_if<FixedDrop>(&cfg.drop)) return std::to_string(fd->seed);
    return "avg" + std::to_string(std::get<AverageOverDrops>(cfg.drop).count) + "@" +
           std::to_string(run_seed);
}

class TrialError : public Error {
public:
    TrialError(long trial, const std::string& what)
        : Error("trial " + std::to_string(trial) + ": " + what), trial_(trial) {}
    long trial() const { return trial_; }

private:
    long trial_;
};

struct McEstimate {
    RVector user_rates;  // mean per-user rate
    double sum_se = 0.0;
    double stderr_sum = 0.0;  // from per-trial sum-SE variance
    RVector stderr_users;
    long trials = 0;
    std::uint64_t seed = 0;
    std::string drop_label;
    // Mean per-user quantization-noise power at the combiner output with the
    // exact R_nq and with its average Rbar_nq.
    RVector quant_exact;
    RVector quant_avgcov;
};

struct TrialOutcome {
    RVector rates;
    RVector quant_exact;
    RVector quant_avgcov;
};

inline TrialOutcome run_trial(const Drop& drop, double pu, ReceiverKind kind, RandomStream& rng) {
    const RVector& lambda = drop.adc.alphas;
    const ChannelRealization ch = draw_channel(drop.profile, drop.adc.antennas(), rng);
    const ReceiverContext ctx = build_receiver(kind, ch.G, lambda, drop.profile, pu);
    const QuantNoiseCov rnq = quant_noise_cov(ch.G, lambda, pu);
    const SinrBreakdown b = sinr_breakdown(ctx, ch.G, lambda, rnq, pu);
    TrialOutcome out;
    out.rates = rates(b).rates;
    out.quant_exact = b.quant;
    out.quant_avgcov = ctx.W.cwiseAbs2() * avg_quant_noise_cov(lambda, drop.profile, pu).diag_entries;
    return out;
}

namespace detail {

// Runs body(i) for i in [0, n) on `workers` threads. The exception from the
// lowest failing index is rethrown wrapped in TrialError.
template <class Body>
void parallel_trials(long n, int workers, Body&& body) {
    workers = std::max(1, std::min<int>(workers, static_cast<int>(std::max(1L, n))));
    std::atomic<long> next{0};
    std::mutex err_mu;
    long err_index = -1;
    std::string err_what;

    auto worker = [&] {
        for (;;) {
            const long i = next.fetch_add(1);
            if (i >= n) return;
            try {
                body(i);
            } catch (const std::exception& e) {
                std::lock_guard lock(err_mu);
                if (err_index < 0 || i < err_index) {
                    err_index = i;
                    err_what = e.what();
                }
            }
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (err_index >= 0) throw TrialError(err_index, err_what);
}

inline McEstimate reduce_trials(const std::vector<TrialOutcome>& outcomes, std::uint64_t seed) {
    const long n = static_cast<long>(outcomes.size());
    const Eigen::Index K = outcomes.front().rates.size();
    McEstimate est;
    est.trials = n;
    est.seed = seed;
    est.user_rates = RVector::Zero(K);
    est.quant_exact = RVector::Zero(K);
    est.quant_avgcov = RVector::Zero(K);
    // Welford updates; index K holds the per-trial sum SE.
    RVector mean = RVector::Zero(K + 1), m2 = RVector::Zero(K + 1);
    RVector x(K + 1);
    for (long t = 0; t < n; ++t) {
        const auto& o = outcomes[static_cast<std::size_t>(t)];
        est.quant_exact += o.quant_exact;
        est.quant_avgcov += o.quant_avgcov;
        x.head(K) = o.rates;
        x[K] = o.rates.sum();
        const RVector delta = x - mean;
        mean += delta / static_cast<double>(t + 1);
        m2 += delta.cwiseProduct(x - mean);
    }
    est.user_rates = mean.head(K);
    est.quant_exact /= static_cast<double>(n);
    est.quant_avgcov /= static_cast<double>(n);
    est.sum_se = mean[K];
    const RVector se = n > 1 ? RVector((m2 / static_cast<double>(n - 1) / static_cast<double>(n)).cwiseSqrt())
                             : RVector(RVector::Zero(K + 1));
    est.stderr_users = se.head(K);
    est.stderr_sum = se[K];
    return est;
}

} // namespace detail

// Monte Carlo over small-scale fading for explicit drops; trial t uses
// drops[t % drops.size()].
inline McEstimate run_monte_carlo(const std::vector<Drop>& drops, double pu, ReceiverKind kind,
                                  long trials, std::uint64_t seed, int workers = 1) {
    detail::require(trials >= 1, "run_monte_carlo: trials must be >= 1");
    detail::require(!drops.empty(), "run_monte_carlo: no drops");
    detail::require(pu > 0.0, "run_monte_carlo: p_u must be positive");
    std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(trials));
    detail::parallel_trials(trials, workers, [&](long t) {
        auto rng = RandomStream::derive(seed, StreamTag::Trial, static_cast<std::uint64_t>(t));
        const Drop& d = drops[static_cast<std::size_t>(t) % drops.size()];
        outcomes[static_cast<std::size_t>(t)] = run_trial(d, pu, kind, rng);
    });
    return detail::reduce_trials(outcomes, seed);
}

inline McEstimate run_monte_carlo(const SystemConfig& cfg, ReceiverKind kind, long trials,
                                  std::uint64_t seed, int workers = 1) {
    cfg.validate();
    McEstimate est = run_monte_carlo(make_drops(cfg, seed), cfg.effective_pu(), kind, trials, seed,
                                     workers);
    est.drop_label = drop_label(cfg, seed);
    return est;
}

// Deterministic equivalent for the configured drop(s). With several drops the
// rates (and Gammas) are averaged over drops.
inline DetEqReport evaluate_detequiv(const SystemConfig& cfg, std::uint64_t seed,
                                     const FixedPointOptions& opts = {}) {
    cfg.validate();
    const auto drops = make_drops(cfg, seed);
    DetEqReport acc;
    acc.sinr_asym = RVector::Zero(cfg.K);
    acc.rates_asym = RVector::Zero(cfg.K);
    for (const auto& d : drops) {
        const auto r = deterministic_equivalent(d.profile, d.adc.alphas, cfg.effective_pu(), opts).report;
        acc.gamma1 += r.gamma1;
        acc.gamma2 += r.gamma2;
        acc.gamma3 += r.gamma3;
        acc.sinr_asym += r.sinr_asym;
        acc.rates_asym += r.rates_asym;
    }
    const double n = static_cast<double>(drops.size());
    acc.gamma1 /= n;
    acc.gamma2 /= n;
    acc.gamma3 /= n;
    acc.sinr_asym /= n;
    acc.rates_asym /= n;
    acc.sum_se_asym = acc.rates_asym.sum();
    return acc;
}

struct Comparison {
    RVector user_rel_error;  // (deteq - mc) / mc per user
    double sum_rel_error = 0.0;
    double sum_abs_error = 0.0;
    double tolerance = 0.0;
    bool within = true;  // |deteq - mc| <= tol * |mc| + 3 * stderr
};

inline Comparison compare_reports(const McEstimate& mc, const DetEqReport& de, double rel_tol) {
    if (mc.user_rates.size() != de.rates_asym.size())
        throw InvalidArgument("compare_reports: config mismatch (" +
                              std::to_string(mc.user_rates.size()) + " vs " +
                              std::to_string(de.rates_asym.size()) + " users)");
    detail::require(rel_tol >= 0.0, "compare_reports: tolerance must be nonnegative");
    Comparison c;
    c.tolerance = rel_tol;
    c.user_rel_error = (de.rates_asym - mc.user_rates).cwiseQuotient(mc.user_rates);
    c.sum_abs_error = de.sum_se_asym - mc.sum_se;
    c.sum_rel_error = mc.sum_se != 0.0 ? c.sum_abs_error / mc.sum_se : 0.0;
    c.within = std::abs(c.sum_abs_error) <= rel_tol * std::abs(mc.sum_se) + 3.0 * mc.stderr_sum;
    return c;
}

} // namespace qmimo

#endif
