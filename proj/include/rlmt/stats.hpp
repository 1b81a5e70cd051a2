#pragma once

// The three mutation-killing criteria and their statistical primitives.
//   AVG: per-agent-pair ratio of mean returns against a threshold.
//   R:   Welch two-sample test on per-agent mean returns, gated by effect
//        size (|Cohen's d|) and post-hoc power.
//   DtR: the same gate applied to Hellinger distances between resampled
//        reward histograms (healthy-vs-healthy against healthy-vs-mutated).
// Special functions are implemented here (regularized incomplete beta for
// the Student-t tail, AS241 for the normal quantile) so results are
// identical on every platform.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rlmt/agents.hpp"
#include "rlmt/errors.hpp"
#include "rlmt/rng.hpp"

namespace rlmt {

enum class Criterion { AVG, R, DtR };

inline std::string_view criterion_name(Criterion c) {
    switch (c) {
        case Criterion::AVG: return "AVG";
        case Criterion::R: return "R";
        default: return "DtR";
    }
}

inline std::string_view criterion_cli_name(Criterion c) {
    switch (c) {
        case Criterion::AVG: return "avg";
        case Criterion::R: return "r";
        default: return "dtr";
    }
}

inline Criterion parse_criterion(std::string_view s) {
    if (s == "AVG" || s == "avg") return Criterion::AVG;
    if (s == "R" || s == "r") return Criterion::R;
    if (s == "DtR" || s == "dtr") return Criterion::DtR;
    throw ParseError("unknown criterion: '" + std::string(s) + "'");
}

inline double mean(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

inline double sample_variance(const std::vector<double>& xs) {
    if (xs.size() < 2) throw UsageError("variance needs >= 2 values");
    const double m = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - m) * (x - m);
    return s / static_cast<double>(xs.size() - 1);
}

inline double sample_sd(const std::vector<double>& xs) {
    return std::sqrt(sample_variance(xs));
}

namespace detail {

// Continued-fraction part of the regularized incomplete beta function
// (modified Lentz method).
inline double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 3e-14;
    constexpr double kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

inline double reg_inc_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                         a * std::log(x) + b * std::log1p(-x);
    const double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

// Two-sided Student-t p-value for |t| with nu degrees of freedom.
inline double student_t_two_sided(double t, double nu) {
    const double x = nu / (nu + t * t);
    return reg_inc_beta(0.5 * nu, 0.5, x);
}

inline double horner8(const double (&coef)[8], double x) {
    double acc = coef[7];
    for (int i = 6; i >= 0; --i) acc = acc * x + coef[i];
    return acc;
}

}  // namespace detail

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / 1.4142135623730951);
}

// Normal quantile function, AS241 rational approximations (full precision).
inline double inverse_normal_cdf(double p) {
    static constexpr double A[8] = {
        3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
        1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
        3.3430575583588128105e4, 2.5090809287301226727e3};
    static constexpr double B[8] = {
        1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
        2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
        5.2264952788528545610e3};
    static constexpr double C[8] = {
        1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
        3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
        2.27238449892691845833e-2, 7.74545014278341407640e-4};
    static constexpr double D[8] = {
        1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
        1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
        1.05075007164441684324e-9};
    static constexpr double E[8] = {
        6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
        2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
        2.71155556874348757815e-5, 2.01033439929228813265e-7};
    static constexpr double F[8] = {
        1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
        7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
        2.04426310338993978564e-15};
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q * detail::horner8(A, r) / detail::horner8(B, r);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = detail::horner8(C, r) / detail::horner8(D, r);
    } else {
        r -= 5.0;
        val = detail::horner8(E, r) / detail::horner8(F, r);
    }
    return q < 0.0 ? -val : val;
}

// Two-sample location test with unequal variances (Welch): the coefficient
// test of a Gaussian two-group linear model without the equal-variance
// assumption. Degenerate inputs where both samples are constant return
// p = 1 on equal means and p = 0 otherwise.
inline double welch_linear_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2)
        throw UsageError("welch_linear_test needs >= 2 values per sample");
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double ma = mean(a), mb = mean(b);
    const double va = sample_variance(a), vb = sample_variance(b);
    if (va == 0.0 && vb == 0.0) return ma == mb ? 1.0 : 0.0;
    const double se2 = va / na + vb / nb;
    const double t = (ma - mb) / std::sqrt(se2);
    const double nu =
        se2 * se2 / (va * va / (na * na * (na - 1.0)) + vb * vb / (nb * nb * (nb - 1.0)));
    return std::clamp(detail::student_t_two_sided(t, nu), 0.0, 1.0);
}

// Cohen's d with the pooled standard deviation. A zero pooled sd yields 0
// for equal means and a +/-infinity sentinel otherwise (degenerate
// separation, treated as a maximal effect downstream).
inline double cohens_d(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) throw UsageError("cohens_d needs >= 2 values per sample");
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double pooled_var =
        ((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / (na + nb - 2.0);
    const double diff = mean(a) - mean(b);
    if (pooled_var == 0.0) {
        if (diff == 0.0) return 0.0;
        return diff > 0.0 ? std::numeric_limits<double>::infinity()
                          : -std::numeric_limits<double>::infinity();
    }
    return diff / std::sqrt(pooled_var);
}

// Post-hoc power of the two-sample test at effect size d (normal
// approximation), clamped to [0,1].
inline double posthoc_power(double d, int n_a, int n_b, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("alpha must be in (0,1)");
    if (std::isinf(d)) return 1.0;
    const double na = static_cast<double>(n_a), nb = static_cast<double>(n_b);
    const double z_crit = inverse_normal_cdf(1.0 - alpha / 2.0);
    const double arg = std::abs(d) * std::sqrt(na * nb / (na + nb)) - z_crit;
    return std::clamp(normal_cdf(arg), 0.0, 1.0);
}

// Outcome of one kill test. Diagnostics carry whatever the criterion
// actually computed: ratio_fraction for AVG; p-value, effect size, and
// power for R and DtR.
struct KillVerdict {
    Criterion criterion = Criterion::R;
    bool killed = false;
    bool conclusive = false;
    std::optional<double> p_value;
    std::optional<double> effect_size;
    std::optional<double> power;
    std::optional<double> ratio_fraction;
};

struct AvgParams {
    double theta = 0.9;     // kill when mutated/healthy mean ratio drops below this
    double fraction = 0.8;  // ... for at least this fraction of agent pairs
};

struct DtrParams {
    int subset_size = 10;
    int resamples = 30;
    int bins = 10;
};

namespace detail {
constexpr double kAlpha = 0.05;
constexpr double kEffectGate = 0.5;
constexpr double kPowerGate = 0.8;

// Significance + effect + power gate shared by the R and DtR criteria.
inline KillVerdict gated_verdict(Criterion criterion, const std::vector<double>& a,
                                 const std::vector<double>& b) {
    KillVerdict v;
    v.criterion = criterion;
    const double p = welch_linear_test(a, b);
    const double d = cohens_d(a, b);
    const double power =
        posthoc_power(d, static_cast<int>(a.size()), static_cast<int>(b.size()), kAlpha);
    v.p_value = p;
    v.effect_size = d;
    v.power = power;
    v.conclusive = power >= kPowerGate;
    v.killed = v.conclusive && p < kAlpha && std::abs(d) >= kEffectGate;
    return v;
}
}  // namespace detail

// AVG criterion: agent i of the mutated population is paired with agent i
// of the healthy population; the mutation is killed when the ratio of mean
// returns falls below theta for at least `fraction` of the pairs. Pairs
// whose healthy mean is not strictly positive are excluded; with no valid
// pair left the verdict is inconclusive.
inline KillVerdict avg_killing(const RewardSample& healthy, const RewardSample& mutated,
                               double theta = 0.9, double fraction = 0.8) {
    validate_reward_sample(healthy);
    validate_reward_sample(mutated);
    if (healthy.agent_count() != mutated.agent_count())
        throw UsageError("avg_killing: populations must have equal agent counts");
    if (!(theta > 0.0 && theta < 1.0)) throw UsageError("theta must be in (0,1)");
    if (!(fraction > 0.0 && fraction <= 1.0)) throw UsageError("fraction must be in (0,1]");
    const auto hm = healthy.agent_means();
    const auto mm = mutated.agent_means();
    int valid = 0, below = 0;
    for (std::size_t i = 0; i < hm.size(); ++i) {
        if (hm[i] <= 0.0) continue;  // ratio undefined for this pair
        ++valid;
        if (mm[i] / hm[i] < theta) ++below;
    }
    KillVerdict v;
    v.criterion = Criterion::AVG;
    if (valid == 0) return v;  // inconclusive
    v.conclusive = true;
    v.ratio_fraction = static_cast<double>(below) / static_cast<double>(valid);
    v.killed = *v.ratio_fraction >= fraction;
    return v;
}

// R criterion on the per-agent mean returns.
inline KillVerdict r_killing(const RewardSample& healthy, const RewardSample& mutated) {
    validate_reward_sample(healthy);
    validate_reward_sample(mutated);
    return detail::gated_verdict(Criterion::R, healthy.agent_means(), mutated.agent_means());
}

// Discrete Hellinger distance between two probability vectors,
// H = (1/sqrt(2)) * l2norm(sqrt(p) - sqrt(q)), in [0,1].
inline double hellinger(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size() || p.empty())
        throw UsageError("hellinger: vectors must be non-empty and equal length");
    double sp = 0.0, sq = 0.0, acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < 0.0 || q[i] < 0.0) throw UsageError("hellinger: negative mass");
        sp += p[i];
        sq += q[i];
        const double diff = std::sqrt(p[i]) - std::sqrt(q[i]);
        acc += diff * diff;
    }
    if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9)
        throw UsageError("hellinger: inputs must sum to 1");
    return std::min(1.0, std::sqrt(0.5 * acc));
}

// Equal-width histogram over [lo, hi] turned into a probability vector,
// with an epsilon floor (1e-12) added to every bin before normalization so
// empty bins never produce degenerate distances.
inline std::vector<double> histogram_probs(const std::vector<double>& values, double lo,
                                           double hi, int bins) {
    if (bins <= 0) throw UsageError("histogram needs >= 1 bin");
    if (values.empty()) throw UsageError("histogram needs values");
    std::vector<double> p(static_cast<std::size_t>(bins), 0.0);
    const double width = (hi - lo) / bins;
    for (double v : values) {
        int idx = width > 0.0 ? static_cast<int>((v - lo) / width) : 0;
        idx = std::clamp(idx, 0, bins - 1);
        p[static_cast<std::size_t>(idx)] += 1.0;
    }
    double total = 0.0;
    for (auto& x : p) {
        x += 1e-12;
        total += x;
    }
    for (auto& x : p) x /= total;
    return p;
}

// Hellinger distances produced by resampling: healthy-vs-healthy (intra)
// and healthy-vs-mutated (inter).
struct DistanceSamples {
    std::vector<double> intra;
    std::vector<double> inter;
};

// DtR criterion. Per resample: two disjoint healthy agent subsets give one
// intra distance; one healthy and one mutated subset give one inter
// distance (episode returns pooled per subset, histogrammed over the
// compared pair's shared range). The R-style gate then compares the inter
// and intra distance lists; the kill label is one-sided — a mutation is
// killed only when the inter distances exceed the healthy self-distance
// baseline, never for undercutting it (a population identical to healthy
// yields slightly *smaller* inter distances, since inter subsets may share
// agents while intra subsets are disjoint). Deterministic per rng_seed.
inline KillVerdict dtr_killing(const RewardSample& healthy, const RewardSample& mutated,
                               int subset_size, int resamples, int bins,
                               std::uint64_t rng_seed, DistanceSamples* out = nullptr) {
    validate_reward_sample(healthy);
    validate_reward_sample(mutated);
    const int nh = healthy.agent_count();
    const int nm = mutated.agent_count();
    if (subset_size <= 0 || resamples < 2 || bins <= 0)
        throw UsageError("dtr_killing: bad sampling parameters");
    if (subset_size > nm || 2 * subset_size > nh)
        throw UsageError(
            "dtr_killing: subset_size must fit the mutated population and two "
            "disjoint healthy subsets");
    Rng rng(rng_seed);
    auto pool_subset = [](const RewardSample& sample, const std::vector<int>& idx,
                          int offset, int count) {
        std::vector<double> pooled;
        for (int i = offset; i < offset + count; ++i) {
            const auto& row = sample.per_agent[static_cast<std::size_t>(idx[i])];
            pooled.insert(pooled.end(), row.begin(), row.end());
        }
        return pooled;
    };
    auto distance = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double lo = a.front(), hi = a.front();
        for (double v : a) lo = std::min(lo, v), hi = std::max(hi, v);
        for (double v : b) lo = std::min(lo, v), hi = std::max(hi, v);
        return hellinger(histogram_probs(a, lo, hi, bins), histogram_probs(b, lo, hi, bins));
    };
    DistanceSamples samples;
    for (int k = 0; k < resamples; ++k) {
        const auto intra_idx = rng.sample_without_replacement(nh, 2 * subset_size);
        samples.intra.push_back(distance(pool_subset(healthy, intra_idx, 0, subset_size),
                                         pool_subset(healthy, intra_idx, subset_size,
                                                     subset_size)));
        const auto h_idx = rng.sample_without_replacement(nh, subset_size);
        const auto m_idx = rng.sample_without_replacement(nm, subset_size);
        samples.inter.push_back(distance(pool_subset(healthy, h_idx, 0, subset_size),
                                         pool_subset(mutated, m_idx, 0, subset_size)));
    }
    KillVerdict v = detail::gated_verdict(Criterion::DtR, samples.inter, samples.intra);
    if (v.killed && !(*v.effect_size > 0.0)) v.killed = false;
    if (out) *out = std::move(samples);
    return v;
}

struct CriterionParams {
    AvgParams avg;
    DtrParams dtr;
};

// Uniform entry point used by kill-matrix construction.
inline KillVerdict kill_verdict(Criterion criterion, const RewardSample& healthy,
                                const RewardSample& mutated, const CriterionParams& params,
                                std::uint64_t dtr_seed) {
    switch (criterion) {
        case Criterion::AVG:
            return avg_killing(healthy, mutated, params.avg.theta, params.avg.fraction);
        case Criterion::R:
            return r_killing(healthy, mutated);
        default:
            return dtr_killing(healthy, mutated, params.dtr.subset_size,
                               params.dtr.resamples, params.dtr.bins, dtr_seed);
    }
}

}  // namespace rlmt
