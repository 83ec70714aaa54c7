#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "engage/error.hpp"
#include "engage/rng.hpp"

namespace engage {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double sample_std(const std::vector<double>& v) {
    const std::size_t n = v.size();
    if (n < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(n - 1));
}

// Linear-interpolation percentile, q in [0,1], on an unsorted sample.
inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) throw EmptySample{};
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(h));
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct DescriptiveStats {
    double mean = 0;
    double std_dev = 0;
    std::optional<double> skewness;  // bias-adjusted; unset for n<3 or zero variance
    std::optional<double> kurtosis;  // bias-adjusted excess; unset for n<4 or zero variance
    double min = 0, p25 = 0, median = 0, p75 = 0, max = 0;
    std::size_t n = 0;
};

inline DescriptiveStats descriptive_stats(const std::vector<double>& sample) {
    if (sample.empty()) throw EmptySample{};
    DescriptiveStats s;
    s.n = sample.size();
    const double n = static_cast<double>(s.n);
    s.mean = mean(sample);
    double m2 = 0, m3 = 0, m4 = 0;
    for (double x : sample) {
        const double d = x - s.mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    s.std_dev = s.n > 1 ? std::sqrt(m2 * n / (n - 1)) : 0.0;
    if (s.n >= 3 && m2 > 0) {
        const double g1 = m3 / std::pow(m2, 1.5);
        s.skewness = g1 * std::sqrt(n * (n - 1)) / (n - 2);
    }
    if (s.n >= 4 && m2 > 0) {
        const double g2 = m4 / (m2 * m2) - 3.0;
        s.kurtosis = ((n + 1) * g2 + 6.0) * (n - 1) / ((n - 2) * (n - 3));
    }
    std::vector<double> sorted = sample;
    std::sort(sorted.begin(), sorted.end());
    s.min = sorted.front();
    s.max = sorted.back();
    auto interp = [&](double q) {
        const double h = (n - 1.0) * q;
        const std::size_t lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = static_cast<std::size_t>(std::ceil(h));
        return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    };
    s.p25 = interp(0.25);
    s.median = interp(0.50);
    s.p75 = interp(0.75);
    return s;
}

// Average ranks (1-based), ties share the mean rank of their run.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

struct CorrelationResult {
    double rho = 0;
    double p_value = 1;
    std::size_t n = 0;
};

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    const double mx = mean(x), my = mean(y);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0 || syy <= 0) throw DegenerateInput("constant vector");
    return sxy / std::sqrt(sxx * syy);
}

// Spearman's rho with average ranks; p-value from the t-approximation with
// n-2 degrees of freedom.
inline CorrelationResult spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw LengthMismatch{};
    if (x.size() < 3) throw InsufficientData("spearman needs n >= 3");
    const double rho = pearson(average_ranks(x), average_ranks(y));
    CorrelationResult r;
    r.rho = std::clamp(rho, -1.0, 1.0);
    r.n = x.size();
    const double df = static_cast<double>(r.n) - 2.0;
    if (std::abs(r.rho) >= 1.0) {
        r.p_value = 0.0;
    } else {
        const double t = r.rho * std::sqrt(df / (1.0 - r.rho * r.rho));
        boost::math::students_t dist(df);
        r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
    }
    return r;
}

namespace detail {

// U statistic for group a vs b: #(a > b) + half the tied pairs, via combined
// average ranks.
inline double u_statistic(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> combined = a;
    combined.insert(combined.end(), b.begin(), b.end());
    const std::vector<double> ranks = average_ranks(combined);
    double rank_sum_a = 0;
    for (std::size_t i = 0; i < a.size(); ++i) rank_sum_a += ranks[i];
    const double na = static_cast<double>(a.size());
    return rank_sum_a - na * (na + 1.0) / 2.0;
}

// Exact two-sided p for U by enumerating all assignments of group labels to
// the combined sample. Feasible only for small n.
inline double exact_mwu_p(const std::vector<double>& a, const std::vector<double>& b, double u_obs) {
    std::vector<double> combined = a;
    combined.insert(combined.end(), b.begin(), b.end());
    const std::vector<double> ranks = average_ranks(combined);
    const std::size_t n = combined.size(), na = a.size();
    const double mu = static_cast<double>(na) * static_cast<double>(n - na) / 2.0;
    const double dev_obs = std::abs(u_obs - mu) - 1e-12;
    std::size_t extreme = 0, total = 0;
    std::vector<std::size_t> pick(na);
    std::iota(pick.begin(), pick.end(), std::size_t{0});
    const double offset = static_cast<double>(na) * (static_cast<double>(na) + 1.0) / 2.0;
    while (true) {
        double rank_sum = 0;
        for (std::size_t idx : pick) rank_sum += ranks[idx];
        const double u = rank_sum - offset;
        if (std::abs(u - mu) >= dev_obs) ++extreme;
        ++total;
        // next combination
        std::size_t i = na;
        while (i > 0 && pick[i - 1] == n - na + i - 1) --i;
        if (i == 0) break;
        ++pick[i - 1];
        for (std::size_t j = i; j < na; ++j) pick[j] = pick[j - 1] + 1;
    }
    return static_cast<double>(extreme) / static_cast<double>(total);
}

}  // namespace detail

// Two-sided Mann-Whitney U. Exact enumeration for n_a+n_b <= 16; otherwise
// normal approximation with tie-corrected variance and continuity correction.
inline std::pair<double, double> mann_whitney_u(const std::vector<double>& a,
                                                const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw EmptySample{};
    const double u = detail::u_statistic(a, b);
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double n = na + nb;
    if (a.size() + b.size() <= 16) {
        return {u, detail::exact_mwu_p(a, b, u)};
    }
    // tie correction: sum of t^3 - t over tie groups of the combined sample
    std::vector<double> combined = a;
    combined.insert(combined.end(), b.begin(), b.end());
    std::sort(combined.begin(), combined.end());
    double tie_term = 0;
    std::size_t i = 0;
    while (i < combined.size()) {
        std::size_t j = i;
        while (j + 1 < combined.size() && combined[j + 1] == combined[i]) ++j;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    const double mu = na * nb / 2.0;
    const double var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (var <= 0) return {u, 1.0};
    const double dev = std::abs(u - mu);
    const double z = (dev > 0.5 ? dev - 0.5 : 0.0) / std::sqrt(var);
    return {u, 2.0 * (1.0 - normal_cdf(z))};
}

// delta = (#{a_i > b_j} - #{a_i < b_j}) / (n_a * n_b), computed in
// O((n_a+n_b) log) via the rank identity delta = 2U/(n_a n_b) - 1.
inline double cliffs_delta(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw EmptySample{};
    const double u = detail::u_statistic(a, b);
    const double nm = static_cast<double>(a.size()) * static_cast<double>(b.size());
    return 2.0 * u / nm - 1.0;
}

struct GroupComparisonResult {
    double u_statistic = 0;
    double p_value = 1;
    double cliffs_delta = 0;
    std::size_t n_a = 0, n_b = 0;
};

inline GroupComparisonResult compare_two_groups(const std::vector<double>& a,
                                                const std::vector<double>& b) {
    GroupComparisonResult r;
    auto [u, p] = mann_whitney_u(a, b);
    r.u_statistic = u;
    r.p_value = p;
    r.cliffs_delta = 2.0 * u / (static_cast<double>(a.size()) * static_cast<double>(b.size())) - 1.0;
    r.n_a = a.size();
    r.n_b = b.size();
    return r;
}

enum class BootstrapMode { literal, paired_difference };

struct BootstrapResult {
    double rho0 = 0;
    double z = 0;
    double p_value = 1;
    std::size_t iterations = 0;
    double se_bootstrap = 0;
    std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<double> resample(const std::vector<double>& v, Rng& rng) {
    std::vector<double> out(v.size());
    for (auto& x : out) x = v[rng.bounded(v.size())];
    return out;
}

inline void resample_rows(const std::vector<double>& x, const std::vector<double>& y,
                          Rng& rng, std::vector<double>& xo, std::vector<double>& yo) {
    xo.resize(x.size());
    yo.resize(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const std::size_t k = rng.bounded(x.size());
        xo[i] = x[k];
        yo[i] = y[k];
    }
}

}  // namespace detail

// Bootstrap z-test for a Spearman correlation. `literal` resamples x and y
// independently with replacement (which destroys pairing); `paired_difference`
// resamples (x,y) rows jointly. Deterministic for a fixed seed: iteration i
// always draws from substream i regardless of execution order.
inline BootstrapResult bootstrap_rho_z(const std::vector<double>& x, const std::vector<double>& y,
                                       std::size_t B, std::uint64_t seed, BootstrapMode mode) {
    if (B < 100) throw InsufficientData("bootstrap needs B >= 100");
    BootstrapResult res;
    res.rho0 = spearman_rho(x, y).rho;
    res.iterations = B;
    res.seed = seed;
    Rng root(seed);
    std::vector<double> deltas;
    deltas.reserve(B);
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < B; ++i) {
        Rng rng = root.substream(i);
        if (mode == BootstrapMode::literal) {
            xs = detail::resample(x, rng);
            ys = detail::resample(y, rng);
        } else {
            detail::resample_rows(x, y, rng, xs, ys);
        }
        double rho_i;
        try {
            rho_i = spearman_rho(xs, ys).rho;
        } catch (const DegenerateInput&) {
            rho_i = 0.0;  // resample collapsed to a constant vector
        }
        deltas.push_back(rho_i - res.rho0);
    }
    res.se_bootstrap = sample_std(deltas);
    if (res.se_bootstrap <= 0) throw DegenerateInput("zero bootstrap spread");
    res.z = res.rho0 / res.se_bootstrap;
    res.p_value = 2.0 * (1.0 - normal_cdf(std::abs(res.z)));
    return res;
}

// Difference of Spearman correlations between two groups, with a bootstrap
// standard error for the difference. Resampling within each group follows
// `mode` (independent vectors for literal, joint rows otherwise).
inline BootstrapResult bootstrap_rho_difference(
    const std::vector<double>& x_hi, const std::vector<double>& y_hi,
    const std::vector<double>& x_lo, const std::vector<double>& y_lo,
    std::size_t B, std::uint64_t seed, BootstrapMode mode) {
    if (B < 100) throw InsufficientData("bootstrap needs B >= 100");
    BootstrapResult res;
    const double rho_hi = spearman_rho(x_hi, y_hi).rho;
    const double rho_lo = spearman_rho(x_lo, y_lo).rho;
    res.rho0 = rho_hi - rho_lo;
    res.iterations = B;
    res.seed = seed;
    Rng root(seed);
    std::vector<double> deltas;
    deltas.reserve(B);
    std::vector<double> xs, ys;
    auto one_rho = [&](const std::vector<double>& x, const std::vector<double>& y, Rng& rng) {
        if (mode == BootstrapMode::literal) {
            xs = detail::resample(x, rng);
            ys = detail::resample(y, rng);
        } else {
            detail::resample_rows(x, y, rng, xs, ys);
        }
        try {
            return spearman_rho(xs, ys).rho;
        } catch (const DegenerateInput&) {
            return 0.0;
        }
    };
    for (std::size_t i = 0; i < B; ++i) {
        Rng rng = root.substream(i);
        const double d_i = one_rho(x_hi, y_hi, rng) - one_rho(x_lo, y_lo, rng);
        deltas.push_back(d_i - res.rho0);
    }
    res.se_bootstrap = sample_std(deltas);
    if (res.se_bootstrap <= 0) throw DegenerateInput("zero bootstrap spread");
    res.z = res.rho0 / res.se_bootstrap;
    res.p_value = 2.0 * (1.0 - normal_cdf(std::abs(res.z)));
    return res;
}

struct MedianSplit {
    std::vector<std::size_t> low;   // score <= cutpoint
    std::vector<std::size_t> high;  // score > cutpoint
    double cutpoint = 0;
};

inline MedianSplit median_split(const std::vector<double>& scores) {
    if (scores.size() < 2) throw EmptySample{};
    MedianSplit s;
    s.cutpoint = percentile(scores, 0.5);
    for (std::size_t i = 0; i < scores.size(); ++i) {
        (scores[i] <= s.cutpoint ? s.low : s.high).push_back(i);
    }
    return s;
}

}  // namespace engage
