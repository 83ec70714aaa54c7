#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "engage/error.hpp"
#include "engage/stats.hpp"

namespace engage {

struct DegenerateFit : Error {
    explicit DegenerateFit(const std::string& what) : Error("degenerate fit: " + what) {}
};

enum class DistKind { lognormal, exponential, pareto };

struct DistributionFit {
    DistKind kind = DistKind::lognormal;
    double shape = 0;  // s for lognormal, exponent b for pareto
    double loc = 0;
    double scale = 1;
    double pareto_a = 0;  // normalization constant of f(x) = a x^-b
    double ks_statistic = 0;
    std::size_t n = 0;
    bool degenerate = false;  // loc diverged (bounded data under a lognormal fit)
    bool heavy_tail = false;  // pareto exponent b < 2

    double cdf(double x) const {
        switch (kind) {
            case DistKind::lognormal: {
                if (x <= loc) return 0.0;
                boost::math::normal norm;
                return boost::math::cdf(norm, std::log((x - loc) / scale) / shape);
            }
            case DistKind::exponential:
                return x <= loc ? 0.0 : 1.0 - std::exp(-(x - loc) / scale);
            case DistKind::pareto: {
                const double xmin = scale;
                if (x <= xmin) return 0.0;
                return 1.0 - std::pow(x / xmin, -(shape - 1.0));
            }
        }
        return 0.0;
    }

    double quantile(double p) const {
        switch (kind) {
            case DistKind::lognormal: {
                boost::math::normal norm;
                return loc + scale * std::exp(shape * boost::math::quantile(norm, p));
            }
            case DistKind::exponential:
                return loc - scale * std::log1p(-p);
            case DistKind::pareto:
                return scale * std::pow(1.0 - p, -1.0 / (shape - 1.0));
        }
        return 0.0;
    }
};

// D = max over the sorted sample of max(i/n - F(x_i), F(x_i) - (i-1)/n).
inline double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
    if (sample.empty()) throw EmptySample{};
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max(d, static_cast<double>(i + 1) / n - f);
        d = std::max(d, f - static_cast<double>(i) / n);
    }
    return d;
}

namespace detail {

// Profile log-likelihood of a 3-parameter lognormal at a given location.
// Given loc, the (s, scale) MLE is closed form on y = ln(x - loc).
inline double lognormal_profile_ll(const std::vector<double>& sample, double loc,
                                   double* s_out = nullptr, double* scale_out = nullptr) {
    const double n = static_cast<double>(sample.size());
    double sum_y = 0, sum_ln = 0;
    for (double x : sample) {
        const double y = std::log(x - loc);
        sum_y += y;
        sum_ln += y;  // ln(x - loc) term of the density
    }
    const double mu = sum_y / n;
    double ss = 0;
    for (double x : sample) {
        const double d = std::log(x - loc) - mu;
        ss += d * d;
    }
    const double s2 = ss / n;
    if (s2 <= 0) return -1e308;
    if (s_out) *s_out = std::sqrt(s2);
    if (scale_out) *scale_out = std::exp(mu);
    return -sum_ln - 0.5 * n * std::log(s2);
}

// Golden-section maximization of f over [a, b].
inline double golden_max(const std::function<double(double)>& f, double a, double b,
                         int iterations = 80) {
    const double phi = 0.6180339887498949;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int i = 0; i < iterations; ++i) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        }
    }
    return f1 > f2 ? x1 : x2;
}

}  // namespace detail

// Three-parameter lognormal: loc by profile maximum likelihood below
// min(sample), then the closed-form (s, scale) MLE. A fit whose location
// runs off toward the lower search bound (bounded data, e.g. rates in [0,1])
// is flagged degenerate rather than chased.
inline DistributionFit fit_lognormal(const std::vector<double>& sample) {
    if (sample.size() < 10) throw InsufficientData("lognormal fit needs n >= 10");
    const auto [mn_it, mx_it] = std::minmax_element(sample.begin(), sample.end());
    const double mn = *mn_it, mx = *mx_it;
    const double range = mx - mn;
    if (range <= 0) throw DegenerateFit("constant sample");
    auto ll = [&](double loc) { return detail::lognormal_profile_ll(sample, loc); };
    const double lo = mn - range, hi = mn - 1e-9 * range;
    double loc = detail::golden_max(ll, lo, hi);
    // one refinement pass on a narrowed bracket
    const double w = (hi - lo) * 0.05;
    loc = detail::golden_max(ll, std::max(lo, loc - w), std::min(hi, loc + w));
    DistributionFit fit;
    fit.kind = DistKind::lognormal;
    fit.n = sample.size();
    fit.loc = loc;
    detail::lognormal_profile_ll(sample, loc, &fit.shape, &fit.scale);
    fit.degenerate = std::abs(loc) > 1e3 * std::abs(mx) || loc < lo + 0.01 * (hi - lo);
    fit.ks_statistic = ks_statistic(sample, [&fit](double x) { return fit.cdf(x); });
    return fit;
}

// Shifted-exponential MLE: loc = min(sample), scale = mean - min.
inline DistributionFit fit_exponential(const std::vector<double>& sample) {
    if (sample.size() < 2) throw InsufficientData("exponential fit needs n >= 2");
    DistributionFit fit;
    fit.kind = DistKind::exponential;
    fit.n = sample.size();
    fit.loc = *std::min_element(sample.begin(), sample.end());
    fit.scale = mean(sample) - fit.loc;
    if (fit.scale <= 0) throw DegenerateFit("zero scale (constant sample)");
    fit.ks_statistic = ks_statistic(sample, [&fit](double x) { return fit.cdf(x); });
    return fit;
}

// Power-law density f(x) = a x^-b above x_min = min(sample). The tail index
// comes from the Hill estimator; b is the density exponent (tail index + 1)
// and a the implied normalization constant.
inline DistributionFit fit_pareto(const std::vector<double>& sample) {
    if (sample.size() < 10) throw InsufficientData("pareto fit needs n >= 10");
    const double xmin = *std::min_element(sample.begin(), sample.end());
    if (xmin <= 0) throw DegenerateInput("pareto fit needs positive values");
    double log_sum = 0;
    for (double x : sample) log_sum += std::log(x / xmin);
    if (log_sum <= 0) throw DegenerateFit("zero log-spread (constant sample)");
    const double alpha = static_cast<double>(sample.size()) / log_sum;
    DistributionFit fit;
    fit.kind = DistKind::pareto;
    fit.n = sample.size();
    fit.shape = alpha + 1.0;
    fit.scale = xmin;
    fit.pareto_a = alpha * std::pow(xmin, alpha);
    fit.heavy_tail = fit.shape < 2.0;
    fit.ks_statistic = ks_statistic(sample, [&fit](double x) { return fit.cdf(x); });
    return fit;
}

struct PlotRow {
    double x = 0;
    double ecdf = 0;
    double fitted_cdf = 0;
    double qq_theoretical = 0;
};

// CSV-ready CDF/QQ rows, one per sorted observation.
inline std::vector<PlotRow> emit_distribution_plotdata(std::vector<double> sample,
                                                       const DistributionFit& fit) {
    if (sample.empty()) throw EmptySample{};
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    std::vector<PlotRow> rows(sample.size());
    for (std::size_t i = 0; i < sample.size(); ++i) {
        rows[i].x = sample[i];
        rows[i].ecdf = static_cast<double>(i + 1) / n;
        rows[i].fitted_cdf = fit.cdf(sample[i]);
        rows[i].qq_theoretical = fit.quantile((static_cast<double>(i) + 0.5) / n);
    }
    return rows;
}

}  // namespace engage
