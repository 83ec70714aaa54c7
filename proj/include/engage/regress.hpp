#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "engage/core.hpp"
#include "engage/error.hpp"

namespace engage {

struct RegressionTerm {
    std::string name;
    double coefficient = 0;
    double std_error = 0;
    double p_value = 1;
};

struct RegressionFit {
    std::vector<RegressionTerm> terms;
    double r_squared = 0;
    double adjusted_r_squared = 0;
    std::size_t n = 0;
};

enum class ZeroPolicy { strict, offset };

struct LogTransformResult {
    std::vector<double> values;
    double epsilon = 0;  // offset applied; 0 under strict
};

// ln(x) under strict; ln(x + eps) with eps = half the smallest positive value
// under offset.
inline LogTransformResult log_transform(const std::vector<double>& values, ZeroPolicy policy) {
    LogTransformResult out;
    out.values.reserve(values.size());
    if (policy == ZeroPolicy::strict) {
        for (double v : values) {
            if (v <= 0) throw NonPositiveValue{};
            out.values.push_back(std::log(v));
        }
        return out;
    }
    double min_positive = 0;
    for (double v : values) {
        if (v < 0) throw NonPositiveValue{};
        if (v > 0 && (min_positive == 0 || v < min_positive)) min_positive = v;
    }
    if (min_positive == 0) throw DegenerateInput("all values zero under offset log policy");
    bool has_zero = std::any_of(values.begin(), values.end(), [](double v) { return v == 0; });
    out.epsilon = has_zero ? min_positive / 2.0 : 0.0;
    for (double v : values) out.values.push_back(std::log(v + out.epsilon));
    return out;
}

// OLS via column-pivoted QR; standard errors from sigma^2 (X^T X)^-1,
// two-sided t p-values with n - q degrees of freedom.
inline RegressionFit ols_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                             const std::vector<std::string>& term_names) {
    const auto n = design.rows();
    const auto q = design.cols();
    if (n <= q) throw TooFewRows{};
    if (static_cast<std::size_t>(q) != term_names.size()) throw LengthMismatch{};
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < q) throw RankDeficient{};
    const Eigen::VectorXd beta = qr.solve(response);
    const Eigen::VectorXd resid = response - design * beta;
    const double rss = resid.squaredNorm();
    const double df = static_cast<double>(n - q);
    const double sigma2 = rss / df;
    const Eigen::MatrixXd xtx_inv = (design.transpose() * design).ldlt().solve(
        Eigen::MatrixXd::Identity(q, q));

    RegressionFit fit;
    fit.n = static_cast<std::size_t>(n);
    boost::math::students_t tdist(df);
    for (Eigen::Index j = 0; j < q; ++j) {
        RegressionTerm term;
        term.name = term_names[static_cast<std::size_t>(j)];
        term.coefficient = beta(j);
        term.std_error = std::sqrt(std::max(sigma2 * xtx_inv(j, j), 0.0));
        if (term.std_error > 0) {
            const double t = term.coefficient / term.std_error;
            term.p_value = 2.0 * boost::math::cdf(boost::math::complement(tdist, std::abs(t)));
        } else {
            term.p_value = term.coefficient == 0 ? 1.0 : 0.0;
        }
        fit.terms.push_back(std::move(term));
    }
    const double mean_y = response.mean();
    const double tss = (response.array() - mean_y).square().sum();
    fit.r_squared = tss > 0 ? 1.0 - rss / tss : 0.0;
    fit.adjusted_r_squared =
        1.0 - (1.0 - fit.r_squared) * (static_cast<double>(n) - 1.0) / df;
    return fit;
}

inline double percent_effect(double coefficient) { return std::exp(coefficient) - 1.0; }

struct AgeGroupAssignment {
    // group label per included record: 0..3 for G1..G4
    std::vector<int> group;
    // indices (into the caller's record list) of records with a release
    std::vector<std::size_t> included;
    std::size_t excluded_no_release = 0;
    double cutpoints[3] = {0, 0, 0};  // day counts at the 25/50/75 percentiles
};

// Age = last_release - created_at in days; quartile cutpoints from the
// empirical percentiles, G1 youngest. Ties at a cutpoint fall to the lower
// group.
inline AgeGroupAssignment assign_age_groups(const std::vector<RepositoryRecord>& records) {
    AgeGroupAssignment a;
    std::vector<double> ages;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (!records[i].last_release) {
            ++a.excluded_no_release;
            continue;
        }
        a.included.push_back(i);
        ages.push_back(static_cast<double>(
            (*records[i].last_release - records[i].created_at) / kSecondsPerDay));
    }
    if (ages.empty()) throw NoReleases{};
    std::vector<double> sorted = ages;
    std::sort(sorted.begin(), sorted.end());
    auto interp = [&](double qq) {
        const double h = (static_cast<double>(sorted.size()) - 1.0) * qq;
        const std::size_t lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = static_cast<std::size_t>(std::ceil(h));
        return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    };
    a.cutpoints[0] = interp(0.25);
    a.cutpoints[1] = interp(0.50);
    a.cutpoints[2] = interp(0.75);
    if (!(a.cutpoints[0] < a.cutpoints[1] && a.cutpoints[1] < a.cutpoints[2]))
        throw DegeneratePartition{};
    for (double age : ages) {
        int g = 0;
        if (age > a.cutpoints[2])
            g = 3;
        else if (age > a.cutpoints[1])
            g = 2;
        else if (age > a.cutpoints[0])
            g = 1;
        a.group.push_back(g);
    }
    return a;
}

struct InteractionDesign {
    Eigen::MatrixXd matrix;  // n x 20
    std::vector<std::string> term_names;
};

// Columns: intercept, 4 log CE metrics, 3 age dummies (G2..G4, G1 reference),
// and the 12 metric-by-dummy interactions.
inline InteractionDesign build_interaction_design(
    const std::vector<std::vector<double>>& log_metrics,
    const std::vector<std::string>& metric_labels, const AgeGroupAssignment& groups) {
    if (log_metrics.size() != 4 || metric_labels.size() != 4)
        throw Error("interaction design expects exactly 4 CE metrics");
    const std::size_t n = groups.group.size();
    for (const auto& m : log_metrics)
        if (m.size() != n) throw LengthMismatch{};
    InteractionDesign d;
    d.matrix.resize(static_cast<Eigen::Index>(n), 20);
    d.term_names.push_back("Intercept");
    for (const auto& lab : metric_labels) d.term_names.push_back("Log(" + lab + ")");
    for (int g = 2; g <= 4; ++g) d.term_names.push_back("G" + std::to_string(g));
    for (const auto& lab : metric_labels)
        for (int g = 2; g <= 4; ++g)
            d.term_names.push_back(lab + " x G" + std::to_string(g));
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        Eigen::Index c = 0;
        d.matrix(row, c++) = 1.0;
        for (std::size_t m = 0; m < 4; ++m) d.matrix(row, c++) = log_metrics[m][i];
        for (int g = 1; g <= 3; ++g) d.matrix(row, c++) = groups.group[i] == g ? 1.0 : 0.0;
        for (std::size_t m = 0; m < 4; ++m)
            for (int g = 1; g <= 3; ++g)
                d.matrix(row, c++) = groups.group[i] == g ? log_metrics[m][i] : 0.0;
    }
    return d;
}

}  // namespace engage
