#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include "engage/error.hpp"
#include "engage/rng.hpp"

namespace engage {

struct CorrelationMatrix {
    std::vector<std::string> labels;
    Eigen::MatrixXd values;

    std::size_t size() const { return labels.size(); }
};

// Pearson correlations of the raw columns.
inline CorrelationMatrix correlation_matrix(const Eigen::MatrixXd& data,
                                            const std::vector<std::string>& labels) {
    const auto n = data.rows();
    const auto p = data.cols();
    if (n < p + 1) throw TooFewRows{};
    Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
    Eigen::VectorXd sd(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        sd(j) = std::sqrt(centered.col(j).squaredNorm() / static_cast<double>(n - 1));
        if (sd(j) <= 0) throw ZeroVariance(labels[static_cast<std::size_t>(j)]);
    }
    CorrelationMatrix cm;
    cm.labels = labels;
    cm.values = (centered.transpose() * centered) / static_cast<double>(n - 1);
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = 0; j < p; ++j) cm.values(i, j) /= sd(i) * sd(j);
    // exact symmetry and unit diagonal
    cm.values = (cm.values + cm.values.transpose()) / 2.0;
    cm.values.diagonal().setOnes();
    return cm;
}

struct AdequacyReport {
    std::optional<double> overall_kmo;  // unset when the matrix is the identity
    std::map<std::string, double> per_variable_msa;
    double bartlett_chi2 = 0;
    std::size_t bartlett_df = 0;
    double bartlett_p = 1;
    std::map<std::string, double> vif;  // filled by the caller when available
};

namespace detail {

inline Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (lmin <= 0 || lmax / lmin > 1e12) throw SingularMatrix{};
    return m.inverse();
}

}  // namespace detail

// KMO from anti-image correlations plus Bartlett's sphericity test.
inline AdequacyReport adequacy(const CorrelationMatrix& matrix, std::size_t n) {
    const auto p = static_cast<Eigen::Index>(matrix.size());
    const Eigen::MatrixXd& r = matrix.values;
    const Eigen::MatrixXd inv = detail::checked_inverse(r);
    AdequacyReport rep;
    double sum_r2 = 0, sum_q2 = 0;
    std::vector<double> row_r2(static_cast<std::size_t>(p), 0.0);
    std::vector<double> row_q2(static_cast<std::size_t>(p), 0.0);
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < p; ++j) {
            if (i == j) continue;
            const double rij = r(i, j);
            const double qij = inv(i, j) / std::sqrt(inv(i, i) * inv(j, j));
            sum_r2 += rij * rij;
            sum_q2 += qij * qij;
            row_r2[static_cast<std::size_t>(i)] += rij * rij;
            row_q2[static_cast<std::size_t>(i)] += qij * qij;
        }
    }
    if (sum_r2 + sum_q2 > 0) {
        rep.overall_kmo = sum_r2 / (sum_r2 + sum_q2);
        for (std::size_t i = 0; i < static_cast<std::size_t>(p); ++i) {
            const double denom = row_r2[i] + row_q2[i];
            rep.per_variable_msa[matrix.labels[i]] = denom > 0 ? row_r2[i] / denom : 0.0;
        }
    }
    const double log_det = std::log(r.determinant());
    const double pd = static_cast<double>(p);
    rep.bartlett_chi2 =
        std::max(0.0, -(static_cast<double>(n) - 1.0 - (2.0 * pd + 5.0) / 6.0) * log_det);
    rep.bartlett_df = static_cast<std::size_t>(p * (p - 1) / 2);
    if (rep.bartlett_df > 0 && rep.bartlett_chi2 > 0) {
        boost::math::chi_squared dist(static_cast<double>(rep.bartlett_df));
        rep.bartlett_p = boost::math::cdf(boost::math::complement(dist, rep.bartlett_chi2));
    }
    return rep;
}

// VIF_j = 1/(1 - R^2_j) from regressing column j on the rest. Perfect
// collinearity is reported as +inf.
inline std::map<std::string, double> vif(const Eigen::MatrixXd& data,
                                         const std::vector<std::string>& labels) {
    const auto n = data.rows();
    const auto p = data.cols();
    if (n <= p) throw TooFewRows{};
    Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
    std::map<std::string, double> out;
    for (Eigen::Index j = 0; j < p; ++j) {
        const double tss = centered.col(j).squaredNorm();
        if (tss <= 0) throw ZeroVariance(labels[static_cast<std::size_t>(j)]);
        if (p == 1) {
            out[labels[0]] = 1.0;
            continue;
        }
        Eigen::MatrixXd x(n, p - 1);
        Eigen::Index c = 0;
        for (Eigen::Index k = 0; k < p; ++k)
            if (k != j) x.col(c++) = centered.col(k);
        const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(centered.col(j));
        const double rss = (centered.col(j) - x * beta).squaredNorm();
        const double r2 = 1.0 - rss / tss;
        out[labels[static_cast<std::size_t>(j)]] =
            r2 >= 1.0 - 1e-12 ? std::numeric_limits<double>::infinity() : 1.0 / (1.0 - r2);
    }
    return out;
}

struct RemovalLogEntry {
    std::string attribute;
    std::string stage;  // "msa" or "vif"
    double value = 0;
};

struct AttributeSelection {
    std::vector<std::string> retained;
    std::vector<std::size_t> retained_indices;  // into the original column order
    std::vector<RemovalLogEntry> removals;
};

// Iterative screening: drop attributes with MSA below threshold (recompute
// until stable), then attributes with VIF above threshold the same way.
// Perfectly collinear columns are dropped one per round, highest index first,
// so one member of a duplicate pair survives.
inline AttributeSelection select_attributes(const Eigen::MatrixXd& data,
                                            const std::vector<std::string>& labels,
                                            double msa_threshold = 0.5,
                                            double vif_threshold = 5.0) {
    std::vector<std::size_t> keep(labels.size());
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    AttributeSelection sel;

    auto subset = [&](const std::vector<std::size_t>& idx) {
        Eigen::MatrixXd m(data.rows(), static_cast<Eigen::Index>(idx.size()));
        std::vector<std::string> lab;
        for (std::size_t c = 0; c < idx.size(); ++c) {
            m.col(static_cast<Eigen::Index>(c)) = data.col(static_cast<Eigen::Index>(idx[c]));
            lab.push_back(labels[idx[c]]);
        }
        return std::make_pair(m, lab);
    };

    // perfectly collinear columns make the correlation matrix singular, which
    // would block the MSA screen entirely; shed them first (highest index of
    // each collinear set), logged as VIF removals
    bool singular = true;
    while (singular) {
        if (keep.size() < 3) throw EverythingRemoved{};
        auto [m, lab] = subset(keep);
        try {
            (void)detail::checked_inverse(correlation_matrix(m, lab).values);
            singular = false;
        } catch (const SingularMatrix&) {
            const auto v = vif(m, lab);
            std::optional<std::size_t> collinear;
            for (std::size_t c = 0; c < keep.size(); ++c)
                if (std::isinf(v.at(lab[c]))) collinear = c;
            if (!collinear) throw;
            sel.removals.push_back({lab[*collinear], "vif", v.at(lab[*collinear])});
            keep.erase(keep.begin() + static_cast<std::ptrdiff_t>(*collinear));
        }
    }

    bool changed = true;
    while (changed) {
        changed = false;
        if (keep.size() < 3) throw EverythingRemoved{};
        auto [m, lab] = subset(keep);
        const auto rep = adequacy(correlation_matrix(m, lab), static_cast<std::size_t>(m.rows()));
        std::vector<std::size_t> next;
        for (std::size_t c = 0; c < keep.size(); ++c) {
            const double msa = rep.per_variable_msa.count(lab[c]) ? rep.per_variable_msa.at(lab[c]) : 0.0;
            if (msa < msa_threshold) {
                sel.removals.push_back({lab[c], "msa", msa});
                changed = true;
            } else {
                next.push_back(keep[c]);
            }
        }
        keep = std::move(next);
    }

    changed = true;
    while (changed) {
        changed = false;
        if (keep.size() < 3) throw EverythingRemoved{};
        auto [m, lab] = subset(keep);
        const auto v = vif(m, lab);
        // collinear columns first, one per round
        std::optional<std::size_t> collinear;
        for (std::size_t c = 0; c < keep.size(); ++c) {
            if (std::isinf(v.at(lab[c]))) collinear = c;
        }
        if (collinear) {
            sel.removals.push_back({lab[*collinear], "vif", v.at(lab[*collinear])});
            keep.erase(keep.begin() + static_cast<std::ptrdiff_t>(*collinear));
            changed = true;
            continue;
        }
        std::vector<std::size_t> next;
        for (std::size_t c = 0; c < keep.size(); ++c) {
            if (v.at(lab[c]) > vif_threshold) {
                sel.removals.push_back({lab[c], "vif", v.at(lab[c])});
                changed = true;
            } else {
                next.push_back(keep[c]);
            }
        }
        keep = std::move(next);
    }

    if (keep.size() < 3) throw EverythingRemoved{};
    sel.retained_indices = keep;
    for (std::size_t i : keep) sel.retained.push_back(labels[i]);
    return sel;
}

namespace detail {

// Eigenvalues of the reduced correlation matrix (squared multiple
// correlations on the diagonal), descending.
inline Eigen::VectorXd reduced_eigenvalues(const CorrelationMatrix& cm) {
    Eigen::MatrixXd r = cm.values;
    const Eigen::MatrixXd inv = checked_inverse(r);
    for (Eigen::Index j = 0; j < r.cols(); ++j) r(j, j) = 1.0 - 1.0 / inv(j, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
    return es.eigenvalues().reverse();
}

}  // namespace detail

// Horn's parallel analysis on reduced eigenvalues: suggested factor count is
// the number of observed eigenvalues exceeding the mean simulated eigenvalue
// at the same rank, over n_sims uncorrelated normal datasets of equal shape.
inline std::size_t parallel_analysis(const Eigen::MatrixXd& data,
                                     const std::vector<std::string>& labels,
                                     std::size_t n_sims, std::uint64_t seed) {
    if (n_sims < 50) throw InsufficientData("parallel analysis needs n_sims >= 50");
    const auto n = data.rows();
    const auto p = data.cols();
    const Eigen::VectorXd observed = detail::reduced_eigenvalues(correlation_matrix(data, labels));
    Eigen::VectorXd sim_mean = Eigen::VectorXd::Zero(p);
    Rng root(seed);
    std::vector<std::string> sim_labels(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) sim_labels[static_cast<std::size_t>(j)] = "sim" + std::to_string(j);
    for (std::size_t s = 0; s < n_sims; ++s) {
        Rng rng = root.substream(s);
        Eigen::MatrixXd noise(n, p);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < p; ++j) noise(i, j) = rng.normal();
        sim_mean += detail::reduced_eigenvalues(correlation_matrix(noise, sim_labels));
    }
    sim_mean /= static_cast<double>(n_sims);
    std::size_t count = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
        if (observed(j) > sim_mean(j))
            ++count;
        else
            break;
    }
    return count;
}

struct FitIndices {
    double tli = 1;
    double rmsea = 0;
    double srmr = 0;
    double cfi = 1;
    double chi2 = 0;
    double df = 0;
};

struct FactorModel {
    std::vector<std::string> attributes;
    std::size_t k = 0;
    Eigen::MatrixXd unrotated_loadings;  // p x k
    Eigen::MatrixXd rotated_loadings;    // p x k
    Eigen::VectorXd communalities;       // h^2
    Eigen::VectorXd uniquenesses;        // u^2
    Eigen::VectorXd complexity;          // Hofmann's index per attribute
    Eigen::VectorXd ss_loadings;         // per factor, rotated
    Eigen::VectorXd proportion_var;
    Eigen::VectorXd cumulative_var;
    FitIndices fit;
    Eigen::MatrixXd score_weights;  // p x k, regression method
    bool heywood = false;
    std::size_t n = 0;
};

namespace detail {

// Loadings from the top-k eigenpairs of R - diag(psi).
inline Eigen::MatrixXd loadings_for_uniqueness(const Eigen::MatrixXd& r,
                                               const Eigen::VectorXd& psi, std::size_t k) {
    Eigen::MatrixXd reduced = r;
    reduced.diagonal() -= psi;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reduced);
    const auto p = r.rows();
    Eigen::MatrixXd lambda(p, static_cast<Eigen::Index>(k));
    for (std::size_t f = 0; f < k; ++f) {
        const Eigen::Index idx = p - 1 - static_cast<Eigen::Index>(f);
        const double ev = std::max(es.eigenvalues()(idx), 0.0);
        lambda.col(static_cast<Eigen::Index>(f)) = es.eigenvectors().col(idx) * std::sqrt(ev);
    }
    return lambda;
}

// Sum of squared off-diagonal residuals of R - Lambda Lambda^T.
inline double minres_objective(const Eigen::MatrixXd& r, const Eigen::VectorXd& psi,
                               std::size_t k) {
    const Eigen::MatrixXd lambda = loadings_for_uniqueness(r, psi, k);
    const Eigen::MatrixXd resid = r - lambda * lambda.transpose();
    double f = 0;
    for (Eigen::Index i = 0; i < r.rows(); ++i)
        for (Eigen::Index j = i + 1; j < r.cols(); ++j) f += resid(i, j) * resid(i, j);
    return f;
}

// Projected BFGS with numerical gradients over the box [lo, hi]^p.
inline Eigen::VectorXd minimize_box(const std::function<double(const Eigen::VectorXd&)>& f,
                                    Eigen::VectorXd x, double lo, double hi, double tol,
                                    int max_iter) {
    const auto p = x.size();
    auto clamp_vec = [&](Eigen::VectorXd v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::clamp(v(i), lo, hi);
        return v;
    };
    auto grad = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd g(p);
        const double h = 1e-6;
        for (Eigen::Index i = 0; i < p; ++i) {
            Eigen::VectorXd a = v, b = v;
            a(i) = std::clamp(v(i) + h, lo, hi);
            b(i) = std::clamp(v(i) - h, lo, hi);
            const double denom = a(i) - b(i);
            g(i) = denom != 0 ? (f(a) - f(b)) / denom : 0.0;
        }
        return g;
    };
    x = clamp_vec(x);
    Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(p, p);
    double fx = f(x);
    Eigen::VectorXd g = grad(x);
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd dir = -hinv * g;
        if (dir.dot(g) > 0) dir = -g;  // reset on loss of descent direction
        double step = 1.0;
        Eigen::VectorXd xn;
        double fn = fx;
        bool improved = false;
        for (int ls = 0; ls < 40; ++ls) {
            xn = clamp_vec(x + step * dir);
            fn = f(xn);
            if (fn < fx - 1e-12) {
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) break;
        const Eigen::VectorXd gn = grad(xn);
        const Eigen::VectorXd s = xn - x;
        const Eigen::VectorXd y = gn - g;
        const double sy = s.dot(y);
        if (sy > 1e-12) {
            const Eigen::VectorXd hy = hinv * y;
            hinv += ((sy + y.dot(hy)) / (sy * sy)) * (s * s.transpose()) -
                    (hy * s.transpose() + s * hy.transpose()) / sy;
        }
        const double delta = fx - fn;
        x = xn;
        fx = fn;
        g = gn;
        if (delta < tol * std::max(1.0, std::abs(fx))) break;
    }
    return x;
}

// Flip each column so its largest-magnitude entry is positive.
inline void fix_signs(Eigen::MatrixXd& lambda) {
    for (Eigen::Index c = 0; c < lambda.cols(); ++c) {
        Eigen::Index imax = 0;
        lambda.col(c).cwiseAbs().maxCoeff(&imax);
        if (lambda(imax, c) < 0) lambda.col(c) = -lambda.col(c);
    }
}

// Varimax rotation with Kaiser normalization, pairwise sweeps.
inline Eigen::MatrixXd varimax(Eigen::MatrixXd lambda, int max_sweeps = 100, double tol = 1e-10) {
    const auto p = lambda.rows();
    const auto k = lambda.cols();
    if (k < 2) {
        fix_signs(lambda);
        return lambda;
    }
    Eigen::VectorXd h = lambda.rowwise().norm();
    for (Eigen::Index i = 0; i < p; ++i)
        if (h(i) > 0) lambda.row(i) /= h(i);
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double total_rotation = 0;
        for (Eigen::Index a = 0; a < k - 1; ++a) {
            for (Eigen::Index b = a + 1; b < k; ++b) {
                double u2sum = 0, v2sum = 0, uv_sum = 0, u2v2 = 0;
                for (Eigen::Index i = 0; i < p; ++i) {
                    const double x = lambda(i, a), y = lambda(i, b);
                    const double u = x * x - y * y, v = 2 * x * y;
                    u2sum += u;
                    v2sum += v;
                    uv_sum += u * u - v * v;
                    u2v2 += 2 * u * v;
                }
                const double pd = static_cast<double>(p);
                const double num = u2v2 - 2 * u2sum * v2sum / pd;
                const double den = uv_sum - (u2sum * u2sum - v2sum * v2sum) / pd;
                if (std::abs(num) < 1e-15 && std::abs(den) < 1e-15) continue;
                const double phi = 0.25 * std::atan2(num, den);
                if (std::abs(phi) < tol) continue;
                const double c = std::cos(phi), s = std::sin(phi);
                for (Eigen::Index i = 0; i < p; ++i) {
                    const double x = lambda(i, a), y = lambda(i, b);
                    lambda(i, a) = c * x + s * y;
                    lambda(i, b) = -s * x + c * y;
                }
                total_rotation += std::abs(phi);
            }
        }
        if (total_rotation < tol) break;
    }
    for (Eigen::Index i = 0; i < p; ++i) lambda.row(i) *= h(i);
    fix_signs(lambda);
    return lambda;
}

}  // namespace detail

// Minres extraction (quasi-Newton over uniquenesses, SMC-based start values)
// followed by varimax rotation. Fit indices come from the ML discrepancy of
// the implied matrix with a Bartlett-type correction; models with df <= 0 are
// reported as saturated (TLI=1, RMSEA=0, CFI=1).
inline FactorModel fit_efa(const CorrelationMatrix& matrix, std::size_t k, std::size_t n) {
    const auto p = static_cast<Eigen::Index>(matrix.size());
    if (k < 1) throw Error("factor count must be >= 1");
    if (static_cast<Eigen::Index>(k) >= p) throw Error("factor count must be < attribute count");
    const Eigen::MatrixXd& r = matrix.values;
    const Eigen::MatrixXd inv = detail::checked_inverse(r);

    Eigen::VectorXd psi(p);
    for (Eigen::Index j = 0; j < p; ++j) psi(j) = std::clamp(1.0 / inv(j, j), 0.005, 0.995);
    auto objective = [&](const Eigen::VectorXd& v) { return detail::minres_objective(r, v, k); };
    psi = detail::minimize_box(objective, psi, 1e-4, 1.0, 1e-6, 1000);

    FactorModel model;
    model.attributes = matrix.labels;
    model.k = k;
    model.n = n;
    model.unrotated_loadings = detail::loadings_for_uniqueness(r, psi, k);
    detail::fix_signs(model.unrotated_loadings);

    model.communalities = model.unrotated_loadings.rowwise().squaredNorm();
    for (Eigen::Index i = 0; i < p; ++i) {
        if (model.communalities(i) > 1.0) {
            model.heywood = true;
            model.unrotated_loadings.row(i) /= std::sqrt(model.communalities(i));
            model.communalities(i) = 1.0;
        }
    }
    model.uniquenesses = Eigen::VectorXd::Ones(p) - model.communalities;

    model.rotated_loadings = detail::varimax(model.unrotated_loadings);
    // order rotated factors by SS loadings, descending
    {
        Eigen::VectorXd ss = model.rotated_loadings.colwise().squaredNorm();
        std::vector<Eigen::Index> order(static_cast<std::size_t>(ss.size()));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](Eigen::Index a, Eigen::Index b) { return ss(a) > ss(b); });
        Eigen::MatrixXd reordered(p, model.rotated_loadings.cols());
        for (std::size_t c = 0; c < order.size(); ++c)
            reordered.col(static_cast<Eigen::Index>(c)) = model.rotated_loadings.col(order[c]);
        model.rotated_loadings = reordered;
    }

    model.complexity.resize(p);
    for (Eigen::Index i = 0; i < p; ++i) {
        double s2 = 0, s4 = 0;
        for (Eigen::Index c = 0; c < model.rotated_loadings.cols(); ++c) {
            const double l2 = model.rotated_loadings(i, c) * model.rotated_loadings(i, c);
            s2 += l2;
            s4 += l2 * l2;
        }
        model.complexity(i) = s4 > 0 ? s2 * s2 / s4 : 1.0;
    }
    model.ss_loadings = model.rotated_loadings.colwise().squaredNorm();
    model.proportion_var = model.ss_loadings / static_cast<double>(p);
    model.cumulative_var = model.proportion_var;
    for (Eigen::Index c = 1; c < model.cumulative_var.size(); ++c)
        model.cumulative_var(c) += model.cumulative_var(c - 1);

    // fit indices
    const double pd = static_cast<double>(p);
    const double kd = static_cast<double>(k);
    const double df = ((pd - kd) * (pd - kd) - (pd + kd)) / 2.0;
    const double df_null = pd * (pd - 1.0) / 2.0;
    Eigen::MatrixXd implied = model.rotated_loadings * model.rotated_loadings.transpose();
    implied.diagonal() = Eigen::VectorXd::Ones(p);
    double srmr_num = 0;
    const Eigen::MatrixXd resid = r - model.rotated_loadings * model.rotated_loadings.transpose();
    for (Eigen::Index i = 0; i < p; ++i)
        for (Eigen::Index j = i + 1; j < p; ++j) srmr_num += resid(i, j) * resid(i, j);
    model.fit.srmr = std::sqrt(srmr_num / (pd * (pd - 1.0) / 2.0));

    const double nd = static_cast<double>(n);
    const double log_det_r = std::log(r.determinant());
    const double f_null = -log_det_r;
    const double chi2_null = std::max(0.0, (nd - 1.0 - (2.0 * pd + 5.0) / 6.0) * f_null);
    double f_model = 0;
    {
        Eigen::LLT<Eigen::MatrixXd> llt(implied);
        if (llt.info() == Eigen::Success) {
            const double log_det_m = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
            const double trace = (llt.solve(r)).trace();
            f_model = std::max(0.0, log_det_m - log_det_r + trace - pd);
        }
    }
    model.fit.chi2 = std::max(0.0, (nd - 1.0 - (2.0 * pd + 5.0) / 6.0 - 2.0 * kd / 3.0) * f_model);
    model.fit.df = df;
    if (df <= 0 || chi2_null <= 0 || df_null == 0) {
        model.fit.tli = 1.0;
        model.fit.rmsea = 0.0;
        model.fit.cfi = 1.0;
    } else {
        const double null_ratio = chi2_null / df_null;
        model.fit.tli = null_ratio > 1.0
                            ? (null_ratio - model.fit.chi2 / df) / (null_ratio - 1.0)
                            : 1.0;
        model.fit.rmsea = std::sqrt(std::max(model.fit.chi2 - df, 0.0) / (df * (nd - 1.0)));
        const double num = std::max(model.fit.chi2 - df, 0.0);
        const double den = std::max({chi2_null - df_null, model.fit.chi2 - df, 1e-300});
        model.fit.cfi = 1.0 - num / den;
    }

    model.score_weights = inv * model.rotated_loadings;
    return model;
}

// Per-factor identification: the factor carrying the largest |loading| of a
// given attribute.
inline std::size_t factor_of(const FactorModel& model, const std::string& attribute) {
    const auto it = std::find(model.attributes.begin(), model.attributes.end(), attribute);
    if (it == model.attributes.end()) throw Error("attribute not in model: " + attribute);
    const Eigen::Index row = static_cast<Eigen::Index>(it - model.attributes.begin());
    Eigen::Index best = 0;
    model.rotated_loadings.row(row).cwiseAbs().maxCoeff(&best);
    return static_cast<std::size_t>(best);
}

// Regression-method factor scores: Z * R^-1 * Lambda on column-standardized
// data.
inline Eigen::MatrixXd factor_scores(const Eigen::MatrixXd& data, const FactorModel& model,
                                     const CorrelationMatrix& matrix) {
    const auto n = data.rows();
    const auto p = data.cols();
    if (static_cast<std::size_t>(p) != model.attributes.size())
        throw Error("data/model attribute mismatch");
    Eigen::MatrixXd z = data.rowwise() - data.colwise().mean();
    for (Eigen::Index j = 0; j < p; ++j) {
        const double sd = std::sqrt(z.col(j).squaredNorm() / static_cast<double>(n - 1));
        if (sd <= 0) throw ZeroVariance(model.attributes[static_cast<std::size_t>(j)]);
        z.col(j) /= sd;
    }
    (void)matrix;
    return z * model.score_weights;
}

struct SubsetFit {
    std::size_t n = 0;
    Eigen::MatrixXd loadings;
    FitIndices fit;
};

struct CrossValReport {
    double split_ratio = 0.7;
    SubsetFit train;
    SubsetFit test;
    std::uint64_t seed = 0;
};

namespace detail {

// Align columns of `candidate` to `reference` by maximal absolute Tucker
// congruence, greedily, flipping signs to match.
inline Eigen::MatrixXd align_factors(const Eigen::MatrixXd& reference, Eigen::MatrixXd candidate) {
    const auto k = reference.cols();
    Eigen::MatrixXd aligned(reference.rows(), k);
    std::vector<bool> used(static_cast<std::size_t>(k), false);
    for (Eigen::Index rc = 0; rc < k; ++rc) {
        double best = -1;
        Eigen::Index best_c = 0;
        double best_sign = 1;
        for (Eigen::Index cc = 0; cc < k; ++cc) {
            if (used[static_cast<std::size_t>(cc)]) continue;
            const double num = reference.col(rc).dot(candidate.col(cc));
            const double den = reference.col(rc).norm() * candidate.col(cc).norm();
            const double congruence = den > 0 ? std::abs(num) / den : 0.0;
            if (congruence > best) {
                best = congruence;
                best_c = cc;
                best_sign = num >= 0 ? 1.0 : -1.0;
            }
        }
        used[static_cast<std::size_t>(best_c)] = true;
        aligned.col(rc) = best_sign * candidate.col(best_c);
    }
    return aligned;
}

}  // namespace detail

// Random 70/30 split; the same attribute set and factor count are fitted
// independently on each subset, with factors aligned to the full-data model.
inline CrossValReport cross_validate(const Eigen::MatrixXd& data,
                                     const std::vector<std::string>& labels,
                                     const FactorModel& full_model, double ratio,
                                     std::uint64_t seed) {
    const auto n = data.rows();
    if (n < 100) throw InsufficientData("cross-validation needs n >= 100");
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    Rng rng(seed);
    for (std::size_t i = idx.size() - 1; i > 0; --i)
        std::swap(idx[i], idx[rng.bounded(i + 1)]);
    const auto n_train = static_cast<std::size_t>(
        std::llround(ratio * static_cast<double>(n)));

    auto fit_subset = [&](std::size_t begin, std::size_t end) {
        Eigen::MatrixXd sub(static_cast<Eigen::Index>(end - begin), data.cols());
        for (std::size_t i = begin; i < end; ++i)
            sub.row(static_cast<Eigen::Index>(i - begin)) = data.row(idx[i]);
        const auto cm = correlation_matrix(sub, labels);
        FactorModel m = fit_efa(cm, full_model.k, static_cast<std::size_t>(sub.rows()));
        SubsetFit out;
        out.n = static_cast<std::size_t>(sub.rows());
        out.loadings = detail::align_factors(full_model.rotated_loadings, m.rotated_loadings);
        out.fit = m.fit;
        return out;
    };

    CrossValReport rep;
    rep.split_ratio = ratio;
    rep.seed = seed;
    rep.train = fit_subset(0, n_train);
    rep.test = fit_subset(n_train, static_cast<std::size_t>(n));
    return rep;
}

}  // namespace engage
