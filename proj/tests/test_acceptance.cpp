// Acceptance gate: one check per published criterion, each reporting a
// PASS / FAIL / SKIP line. Criteria 1-10 reproduce golden numbers from the
// public dataset and are skipped (not weakened) when ENGAGE_DATASET is not
// set; criterion 11 is dataset-independent and always runs.

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <optional>

#include <catch2/catch_amalgamated.hpp>

#include "engage/pipeline.hpp"
#include "synthetic.hpp"

using namespace engage;

namespace {

constexpr std::uint64_t kDocumentedSeed = 20240601;

std::optional<std::string> dataset_path() {
    const char* p = std::getenv("ENGAGE_DATASET");
    if (!p || !*p) return std::nullopt;
    return std::string(p);
}

const AnalysisResult* full_run() {
    static std::optional<AnalysisResult> cached;
    static bool attempted = false;
    if (!attempted) {
        attempted = true;
        if (const auto path = dataset_path()) {
            AnalysisConfig cfg;
            cfg.dataset_path = *path;
            cfg.seed = kDocumentedSeed;
            cfg.bootstrap_iterations = 10000;
            cfg.bonferroni_alpha_override = 0.00104;
            if (const char* ref = std::getenv("ENGAGE_REFERENCE_DATE"))
                cfg.reference_date = parse_timestamp(ref);
            else
                cfg.reference_date = parse_timestamp("2020-07-01T00:00:00Z");
            cached = run_pipeline(cfg);
        }
    }
    return cached ? &*cached : nullptr;
}

struct Criterion {
    int id;
    std::string label;
    bool failed = false;

    Criterion(int id_, std::string label_) : id(id_), label(std::move(label_)) {}

    void check(bool ok, const std::string& detail) {
        if (!ok) failed = true;
        if (!ok) std::cout << "[criterion " << id << "]   sub-check FAILED: " << detail << "\n";
        CHECK(ok);
    }
    void close() {
        std::cout << "[criterion " << id << "] " << (failed ? "FAIL" : "PASS") << ": " << label
                  << "\n";
    }
    void skip() {
        std::cout << "[criterion " << id << "] SKIP: " << label
                  << " (golden dataset unavailable; set ENGAGE_DATASET to run)\n";
        SUCCEED();
    }
};

bool rel_within(double actual, double expected, double rel) {
    return std::abs(actual - expected) <= rel * std::abs(expected);
}
bool abs_within(double actual, double expected, double tol) {
    return std::abs(actual - expected) <= tol;
}

double rotated_loading(const FactorModel& m, const std::string& attr, std::size_t factor) {
    for (std::size_t i = 0; i < m.attributes.size(); ++i)
        if (m.attributes[i] == attr)
            return m.rotated_loadings(static_cast<Eigen::Index>(i),
                                      static_cast<Eigen::Index>(factor));
    throw Error("attribute not in model: " + attr);
}

const CorrelationRow& corr_row(const AnalysisResult& r, const std::string& score,
                               const std::string& metric) {
    for (const auto& row : r.correlations)
        if (row.score == score && row.metric == metric) return row;
    throw Error("missing correlation row");
}

}  // namespace

TEST_CASE("criterion 1: descriptive statistics") {
    Criterion c(1, "descriptive statistics (CPM, WT/m, STR/m)");
    const auto* r = full_run();
    if (!r) return c.skip();
    const auto& cpm = r->descriptives.at("CPM");
    c.check(rel_within(cpm.mean, 507.9813, 0.005), "CPM mean");
    c.check(rel_within(cpm.median, 3.5268, 0.005), "CPM median");
    c.check(rel_within(r->descriptives.at("WT/m").mean, 1.0952, 0.005), "WT/m mean");
    c.check(rel_within(r->descriptives.at("STR/m").median, 1.0854, 0.005), "STR/m median");
    c.close();
}

TEST_CASE("criterion 2: distribution fits") {
    Criterion c(2, "KS distances and exponential fit of CPM");
    const auto* r = full_run();
    if (!r) return c.skip();
    auto fit_for = [&](const std::string& name) -> const DistFitRow& {
        for (const auto& row : r->dist_fits)
            if (row.attribute == name) return row;
        throw Error("no fit row for " + name);
    };
    c.check(abs_within(fit_for("TI/m").lognormal.ks_statistic, 0.0198, 0.005), "TI/m KS D");
    c.check(abs_within(fit_for("WT/m").lognormal.ks_statistic, 0.0324, 0.005), "WT/m KS D");
    const auto& exp_cpm = fit_for("CPM").exponential;
    c.check(abs_within(exp_cpm.loc, 0.0994, 1e-4), "CPM exp loc");
    c.check(rel_within(exp_cpm.scale, 507.88, 0.005), "CPM exp scale");
    c.check(abs_within(exp_cpm.scale,
                       r->descriptives.at("CPM").mean - r->descriptives.at("CPM").min, 1e-9),
            "CPM exp scale = mean - min");
    c.close();
}

TEST_CASE("criterion 3: sampling adequacy and attribute selection") {
    Criterion c(3, "KMO, MSA, VIF, Bartlett, retained attribute set");
    const auto* r = full_run();
    if (!r) return c.skip();
    c.check(r->adequacy_initial.overall_kmo.has_value(), "overall KMO defined");
    c.check(abs_within(r->adequacy_initial.overall_kmo.value_or(0), 0.57, 0.01), "overall KMO");
    c.check(abs_within(r->adequacy_initial.per_variable_msa.at("CPM"), 0.48, 0.02), "MSA(CPM)");
    c.check(rel_within(r->adequacy_initial.vif.at("CPM"), 42.09, 0.02), "VIF(CPM)");
    c.check(rel_within(r->adequacy_initial.bartlett_chi2, 372759.0, 0.01), "Bartlett chi2");
    c.check(r->adequacy_initial.bartlett_df == 78, "Bartlett df");
    const std::vector<std::string> expected = {"TI/m", "IC/m", "WT/m", "STR/m"};
    bool same = r->selection.retained.size() == 4;
    for (const auto& e : expected)
        same = same && std::find(r->selection.retained.begin(), r->selection.retained.end(),
                                 e) != r->selection.retained.end();
    c.check(same, "retained set is exactly {TI/m, IC/m, WT/m, STR/m}");
    c.close();
}

TEST_CASE("criterion 4: factor model") {
    Criterion c(4, "parallel analysis, rotated loadings, communality, fit");
    const auto* r = full_run();
    if (!r) return c.skip();
    c.check(r->suggested_factors == 2, "parallel analysis suggests 2 factors");
    c.check(r->model.k == 2, "two factors fitted");
    const auto pes = r->pes_factor, aes = r->aes_factor;
    c.check(abs_within(std::abs(rotated_loading(r->model, "WT/m", pes)), 0.99, 0.03),
            "WT/m on PES");
    c.check(abs_within(std::abs(rotated_loading(r->model, "TI/m", aes)), 0.56, 0.03),
            "TI/m on AES");
    c.check(abs_within(std::abs(rotated_loading(r->model, "IC/m", aes)), 0.61, 0.03),
            "IC/m on AES");
    c.check(abs_within(std::abs(rotated_loading(r->model, "STR/m", pes)), 0.41, 0.03),
            "STR/m on PES");
    for (std::size_t i = 0; i < r->model.attributes.size(); ++i)
        if (r->model.attributes[i] == "WT/m")
            c.check(abs_within(r->model.communalities(static_cast<Eigen::Index>(i)), 0.99, 0.02),
                    "h2(WT/m)");
    c.check(r->model.fit.tli >= 0.98, "TLI");
    c.check(r->model.fit.rmsea <= 0.01, "RMSEA");
    c.check(r->model.fit.srmr <= 0.01, "SRMR");
    c.close();
}

TEST_CASE("criterion 5: cross-validation") {
    Criterion c(5, "split sizes and held-out fit");
    const auto* r = full_run();
    if (!r) return c.skip();
    c.check(r->cross_validation.train.n == 23764, "train size");
    c.check(r->cross_validation.test.n == 10182, "test size");
    c.check(r->cross_validation.test.fit.rmsea <= 0.08, "test RMSEA");
    c.check(r->cross_validation.test.fit.cfi >= 0.95, "test CFI");
    c.close();
}

TEST_CASE("criterion 6: correlations") {
    Criterion c(6, "Spearman correlations and the AES median split");
    const auto* r = full_run();
    if (!r) return c.skip();
    c.check(abs_within(corr_row(*r, "AES", "CPM").overall.rho, 0.664, 0.005), "AES-CPM");
    c.check(abs_within(corr_row(*r, "AES", "BPM").overall.rho, 0.548, 0.005), "AES-BPM");
    c.check(abs_within(corr_row(*r, "AES", "CPM").high.rho, 0.578, 0.01), "high-group AES-CPM");
    c.check(abs_within(corr_row(*r, "AES", "CPM").low.rho, 0.344, 0.01), "low-group AES-CPM");
    c.check(abs_within(r->aes_split.cutpoint, -0.0906, 0.002), "AES median cutpoint");
    c.close();
}

TEST_CASE("criterion 7: bootstrap z-tests") {
    Criterion c(7, "literal-mode bootstrap z for group differences");
    const auto* r = full_run();
    if (!r) return c.skip();
    for (const auto& row : r->bootstrap) {
        if (row.score == "AES" && row.metric == "CPM")
            c.check(rel_within(row.result.z, 26.124, 0.05), "AES-CPM z");
        c.check(row.result.p_value < 0.001, row.score + "-" + row.metric + " p < 0.001");
        c.check(row.result.iterations == 10000, "B = 10000");
        c.check(row.result.seed != 0, "documented seed recorded");
    }
    c.close();
}

TEST_CASE("criterion 8: dynamics OLS") {
    Criterion c(8, "log-dynamics regressions on AES and PES");
    const auto* r = full_run();
    if (!r) return c.skip();
    const auto& cpm = r->dynamics_ols[0];  // log(CPM)
    c.check(abs_within(cpm.terms[1].coefficient, 0.4578, 0.005), "beta(AES)");
    c.check(abs_within(cpm.terms[2].coefficient, 0.0719, 0.005), "beta(PES)");
    c.check(abs_within(cpm.adjusted_r_squared, 0.066, 0.005), "adj R2 log(CPM)");
    c.check(abs_within(r->dynamics_ols[1].adjusted_r_squared, 0.058, 0.005), "adj R2 log(BPM)");
    c.check(abs_within(r->dynamics_ols[2].adjusted_r_squared, 0.043, 0.005), "adj R2 log(RPM)");
    c.check(abs_within(percent_effect(0.4578), 0.581, 0.001), "percent effect");
    c.close();
}

TEST_CASE("criterion 9: age-interaction OLS") {
    Criterion c(9, "interaction model sign/significance pattern and magnitudes");
    const auto* r = full_run();
    if (!r) return c.skip();
    c.check(!r->age_interaction_ols.empty(), "age-interaction stage ran");
    if (!r->age_interaction_ols.empty()) {
        const auto& fit = r->age_interaction_ols[0];  // log(CPM)
        // published coefficients for the 19 non-intercept terms of the
        // log(CPM) model, in design order
        struct Expected {
            const char* name;
            double coef;
            bool significant;
        };
        const Expected expected[] = {
            {"Log(TI/m)", 0.1063, true},    {"Log(IC/m)", 0.1603, true},
            {"Log(WT/m)", 0.4337, true},    {"Log(STR/m)", 0.1419, true},
            {"G2", -0.1644, true},          {"G3", -0.2128, true},
            {"G4", -0.2093, true},          {"TI/m x G2", 0.0210, false},
            {"TI/m x G3", 0.0755, true},    {"TI/m x G4", 0.1434, true},
            {"IC/m x G2", 0.1577, true},    {"IC/m x G3", 0.2977, true},
            {"IC/m x G4", 0.4888, true},    {"WT/m x G2", -0.0745, true},
            {"WT/m x G3", -0.1454, true},   {"WT/m x G4", -0.2389, true},
            {"STR/m x G2", -0.1073, true},  {"STR/m x G3", -0.2242, true},
            {"STR/m x G4", -0.3741, true},
        };
        for (const auto& e : expected) {
            const RegressionTerm* term = nullptr;
            for (const auto& t : fit.terms)
                if (t.name == e.name) term = &t;
            if (!term) {
                c.check(false, std::string("missing term ") + e.name);
                continue;
            }
            if (e.coef != 0.0)
                c.check(term->coefficient * e.coef > 0, std::string(e.name) + " sign");
            c.check((term->p_value < 0.05) == e.significant,
                    std::string(e.name) + " significance");
            c.check(abs_within(term->coefficient, e.coef, 0.05), std::string(e.name) + " value");
        }
        c.check(abs_within(fit.adjusted_r_squared, 0.503, 0.02), "adj R2 log(CPM)");
    }
    c.close();
}

TEST_CASE("criterion 10: lifespan quartiles") {
    Criterion c(10, "quartile cutpoints, medians, effect sizes, significance");
    const auto* r = full_run();
    if (!r) return c.skip();
    c.check(abs_within(r->lifespan_partition.cutpoints[0], 541, 1.0), "Q1 cutpoint");
    c.check(abs_within(r->lifespan_partition.cutpoints[1], 1065, 1.0), "Q2 cutpoint");
    c.check(abs_within(r->lifespan_partition.cutpoints[2], 1807, 1.0), "Q3 cutpoint");
    c.check(abs_within(r->lifespan_partition.max_observed, 5360, 0.5), "max lifespan");
    const auto& ti = r->quartile_summaries.at("TI/m");
    const double medians[] = {1.00, 0.37, 0.26, 0.20};
    for (int q = 0; q < 4; ++q)
        c.check(abs_within(ti.per_quartile[static_cast<std::size_t>(q)].median, medians[q], 0.01),
                "TI/m median Q" + std::to_string(q + 1));
    for (const auto& cell : r->lifespan_comparisons.cells) {
        if (cell.metric == "TI/m" && cell.group_a == 0 && cell.group_b == 3)
            c.check(abs_within(std::abs(cell.result.cliffs_delta), 0.551, 0.01),
                    "TI/m Q1-Q4 delta");
        if (cell.metric == "BPM" && cell.group_a == 0 && cell.group_b == 3)
            c.check(abs_within(std::abs(cell.result.cliffs_delta), 0.826, 0.01),
                    "BPM Q1-Q4 delta");
        c.check(cell.result.p_value < 0.00104,
                cell.metric + " Q" + std::to_string(cell.group_a + 1) + "-Q" +
                    std::to_string(cell.group_b + 1) + " significant");
    }
    c.close();
}

TEST_CASE("criterion 11: dataset-independent property suites") {
    Criterion c(11, "property suites (no dataset required)");

    {  // delta-U identity, 500 random instances
        Rng rng(7);
        bool ok = true;
        for (int trial = 0; trial < 500 && ok; ++trial) {
            const std::size_t na = 1 + rng.bounded(50), nb = 1 + rng.bounded(50);
            std::vector<double> a(na), b(nb);
            for (auto& v : a) v = static_cast<double>(rng.bounded(30));
            for (auto& v : b) v = static_cast<double>(rng.bounded(30));
            const double u = detail::u_statistic(a, b);
            const double identity = 2.0 * u / static_cast<double>(na * nb) - 1.0;
            ok = std::abs(cliffs_delta(a, b) - identity) <= 1e-10;
        }
        c.check(ok, "delta-U identity on 500 instances");
    }

    {  // exact vs normal-approximate Mann-Whitney, tie-free groups of 5..8
        Rng rng(99);
        bool ok = true;
        for (int trial = 0; trial < 300 && ok; ++trial) {
            const std::size_t na = 5 + rng.bounded(4), nb = 5 + rng.bounded(4);
            std::vector<double> a(na), b(nb);
            for (auto& v : a) v = rng.uniform();
            for (auto& v : b) v = rng.uniform();
            const double u = detail::u_statistic(a, b);
            const double exact = detail::exact_mwu_p(a, b, u);
            const double n1 = static_cast<double>(na), n2 = static_cast<double>(nb);
            const double sigma2 = n1 * n2 * (n1 + n2 + 1.0) / 12.0;
            const double z = (std::abs(u - n1 * n2 / 2.0) - 0.5) / std::sqrt(sigma2);
            const double papprox = 2.0 * (1.0 - normal_cdf(std::max(z, 0.0)));
            ok = std::abs(papprox - exact) <= 0.02 + 1e-12;
        }
        c.check(ok, "exact vs approximate Mann-Whitney within 0.02");
    }

    {  // Spearman monotone-transform invariance
        Rng rng(2024);
        bool ok = true;
        for (int trial = 0; trial < 100 && ok; ++trial) {
            const std::size_t n = 5 + rng.bounded(40);
            std::vector<double> x(n), y(n), xt(n), yt(n);
            for (std::size_t i = 0; i < n; ++i) {
                x[i] = rng.uniform() * 10 - 5;
                y[i] = rng.uniform() * 10 - 5;
                xt[i] = std::exp(x[i]);
                yt[i] = y[i] * y[i] * y[i] + y[i];
            }
            ok = std::abs(spearman_rho(x, y).rho - spearman_rho(xt, yt).rho) <= 1e-10;
        }
        c.check(ok, "Spearman monotone-transform invariance");
    }

    {  // varimax communality preservation
        Eigen::MatrixXd loadings(6, 2);
        loadings << 0.7, 0.3, 0.6, 0.4, 0.8, 0.1, 0.2, 0.7, 0.1, 0.8, 0.3, 0.6;
        Eigen::MatrixXd r = loadings * loadings.transpose();
        r.diagonal().setOnes();
        CorrelationMatrix cm;
        cm.values = r;
        for (int i = 0; i < 6; ++i) cm.labels.push_back("v" + std::to_string(i + 1));
        const auto model = fit_efa(cm, 2, 800);
        bool ok = true;
        for (Eigen::Index j = 0; j < 6; ++j)
            ok = ok && std::abs(model.rotated_loadings.row(j).squaredNorm() -
                                model.unrotated_loadings.row(j).squaredNorm()) <= 1e-9;
        c.check(ok, "varimax communality preservation within 1e-9");
    }

    {  // KMO closed form for the equicorrelated matrix at r = 0.5
        CorrelationMatrix cm;
        cm.labels = {"a", "b", "c"};
        cm.values = Eigen::MatrixXd::Constant(3, 3, 0.5);
        cm.values.diagonal().setOnes();
        const auto rep = adequacy(cm, 100);
        c.check(rep.overall_kmo &&
                    std::abs(*rep.overall_kmo - 0.6923076923076923) <= 1e-6,
                "KMO equicorrelated closed form");
    }

    {  // OLS residual orthogonality
        Rng rng(17);
        const int n = 120, q = 5;
        Eigen::MatrixXd x(n, q);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            x(i, 0) = 1.0;
            for (int j = 1; j < q; ++j) x(i, j) = rng.normal();
            y(i) = 1.0 + x(i, 1) - x(i, 3) + rng.normal();
        }
        const auto fit = ols_fit(x, y, {"a", "b", "c", "d", "e"});
        Eigen::VectorXd beta(q);
        for (int j = 0; j < q; ++j) beta(j) = fit.terms[static_cast<std::size_t>(j)].coefficient;
        c.check((x.transpose() * (y - x * beta)).cwiseAbs().maxCoeff() <= 1e-8,
                "OLS residual orthogonality within 1e-8");
    }

    {  // end-to-end determinism on synthetic data
        const auto path = synthetic::make_dataset("/tmp/engage_accept_synth.csv", 500, 11);
        AnalysisConfig cfg;
        cfg.dataset_path = path;
        cfg.reference_date = *parse_timestamp("2020-06-01T00:00:00Z");
        cfg.seed = 31337;
        cfg.bootstrap_iterations = 150;
        cfg.parallel_sims = 60;
        const auto a = run_pipeline(cfg);
        const auto b = run_pipeline(cfg);
        c.check(a.report.dump() == b.report.dump(), "two seeded runs byte-identical");
    }

    c.close();
}
