#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "engage/core.hpp"
#include "engage/distfit.hpp"
#include "engage/efa.hpp"
#include "engage/error.hpp"
#include "engage/ingest.hpp"
#include "engage/lifespan.hpp"
#include "engage/regress.hpp"
#include "engage/stats.hpp"

namespace engage {

inline constexpr const char* kToolVersion = "0.1.0";

struct AnalysisConfig {
    std::string dataset_path;
    std::string mapping_path;  // optional column-mapping JSON
    std::optional<Timestamp> reference_date;
    double msa_threshold = 0.5;
    double vif_threshold = 5.0;
    std::optional<std::size_t> factor_count;  // default: parallel analysis
    std::size_t parallel_sims = 100;
    double split_ratio = 0.7;
    std::size_t bootstrap_iterations = 10000;
    BootstrapMode bootstrap_mode = BootstrapMode::literal;
    double alpha = 0.05;
    std::optional<double> bonferroni_alpha_override;  // e.g. the paper's 0.00104
    ZeroPolicy zero_policy = ZeroPolicy::offset;
    std::uint64_t seed = 0;
    bool enable_distfit = true;
    bool enable_age_interaction = true;
};

// The 13 CE attributes screened for factor analysis (RR is the paper's name
// for the issue resolution rate).
inline const std::vector<std::string>& efa_attribute_names() {
    static const std::vector<std::string> names = {
        "CPM", "WT/m", "CNT/m", "TI/m", "OI/m", "TPR/m", "OPR/m",
        "IC/m", "PRC/m", "PRAR", "RR", "FK/m", "STR/m"};
    return names;
}

inline double efa_attribute_value(const MetricVector& m, const std::string& name) {
    return metric_value(m, name == "RR" ? "IRR" : name);
}

struct DistFitRow {
    std::string attribute;
    DistributionFit lognormal;
    DistributionFit exponential;
    std::optional<DistributionFit> pareto;
};

struct CorrelationRow {
    std::string score;   // "AES" or "PES"
    std::string metric;  // "CPM", "BPM", "RPM"
    CorrelationResult overall;
    CorrelationResult low;
    CorrelationResult high;
};

struct BootstrapRow {
    std::string score;
    std::string metric;
    double rho_high = 0;
    double rho_low = 0;
    BootstrapResult result;
};

struct AnalysisResult {
    FilterReport filter;
    ParseReport parse;
    std::vector<RepositoryRecord> records;  // retained
    std::vector<double> lifespan_days;
    std::vector<MetricVector> metrics;

    std::map<std::string, DescriptiveStats> descriptives;
    std::vector<DistFitRow> dist_fits;

    AdequacyReport adequacy_initial;             // all 13 attributes
    std::optional<AdequacyReport> adequacy_post_msa;
    std::optional<AdequacyReport> adequacy_final;
    AttributeSelection selection;
    std::size_t suggested_factors = 0;
    FactorModel model;
    CrossValReport cross_validation;

    std::vector<double> aes, pes;
    std::size_t aes_factor = 0, pes_factor = 0;
    MedianSplit aes_split;

    std::vector<CorrelationRow> correlations;
    std::vector<BootstrapRow> bootstrap;

    std::vector<RegressionFit> dynamics_ols;  // log CPM / BPM / RPM on AES+PES
    std::optional<AgeGroupAssignment> age_groups;
    std::vector<RegressionFit> age_interaction_ols;
    std::map<std::string, double> log_offsets;  // per-column epsilon under offset policy
    std::string age_interaction_note;

    QuartilePartition lifespan_partition;
    std::map<std::string, QuartileSummary> quartile_summaries;
    PairwiseComparisonTable lifespan_comparisons;

    nlohmann::ordered_json report;
};

namespace detail {

inline std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t tag) {
    Rng r(seed ^ (0x9e3779b97f4a7c15ULL * (tag + 1)));
    return r.next();
}

inline nlohmann::ordered_json stats_json(const DescriptiveStats& s) {
    nlohmann::ordered_json j;
    j["mean"] = s.mean;
    j["std_dev"] = s.std_dev;
    if (s.skewness) j["skewness"] = *s.skewness;
    if (s.kurtosis) j["kurtosis"] = *s.kurtosis;
    j["min"] = s.min;
    j["p25"] = s.p25;
    j["median"] = s.median;
    j["p75"] = s.p75;
    j["max"] = s.max;
    j["n"] = s.n;
    return j;
}

inline nlohmann::ordered_json fit_json(const DistributionFit& f) {
    nlohmann::ordered_json j;
    j["kind"] = f.kind == DistKind::lognormal ? "lognormal"
                : f.kind == DistKind::exponential ? "exponential"
                                                  : "pareto";
    j["shape"] = f.shape;
    j["loc"] = f.loc;
    j["scale"] = f.scale;
    j["ks_statistic"] = f.ks_statistic;
    j["n"] = f.n;
    if (f.degenerate) j["degenerate"] = true;
    if (f.heavy_tail) j["heavy_tail"] = true;
    return j;
}

inline nlohmann::ordered_json regression_json(const RegressionFit& f) {
    nlohmann::ordered_json j;
    j["terms"] = nlohmann::ordered_json::array();
    for (const auto& t : f.terms) {
        nlohmann::ordered_json tj;
        tj["name"] = t.name;
        tj["coef"] = t.coefficient;
        tj["se"] = t.std_error;
        tj["p"] = t.p_value;
        j["terms"].push_back(tj);
    }
    j["r_squared"] = f.r_squared;
    j["adjusted_r_squared"] = f.adjusted_r_squared;
    j["n"] = f.n;
    return j;
}

inline nlohmann::ordered_json loadings_json(const FactorModel& m, const Eigen::MatrixXd& l) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < m.attributes.size(); ++i) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (Eigen::Index c = 0; c < l.cols(); ++c) row.push_back(l(static_cast<Eigen::Index>(i), c));
        j[m.attributes[i]] = row;
    }
    return j;
}

}  // namespace detail

// Persistable snapshot of a fitted factor model (attributes, loadings, score
// weights, fit) so the scoring path can reuse it.
inline nlohmann::ordered_json model_to_json(const FactorModel& m) {
    nlohmann::ordered_json j;
    j["attributes"] = m.attributes;
    j["k"] = m.k;
    j["n"] = m.n;
    j["rotated_loadings"] = detail::loadings_json(m, m.rotated_loadings);
    j["unrotated_loadings"] = detail::loadings_json(m, m.unrotated_loadings);
    nlohmann::ordered_json weights = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < m.attributes.size(); ++i) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (Eigen::Index c = 0; c < m.score_weights.cols(); ++c)
            row.push_back(m.score_weights(static_cast<Eigen::Index>(i), c));
        weights[m.attributes[i]] = row;
    }
    j["score_weights"] = weights;
    nlohmann::ordered_json comm = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < m.attributes.size(); ++i)
        comm[m.attributes[i]] = m.communalities(static_cast<Eigen::Index>(i));
    j["communalities"] = comm;
    j["fit"] = {{"tli", m.fit.tli}, {"rmsea", m.fit.rmsea}, {"srmr", m.fit.srmr},
                {"cfi", m.fit.cfi}, {"chi2", m.fit.chi2}, {"df", m.fit.df}};
    j["heywood"] = m.heywood;
    return j;
}

inline AnalysisResult run_pipeline(const AnalysisConfig& config) {
    AnalysisResult res;
    auto stage = [](const std::string& name, auto&& fn) {
        try {
            fn();
        } catch (const StageFailure&) {
            throw;
        } catch (const std::exception& e) {
            throw StageFailure(name, e.what());
        }
    };

    // --- load + filter --------------------------------------------------
    std::vector<RepositoryRecord> raw;
    stage("load", [&] {
        ColumnMapping mapping;
        if (!config.mapping_path.empty())
            mapping = ColumnMapping::from_json_file(config.mapping_path);
        auto [records, parse] = load_dataset(config.dataset_path, mapping);
        raw = std::move(records);
        res.parse = parse;
    });
    Timestamp reference = 0;
    stage("filter", [&] {
        reference = config.reference_date.value_or([] {
            return static_cast<Timestamp>(std::time(nullptr));
        }());
        auto [retained, report] = apply_exclusion_filters(raw, reference);
        res.records = std::move(retained);
        res.filter = report;
        if (res.records.empty()) throw Error("no records retained after filtering");
    });

    // --- per-month metrics ----------------------------------------------
    stage("metrics", [&] {
        res.metrics.reserve(res.records.size());
        for (const auto& r : res.records) {
            const auto life = compute_active_lifespan(r.created_at, r.last_commit);
            res.lifespan_days.push_back(static_cast<double>(life.days));
            res.metrics.push_back(compute_metrics(r, life));
        }
    });

    auto column = [&](const std::string& name) {
        std::vector<double> v;
        v.reserve(res.metrics.size());
        for (const auto& m : res.metrics) v.push_back(efa_attribute_value(m, name));
        return v;
    };

    // --- descriptive statistics -----------------------------------------
    stage("descriptives", [&] {
        for (const auto& name : metric_names()) {
            std::vector<double> v;
            v.reserve(res.metrics.size());
            for (const auto& m : res.metrics) v.push_back(metric_value(m, name));
            res.descriptives[name] = descriptive_stats(v);
        }
    });

    // --- distribution fits ----------------------------------------------
    if (config.enable_distfit) {
        stage("distfit", [&] {
            for (const auto& name : efa_attribute_names()) {
                DistFitRow row;
                row.attribute = name;
                const auto v = column(name);
                row.lognormal = fit_lognormal(v);
                row.exponential = fit_exponential(v);
                bool all_positive = true;
                for (double x : v)
                    if (x <= 0) { all_positive = false; break; }
                if (all_positive) {
                    try {
                        row.pareto = fit_pareto(v);
                    } catch (const DegenerateFit&) {
                    }
                }
                res.dist_fits.push_back(std::move(row));
            }
        });
    }

    // --- EFA chain --------------------------------------------------------
    Eigen::MatrixXd data13(static_cast<Eigen::Index>(res.metrics.size()),
                           static_cast<Eigen::Index>(efa_attribute_names().size()));
    for (std::size_t i = 0; i < res.metrics.size(); ++i)
        for (std::size_t j = 0; j < efa_attribute_names().size(); ++j)
            data13(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                efa_attribute_value(res.metrics[i], efa_attribute_names()[j]);

    Eigen::MatrixXd retained_data;
    stage("adequacy", [&] {
        const auto cm = correlation_matrix(data13, efa_attribute_names());
        res.adequacy_initial = adequacy(cm, res.metrics.size());
        res.adequacy_initial.vif = vif(data13, efa_attribute_names());
        res.selection = select_attributes(data13, efa_attribute_names(), config.msa_threshold,
                                          config.vif_threshold);
        // KMO checkpoint after MSA-based removals only
        std::vector<std::size_t> post_msa;
        for (std::size_t j = 0; j < efa_attribute_names().size(); ++j) {
            bool removed_by_msa = false;
            for (const auto& r : res.selection.removals)
                if (r.stage == "msa" && r.attribute == efa_attribute_names()[j]) removed_by_msa = true;
            if (!removed_by_msa) post_msa.push_back(j);
        }
        auto gather = [&](const std::vector<std::size_t>& idx) {
            Eigen::MatrixXd m(data13.rows(), static_cast<Eigen::Index>(idx.size()));
            std::vector<std::string> lab;
            for (std::size_t c = 0; c < idx.size(); ++c) {
                m.col(static_cast<Eigen::Index>(c)) =
                    data13.col(static_cast<Eigen::Index>(idx[c]));
                lab.push_back(efa_attribute_names()[idx[c]]);
            }
            return std::make_pair(m, lab);
        };
        {
            auto [m, lab] = gather(post_msa);
            res.adequacy_post_msa = adequacy(correlation_matrix(m, lab), res.metrics.size());
        }
        {
            auto [m, lab] = gather(res.selection.retained_indices);
            res.adequacy_final = adequacy(correlation_matrix(m, lab), res.metrics.size());
            retained_data = m;
        }
    });

    stage("efa", [&] {
        const auto& labels = res.selection.retained;
        res.suggested_factors = parallel_analysis(retained_data, labels, config.parallel_sims,
                                                  detail::stage_seed(config.seed, 1));
        const std::size_t k = config.factor_count.value_or(
            res.suggested_factors > 0 ? res.suggested_factors : 1);
        const auto cm = correlation_matrix(retained_data, labels);
        res.model = fit_efa(cm, k, res.metrics.size());
        res.cross_validation = cross_validate(retained_data, labels, res.model,
                                              config.split_ratio,
                                              detail::stage_seed(config.seed, 2));
    });

    // --- factor scores ----------------------------------------------------
    stage("score", [&] {
        const auto cm = correlation_matrix(retained_data, res.selection.retained);
        const Eigen::MatrixXd scores = factor_scores(retained_data, res.model, cm);
        // PES carries WT/m, AES carries TI/m (and IC/m); if an anchor was
        // screened out, fall back to the next anchor, then to any free factor
        auto anchor = [&](std::initializer_list<const char*> names,
                          std::optional<std::size_t> avoid) -> std::size_t {
            for (const char* name : names) {
                const auto& attrs = res.model.attributes;
                if (std::find(attrs.begin(), attrs.end(), name) == attrs.end()) continue;
                const std::size_t f = factor_of(res.model, name);
                if (!avoid || f != *avoid) return f;
            }
            if (avoid && res.model.k > 1) return *avoid == 0 ? 1 : 0;
            return 0;
        };
        res.pes_factor = anchor({"WT/m", "STR/m"}, std::nullopt);
        res.aes_factor = anchor({"TI/m", "IC/m"}, res.pes_factor);
        res.aes.resize(static_cast<std::size_t>(scores.rows()));
        res.pes.resize(static_cast<std::size_t>(scores.rows()));
        for (Eigen::Index i = 0; i < scores.rows(); ++i) {
            res.aes[static_cast<std::size_t>(i)] =
                scores(i, static_cast<Eigen::Index>(res.aes_factor));
            res.pes[static_cast<std::size_t>(i)] =
                scores(i, static_cast<Eigen::Index>(res.pes_factor));
        }
        res.aes_split = median_split(res.aes);
    });

    // --- correlations + bootstrap ----------------------------------------
    const std::vector<std::string> dynamics = {"CPM", "BPM", "RPM"};
    stage("correlations", [&] {
        auto subset = [&](const std::vector<double>& v, const std::vector<std::size_t>& idx) {
            std::vector<double> out;
            out.reserve(idx.size());
            for (std::size_t i : idx) out.push_back(v[i]);
            return out;
        };
        std::uint64_t pair_tag = 100;
        for (const std::string score_name : {"AES", "PES"}) {
            const auto& score = score_name == std::string("AES") ? res.aes : res.pes;
            for (const auto& metric : dynamics) {
                const auto v = column(metric);
                CorrelationRow row;
                row.score = score_name;
                row.metric = metric;
                row.overall = spearman_rho(score, v);
                const auto score_lo = subset(score, res.aes_split.low);
                const auto score_hi = subset(score, res.aes_split.high);
                const auto v_lo = subset(v, res.aes_split.low);
                const auto v_hi = subset(v, res.aes_split.high);
                row.low = spearman_rho(score_lo, v_lo);
                row.high = spearman_rho(score_hi, v_hi);
                res.correlations.push_back(row);

                BootstrapRow brow;
                brow.score = score_name;
                brow.metric = metric;
                brow.rho_high = row.high.rho;
                brow.rho_low = row.low.rho;
                brow.result = bootstrap_rho_difference(
                    score_hi, v_hi, score_lo, v_lo, config.bootstrap_iterations,
                    detail::stage_seed(config.seed, pair_tag++), config.bootstrap_mode);
                res.bootstrap.push_back(std::move(brow));
            }
        }
    });

    // --- OLS on log dynamics (AES + PES) ----------------------------------
    stage("dynamics", [&] {
        const auto n = static_cast<Eigen::Index>(res.metrics.size());
        Eigen::MatrixXd design(n, 3);
        for (Eigen::Index i = 0; i < n; ++i) {
            design(i, 0) = 1.0;
            design(i, 1) = res.aes[static_cast<std::size_t>(i)];
            design(i, 2) = res.pes[static_cast<std::size_t>(i)];
        }
        for (const auto& metric : dynamics) {
            const auto transformed = log_transform(column(metric), ZeroPolicy::offset);
            if (transformed.epsilon > 0)
                res.log_offsets["log(" + metric + ")"] = transformed.epsilon;
            Eigen::VectorXd y(n);
            for (Eigen::Index i = 0; i < n; ++i) y(i) = transformed.values[static_cast<std::size_t>(i)];
            res.dynamics_ols.push_back(ols_fit(design, y, {"Intercept", "AES", "PES"}));
        }
    });

    // --- age-group interaction OLS ----------------------------------------
    if (config.enable_age_interaction) {
        try {
            stage("age_interaction", [&] {
                res.age_groups = assign_age_groups(res.records);
                const auto& inc = res.age_groups->included;
                const std::vector<std::string> ce = {"TI/m", "IC/m", "WT/m", "STR/m"};
                std::vector<std::vector<double>> logs;
                for (const auto& name : ce) {
                    std::vector<double> v;
                    v.reserve(inc.size());
                    for (std::size_t i : inc) v.push_back(efa_attribute_value(res.metrics[i], name));
                    const auto t = log_transform(v, config.zero_policy);
                    if (t.epsilon > 0) res.log_offsets["age:log(" + name + ")"] = t.epsilon;
                    logs.push_back(t.values);
                }
                const auto design = build_interaction_design(logs, ce, *res.age_groups);
                for (const auto& metric : dynamics) {
                    std::vector<double> v;
                    v.reserve(inc.size());
                    for (std::size_t i : inc) v.push_back(metric_value(res.metrics[i], metric));
                    const auto t = log_transform(v, config.zero_policy);
                    Eigen::VectorXd y(static_cast<Eigen::Index>(v.size()));
                    for (std::size_t i = 0; i < v.size(); ++i)
                        y(static_cast<Eigen::Index>(i)) = t.values[i];
                    res.age_interaction_ols.push_back(ols_fit(design.matrix, y, design.term_names));
                }
            });
        } catch (const StageFailure& e) {
            // the stage is optional: record the reason, keep the pipeline alive
            res.age_interaction_note = e.what();
        }
    } else {
        res.age_interaction_note = "disabled by configuration";
    }

    // --- lifespan quartiles ------------------------------------------------
    stage("lifespan", [&] {
        res.lifespan_partition = partition_lifespan_quartiles(res.lifespan_days);
        const std::vector<std::string> metrics7 = {"TI/m", "IC/m", "WT/m", "STR/m",
                                                   "CPM", "BPM", "RPM"};
        std::map<std::string, std::vector<double>> values;
        for (const auto& name : metrics7) {
            values[name] = column(name);
            res.quartile_summaries[name] =
                quartile_summary(values[name], res.lifespan_partition);
        }
        res.lifespan_comparisons =
            compare_groups(values, res.lifespan_partition, config.alpha,
                           config.bonferroni_alpha_override.value_or(0.0));
    });

    // --- assemble the report ----------------------------------------------
    stage("report", [&] {
        nlohmann::ordered_json& j = res.report;
        j["provenance"] = {
            {"tool_version", kToolVersion},
            {"dataset", config.dataset_path},
            {"reference_date", format_timestamp(reference)},
            {"seed", config.seed},
            {"bootstrap_iterations", config.bootstrap_iterations},
            {"bootstrap_mode",
             config.bootstrap_mode == BootstrapMode::literal ? "literal" : "paired_difference"},
            {"msa_threshold", config.msa_threshold},
            {"vif_threshold", config.vif_threshold},
            {"split_ratio", config.split_ratio},
            {"alpha", config.alpha},
            {"zero_policy", config.zero_policy == ZeroPolicy::strict ? "strict" : "offset"},
        };
        j["filter"] = {{"input_count", res.filter.input_count},
                       {"retained_count", res.filter.retained_count},
                       {"per_criterion_counts", res.filter.per_criterion_counts},
                       {"rows_read", res.parse.rows_read},
                       {"rows_rejected", res.parse.rejections.size()}};
        j["descriptives"] = nlohmann::ordered_json::object();
        for (const auto& name : metric_names())
            j["descriptives"][name] = detail::stats_json(res.descriptives.at(name));
        if (!res.dist_fits.empty()) {
            j["distribution_fits"] = nlohmann::ordered_json::object();
            for (const auto& row : res.dist_fits) {
                nlohmann::ordered_json e;
                e["lognormal"] = detail::fit_json(row.lognormal);
                e["exponential"] = detail::fit_json(row.exponential);
                if (row.pareto) e["pareto"] = detail::fit_json(*row.pareto);
                j["distribution_fits"][row.attribute] = e;
            }
        }
        auto adequacy_json = [](const AdequacyReport& a) {
            nlohmann::ordered_json e;
            if (a.overall_kmo) e["overall_kmo"] = *a.overall_kmo;
            e["msa"] = a.per_variable_msa;
            e["bartlett_chi2"] = a.bartlett_chi2;
            e["bartlett_df"] = a.bartlett_df;
            e["bartlett_p"] = a.bartlett_p;
            if (!a.vif.empty()) {
                nlohmann::ordered_json v = nlohmann::ordered_json::object();
                for (const auto& [k2, val] : a.vif)
                    v[k2] = std::isinf(val) ? nlohmann::ordered_json("inf")
                                            : nlohmann::ordered_json(val);
                e["vif"] = v;
            }
            return e;
        };
        j["adequacy"]["initial"] = adequacy_json(res.adequacy_initial);
        if (res.adequacy_post_msa) j["adequacy"]["post_msa"] = adequacy_json(*res.adequacy_post_msa);
        if (res.adequacy_final) j["adequacy"]["final"] = adequacy_json(*res.adequacy_final);
        j["selection"] = {{"retained", res.selection.retained}};
        j["selection"]["removals"] = nlohmann::ordered_json::array();
        for (const auto& r : res.selection.removals)
            j["selection"]["removals"].push_back(
                {{"attribute", r.attribute}, {"stage", r.stage}, {"value", r.value}});
        j["efa"] = model_to_json(res.model);
        j["efa"]["suggested_factors"] = res.suggested_factors;
        j["efa"]["aes_factor"] = res.aes_factor;
        j["efa"]["pes_factor"] = res.pes_factor;
        auto subset_json = [&](const SubsetFit& s) {
            nlohmann::ordered_json e;
            e["n"] = s.n;
            e["fit"] = {{"tli", s.fit.tli}, {"rmsea", s.fit.rmsea},
                        {"srmr", s.fit.srmr}, {"cfi", s.fit.cfi}};
            nlohmann::ordered_json l = nlohmann::ordered_json::object();
            for (std::size_t i = 0; i < res.model.attributes.size(); ++i) {
                nlohmann::ordered_json row = nlohmann::ordered_json::array();
                for (Eigen::Index c = 0; c < s.loadings.cols(); ++c)
                    row.push_back(s.loadings(static_cast<Eigen::Index>(i), c));
                l[res.model.attributes[i]] = row;
            }
            e["loadings"] = l;
            return e;
        };
        j["cross_validation"] = {{"split_ratio", res.cross_validation.split_ratio},
                                 {"seed", res.cross_validation.seed},
                                 {"train", subset_json(res.cross_validation.train)},
                                 {"test", subset_json(res.cross_validation.test)}};
        j["scores"] = {{"aes_median_cutpoint", res.aes_split.cutpoint},
                       {"n_low", res.aes_split.low.size()},
                       {"n_high", res.aes_split.high.size()}};
        j["correlations"] = nlohmann::ordered_json::array();
        for (const auto& row : res.correlations)
            j["correlations"].push_back({{"score", row.score},
                                         {"metric", row.metric},
                                         {"rho", row.overall.rho},
                                         {"p", row.overall.p_value},
                                         {"rho_low", row.low.rho},
                                         {"rho_high", row.high.rho}});
        j["bootstrap"] = nlohmann::ordered_json::array();
        for (const auto& row : res.bootstrap)
            j["bootstrap"].push_back({{"score", row.score},
                                      {"metric", row.metric},
                                      {"rho_high", row.rho_high},
                                      {"rho_low", row.rho_low},
                                      {"difference", row.result.rho0},
                                      {"se_bootstrap", row.result.se_bootstrap},
                                      {"z", row.result.z},
                                      {"p", row.result.p_value},
                                      {"iterations", row.result.iterations},
                                      {"seed", row.result.seed}});
        j["dynamics_ols"] = nlohmann::ordered_json::object();
        for (std::size_t i = 0; i < res.dynamics_ols.size(); ++i)
            j["dynamics_ols"]["log(" + dynamics[i] + ")"] =
                detail::regression_json(res.dynamics_ols[i]);
        if (!res.age_interaction_ols.empty()) {
            j["age_interaction_ols"] = nlohmann::ordered_json::object();
            j["age_interaction_ols"]["cutpoints_days"] = {res.age_groups->cutpoints[0],
                                                          res.age_groups->cutpoints[1],
                                                          res.age_groups->cutpoints[2]};
            j["age_interaction_ols"]["excluded_no_release"] = res.age_groups->excluded_no_release;
            for (std::size_t i = 0; i < res.age_interaction_ols.size(); ++i)
                j["age_interaction_ols"]["log(" + dynamics[i] + ")"] =
                    detail::regression_json(res.age_interaction_ols[i]);
        } else if (!res.age_interaction_note.empty()) {
            j["age_interaction_ols"] = {{"skipped", res.age_interaction_note}};
        }
        if (!res.log_offsets.empty()) j["log_offsets"] = res.log_offsets;
        j["lifespan"] = {{"cutpoints_days",
                          {res.lifespan_partition.cutpoints[0], res.lifespan_partition.cutpoints[1],
                           res.lifespan_partition.cutpoints[2]}},
                         {"max_observed_days", res.lifespan_partition.max_observed}};
        j["lifespan"]["quartile_summaries"] = nlohmann::ordered_json::object();
        for (const auto& [name, summary] : res.quartile_summaries) {
            nlohmann::ordered_json q = nlohmann::ordered_json::array();
            for (const auto& s : summary.per_quartile) q.push_back(detail::stats_json(s));
            j["lifespan"]["quartile_summaries"][name] = q;
        }
        j["lifespan"]["comparisons"] = {{"alpha", res.lifespan_comparisons.alpha},
                                        {"corrected_alpha", res.lifespan_comparisons.corrected_alpha},
                                        {"test_count", res.lifespan_comparisons.test_count}};
        j["lifespan"]["comparisons"]["cells"] = nlohmann::ordered_json::array();
        for (const auto& cell : res.lifespan_comparisons.cells)
            j["lifespan"]["comparisons"]["cells"].push_back(
                {{"metric", cell.metric},
                 {"pair", "Q" + std::to_string(cell.group_a + 1) + "-Q" +
                              std::to_string(cell.group_b + 1)},
                 {"u", cell.result.u_statistic},
                 {"p", cell.result.p_value},
                 {"delta", cell.result.cliffs_delta},
                 {"significant", cell.significant}});
    });

    return res;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

namespace detail {

inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoFailure("cannot write " + path.string());
    out << content;
}

}  // namespace detail

enum class ReportFormat { json, csv_bundle };

// json: a single report.json. csv-bundle: one CSV per table plus
// provenance.json. Field ordering is stable, so re-emission of the same
// report is byte-identical.
inline std::vector<std::string> emit_report(const nlohmann::ordered_json& report,
                                            ReportFormat format,
                                            const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    std::vector<std::string> written;
    auto emit = [&](const std::string& name, const std::string& content) {
        detail::write_file(fs::path(out_dir) / name, content);
        written.push_back(name);
    };
    if (format == ReportFormat::json) {
        emit("report.json", report.dump(2) + "\n");
        return written;
    }

    emit("provenance.json", report.at("provenance").dump(2) + "\n");
    {
        std::string csv = "key,value\n";
        const auto& f = report.at("filter");
        csv += "input_count," + f.at("input_count").dump() + "\n";
        csv += "retained_count," + f.at("retained_count").dump() + "\n";
        for (const auto& [k, v] : f.at("per_criterion_counts").items())
            csv += k + "," + v.dump() + "\n";
        emit("filter_report.csv", csv);
    }
    {
        std::string csv = "metric,mean,std_dev,skewness,kurtosis,min,p25,median,p75,max,n\n";
        for (const auto& [name, s] : report.at("descriptives").items()) {
            csv += name + "," + detail::num(s.at("mean").get<double>()) + "," +
                   detail::num(s.at("std_dev").get<double>()) + "," +
                   (s.contains("skewness") ? detail::num(s.at("skewness").get<double>()) : "") +
                   "," +
                   (s.contains("kurtosis") ? detail::num(s.at("kurtosis").get<double>()) : "") +
                   "," + detail::num(s.at("min").get<double>()) + "," +
                   detail::num(s.at("p25").get<double>()) + "," +
                   detail::num(s.at("median").get<double>()) + "," +
                   detail::num(s.at("p75").get<double>()) + "," +
                   detail::num(s.at("max").get<double>()) + "," + s.at("n").dump() + "\n";
        }
        emit("descriptives.csv", csv);
    }
    if (report.contains("distribution_fits")) {
        std::string csv =
            "attribute,fit,shape,loc,scale,ks_statistic,degenerate,heavy_tail\n";
        for (const auto& [name, fits] : report.at("distribution_fits").items()) {
            for (const auto& [kind, f] : fits.items()) {
                csv += name + "," + kind + "," + detail::num(f.at("shape").get<double>()) + "," +
                       detail::num(f.at("loc").get<double>()) + "," +
                       detail::num(f.at("scale").get<double>()) + "," +
                       detail::num(f.at("ks_statistic").get<double>()) + "," +
                       (f.value("degenerate", false) ? "true" : "false") + "," +
                       (f.value("heavy_tail", false) ? "true" : "false") + "\n";
            }
        }
        emit("distribution_fits.csv", csv);
    }
    {
        std::string csv = "attribute,msa,vif\n";
        const auto& init = report.at("adequacy").at("initial");
        for (const auto& [name, msa] : init.at("msa").items()) {
            std::string vif_s;
            if (init.contains("vif") && init.at("vif").contains(name)) {
                const auto& v = init.at("vif").at(name);
                vif_s = v.is_string() ? v.get<std::string>() : detail::num(v.get<double>());
            }
            csv += name + "," + detail::num(msa.get<double>()) + "," + vif_s + "\n";
        }
        if (init.contains("overall_kmo"))
            csv += "OVERALL," + detail::num(init.at("overall_kmo").get<double>()) + ",\n";
        csv += "BARTLETT_CHI2," + detail::num(init.at("bartlett_chi2").get<double>()) + ",\n";
        csv += "BARTLETT_DF," + init.at("bartlett_df").dump() + ",\n";
        emit("adequacy.csv", csv);
    }
    {
        std::string csv = "attribute,stage,value\n";
        for (const auto& r : report.at("selection").at("removals"))
            csv += r.at("attribute").get<std::string>() + "," + r.at("stage").get<std::string>() +
                   "," + detail::num(r.at("value").get<double>()) + "\n";
        emit("selection.csv", csv);
    }
    {
        const auto& efa = report.at("efa");
        std::string csv = "attribute";
        const std::size_t k = efa.at("k").get<std::size_t>();
        for (std::size_t c = 0; c < k; ++c) csv += ",MR" + std::to_string(c + 1);
        csv += ",h2,u2\n";
        for (const auto& [name, row] : efa.at("rotated_loadings").items()) {
            csv += name;
            for (const auto& v : row) csv += "," + detail::num(v.get<double>());
            const double h2 = efa.at("communalities").at(name).get<double>();
            csv += "," + detail::num(h2) + "," + detail::num(1.0 - h2) + "\n";
        }
        const auto& fit = efa.at("fit");
        csv += "TLI," + detail::num(fit.at("tli").get<double>()) + "\n";
        csv += "RMSEA," + detail::num(fit.at("rmsea").get<double>()) + "\n";
        csv += "SRMR," + detail::num(fit.at("srmr").get<double>()) + "\n";
        csv += "CFI," + detail::num(fit.at("cfi").get<double>()) + "\n";
        emit("factor_model.csv", csv);
    }
    {
        const auto& cv = report.at("cross_validation");
        std::string csv = "subset,n,tli,rmsea,srmr,cfi\n";
        for (const std::string part : {"train", "test"}) {
            const auto& s = cv.at(part);
            csv += part + "," + s.at("n").dump() + "," +
                   detail::num(s.at("fit").at("tli").get<double>()) + "," +
                   detail::num(s.at("fit").at("rmsea").get<double>()) + "," +
                   detail::num(s.at("fit").at("srmr").get<double>()) + "," +
                   detail::num(s.at("fit").at("cfi").get<double>()) + "\n";
        }
        emit("cross_validation.csv", csv);
    }
    {
        std::string csv = "score,metric,rho,p,rho_low,rho_high\n";
        for (const auto& row : report.at("correlations"))
            csv += row.at("score").get<std::string>() + "," + row.at("metric").get<std::string>() +
                   "," + detail::num(row.at("rho").get<double>()) + "," +
                   detail::num(row.at("p").get<double>()) + "," +
                   detail::num(row.at("rho_low").get<double>()) + "," +
                   detail::num(row.at("rho_high").get<double>()) + "\n";
        emit("correlations.csv", csv);
    }
    {
        std::string csv = "score,metric,rho_high,rho_low,difference,se_bootstrap,z,p,iterations,seed\n";
        for (const auto& row : report.at("bootstrap"))
            csv += row.at("score").get<std::string>() + "," + row.at("metric").get<std::string>() +
                   "," + detail::num(row.at("rho_high").get<double>()) + "," +
                   detail::num(row.at("rho_low").get<double>()) + "," +
                   detail::num(row.at("difference").get<double>()) + "," +
                   detail::num(row.at("se_bootstrap").get<double>()) + "," +
                   detail::num(row.at("z").get<double>()) + "," +
                   detail::num(row.at("p").get<double>()) + "," + row.at("iterations").dump() +
                   "," + row.at("seed").dump() + "\n";
        emit("bootstrap.csv", csv);
    }
    auto regression_csv = [&](const nlohmann::ordered_json& section) {
        std::string csv = "model,term,coef,se,p\n";
        for (const auto& [model_name, fit] : section.items()) {
            if (!fit.is_object() || !fit.contains("terms")) continue;
            for (const auto& t : fit.at("terms"))
                csv += model_name + "," + t.at("name").get<std::string>() + "," +
                       detail::num(t.at("coef").get<double>()) + "," +
                       detail::num(t.at("se").get<double>()) + "," +
                       detail::num(t.at("p").get<double>()) + "\n";
            csv += model_name + ",adjusted_r_squared," +
                   detail::num(fit.at("adjusted_r_squared").get<double>()) + ",,\n";
        }
        return csv;
    };
    emit("regression_dynamics.csv", regression_csv(report.at("dynamics_ols")));
    if (report.contains("age_interaction_ols") &&
        !report.at("age_interaction_ols").contains("skipped"))
        emit("regression_age_interaction.csv", regression_csv(report.at("age_interaction_ols")));
    {
        std::string csv = "metric,quartile,median,skewness,kurtosis,n\n";
        for (const auto& [name, quartiles] : report.at("lifespan").at("quartile_summaries").items()) {
            int q = 1;
            for (const auto& s : quartiles) {
                csv += name + ",Q" + std::to_string(q++) + "," +
                       detail::num(s.at("median").get<double>()) + "," +
                       (s.contains("skewness") ? detail::num(s.at("skewness").get<double>()) : "") +
                       "," +
                       (s.contains("kurtosis") ? detail::num(s.at("kurtosis").get<double>()) : "") +
                       "," + s.at("n").dump() + "\n";
            }
        }
        emit("lifespan_quartiles.csv", csv);
    }
    {
        std::string csv = "metric,pair,u,p,delta,significant\n";
        for (const auto& cell : report.at("lifespan").at("comparisons").at("cells"))
            csv += cell.at("metric").get<std::string>() + "," + cell.at("pair").get<std::string>() +
                   "," + detail::num(cell.at("u").get<double>()) + "," +
                   detail::num(cell.at("p").get<double>()) + "," +
                   detail::num(cell.at("delta").get<double>()) + "," +
                   (cell.at("significant").get<bool>() ? "true" : "false") + "\n";
        emit("lifespan_comparisons.csv", csv);
    }
    return written;
}

}  // namespace engage
