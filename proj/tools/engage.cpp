// Command-line front end for the engagement analytics pipeline.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

// pipeline.hpp (Eigen) must precede the httplib-based transport: resolv.h,
// pulled in by httplib, defines a `_res` macro that mangles Eigen internals.
#include "engage/pipeline.hpp"

#include "engage/github_http.hpp"

namespace {

struct CliOptions {
    std::string config_path;
    std::string dataset;
    std::string out = ".";
    std::string format = "json";
    std::optional<std::uint64_t> seed;
};

engage::AnalysisConfig load_config(const CliOptions& opts) {
    engage::AnalysisConfig cfg;
    if (!opts.config_path.empty()) {
        std::ifstream in(opts.config_path);
        if (!in) throw engage::IoFailure("cannot open config: " + opts.config_path);
        nlohmann::json j;
        in >> j;
        cfg.dataset_path = j.value("dataset", cfg.dataset_path);
        cfg.mapping_path = j.value("mapping", cfg.mapping_path);
        if (j.contains("reference_date")) {
            auto ts = engage::parse_timestamp(j["reference_date"].get<std::string>());
            if (!ts) throw engage::ParseFailure("bad reference_date in config");
            cfg.reference_date = *ts;
        }
        cfg.msa_threshold = j.value("msa_threshold", cfg.msa_threshold);
        cfg.vif_threshold = j.value("vif_threshold", cfg.vif_threshold);
        if (j.contains("factor_count")) cfg.factor_count = j["factor_count"].get<std::size_t>();
        cfg.parallel_sims = j.value("parallel_sims", cfg.parallel_sims);
        cfg.split_ratio = j.value("split_ratio", cfg.split_ratio);
        cfg.bootstrap_iterations = j.value("bootstrap_iterations", cfg.bootstrap_iterations);
        if (j.contains("bootstrap_mode")) {
            const auto mode = j["bootstrap_mode"].get<std::string>();
            if (mode == "literal")
                cfg.bootstrap_mode = engage::BootstrapMode::literal;
            else if (mode == "paired_difference")
                cfg.bootstrap_mode = engage::BootstrapMode::paired_difference;
            else
                throw engage::ParseFailure("unknown bootstrap_mode: " + mode);
        }
        cfg.alpha = j.value("alpha", cfg.alpha);
        if (j.contains("bonferroni_alpha"))
            cfg.bonferroni_alpha_override = j["bonferroni_alpha"].get<double>();
        if (j.contains("zero_policy")) {
            const auto policy = j["zero_policy"].get<std::string>();
            if (policy == "strict")
                cfg.zero_policy = engage::ZeroPolicy::strict;
            else if (policy == "offset")
                cfg.zero_policy = engage::ZeroPolicy::offset;
            else
                throw engage::ParseFailure("unknown zero_policy: " + policy);
        }
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        cfg.enable_distfit = j.value("enable_distfit", cfg.enable_distfit);
        cfg.enable_age_interaction =
            j.value("enable_age_interaction", cfg.enable_age_interaction);
    }
    if (!opts.dataset.empty()) cfg.dataset_path = opts.dataset;
    if (opts.seed) cfg.seed = *opts.seed;
    return cfg;
}

bool seed_provided(const CliOptions& opts) {
    if (opts.seed) return true;
    if (opts.config_path.empty()) return false;
    std::ifstream in(opts.config_path);
    nlohmann::json j;
    in >> j;
    return j.contains("seed");
}

void write_or_print(const nlohmann::ordered_json& j, const std::string& out,
                    const std::string& name) {
    if (out.empty() || out == "-") {
        std::cout << j.dump(2) << "\n";
        return;
    }
    std::filesystem::create_directories(out);
    std::ofstream f(std::filesystem::path(out) / name, std::ios::binary);
    if (!f) throw engage::IoFailure("cannot write output to " + out);
    f << j.dump(2) << "\n";
}

int run_section(const CliOptions& opts, const std::vector<std::string>& keys,
                const std::string& name) {
    if (!seed_provided(opts)) {
        std::cerr << "error: --seed (or a config seed) is required\n";
        return 1;
    }
    const auto cfg = load_config(opts);
    const auto res = engage::run_pipeline(cfg);
    nlohmann::ordered_json out;
    out["provenance"] = res.report.at("provenance");
    for (const auto& key : keys)
        if (res.report.contains(key)) out[key] = res.report.at(key);
    write_or_print(out, opts.out, name + ".json");
    return 0;
}

std::string record_to_csv_row(const engage::RepositoryRecord& r) {
    std::string row;
    auto add = [&](const std::string& s) {
        if (!row.empty()) row += ',';
        if (s.find_first_of(",\"\n") != std::string::npos) {
            row += '"';
            for (char c : s) {
                row += c;
                if (c == '"') row += '"';
            }
            row += '"';
        } else {
            row += s;
        }
    };
    add(r.owner);
    add(r.name);
    add(engage::format_timestamp(r.created_at));
    add(engage::format_timestamp(r.last_commit));
    add(r.is_fork ? "true" : "false");
    add(r.license_id);
    for (std::int64_t v : {r.commits, r.contributors, r.watchers, r.stargazers, r.forks,
                           r.total_issues, r.open_issues, r.total_pull_requests,
                           r.open_pull_requests, r.merged_pull_requests, r.resolved_issues,
                           r.issue_comments, r.pr_comments, r.branches, r.releases})
        add(std::to_string(v));
    add(r.last_release ? engage::format_timestamp(*r.last_release) : "");
    return row;
}

int run_ingest(const std::string& repos_path, const std::string& out) {
    std::ifstream in(repos_path);
    if (!in) throw engage::IoFailure("cannot open repo list: " + repos_path);
    engage::HttpTransport transport;
    engage::ApiSession session;
    if (const char* token = std::getenv("GITHUB_TOKEN")) session.token = token;
    engage::GithubClient client(transport, session);

    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!out.empty() && out != "-") {
        file.open(out, std::ios::binary);
        if (!file) throw engage::IoFailure("cannot write " + out);
        os = &file;
    }
    *os << "owner,name,created_at,last_commit,is_fork,license,commits,contributors,"
           "watchers,stargazers,forks,total_issues,open_issues,total_pull_requests,"
           "open_pull_requests,merged_pull_requests,resolved_issues,issue_comments,"
           "pr_comments,branches,releases,last_release\n";
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto slash = line.find('/');
        if (slash == std::string::npos)
            throw engage::ParseFailure("repo list entries must be owner/name: " + line);
        const std::string owner = line.substr(0, slash);
        const std::string name = line.substr(slash + 1);
        auto rec = client.fetch_repository(owner, name);
        const auto [issue_comments, pr_comments] = client.fetch_comment_counts(owner, name);
        rec.issue_comments = issue_comments;
        rec.pr_comments = pr_comments;
        *os << record_to_csv_row(rec) << "\n";
        std::cerr << "fetched " << rec.full_name() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"repository community-engagement analytics"};
    app.fallthrough();  // let global options appear after the subcommand
    app.require_subcommand(1);

    CliOptions opts;
    app.add_option("--config", opts.config_path, "analysis config (JSON)");
    app.add_option("--seed", opts.seed, "seed for randomized steps");
    app.add_option("--dataset", opts.dataset, "dataset CSV path");
    app.add_option("--out", opts.out, "output directory (or - for stdout)");
    app.add_option("--format", opts.format, "report format: json or csv-bundle")
        ->check(CLI::IsMember({"json", "csv-bundle"}));

    auto* ingest = app.add_subcommand("ingest", "fetch repository records from the API");
    std::string repos_path;
    ingest->add_option("--repos", repos_path, "file with one owner/name per line")->required();

    app.add_subcommand("filter", "exclusion filter report");
    app.add_subcommand("metrics", "per-month metrics and descriptives");
    app.add_subcommand("distfit", "distribution fits");
    app.add_subcommand("efa", "adequacy, selection, factor model, cross-validation");
    app.add_subcommand("score", "factor scores and correlations");
    app.add_subcommand("dynamics", "popularity-dynamics regressions");
    app.add_subcommand("lifespan", "lifespan quartile comparisons");
    app.add_subcommand("run", "full pipeline, writes the complete report");

    auto* report = app.add_subcommand("report", "re-emit a saved report");
    std::string report_input;
    report->add_option("--input", report_input, "existing report.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (ingest->parsed()) {
            const std::string out = opts.out == "." ? "-" : opts.out;
            return run_ingest(repos_path, out);
        }
        if (report->parsed()) {
            std::ifstream in(report_input, std::ios::binary);
            if (!in) throw engage::IoFailure("cannot open " + report_input);
            nlohmann::ordered_json j;
            in >> j;
            const auto fmt = opts.format == "json" ? engage::ReportFormat::json
                                                   : engage::ReportFormat::csv_bundle;
            for (const auto& name : engage::emit_report(j, fmt, opts.out))
                std::cout << name << "\n";
            return 0;
        }
        if (app.get_subcommand("filter")->parsed())
            return run_section(opts, {"filter"}, "filter");
        if (app.get_subcommand("metrics")->parsed())
            return run_section(opts, {"descriptives"}, "metrics");
        if (app.get_subcommand("distfit")->parsed())
            return run_section(opts, {"distribution_fits"}, "distfit");
        if (app.get_subcommand("efa")->parsed())
            return run_section(opts, {"adequacy", "selection", "efa", "cross_validation"},
                               "efa");
        if (app.get_subcommand("score")->parsed())
            return run_section(opts, {"scores", "correlations", "bootstrap"}, "score");
        if (app.get_subcommand("dynamics")->parsed())
            return run_section(opts, {"dynamics_ols", "age_interaction_ols", "log_offsets"},
                               "dynamics");
        if (app.get_subcommand("lifespan")->parsed())
            return run_section(opts, {"lifespan"}, "lifespan");
        if (app.get_subcommand("run")->parsed()) {
            if (!seed_provided(opts)) {
                std::cerr << "error: --seed (or a config seed) is required\n";
                return 1;
            }
            const auto cfg = load_config(opts);
            const auto res = engage::run_pipeline(cfg);
            const auto fmt = opts.format == "json" ? engage::ReportFormat::json
                                                   : engage::ReportFormat::csv_bundle;
            for (const auto& name : engage::emit_report(res.report, fmt, opts.out))
                std::cout << name << "\n";
            return 0;
        }
    } catch (const engage::StageFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.stage_name == "load" ? 2 : 3;
    } catch (const engage::IoFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const engage::ParseFailure& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const engage::MissingColumn& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const engage::EmptyFile& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const engage::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
