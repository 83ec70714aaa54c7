#pragma once

// Synthetic dataset generator shared by the pipeline and acceptance suites.
// Produces a CSV in the canonical schema with a planted two-factor structure:
// issue activity (TI, IC) driven by one latent variable, attention (WT, STR)
// by another, commits correlated with the first.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include "engage/rng.hpp"
#include "engage/time.hpp"

namespace synthetic {

inline std::string make_dataset(const std::string& path, std::size_t n_retained = 700,
                                std::uint64_t seed = 2024, bool with_releases = true) {
    engage::Rng rng(seed);
    std::ofstream out(path, std::ios::binary);
    out << "owner,name,created_at,last_commit,is_fork,license,commits,contributors,"
           "watchers,stargazers,forks,total_issues,open_issues,total_pull_requests,"
           "open_pull_requests,merged_pull_requests,resolved_issues,issue_comments,"
           "pr_comments,branches,releases,last_release\n";

    const engage::Timestamp base = *engage::parse_timestamp("2010-01-01T00:00:00Z");
    auto emit = [&](std::size_t idx, bool fork, std::int64_t contributors, bool zero_issues,
                    bool zero_prs, bool active) {
        const double f1 = rng.normal();  // active engagement
        const double f2 = rng.normal();  // passive engagement
        const std::int64_t lifespan_days = 365 + static_cast<std::int64_t>(rng.bounded(2600));
        const double months = static_cast<double>(lifespan_days) / 30.44;
        auto count = [&](double mu, double load1, double load2, double noise) {
            const double rate =
                std::exp(mu + load1 * f1 + load2 * f2 + noise * rng.normal());
            return static_cast<std::int64_t>(std::llround(rate * months)) + 1;
        };
        const std::int64_t commits = count(1.2, 0.8, 0.1, 0.5);
        const std::int64_t watchers = count(0.2, 0.1, 0.9, 0.3);
        const std::int64_t stars = count(1.0, 0.15, 0.85, 0.4);
        const std::int64_t issues = zero_issues ? 0 : count(0.8, 0.9, 0.1, 0.55);
        const std::int64_t comments = zero_issues ? 0 : count(1.5, 0.7, 0.1, 0.55);
        const std::int64_t prs = zero_prs ? 0 : count(0.5, 0.5, 0.2, 0.5);
        const std::int64_t forks = count(0.1, 0.3, 0.5, 0.5);
        const std::int64_t branches = count(-1.0, 0.2, 0.1, 0.6);
        const std::int64_t releases = count(-1.3, 0.25, 0.1, 0.6);
        const std::int64_t open_issues =
            issues > 0 ? std::min(issues, count(-0.6, 0.2, 0.1, 0.7)) : 0;
        const std::int64_t resolved = issues - open_issues;
        const std::int64_t open_prs =
            prs > 0 ? std::min(prs, count(-1.0, 0.2, 0.1, 0.7)) : 0;
        const std::int64_t merged =
            prs - open_prs > 0 ? static_cast<std::int64_t>(rng.bounded(static_cast<std::uint64_t>(
                                     prs - open_prs + 1)))
                               : 0;
        const std::int64_t pr_comments = prs > 0 ? count(0.9, 0.6, 0.15, 0.4) : 0;

        const engage::Timestamp created =
            base + static_cast<engage::Timestamp>(rng.bounded(86400LL * 365));
        engage::Timestamp last_commit = created + lifespan_days * 86400;
        if (active) last_commit = *engage::parse_timestamp("2020-05-25T00:00:00Z");
        engage::Timestamp last_release = created + (lifespan_days * 86400 * 9) / 10;

        out << "owner" << idx << ",repo" << idx << "," << engage::format_timestamp(created)
            << "," << engage::format_timestamp(last_commit) << ","
            << (fork ? "true" : "false") << ",MIT," << commits << "," << contributors << ","
            << watchers << "," << stars << "," << forks << "," << issues << "," << open_issues
            << "," << prs << "," << open_prs << "," << merged << "," << resolved << ","
            << comments << "," << pr_comments << "," << branches << "," << releases << ",";
        const bool has_release = with_releases && releases > 0 && rng.uniform() < 0.9;
        if (has_release) out << engage::format_timestamp(last_release);
        out << "\n";
    };

    std::size_t idx = 0;
    for (std::size_t i = 0; i < n_retained; ++i)
        emit(idx++, false, 3 + static_cast<std::int64_t>(rng.bounded(40)), false, false, false);
    // rows removed by each exclusion criterion
    for (int i = 0; i < 8; ++i) emit(idx++, true, 10, false, false, false);    // forks
    for (int i = 0; i < 6; ++i) emit(idx++, false, 2, false, false, false);    // few contributors
    for (int i = 0; i < 5; ++i) emit(idx++, false, 10, true, false, false);    // zero issues
    for (int i = 0; i < 4; ++i) emit(idx++, false, 10, false, true, false);    // zero PRs
    for (int i = 0; i < 3; ++i) emit(idx++, false, 10, false, false, true);    // recently active
    return path;
}

}  // namespace synthetic
