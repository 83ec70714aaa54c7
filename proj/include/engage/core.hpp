#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "engage/error.hpp"
#include "engage/time.hpp"

namespace engage {

constexpr double kDaysPerMonth = 30.44;

// Six-month recency window for the activity filter, in calendar days.
constexpr std::int64_t kRecencyWindowDays = 183;

struct RepositoryRecord {
    std::string owner;
    std::string name;
    Timestamp created_at = 0;
    Timestamp last_commit = 0;
    bool is_fork = false;
    std::string license_id;
    std::int64_t commits = 0;
    std::int64_t contributors = 0;
    std::int64_t watchers = 0;
    std::int64_t stargazers = 0;
    std::int64_t forks = 0;
    std::int64_t total_issues = 0;
    std::int64_t open_issues = 0;
    std::int64_t total_pull_requests = 0;
    std::int64_t open_pull_requests = 0;
    std::int64_t merged_pull_requests = 0;
    std::int64_t resolved_issues = 0;
    std::int64_t issue_comments = 0;
    std::int64_t pr_comments = 0;
    std::int64_t branches = 0;
    std::int64_t releases = 0;
    std::optional<Timestamp> last_release;

    std::string full_name() const { return owner + "/" + name; }
};

struct ActiveLifespan {
    std::int64_t days = 0;
    double months = 0.0;
};

// Whole calendar days between the two instants, truncating partial days.
inline ActiveLifespan compute_active_lifespan(Timestamp created_at, Timestamp last_commit) {
    if (last_commit < created_at) throw InvalidOrder{};
    const std::int64_t days = (last_commit - created_at) / kSecondsPerDay;
    if (days == 0) throw ZeroLifespan{};
    return {days, static_cast<double>(days) / kDaysPerMonth};
}

inline double normalize_per_month(double raw_count, const ActiveLifespan& lifespan) {
    if (lifespan.days <= 0) throw ZeroLifespan{};
    return raw_count / lifespan.months;
}

inline double compute_ratio(std::int64_t successes, std::int64_t total) {
    if (total == 0) throw ZeroTotal{};
    return static_cast<double>(successes) / static_cast<double>(total);
}

// The 13 per-month rates plus the two bounded ratios for one repository.
struct MetricVector {
    double cpm = 0;    // commits
    double wt_m = 0;   // watchers
    double cnt_m = 0;  // contributors
    double ti_m = 0;   // total issues
    double oi_m = 0;   // open issues
    double tpr_m = 0;  // total pull requests
    double opr_m = 0;  // open pull requests
    double ic_m = 0;   // issue comments
    double prc_m = 0;  // pull request comments
    double fk_m = 0;   // forks
    double str_m = 0;  // stargazers
    double bpm = 0;    // branches
    double rpm = 0;    // releases
    double prar = 0;   // merged PRs / total PRs
    double irr = 0;    // resolved issues / total issues
};

// Canonical metric name order, matching the report tables.
inline const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names = {
        "CPM", "WT/m", "CNT/m", "TI/m", "OI/m", "TPR/m", "OPR/m",
        "IC/m", "PRC/m", "PRAR", "IRR", "FK/m", "STR/m", "BPM", "RPM"};
    return names;
}

inline double metric_value(const MetricVector& m, const std::string& name) {
    if (name == "CPM") return m.cpm;
    if (name == "WT/m") return m.wt_m;
    if (name == "CNT/m") return m.cnt_m;
    if (name == "TI/m") return m.ti_m;
    if (name == "OI/m") return m.oi_m;
    if (name == "TPR/m") return m.tpr_m;
    if (name == "OPR/m") return m.opr_m;
    if (name == "IC/m") return m.ic_m;
    if (name == "PRC/m") return m.prc_m;
    if (name == "PRAR") return m.prar;
    if (name == "IRR") return m.irr;
    if (name == "FK/m") return m.fk_m;
    if (name == "STR/m") return m.str_m;
    if (name == "BPM") return m.bpm;
    if (name == "RPM") return m.rpm;
    throw Error("unknown metric: " + name);
}

inline MetricVector compute_metrics(const RepositoryRecord& r, const ActiveLifespan& life) {
    MetricVector m;
    m.cpm = normalize_per_month(static_cast<double>(r.commits), life);
    m.wt_m = normalize_per_month(static_cast<double>(r.watchers), life);
    m.cnt_m = normalize_per_month(static_cast<double>(r.contributors), life);
    m.ti_m = normalize_per_month(static_cast<double>(r.total_issues), life);
    m.oi_m = normalize_per_month(static_cast<double>(r.open_issues), life);
    m.tpr_m = normalize_per_month(static_cast<double>(r.total_pull_requests), life);
    m.opr_m = normalize_per_month(static_cast<double>(r.open_pull_requests), life);
    m.ic_m = normalize_per_month(static_cast<double>(r.issue_comments), life);
    m.prc_m = normalize_per_month(static_cast<double>(r.pr_comments), life);
    m.fk_m = normalize_per_month(static_cast<double>(r.forks), life);
    m.str_m = normalize_per_month(static_cast<double>(r.stargazers), life);
    m.bpm = normalize_per_month(static_cast<double>(r.branches), life);
    m.rpm = normalize_per_month(static_cast<double>(r.releases), life);
    m.prar = compute_ratio(r.merged_pull_requests, r.total_pull_requests);
    m.irr = compute_ratio(r.resolved_issues, r.total_issues);
    return m;
}

struct FilterReport {
    std::size_t input_count = 0;
    // criterion -> number of records matching it; criteria may overlap
    std::map<std::string, std::size_t> per_criterion_counts;
    std::size_t retained_count = 0;
};

namespace filter_criteria {
inline constexpr const char* kActive = "commits_within_six_months";
inline constexpr const char* kFork = "is_fork";
inline constexpr const char* kFewContributors = "fewer_than_three_contributors";
inline constexpr const char* kZeroIssues = "zero_total_issues";
inline constexpr const char* kZeroPullRequests = "zero_total_pull_requests";
inline constexpr const char* kZeroLifespan = "zero_day_lifespan";
inline constexpr const char* kInvalidTimestamps = "last_commit_before_creation";
}  // namespace filter_criteria

inline std::pair<std::vector<RepositoryRecord>, FilterReport>
apply_exclusion_filters(const std::vector<RepositoryRecord>& records, Timestamp reference_date) {
    FilterReport report;
    report.input_count = records.size();
    auto& counts = report.per_criterion_counts;
    counts[filter_criteria::kActive] = 0;
    counts[filter_criteria::kFork] = 0;
    counts[filter_criteria::kFewContributors] = 0;
    counts[filter_criteria::kZeroIssues] = 0;
    counts[filter_criteria::kZeroPullRequests] = 0;
    counts[filter_criteria::kZeroLifespan] = 0;
    counts[filter_criteria::kInvalidTimestamps] = 0;

    const Timestamp recency_cutoff = reference_date - kRecencyWindowDays * kSecondsPerDay;
    std::vector<RepositoryRecord> retained;
    retained.reserve(records.size());
    for (const auto& r : records) {
        bool excluded = false;
        if (r.last_commit > recency_cutoff) {
            ++counts[filter_criteria::kActive];
            excluded = true;
        }
        if (r.is_fork) {
            ++counts[filter_criteria::kFork];
            excluded = true;
        }
        if (r.contributors < 3) {
            ++counts[filter_criteria::kFewContributors];
            excluded = true;
        }
        if (r.total_issues == 0) {
            ++counts[filter_criteria::kZeroIssues];
            excluded = true;
        }
        if (r.total_pull_requests == 0) {
            ++counts[filter_criteria::kZeroPullRequests];
            excluded = true;
        }
        if (r.last_commit < r.created_at) {
            ++counts[filter_criteria::kInvalidTimestamps];
            excluded = true;
        } else if ((r.last_commit - r.created_at) / kSecondsPerDay == 0) {
            ++counts[filter_criteria::kZeroLifespan];
            excluded = true;
        }
        if (!excluded) retained.push_back(r);
    }
    report.retained_count = retained.size();
    return {std::move(retained), report};
}

}  // namespace engage
