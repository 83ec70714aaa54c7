#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "engage/error.hpp"
#include "engage/stats.hpp"

namespace engage {

struct QuartilePartition {
    double cutpoints[3] = {0, 0, 0};  // day counts, ascending
    std::array<std::vector<std::size_t>, 4> groups;  // Q1..Q4 record indices
    double max_observed = 0;
};

// Quartiles of active lifespan in days; ties at a cutpoint go to the lower
// quartile ([low, high) interval semantics).
inline QuartilePartition partition_lifespan_quartiles(const std::vector<double>& lifespan_days) {
    if (lifespan_days.size() < 8) throw InsufficientData("quartile partition needs n >= 8");
    QuartilePartition part;
    std::vector<double> sorted = lifespan_days;
    std::sort(sorted.begin(), sorted.end());
    auto interp = [&](double q) {
        const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
        const std::size_t lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = static_cast<std::size_t>(std::ceil(h));
        return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
    };
    part.cutpoints[0] = interp(0.25);
    part.cutpoints[1] = interp(0.50);
    part.cutpoints[2] = interp(0.75);
    part.max_observed = sorted.back();
    if (!(part.cutpoints[0] < part.cutpoints[1] && part.cutpoints[1] < part.cutpoints[2]))
        throw DegeneratePartition{};
    for (std::size_t i = 0; i < lifespan_days.size(); ++i) {
        const double d = lifespan_days[i];
        int q = 3;
        if (d <= part.cutpoints[0])
            q = 0;
        else if (d <= part.cutpoints[1])
            q = 1;
        else if (d <= part.cutpoints[2])
            q = 2;
        part.groups[static_cast<std::size_t>(q)].push_back(i);
    }
    return part;
}

struct QuartileSummary {
    std::array<DescriptiveStats, 4> per_quartile;
};

inline QuartileSummary quartile_summary(const std::vector<double>& metric,
                                        const QuartilePartition& part) {
    QuartileSummary s;
    for (std::size_t q = 0; q < 4; ++q) {
        if (part.groups[q].empty()) throw EmptyGroup{};
        std::vector<double> values;
        values.reserve(part.groups[q].size());
        for (std::size_t i : part.groups[q]) values.push_back(metric[i]);
        s.per_quartile[q] = descriptive_stats(values);
    }
    return s;
}

struct PairwiseCell {
    std::string metric;
    int group_a = 0, group_b = 0;  // 0-based quartile labels
    GroupComparisonResult result;
    bool significant = false;
};

struct PairwiseComparisonTable {
    std::vector<PairwiseCell> cells;
    double alpha = 0.05;
    double corrected_alpha = 0;
    std::size_t test_count = 0;
};

// All 6 quartile pairs for each metric: Mann-Whitney U, p, Cliff's delta,
// Bonferroni-corrected significance. A fixed corrected alpha (e.g. 0.00104)
// may be passed to override the computed alpha / test-count divisor.
inline PairwiseComparisonTable compare_groups(
    const std::map<std::string, std::vector<double>>& metrics, const QuartilePartition& part,
    double alpha = 0.05, double corrected_alpha_override = 0.0) {
    PairwiseComparisonTable table;
    table.alpha = alpha;
    table.test_count = metrics.size() * 6;
    table.corrected_alpha = corrected_alpha_override > 0
                                ? corrected_alpha_override
                                : alpha / static_cast<double>(table.test_count);
    for (const auto& [name, values] : metrics) {
        std::array<std::vector<double>, 4> grouped;
        for (std::size_t q = 0; q < 4; ++q) {
            if (part.groups[q].empty()) throw EmptyGroup{};
            for (std::size_t i : part.groups[q]) grouped[q].push_back(values[i]);
        }
        for (int a = 0; a < 4; ++a) {
            for (int b = a + 1; b < 4; ++b) {
                PairwiseCell cell;
                cell.metric = name;
                cell.group_a = a;
                cell.group_b = b;
                cell.result = compare_two_groups(grouped[static_cast<std::size_t>(a)],
                                                grouped[static_cast<std::size_t>(b)]);
                cell.significant = cell.result.p_value < table.corrected_alpha;
                table.cells.push_back(std::move(cell));
            }
        }
    }
    return table;
}

}  // namespace engage
