#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "engage/core.hpp"
#include "engage/error.hpp"
#include "engage/time.hpp"

namespace engage {

// ---------------------------------------------------------------------------
// CSV dataset loading
// ---------------------------------------------------------------------------

// Canonical column name -> actual header name in the file. Unmapped canonical
// names are looked up verbatim.
struct ColumnMapping {
    std::map<std::string, std::string> mapping;

    std::string resolve(const std::string& canonical) const {
        const auto it = mapping.find(canonical);
        return it == mapping.end() ? canonical : it->second;
    }

    static ColumnMapping from_json_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoFailure("cannot open mapping file: " + path);
        nlohmann::json j;
        in >> j;
        ColumnMapping m;
        for (auto& [k, v] : j.items()) m.mapping[k] = v.get<std::string>();
        return m;
    }
};

struct RowRejection {
    std::size_t row_number = 0;  // 1-based, excluding the header
    std::string reason;
};

struct ParseReport {
    std::size_t rows_read = 0;
    std::vector<RowRejection> rejections;
};

namespace detail {

// RFC-4180 style CSV: quoted fields, embedded commas/newlines, "" escapes.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                field_started = true;
                break;
            case '\r':
                break;
            case '\n':
                if (!row.empty() || !field.empty() || field_started) {
                    row.push_back(std::move(field));
                    field.clear();
                    rows.push_back(std::move(row));
                    row.clear();
                }
                field_started = false;
                break;
            default:
                field += c;
        }
    }
    if (!row.empty() || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::int64_t parse_count(const std::string& s, const std::string& column) {
    if (s.empty()) throw ParseFailure("empty count in column " + column);
    std::size_t pos = 0;
    long long v;
    try {
        v = std::stoll(s, &pos);
    } catch (const std::exception&) {
        throw ParseFailure("invalid count '" + s + "' in column " + column);
    }
    if (pos != s.size()) throw ParseFailure("invalid count '" + s + "' in column " + column);
    if (v < 0) throw ParseFailure("negative count in column " + column);
    return v;
}

inline bool parse_bool(const std::string& s, const std::string& column) {
    if (s == "true" || s == "True" || s == "TRUE" || s == "1") return true;
    if (s == "false" || s == "False" || s == "FALSE" || s == "0") return false;
    throw ParseFailure("invalid boolean '" + s + "' in column " + column);
}

}  // namespace detail

// Loads the canonical CSV schema (or any schema adapted via `mapping`).
// Malformed rows are reported with their row number, never silently dropped.
inline std::pair<std::vector<RepositoryRecord>, ParseReport>
load_dataset(const std::string& path, const ColumnMapping& mapping = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open dataset: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const auto rows = detail::parse_csv(buf.str());
    if (rows.empty()) throw EmptyFile(path);

    const auto& header = rows.front();
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;

    static const std::vector<std::string> required = {
        "created_at", "last_commit", "is_fork", "commits", "contributors", "watchers",
        "stargazers", "forks", "total_issues", "open_issues", "total_pull_requests",
        "open_pull_requests", "merged_pull_requests", "resolved_issues", "issue_comments",
        "pr_comments", "branches", "releases"};
    static const std::vector<std::string> optional = {"owner", "name", "license",
                                                      "last_release"};
    std::map<std::string, std::size_t> resolved;
    for (const auto& canonical : required) {
        const std::string actual = mapping.resolve(canonical);
        const auto it = col.find(actual);
        if (it == col.end()) throw MissingColumn(actual);
        resolved[canonical] = it->second;
    }
    for (const auto& canonical : optional) {
        const auto it = col.find(mapping.resolve(canonical));
        if (it != col.end()) resolved[canonical] = it->second;
    }

    std::vector<RepositoryRecord> records;
    ParseReport report;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& cells = rows[r];
        ++report.rows_read;
        auto cell = [&](const std::string& canonical) -> const std::string& {
            static const std::string empty;
            const auto it = resolved.find(canonical);
            if (it == resolved.end() || it->second >= cells.size()) return empty;
            return cells[it->second];
        };
        try {
            if (cells.size() < required.size())
                throw ParseFailure("expected at least " + std::to_string(required.size()) +
                                   " fields, got " + std::to_string(cells.size()));
            RepositoryRecord rec;
            rec.owner = cell("owner");
            rec.name = cell("name");
            rec.license_id = cell("license");
            auto created = parse_timestamp(cell("created_at"));
            if (!created) throw ParseFailure("invalid timestamp '" + cell("created_at") + "'");
            auto last = parse_timestamp(cell("last_commit"));
            if (!last) throw ParseFailure("invalid timestamp '" + cell("last_commit") + "'");
            rec.created_at = *created;
            rec.last_commit = *last;
            rec.is_fork = detail::parse_bool(cell("is_fork"), "is_fork");
            rec.commits = detail::parse_count(cell("commits"), "commits");
            rec.contributors = detail::parse_count(cell("contributors"), "contributors");
            rec.watchers = detail::parse_count(cell("watchers"), "watchers");
            rec.stargazers = detail::parse_count(cell("stargazers"), "stargazers");
            rec.forks = detail::parse_count(cell("forks"), "forks");
            rec.total_issues = detail::parse_count(cell("total_issues"), "total_issues");
            rec.open_issues = detail::parse_count(cell("open_issues"), "open_issues");
            rec.total_pull_requests =
                detail::parse_count(cell("total_pull_requests"), "total_pull_requests");
            rec.open_pull_requests =
                detail::parse_count(cell("open_pull_requests"), "open_pull_requests");
            rec.merged_pull_requests =
                detail::parse_count(cell("merged_pull_requests"), "merged_pull_requests");
            rec.resolved_issues = detail::parse_count(cell("resolved_issues"), "resolved_issues");
            rec.issue_comments = detail::parse_count(cell("issue_comments"), "issue_comments");
            rec.pr_comments = detail::parse_count(cell("pr_comments"), "pr_comments");
            rec.branches = detail::parse_count(cell("branches"), "branches");
            rec.releases = detail::parse_count(cell("releases"), "releases");
            if (resolved.count("last_release") && !cell("last_release").empty()) {
                auto lr = parse_timestamp(cell("last_release"));
                if (!lr) throw ParseFailure("invalid timestamp '" + cell("last_release") + "'");
                rec.last_release = *lr;
            }
            records.push_back(std::move(rec));
        } catch (const ParseFailure& e) {
            report.rejections.push_back({r, e.what()});
        }
    }
    return {std::move(records), report};
}

// ---------------------------------------------------------------------------
// GitHub REST client
// ---------------------------------------------------------------------------

struct HttpResponse {
    int status = 0;  // 0 = transport-level failure
    std::map<std::string, std::string> headers;
    std::string body;
};

// Minimal transport seam: the real client and the record/replay test double
// both implement this.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse get(const std::string& path_and_query,
                             const std::map<std::string, std::string>& headers) = 0;
};

struct ApiSession {
    std::string token;
    std::int64_t remaining_budget = 5000;
    Timestamp reset_at = 0;
    std::size_t max_concurrent_requests = 4;

    // bookkeeping, serialized with requests
    std::size_t in_flight = 0;
    std::size_t max_in_flight_observed = 0;
};

// Serves canned responses keyed by path+query. Used for deterministic replay
// of recorded API traffic.
class ReplayTransport : public Transport {
public:
    void add(const std::string& path_and_query, HttpResponse response) {
        responses_[path_and_query].push_back(std::move(response));
        cursor_[path_and_query] = 0;
    }

    void add_json(const std::string& path_and_query, int status, const nlohmann::json& body,
                  std::map<std::string, std::string> headers = {}) {
        HttpResponse r;
        r.status = status;
        r.headers = std::move(headers);
        r.body = body.dump();
        add(path_and_query, std::move(r));
    }

    // Cassette format: [{"path": ..., "status": ..., "headers": {...}, "body": <json>}]
    static ReplayTransport from_cassette(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoFailure("cannot open cassette: " + path);
        nlohmann::json j;
        in >> j;
        ReplayTransport t;
        for (const auto& entry : j) {
            HttpResponse r;
            r.status = entry.at("status").get<int>();
            if (entry.contains("headers"))
                for (auto& [k, v] : entry.at("headers").items()) r.headers[k] = v.get<std::string>();
            r.body = entry.at("body").dump();
            t.add(entry.at("path").get<std::string>(), std::move(r));
        }
        return t;
    }

    HttpResponse get(const std::string& path_and_query,
                     const std::map<std::string, std::string>&) override {
        ++request_count_;
        const auto it = responses_.find(path_and_query);
        if (it == responses_.end()) {
            HttpResponse r;
            r.status = 404;
            r.body = "{\"message\":\"no fixture for " + path_and_query + "\"}";
            return r;
        }
        auto& cursor = cursor_[path_and_query];
        const auto& seq = it->second;
        const HttpResponse& r = seq[std::min(cursor, seq.size() - 1)];
        if (cursor + 1 < seq.size()) ++cursor;
        return r;
    }

    std::size_t request_count() const { return request_count_; }

private:
    std::map<std::string, std::vector<HttpResponse>> responses_;
    std::map<std::string, std::size_t> cursor_;
    std::size_t request_count_ = 0;
};

class GithubClient {
public:
    GithubClient(Transport& transport, ApiSession& session, Timestamp (*clock)() = nullptr)
        : transport_(transport), session_(session), clock_(clock) {}

    RepositoryRecord fetch_repository(const std::string& owner, const std::string& name) {
        const std::string base = "/repos/" + owner + "/" + name;
        const nlohmann::json repo = get_json(base);
        RepositoryRecord rec;
        rec.owner = owner;
        rec.name = name;
        rec.is_fork = repo.value("fork", false);
        if (repo.contains("license") && repo["license"].is_object())
            rec.license_id = repo["license"].value("spdx_id", "");
        auto created = parse_timestamp(repo.value("created_at", ""));
        auto pushed = parse_timestamp(repo.value("pushed_at", ""));
        if (!created || !pushed) throw ParseFailure("repository missing timestamps");
        rec.created_at = *created;
        rec.last_commit = *pushed;
        rec.stargazers = repo.value("stargazers_count", 0LL);
        rec.watchers = repo.value("subscribers_count", 0LL);
        rec.forks = repo.value("forks_count", 0LL);

        rec.contributors = count_paginated(base + "/contributors");
        rec.branches = count_paginated(base + "/branches");
        // releases: count plus the latest published_at
        std::int64_t releases = 0;
        std::optional<Timestamp> last_release;
        for_each_page(base + "/releases", [&](const nlohmann::json& item) {
            ++releases;
            auto ts = parse_timestamp(item.value("published_at", ""));
            if (ts && (!last_release || *ts > *last_release)) last_release = *ts;
        });
        rec.releases = releases;
        rec.last_release = last_release;

        rec.commits = count_paginated(base + "/commits");

        // issues listing includes pull requests; split on the pull_request key
        for_each_page(base + "/issues?state=all", [&](const nlohmann::json& item) {
            const bool is_pr = item.contains("pull_request");
            const std::string state = item.value("state", "open");
            if (is_pr) return;  // counted via /pulls
            ++rec.total_issues;
            if (state == "open")
                ++rec.open_issues;
            else
                ++rec.resolved_issues;  // closed issues count as resolved
        });
        for_each_page(base + "/pulls?state=all", [&](const nlohmann::json& item) {
            ++rec.total_pull_requests;
            const std::string state = item.value("state", "open");
            if (state == "open") {
                ++rec.open_pull_requests;
            } else if (!item.value("merged_at", nlohmann::json()).is_null() &&
                       item.contains("merged_at")) {
                ++rec.merged_pull_requests;
            }
        });
        return rec;
    }

    // Sums comments across all pages of the issue-comments and
    // PR-review-comments endpoints. Throws before returning any partial
    // result if a page fetch fails.
    std::pair<std::int64_t, std::int64_t> fetch_comment_counts(const std::string& owner,
                                                               const std::string& name) {
        const std::string base = "/repos/" + owner + "/" + name;
        const std::int64_t issue_comments = count_paginated(base + "/issues/comments");
        const std::int64_t pr_comments = count_paginated(base + "/pulls/comments");
        return {issue_comments, pr_comments};
    }

private:
    Timestamp now() const { return clock_ ? clock_() : 0; }

    HttpResponse request(const std::string& path_and_query) {
        if (session_.remaining_budget == 0 && now() < session_.reset_at)
            throw RateLimited(session_.reset_at);
        std::map<std::string, std::string> headers;
        headers["Accept"] = "application/vnd.github+json";
        if (!session_.token.empty()) headers["Authorization"] = "Bearer " + session_.token;

        HttpResponse resp;
        int attempts = 0;
        for (;;) {
            ++session_.in_flight;
            session_.max_in_flight_observed =
                std::max(session_.max_in_flight_observed, session_.in_flight);
            resp = transport_.get(path_and_query, headers);
            --session_.in_flight;
            if (resp.status != 0) break;
            if (++attempts >= 5) throw NetworkFailure(path_and_query);
        }

        if (const auto it = resp.headers.find("X-RateLimit-Remaining"); it != resp.headers.end())
            session_.remaining_budget = std::stoll(it->second);
        if (const auto it = resp.headers.find("X-RateLimit-Reset"); it != resp.headers.end())
            session_.reset_at = std::stoll(it->second);

        if (resp.status == 404) throw NotFound(path_and_query);
        if (resp.status == 403 || resp.status == 429) {
            if (session_.remaining_budget == 0) throw RateLimited(session_.reset_at);
            throw Forbidden(path_and_query);
        }
        if (resp.status < 200 || resp.status >= 300)
            throw NetworkFailure(path_and_query + " -> status " + std::to_string(resp.status));
        return resp;
    }

    nlohmann::json get_json(const std::string& path_and_query) {
        const HttpResponse resp = request(path_and_query);
        try {
            return nlohmann::json::parse(resp.body);
        } catch (const nlohmann::json::exception& e) {
            throw ParseFailure(std::string("bad JSON from ") + path_and_query + ": " + e.what());
        }
    }

    template <typename Fn>
    void for_each_page(const std::string& path, Fn&& fn) {
        const char join = path.find('?') == std::string::npos ? '?' : '&';
        for (int page = 1;; ++page) {
            const std::string url =
                path + join + "per_page=100&page=" + std::to_string(page);
            const nlohmann::json items = get_json(url);
            if (!items.is_array()) throw ParseFailure("expected array from " + path);
            for (const auto& item : items) fn(item);
            if (items.size() < 100) break;
        }
    }

    std::int64_t count_paginated(const std::string& path) {
        std::int64_t count = 0;
        for_each_page(path, [&](const nlohmann::json&) { ++count; });
        return count;
    }

    Transport& transport_;
    ApiSession& session_;
    Timestamp (*clock_)();
};

}  // namespace engage
