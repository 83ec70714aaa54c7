#include <cstdlib>
#include <fstream>

#include <catch2/catch_amalgamated.hpp>

#include "engage/ingest.hpp"

using namespace engage;

namespace {

std::string fixture(const std::string& name) {
    const char* dir = std::getenv("ENGAGE_FIXTURES");
    REQUIRE(dir != nullptr);
    return std::string(dir) + "/" + name;
}

std::string write_temp(const std::string& name, const std::string& content) {
    const std::string path = "/tmp/engage_test_" + name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path;
}

nlohmann::json page_of(std::size_t count) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < count; ++i) arr.push_back({{"id", i}});
    return arr;
}

}  // namespace

TEST_CASE("csv parser handles quoting") {
    const auto rows = detail::parse_csv("a,b,c\n1,\"x,y\",\"he said \"\"hi\"\"\"\n2,,3\n");
    REQUIRE(rows.size() == 3);
    REQUIRE(rows[1][1] == "x,y");
    REQUIRE(rows[1][2] == "he said \"hi\"");
    REQUIRE(rows[2][1] == "");
}

TEST_CASE("csv parser handles embedded newlines and crlf") {
    const auto rows = detail::parse_csv("a,b\r\n\"line1\nline2\",2\r\n");
    REQUIRE(rows.size() == 2);
    REQUIRE(rows[1][0] == "line1\nline2");
}

TEST_CASE("dataset loads with one rejected row") {
    const auto [records, report] = load_dataset(fixture("repos_small.csv"));
    REQUIRE(report.rows_read == 10);
    REQUIRE(report.rejections.size() == 1);
    REQUIRE(report.rejections[0].row_number == 4);
    REQUIRE(report.rejections[0].reason.find("not-a-date") != std::string::npos);
    REQUIRE(records.size() == 9);

    const auto& first = records[0];
    REQUIRE(first.owner == "acme");
    REQUIRE(first.name == "widget");
    REQUIRE(first.commits == 1000);
    REQUIRE(first.license_id == "MIT");
    REQUIRE(first.last_release.has_value());
    REQUIRE(records[1].name == "gadget, deluxe");
    REQUIRE(records[2].is_fork);
    REQUIRE_FALSE(records[2].last_release.has_value());
}

TEST_CASE("column mapping renames headers") {
    const auto path = write_temp(
        "mapped.csv",
        "creation,last_commit,is_fork,commits,contributors,watchers,stargazers,forks,"
        "total_issues,open_issues,total_pull_requests,open_pull_requests,"
        "merged_pull_requests,resolved_issues,issue_comments,pr_comments,branches,releases\n"
        "2015-01-01,2016-01-01,false,10,3,1,2,3,4,1,5,1,3,2,6,2,1,1\n");
    ColumnMapping mapping;
    mapping.mapping["created_at"] = "creation";
    const auto [records, report] = load_dataset(path, mapping);
    REQUIRE(records.size() == 1);
    REQUIRE(report.rejections.empty());
    REQUIRE_THROWS_AS(load_dataset(path), MissingColumn);
}

TEST_CASE("empty and missing datasets are rejected") {
    REQUIRE_THROWS_AS(load_dataset("/nonexistent/file.csv"), IoFailure);
    const auto path = write_temp("empty.csv", "");
    REQUIRE_THROWS_AS(load_dataset(path), EmptyFile);
}

TEST_CASE("bad counts and booleans reject the row, not the file") {
    const auto path = write_temp(
        "badrow.csv",
        "created_at,last_commit,is_fork,commits,contributors,watchers,stargazers,forks,"
        "total_issues,open_issues,total_pull_requests,open_pull_requests,"
        "merged_pull_requests,resolved_issues,issue_comments,pr_comments,branches,releases\n"
        "2015-01-01,2016-01-01,maybe,10,3,1,2,3,4,1,5,1,3,2,6,2,1,1\n"
        "2015-01-01,2016-01-01,true,-7,3,1,2,3,4,1,5,1,3,2,6,2,1,1\n"
        "2015-01-01,2016-01-01,true,10,3,1,2,3,4,1,5,1,3,2,6,2,1,1\n");
    const auto [records, report] = load_dataset(path);
    REQUIRE(records.size() == 1);
    REQUIRE(report.rejections.size() == 2);
}

TEST_CASE("client assembles a record from the cassette") {
    auto transport = ReplayTransport::from_cassette(fixture("cassette_repo.json"));
    ApiSession session;
    session.token = "testtoken";
    GithubClient client(transport, session);
    const auto rec = client.fetch_repository("acme", "widget");
    REQUIRE(rec.owner == "acme");
    REQUIRE_FALSE(rec.is_fork);
    REQUIRE(rec.license_id == "MIT");
    REQUIRE(rec.stargazers == 300);
    REQUIRE(rec.watchers == 40);
    REQUIRE(rec.forks == 25);
    REQUIRE(rec.contributors == 3);
    REQUIRE(rec.branches == 2);
    REQUIRE(rec.releases == 2);
    REQUIRE(rec.last_release == parse_timestamp("2019-06-01T00:00:00Z"));
    REQUIRE(rec.commits == 5);
    REQUIRE(rec.total_issues == 3);  // PR item in /issues is excluded
    REQUIRE(rec.open_issues == 1);
    REQUIRE(rec.resolved_issues == 2);
    REQUIRE(rec.total_pull_requests == 2);
    REQUIRE(rec.open_pull_requests == 1);
    REQUIRE(rec.merged_pull_requests == 1);
    REQUIRE(session.remaining_budget == 4999);
    REQUIRE(session.max_in_flight_observed == 1);
    REQUIRE(session.in_flight == 0);
}

TEST_CASE("comment counts sum across pages") {
    ReplayTransport transport;
    transport.add_json("/repos/o/r/issues/comments?per_page=100&page=1", 200, page_of(100));
    transport.add_json("/repos/o/r/issues/comments?per_page=100&page=2", 200, page_of(100));
    transport.add_json("/repos/o/r/issues/comments?per_page=100&page=3", 200, page_of(37));
    transport.add_json("/repos/o/r/pulls/comments?per_page=100&page=1", 200, page_of(12));
    ApiSession session;
    GithubClient client(transport, session);
    const auto [issue_comments, pr_comments] = client.fetch_comment_counts("o", "r");
    REQUIRE(issue_comments == 237);
    REQUIRE(pr_comments == 12);
    REQUIRE(transport.request_count() == 4);
}

TEST_CASE("comment counting is atomic on failure") {
    ReplayTransport transport;
    transport.add_json("/repos/o/r/issues/comments?per_page=100&page=1", 200, page_of(100));
    transport.add_json("/repos/o/r/issues/comments?per_page=100&page=2", 500,
                       nlohmann::json::object());
    ApiSession session;
    GithubClient client(transport, session);
    REQUIRE_THROWS_AS(client.fetch_comment_counts("o", "r"), NetworkFailure);
}

TEST_CASE("missing repositories raise NotFound") {
    ReplayTransport transport;
    transport.add_json("/repos/o/gone", 404, {{"message", "Not Found"}});
    ApiSession session;
    GithubClient client(transport, session);
    REQUIRE_THROWS_AS(client.fetch_repository("o", "gone"), NotFound);
}

TEST_CASE("transport failures are retried five times then raised") {
    ReplayTransport transport;
    HttpResponse dead;  // status 0
    for (int i = 0; i < 5; ++i) transport.add("/repos/o/r", dead);
    ApiSession session;
    GithubClient client(transport, session);
    REQUIRE_THROWS_AS(client.fetch_repository("o", "r"), NetworkFailure);
    REQUIRE(transport.request_count() == 5);
}

TEST_CASE("a transient failure recovers on retry") {
    ReplayTransport transport;
    HttpResponse dead;
    transport.add("/repos/o/r/pulls/comments?per_page=100&page=1", dead);
    transport.add_json("/repos/o/r/pulls/comments?per_page=100&page=1", 200, page_of(2));
    transport.add_json("/repos/o/r/issues/comments?per_page=100&page=1", 200, page_of(1));
    ApiSession session;
    GithubClient client(transport, session);
    const auto [ic, pc] = client.fetch_comment_counts("o", "r");
    REQUIRE(ic == 1);
    REQUIRE(pc == 2);
}

TEST_CASE("an exhausted budget raises RateLimited before the request") {
    ReplayTransport transport;
    transport.add_json("/repos/o/r", 200, nlohmann::json::object());
    ApiSession session;
    session.remaining_budget = 0;
    session.reset_at = 1000;
    GithubClient client(transport, session, [] { return Timestamp{500}; });
    REQUIRE_THROWS_AS(client.fetch_repository("o", "r"), RateLimited);
    REQUIRE(transport.request_count() == 0);
}

TEST_CASE("a 403 with zero remaining budget maps to RateLimited") {
    ReplayTransport transport;
    transport.add_json("/repos/o/r", 403, nlohmann::json::object(),
                       {{"X-RateLimit-Remaining", "0"}, {"X-RateLimit-Reset", "1700000000"}});
    ApiSession session;
    GithubClient client(transport, session);
    try {
        client.fetch_repository("o", "r");
        FAIL("expected RateLimited");
    } catch (const RateLimited& e) {
        REQUIRE(e.reset_at == 1700000000);
    }
}

TEST_CASE("a 403 with budget left maps to Forbidden") {
    ReplayTransport transport;
    transport.add_json("/repos/o/r", 403, nlohmann::json::object(),
                       {{"X-RateLimit-Remaining", "10"}});
    ApiSession session;
    GithubClient client(transport, session);
    REQUIRE_THROWS_AS(client.fetch_repository("o", "r"), Forbidden);
}
