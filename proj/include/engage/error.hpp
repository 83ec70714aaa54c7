#pragma once

#include <stdexcept>
#include <string>

namespace engage {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ZeroLifespan : Error {
    ZeroLifespan() : Error("active lifespan is zero days") {}
};

struct InvalidOrder : Error {
    InvalidOrder() : Error("last_commit precedes created_at") {}
};

struct ZeroTotal : Error {
    ZeroTotal() : Error("ratio denominator is zero") {}
};

struct EmptySample : Error {
    EmptySample() : Error("empty sample") {}
};

struct LengthMismatch : Error {
    LengthMismatch() : Error("input vectors differ in length") {}
};

struct DegenerateInput : Error {
    explicit DegenerateInput(const std::string& what) : Error("degenerate input: " + what) {}
};

struct InsufficientData : Error {
    explicit InsufficientData(const std::string& what) : Error("insufficient data: " + what) {}
};

struct SingularMatrix : Error {
    SingularMatrix() : Error("matrix is singular or ill-conditioned") {}
};

struct ZeroVariance : Error {
    explicit ZeroVariance(const std::string& column) : Error("zero-variance column: " + column) {}
};

struct TooFewRows : Error {
    TooFewRows() : Error("too few rows for requested model") {}
};

struct RankDeficient : Error {
    RankDeficient() : Error("design matrix is rank deficient") {}
};

struct NonPositiveValue : Error {
    NonPositiveValue() : Error("log transform requires strictly positive values") {}
};

struct DegeneratePartition : Error {
    DegeneratePartition() : Error("quartile cutpoints are not distinct") {}
};

struct EmptyGroup : Error {
    EmptyGroup() : Error("comparison group is empty") {}
};

struct EverythingRemoved : Error {
    EverythingRemoved() : Error("attribute selection removed too many attributes") {}
};

struct NonConvergence : Error {
    explicit NonConvergence(const std::string& what) : Error("failed to converge: " + what) {}
};

struct NoReleases : Error {
    NoReleases() : Error("no record has a release; age analysis undefined") {}
};

struct MissingColumn : Error {
    explicit MissingColumn(const std::string& name) : Error("missing required column: " + name) {}
};

struct EmptyFile : Error {
    explicit EmptyFile(const std::string& path) : Error("empty input file: " + path) {}
};

struct ParseFailure : Error {
    explicit ParseFailure(const std::string& what) : Error("parse failure: " + what) {}
};

struct IoFailure : Error {
    explicit IoFailure(const std::string& what) : Error("i/o failure: " + what) {}
};

struct StageFailure : Error {
    StageFailure(const std::string& stage, const std::string& cause)
        : Error("pipeline stage '" + stage + "' failed: " + cause), stage_name(stage) {}
    std::string stage_name;
};

// HTTP-layer errors for the GitHub client.
struct NotFound : Error {
    explicit NotFound(const std::string& what) : Error("not found: " + what) {}
};

struct RateLimited : Error {
    RateLimited(long long reset_at_epoch)
        : Error("rate limit exhausted"), reset_at(reset_at_epoch) {}
    long long reset_at;
};

struct Forbidden : Error {
    explicit Forbidden(const std::string& what) : Error("forbidden: " + what) {}
};

struct NetworkFailure : Error {
    explicit NetworkFailure(const std::string& what) : Error("network failure: " + what) {}
};

}  // namespace engage
