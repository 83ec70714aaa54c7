#pragma once

// Real HTTPS transport for the GitHub REST API, built on cpp-httplib. Kept
// out of ingest.hpp so the test suite never pulls in OpenSSL.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <string>

#include "engage/ingest.hpp"

namespace engage {

class HttpTransport : public Transport {
public:
    explicit HttpTransport(const std::string& host = "https://api.github.com")
        : client_(host) {
        client_.set_connection_timeout(10);
        client_.set_read_timeout(30);
        client_.set_follow_location(true);
    }

    HttpResponse get(const std::string& path_and_query,
                     const std::map<std::string, std::string>& headers) override {
        httplib::Headers h;
        for (const auto& [k, v] : headers) h.emplace(k, v);
        auto result = client_.Get(path_and_query, h);
        HttpResponse out;
        if (!result) return out;  // status 0 = transport failure
        out.status = result->status;
        for (const auto& [k, v] : result->headers) out.headers[k] = v;
        out.body = result->body;
        return out;
    }

private:
    httplib::Client client_;
};

}  // namespace engage
