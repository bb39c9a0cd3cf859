#pragma once

#include <chrono>
#include <string>
#include <string_view>

#include <httplib.h>

#include "autosec/error.hpp"

namespace autosec::sources {

enum class FetchErrc { NetworkError, HttpStatus, Timeout };

class FetchError : public ErrorOf<FetchErrc> {
 public:
  FetchError(FetchErrc code, std::string message, int status = 0) : ErrorOf(code, std::move(message)), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

// Blocking HTTP(S) GET of a threat library. Returns the full body or throws;
// a truncated transfer is reported as NetworkError, never returned.
inline std::string fetch_threats(std::string_view url, std::chrono::milliseconds timeout = std::chrono::seconds(10)) {
  const std::string u(url);
  const bool https = u.rfind("https://", 0) == 0;
  if (!https && u.rfind("http://", 0) != 0) {
    throw FetchError(FetchErrc::NetworkError, "unsupported URL scheme in '" + u + "'");
  }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (https) throw FetchError(FetchErrc::NetworkError, "https is not available in this build");
#endif
  const auto host_start = u.find("://") + 3;
  const auto path_start = u.find('/', host_start);
  const std::string origin = u.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : u.substr(path_start);
  if (origin.size() == host_start) throw FetchError(FetchErrc::NetworkError, "missing host in '" + u + "'");

  httplib::Client client(origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  const auto started = std::chrono::steady_clock::now();
  auto res = client.Get(path, httplib::Headers{{"Accept", "application/json"}});
  if (!res) {
    const auto err = res.error();
    const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                           ((err == httplib::Error::Read || err == httplib::Error::Connection) &&
                            std::chrono::steady_clock::now() - started >= timeout);
    if (timed_out) throw FetchError(FetchErrc::Timeout, "request to '" + u + "' timed out");
    throw FetchError(FetchErrc::NetworkError, "request to '" + u + "' failed: " + httplib::to_string(err));
  }
  if (res->status != 200) {
    throw FetchError(FetchErrc::HttpStatus, "HTTP " + std::to_string(res->status) + " from '" + u + "'", res->status);
  }
  return res->body;
}

}  // namespace autosec::sources
