#pragma once
// Shared plumbing for the three service binaries: binary-or-JSON message
// envelopes, bearer auth, error bodies, config loading, and startup chores.
//
// Protocol messages travel either as raw octet streams or as {"msg": "<hex>"}
// JSON bodies; the reply mirrors whichever form the caller used.

#include <sys/random.h>

#include <cstdint>
#include <fstream>
#include <httplib.h>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "elpasso/hex.hpp"

namespace elpasso::svc {

inline std::optional<std::vector<uint8_t>> read_envelope(const httplib::Request& req) {
  auto ct = req.get_header_value("Content-Type");
  bool looks_json = ct.find("json") != std::string::npos ||
                    (ct.empty() && !req.body.empty() && req.body.front() == '{');
  if (!looks_json)
    return std::vector<uint8_t>(req.body.begin(), req.body.end());
  auto j = nlohmann::json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.contains("msg") || !j["msg"].is_string()) return std::nullopt;
  return from_hex(j["msg"].get<std::string>());
}

inline bool caller_wants_json(const httplib::Request& req) {
  auto ct = req.get_header_value("Content-Type");
  auto accept = req.get_header_value("Accept");
  return ct.find("json") != std::string::npos || accept.find("json") != std::string::npos;
}

inline void send_envelope(const httplib::Request& req, httplib::Response& res,
                          const std::vector<uint8_t>& bytes) {
  if (caller_wants_json(req)) {
    nlohmann::json j{{"msg", to_hex(bytes)}};
    res.set_content(j.dump(), "application/json");
  } else {
    res.set_content(std::string(bytes.begin(), bytes.end()), "application/octet-stream");
  }
}

inline std::optional<std::string> bearer_token(const httplib::Request& req) {
  auto h = req.get_header_value("Authorization");
  const std::string prefix = "Bearer ";
  if (h.size() <= prefix.size() || h.compare(0, prefix.size(), prefix) != 0) return std::nullopt;
  return h.substr(prefix.size());
}

inline void send_error(httplib::Response& res, int status, const std::string& error,
                       const std::string& message = "") {
  res.status = status;
  nlohmann::json j{{"error", error}};
  if (!message.empty()) j["message"] = message;
  res.set_content(j.dump(), "application/json");
}

inline std::string random_hex(size_t bytes) {
  std::vector<uint8_t> buf(bytes);
  size_t off = 0;
  while (off < buf.size()) {
    ssize_t n = ::getrandom(buf.data() + off, buf.size() - off, 0);
    if (n < 0) throw std::runtime_error("getrandom failed");
    off += size_t(n);
  }
  return to_hex(buf);
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw std::runtime_error("invalid JSON in " + path);
  return j;
}

// Announce the bound port: one stdout line for humans, optional file for
// scripts that started us with port 0.
inline void announce_port(int port, const std::string& port_file) {
  if (!port_file.empty()) {
    std::ofstream out(port_file, std::ios::trunc);
    out << port << "\n";
  }
  printf("listening on %d\n", port);
  fflush(stdout);
}

// bind (picking a free port when port is 0), announce, then serve until killed
inline int run_server(httplib::Server& svr, const std::string& listen, int port,
                      const std::string& port_file) {
  int bound = port;
  if (port == 0) {
    bound = svr.bind_to_any_port(listen.c_str());
    if (bound < 0) {
      fprintf(stderr, "cannot bind to %s\n", listen.c_str());
      return 1;
    }
  } else if (!svr.bind_to_port(listen.c_str(), port)) {
    fprintf(stderr, "cannot bind to %s:%d\n", listen.c_str(), port);
    return 1;
  }
  announce_port(bound, port_file);
  return svr.listen_after_bind() ? 0 : 1;
}

}  // namespace elpasso::svc
