// elpasso-idp: the identity provider.
//
// Issues blinded credentials over authenticated sessions, relays device
// enrollment ciphertexts it cannot open, and answers authority lookups that
// map a recovered identity handle back to a login.  The provider never sees
// a user's long-term secret and never reveals gamma or its signing key in
// any response: gamma only leaves masked under the caller's session key.
//
// State is two JSONL files under data_dir: users.jsonl (replayed at startup,
// one full user snapshot per mutation, last write wins) and audit.jsonl
// (append-only trail, never replayed).  The signing key lives in
// data_dir/idp-key.bin, generated on first start.

#include <sys/stat.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <mutex>

#include "common/http_util.hpp"
#include "common/jsonl_store.hpp"
#include "elpasso/protocol.hpp"

namespace {

using namespace elpasso;
namespace svc = elpasso::svc;
namespace proto = elpasso::protocol;
using nlohmann::json;

struct Config {
  std::string idp_id = "idp";
  std::string listen = "127.0.0.1";
  int port = 0;
  std::string data_dir;
  uint32_t validity_days = 7;
  bool device_secret_slot = true;
  std::vector<std::string> info_labels;
  std::string admin_token;
  std::string authority_token;  // empty disables /lookup
  int64_t time_offset_seconds = 0;
  bool fast_pwhash = false;  // test configs only; weakens password hashing

  static Config load(const std::string& path) {
    auto j = svc::load_json_file(path);
    Config c;
    c.idp_id = j.value("idp_id", c.idp_id);
    c.listen = j.value("listen", c.listen);
    c.port = j.value("port", 0);
    c.data_dir = j.at("data_dir").get<std::string>();
    c.validity_days = j.value("validity_days", c.validity_days);
    c.device_secret_slot = j.value("device_secret_slot", true);
    if (j.contains("info_labels")) c.info_labels = j["info_labels"].get<std::vector<std::string>>();
    c.admin_token = j.at("admin_token").get<std::string>();
    c.authority_token = j.value("authority_token", "");
    c.time_offset_seconds = j.value("time_offset_seconds", int64_t(0));
    c.fast_pwhash = j.value("fast_pwhash", false);
    return c;
  }
};

struct PendingEnroll {
  std::string login;
  proto::EnrollInitMsg init;
  std::vector<uint8_t> sealed;  // set once the old device approves
};

struct App {
  Config cfg;
  PublicParams params = setup(128);
  G1 h = hash_to_g1(retrieval::H_GENERATOR_SEED);
  pscred::IdpKeyPair kp;
  std::vector<uint8_t> pk_bytes;
  std::string pk_etag;

  std::mutex mu;
  std::map<std::string, proto::UserRecord> users;          // by login
  std::map<std::string, std::string> pwhash;               // login -> argon2id string
  std::map<std::vector<uint8_t>, std::string> by_handle;   // h^gamma bytes -> login
  std::map<std::string, std::string> sessions;             // bearer token -> login
  std::map<std::string, PendingEnroll> pending;            // by new device id
  svc::JsonlLog users_log;
  svc::JsonlLog audit;
  SystemRng rng;

  uint64_t now() const {
    int64_t t = int64_t(::time(nullptr)) + cfg.time_offset_seconds;
    return t > 0 ? uint64_t(t) : 0;
  }

  void audit_event(const std::string& event, json extra) {
    extra["event"] = event;
    extra["at"] = now();
    audit.append(extra);
  }

  // one self-contained snapshot per mutation; replay applies them in order
  void persist_user(const proto::UserRecord& u) {
    json devices = json::object();
    for (const auto& [id, d] : u.devices) devices[id] = {{"revoked", d.revoked}};
    users_log.append({{"op", "user"},
                      {"login", u.login},
                      {"pwhash", pwhash[u.login]},
                      {"gamma", to_hex(u.gamma.to_bytes())},
                      {"info", u.info},
                      {"devices", devices}});
  }

  void apply_user_record(const json& j) {
    proto::UserRecord u;
    u.login = j.at("login").get<std::string>();
    auto gamma_bytes = from_hex(j.at("gamma").get<std::string>());
    if (!gamma_bytes) throw std::runtime_error("users.jsonl: bad gamma hex");
    auto gamma = Scalar::from_bytes(*gamma_bytes);
    if (!gamma) throw std::runtime_error("users.jsonl: gamma out of range");
    u.gamma = *gamma;
    u.h_gamma = exp(h, u.gamma);
    u.info = j.at("info").get<std::map<std::string, std::string>>();
    for (const auto& [id, d] : j.at("devices").items())
      u.devices[id] = {d.at("revoked").get<bool>()};
    pwhash[u.login] = j.at("pwhash").get<std::string>();
    by_handle[std::vector<uint8_t>(u.h_gamma.serialize().begin(), u.h_gamma.serialize().end())] =
        u.login;
    users[u.login] = std::move(u);
  }
};

void load_or_create_keypair(App& app) {
  auto path = app.cfg.data_dir + "/idp-key.bin";
  std::ifstream in(path, std::ios::binary);
  if (in) {
    std::vector<uint8_t> bytes(std::istreambuf_iterator<char>(in), {});
    wire::Reader r(bytes);
    pscred::IdpKeyPair kp;
    if (!wire::get_point(r, kp.sk)) throw std::runtime_error("corrupt idp-key.bin");
    std::span<const uint8_t> rest;
    if (!r.slice(r.remaining(), rest)) throw std::runtime_error("corrupt idp-key.bin");
    auto pk = pscred::IdpPublicKey::deserialize(rest);
    if (!pk) throw std::runtime_error("corrupt idp-key.bin");
    kp.pk = std::move(*pk);
    app.kp = std::move(kp);
    return;
  }
  auto schema = proto::build_schema(app.cfg.device_secret_slot, app.cfg.info_labels);
  app.kp = pscred::keygen(app.params, std::move(schema), app.rng);
  wire::Writer w;
  wire::put_point(w, app.kp.sk);
  auto pk = app.kp.pk.serialize();
  w.bytes(pk);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(w.out.data()), std::streamsize(w.out.size()));
  out.close();
  ::chmod(path.c_str(), 0600);
}

std::string hash_password(const App& app, const std::string& password) {
  char out[crypto_pwhash_STRBYTES];
  unsigned long long ops =
      app.cfg.fast_pwhash ? crypto_pwhash_OPSLIMIT_MIN : crypto_pwhash_OPSLIMIT_INTERACTIVE;
  size_t mem = app.cfg.fast_pwhash ? crypto_pwhash_MEMLIMIT_MIN : crypto_pwhash_MEMLIMIT_INTERACTIVE;
  if (crypto_pwhash_str(out, password.c_str(), password.size(), ops, mem) != 0)
    throw std::runtime_error("password hashing failed (out of memory?)");
  return std::string(out);
}

// resolves the session bearer to a login, or replies 401 and returns nullopt
std::optional<std::string> session_login(App& app, const httplib::Request& req,
                                         httplib::Response& res) {
  auto tok = svc::bearer_token(req);
  if (tok) {
    std::lock_guard lk(app.mu);
    auto it = app.sessions.find(*tok);
    if (it != app.sessions.end()) return it->second;
  }
  svc::send_error(res, 401, "unauthorized", "missing or invalid session token");
  return std::nullopt;
}

int run(const std::string& config_path, const std::string& port_file) {
  App app;
  app.cfg = Config::load(config_path);
  std::filesystem::create_directories(app.cfg.data_dir);
  load_or_create_keypair(app);
  app.pk_bytes = app.kp.pk.serialize();
  {
    std::array<uint8_t, 32> digest{};
    crypto_hash_sha256(digest.data(), app.pk_bytes.data(), app.pk_bytes.size());
    app.pk_etag = "\"" + to_hex(std::span(digest).first(8)) + "\"";
  }

  auto users_path = app.cfg.data_dir + "/users.jsonl";
  svc::JsonlLog::replay(users_path, [&](const json& j) {
    if (j.value("op", "") == "user") app.apply_user_record(j);
  });
  app.users_log.open(users_path);
  app.audit.open(app.cfg.data_dir + "/audit.jsonl");

  httplib::Server svr;

  svr.Get("/meta", [&](const httplib::Request&, httplib::Response& res) {
    json labels = json::array();
    for (uint32_t i = proto::first_info_index(app.kp.pk.schema); i < app.kp.pk.schema.n(); ++i)
      labels.push_back(app.kp.pk.schema.attrs[i].label);
    json j{{"idp_id", app.cfg.idp_id},
           {"info_labels", labels},
           {"device_secret_slot", proto::schema_has_device_slot(app.kp.pk.schema)},
           {"validity_days", app.cfg.validity_days}};
    res.set_content(j.dump(), "application/json");
  });

  // public signing key; stable bytes, so clients and RPs can cache hard
  svr.Get("/pk", [&](const httplib::Request& req, httplib::Response& res) {
    if (req.get_header_value("If-None-Match") == app.pk_etag) {
      res.status = 304;
      return;
    }
    res.set_header("ETag", app.pk_etag);
    res.set_header("Cache-Control", "public, max-age=86400");
    res.set_content(std::string(app.pk_bytes.begin(), app.pk_bytes.end()),
                    "application/octet-stream");
  });

  svr.Post("/session", [&](const httplib::Request& req, httplib::Response& res) {
    auto j = json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.contains("login") || !j.contains("password"))
      return svc::send_error(res, 400, "bad-request", "expected login and password");
    auto login = j["login"].get<std::string>();
    auto password = j["password"].get<std::string>();
    std::string stored;
    {
      std::lock_guard lk(app.mu);
      auto it = app.pwhash.find(login);
      if (it != app.pwhash.end()) stored = it->second;
    }
    // verify outside the lock; argon2id is deliberately slow
    if (stored.empty() ||
        crypto_pwhash_str_verify(stored.c_str(), password.c_str(), password.size()) != 0)
      return svc::send_error(res, 401, "unauthorized", "bad login or password");
    auto token = svc::random_hex(16);
    {
      std::lock_guard lk(app.mu);
      app.sessions[token] = login;
    }
    res.set_content(json{{"token", token}}.dump(), "application/json");
  });

  svr.Post("/admin/users", [&](const httplib::Request& req, httplib::Response& res) {
    if (svc::bearer_token(req) != app.cfg.admin_token)
      return svc::send_error(res, 401, "unauthorized");
    auto j = json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.contains("login") || !j.contains("password"))
      return svc::send_error(res, 400, "bad-request", "expected login and password");
    auto login = j["login"].get<std::string>();
    auto device_id = j.value("device_id", "primary");
    std::map<std::string, std::string> info;
    if (j.contains("info")) info = j["info"].get<std::map<std::string, std::string>>();
    auto hashed = hash_password(app, j["password"].get<std::string>());

    std::lock_guard lk(app.mu);
    if (app.users.count(login)) return svc::send_error(res, 409, "exists");
    auto u = proto::create_user(login, std::move(info), app.h, app.rng);
    u.devices[device_id] = {};
    app.pwhash[login] = hashed;
    auto handle = u.h_gamma.serialize();
    app.by_handle[std::vector<uint8_t>(handle.begin(), handle.end())] = login;
    app.users[login] = u;
    app.persist_user(u);
    app.audit_event("user-created", {{"login", login}, {"device", device_id}});
    res.set_content(json{{"login", login}, {"device_id", device_id}}.dump(), "application/json");
  });

  svr.Post("/request-id", [&](const httplib::Request& req, httplib::Response& res) {
    auto tok = svc::bearer_token(req);
    auto login = session_login(app, req, res);
    if (!login) return;
    auto body = svc::read_envelope(req);
    if (!body) return svc::send_error(res, 400, "bad-request", "unreadable envelope");
    auto msg = proto::RequestIDMsg::deserialize(*body);
    if (!msg) return svc::send_error(res, 400, "bad-request", "not a credential request");

    // gamma goes back masked under the session token, never in the clear
    std::span<const uint8_t> mask_key(reinterpret_cast<const uint8_t*>(tok->data()), tok->size());
    std::lock_guard lk(app.mu);
    auto& user = app.users.at(*login);
    try {
      auto reply = proto::provide_id(app.params, app.kp, user, *msg, app.now(),
                                     {app.cfg.validity_days}, mask_key, app.rng);
      app.audit_event("credential-issued",
                      {{"login", *login}, {"device", msg->device_id}, {"tp_day", reply.tp_day}});
      svc::send_envelope(req, res, reply.serialize());
    } catch (const proto::RevokedDeviceError& e) {
      app.audit_event("issue-refused-revoked", {{"login", *login}, {"device", msg->device_id}});
      svc::send_error(res, 403, "device-revoked", e.what());
    } catch (const proto::UnknownDeviceError& e) {
      svc::send_error(res, 404, "unknown-device", e.what());
    } catch (const std::invalid_argument& e) {
      svc::send_error(res, 422, "rejected", e.what());
    }
  });

  // authority-side: recovered handle h^gamma -> login
  svr.Post("/lookup", [&](const httplib::Request& req, httplib::Response& res) {
    if (app.cfg.authority_token.empty())
      return svc::send_error(res, 403, "disabled", "no authority token configured");
    if (svc::bearer_token(req) != app.cfg.authority_token)
      return svc::send_error(res, 401, "unauthorized");
    auto j = json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.contains("h_gamma"))
      return svc::send_error(res, 400, "bad-request", "expected h_gamma hex");
    auto bytes = from_hex(j["h_gamma"].get<std::string>());
    if (!bytes) return svc::send_error(res, 400, "bad-request", "h_gamma is not hex");
    std::lock_guard lk(app.mu);
    auto it = app.by_handle.find(*bytes);
    if (it == app.by_handle.end()) return svc::send_error(res, 404, "unknown-handle");
    app.audit_event("authority-lookup", {{"login", it->second}});
    res.set_content(json{{"login", it->second}}.dump(), "application/json");
  });

  // -- device enrollment: the provider relays a sealed box it cannot open --

  svr.Post("/devices/enroll-init", [&](const httplib::Request& req, httplib::Response& res) {
    auto login = session_login(app, req, res);
    if (!login) return;
    auto body = svc::read_envelope(req);
    if (!body) return svc::send_error(res, 400, "bad-request", "unreadable envelope");
    auto msg = proto::EnrollInitMsg::deserialize(*body);
    if (!msg) return svc::send_error(res, 400, "bad-request", "not an enrollment init");
    std::lock_guard lk(app.mu);
    auto& user = app.users.at(*login);
    if (user.devices.count(msg->device_id) || app.pending.count(msg->device_id))
      return svc::send_error(res, 409, "exists", "device id already known");
    app.pending[msg->device_id] = {*login, *msg, {}};
    app.audit_event("enroll-init", {{"login", *login}, {"device", msg->device_id}});
    res.set_content(json::object().dump(), "application/json");
  });

  svr.Get("/devices/enroll-pending", [&](const httplib::Request& req, httplib::Response& res) {
    auto login = session_login(app, req, res);
    if (!login) return;
    std::lock_guard lk(app.mu);
    json out = json::array();
    for (const auto& [id, p] : app.pending)
      if (p.login == *login && p.sealed.empty())
        out.push_back({{"device_id", id}, {"device_pk", to_hex(p.init.device_pk)}});
    res.set_content(out.dump(), "application/json");
  });

  svr.Post("/devices/enroll-approve", [&](const httplib::Request& req, httplib::Response& res) {
    auto login = session_login(app, req, res);
    if (!login) return;
    auto body = svc::read_envelope(req);
    if (!body) return svc::send_error(res, 400, "bad-request", "unreadable envelope");
    auto msg = proto::EnrollTransferMsg::deserialize(*body);
    if (!msg || msg->type != proto::MsgType::enroll_approve)
      return svc::send_error(res, 400, "bad-request", "not an enrollment approval");
    std::lock_guard lk(app.mu);
    auto it = app.pending.find(msg->device_id);
    if (it == app.pending.end()) return svc::send_error(res, 404, "unknown-device");
    if (it->second.login != *login)
      return svc::send_error(res, 401, "unauthorized", "enrollment belongs to another account");
    it->second.sealed = msg->sealed_secret;  // relayed byte for byte
    auto& user = app.users.at(*login);
    user.devices[msg->device_id] = {};
    app.persist_user(user);
    app.audit_event("enroll-approved", {{"login", *login}, {"device", msg->device_id}});
    res.set_content(json::object().dump(), "application/json");
  });

  svr.Get("/devices/enroll-fetch", [&](const httplib::Request& req, httplib::Response& res) {
    auto login = session_login(app, req, res);
    if (!login) return;
    auto device_id = req.get_param_value("device");
    std::lock_guard lk(app.mu);
    auto it = app.pending.find(device_id);
    if (it == app.pending.end() || it->second.login != *login || it->second.sealed.empty())
      return svc::send_error(res, 404, "not-ready", "no approved enrollment for this device");
    proto::EnrollTransferMsg out;
    out.type = proto::MsgType::enroll_complete;
    out.device_id = device_id;
    out.sealed_secret = it->second.sealed;
    app.pending.erase(it);
    svc::send_envelope(req, res, out.serialize());
  });

  svr.Post("/devices/revoke", [&](const httplib::Request& req, httplib::Response& res) {
    auto login = session_login(app, req, res);
    if (!login) return;
    auto j = json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.contains("device_id"))
      return svc::send_error(res, 400, "bad-request", "expected device_id");
    auto device_id = j["device_id"].get<std::string>();
    std::lock_guard lk(app.mu);
    auto& user = app.users.at(*login);
    auto it = user.devices.find(device_id);
    if (it == user.devices.end()) return svc::send_error(res, 404, "unknown-device");
    if (it->second.revoked) return svc::send_error(res, 409, "already-revoked");
    it->second.revoked = true;
    app.persist_user(user);
    app.audit_event("device-revoked", {{"login", *login}, {"device", device_id}});
    res.set_content(json::object().dump(), "application/json");
  });

  return svc::run_server(svr, app.cfg.listen, app.cfg.port, port_file);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"credential-issuing identity provider"};
  std::string config_path, port_file;
  cli.add_option("--config", config_path, "JSON config file")->required();
  cli.add_option("--port-file", port_file, "write the bound port here");
  CLI11_PARSE(cli, argc, argv);
  try {
    return run(config_path, port_file);
  } catch (const std::exception& e) {
    fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
