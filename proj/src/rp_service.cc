// elpasso-rp: one relying party.
//
// Hands out single-use nonces, verifies sign-on requests against issuer keys
// it fetched once and cached (a warm cache keeps sign-ons working while the
// issuer is down), applies pseudonym rotations, and drives the threshold
// identity-retrieval flow for abuse reports.  The RP never talks to the
// issuer during a sign-on and never learns anything beyond what the request
// itself discloses.
//
// Accounts persist to data_dir/accounts.jsonl; abuse cases append to
// data_dir/cases.jsonl.

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

struct TrustedIdp {
  std::string id;
  std::string url;
};

struct Config {
  std::string domain;
  std::string listen = "127.0.0.1";
  int port = 0;
  std::string data_dir;
  std::vector<TrustedIdp> trusted_idps;
  uint64_t pk_cache_ttl_seconds = 3600;
  bool require_retrieval = false;
  bool require_2fa = false;
  uint64_t nonce_ttl_seconds = 300;
  std::vector<std::string> authorities;  // base URLs, one per share holder
  std::string authority_token;           // bearer those endpoints expect, if any
  std::string keyset_file;               // aggregated retrieval key material
  int64_t time_offset_seconds = 0;

  static Config load(const std::string& path) {
    auto j = svc::load_json_file(path);
    Config c;
    c.domain = j.at("domain").get<std::string>();
    c.listen = j.value("listen", c.listen);
    c.port = j.value("port", 0);
    c.data_dir = j.at("data_dir").get<std::string>();
    for (const auto& t : j.at("trusted_idps"))
      c.trusted_idps.push_back({t.at("id").get<std::string>(), t.at("url").get<std::string>()});
    c.pk_cache_ttl_seconds = j.value("pk_cache_ttl_seconds", c.pk_cache_ttl_seconds);
    c.require_retrieval = j.value("require_retrieval", false);
    c.require_2fa = j.value("require_2fa", false);
    c.nonce_ttl_seconds = j.value("nonce_ttl_seconds", c.nonce_ttl_seconds);
    if (j.contains("authorities"))
      c.authorities = j["authorities"].get<std::vector<std::string>>();
    c.authority_token = j.value("authority_token", "");
    c.keyset_file = j.value("keyset_file", "");
    c.time_offset_seconds = j.value("time_offset_seconds", int64_t(0));
    return c;
  }
};

struct CachedPk {
  pscred::IdpPublicKey pk;
  uint64_t fetched_at = 0;
};

struct App {
  Config cfg;
  PublicParams params = setup(128);
  std::optional<retrieval::PublicKeySet> keyset;
  G1 y, h;  // retrieval bases; placeholders when no keyset is configured

  std::mutex mu;
  proto::AccountStore accounts;
  proto::NonceCache nonces;
  std::map<std::string, std::vector<uint8_t>> by_account_id;  // account id -> zeta bytes
  std::map<std::string, CachedPk> pk_cache;                   // issuer id -> key
  svc::JsonlLog accounts_log;
  svc::JsonlLog cases_log;

  uint64_t now() const {
    int64_t t = int64_t(::time(nullptr)) + cfg.time_offset_seconds;
    return t > 0 ? uint64_t(t) : 0;
  }

  void persist_account(const proto::AccountRecord& rec) {
    json devices = json::array();
    for (const auto& d : rec.device_pseudonyms) devices.push_back(to_hex(d));
    json disclosed = json::array();
    for (const auto& [k, v] : rec.disclosed) disclosed.push_back({k, v});
    json j{{"op", "account"},   {"zeta", to_hex(rec.zeta)},
           {"devices", devices}, {"disclosed", disclosed},
           {"created_day", rec.created_day}, {"last_seen_day", rec.last_seen_day}};
    if (rec.token) j["token"] = to_hex(rec.token->serialize());
    accounts_log.append(j);
  }

  void apply_log_line(const json& j) {
    auto op = j.value("op", "");
    if (op == "account") {
      proto::AccountRecord rec;
      rec.zeta = *from_hex(j.at("zeta").get<std::string>());
      for (const auto& d : j.at("devices")) rec.device_pseudonyms.push_back(*from_hex(d.get<std::string>()));
      for (const auto& p : j.at("disclosed"))
        rec.disclosed.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
      rec.created_day = j.at("created_day").get<uint64_t>();
      rec.last_seen_day = j.at("last_seen_day").get<uint64_t>();
      if (j.contains("token")) {
        auto bytes = from_hex(j["token"].get<std::string>());
        if (bytes) rec.token = retrieval::RetrievalToken::deserialize(*bytes);
      }
      by_account_id[proto::account_id_for(rec.zeta)] = rec.zeta;
      accounts.accounts[rec.zeta] = std::move(rec);
    } else if (op == "remove") {
      auto zeta = *from_hex(j.at("zeta").get<std::string>());
      by_account_id.erase(proto::account_id_for(zeta));
      accounts.accounts.erase(zeta);
    } else if (op == "block") {
      accounts.blocked.insert(*from_hex(j.at("zeta").get<std::string>()));
    }
  }

  // cached issuer key, refreshed over HTTP when stale.  A fetched key is
  // vetted with pairing checks before anything trusts it; a stale cache is
  // only a fallback for rejecting, never silently served past its TTL.
  std::optional<pscred::IdpPublicKey> issuer_key(const std::string& id, std::string& why) {
    const TrustedIdp* entry = nullptr;
    for (const auto& t : cfg.trusted_idps)
      if (t.id == id) entry = &t;
    if (!entry) {
      why = "issuer is not in this relying party's trust list";
      return std::nullopt;
    }
    {
      std::lock_guard lk(mu);
      auto it = pk_cache.find(id);
      if (it != pk_cache.end() && now() - it->second.fetched_at < cfg.pk_cache_ttl_seconds)
        return it->second.pk;
    }
    httplib::Client cli(entry->url);
    cli.set_connection_timeout(2, 0);
    cli.set_read_timeout(10, 0);
    auto res = cli.Get("/pk");
    if (!res || res->status != 200) {
      why = "issuer key not cached and issuer unreachable";
      return std::nullopt;
    }
    std::vector<uint8_t> bytes(res->body.begin(), res->body.end());
    auto pk = pscred::IdpPublicKey::deserialize(bytes);
    if (!pk || !pscred::pk_consistent(params, *pk)) {
      why = "issuer served an inconsistent key";
      return std::nullopt;
    }
    std::lock_guard lk(mu);
    pk_cache[id] = {*pk, now()};
    return pk;
  }
};

void reply_result(httplib::Response& res, const proto::SignOnResult& r) {
  json j{{"accepted", r.accepted},
         {"action", std::string(proto::account_action_name(r.action))},
         {"reason", std::string(proto::reject_reason_name(r.reason))},
         {"message", r.message},
         {"account_id", r.account_id},
         {"msg", to_hex(r.serialize())}};
  res.set_content(j.dump(), "application/json");
}

int run(const std::string& config_path, const std::string& port_file) {
  App app;
  app.cfg = Config::load(config_path);
  std::filesystem::create_directories(app.cfg.data_dir);

  if (!app.cfg.keyset_file.empty()) {
    std::ifstream in(app.cfg.keyset_file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read keyset " + app.cfg.keyset_file);
    std::vector<uint8_t> bytes(std::istreambuf_iterator<char>(in), {});
    auto ks = retrieval::PublicKeySet::deserialize(bytes);
    if (!ks) throw std::runtime_error("invalid keyset file");
    app.keyset = *ks;
    app.y = ks->y;
    app.h = ks->h;
  } else {
    app.y = app.params.g;  // never used: token-bearing requests are gated out
    app.h = app.params.g;
  }
  if (app.cfg.require_retrieval && (!app.keyset || app.cfg.authorities.empty()))
    throw std::runtime_error("require_retrieval needs a keyset_file and authorities");

  auto accounts_path = app.cfg.data_dir + "/accounts.jsonl";
  svc::JsonlLog::replay(accounts_path, [&](const json& j) { app.apply_log_line(j); });
  app.accounts_log.open(accounts_path);
  app.cases_log.open(app.cfg.data_dir + "/cases.jsonl");

  httplib::Server svr;

  svr.Get("/signon-meta", [&](const httplib::Request&, httplib::Response& res) {
    auto nonce_hex = svc::random_hex(16);
    auto nonce = *from_hex(nonce_hex);
    json idps = json::array();
    for (const auto& t : app.cfg.trusted_idps) idps.push_back(t.id);
    json j{{"domain", app.cfg.domain},
           {"rp_nonce", nonce_hex},
           {"nonce_ttl_seconds", app.cfg.nonce_ttl_seconds},
           {"accepted_idps", idps},
           {"policy",
            {{"require_retrieval", app.cfg.require_retrieval},
             {"require_2fa", app.cfg.require_2fa}}}};
    if (app.cfg.require_retrieval) {
      j["authorities"] = {{"y", to_hex(app.keyset->y.serialize())},
                          {"h", to_hex(app.keyset->h.serialize())},
                          {"threshold", app.keyset->threshold},
                          {"endpoints", app.cfg.authorities}};
    }
    std::lock_guard lk(app.mu);
    app.nonces.prune(app.now());
    app.nonces.issue(nonce, app.now(), app.cfg.nonce_ttl_seconds);
    res.set_content(j.dump(), "application/json");
  });

  svr.Post("/signon", [&](const httplib::Request& req, httplib::Response& res) {
    auto body = svc::read_envelope(req);
    if (!body) return svc::send_error(res, 400, "bad-request", "unreadable envelope");
    auto msg = proto::SignOnRequest::deserialize(*body);
    if (!msg) return svc::send_error(res, 400, "bad-request", "unparseable sign-on request");

    std::string why;
    auto pk = app.issuer_key(msg->idp, why);
    if (!pk)
      return reply_result(res, proto::SignOnResult::reject(proto::RejectReason::unknown_idp, why));
    if (msg->token && !app.keyset)
      return reply_result(res, proto::SignOnResult::reject(
                                   proto::RejectReason::bad_request,
                                   "this relying party has no retrieval authority set"));

    std::lock_guard lk(app.mu);
    auto result = proto::verify_id(app.params, *pk, *msg, app.cfg.domain, app.y, app.h, app.now(),
                                   app.nonces, app.accounts,
                                   {app.cfg.require_retrieval, app.cfg.require_2fa,
                                    app.cfg.nonce_ttl_seconds});
    if (msg->zeta) {  // persist whatever the verdict changed for this account
      auto zb = msg->zeta->serialize();
      if (auto* rec = app.accounts.find(zb)) {
        app.by_account_id[proto::account_id_for(rec->zeta)] = rec->zeta;
        app.persist_account(*rec);
      }
    }
    reply_result(res, result);
  });

  svr.Post("/rotate", [&](const httplib::Request& req, httplib::Response& res) {
    auto body = svc::read_envelope(req);
    if (!body) return svc::send_error(res, 400, "bad-request", "unreadable envelope");
    auto rot = proto::RotationRequest::deserialize(*body);
    if (!rot) return svc::send_error(res, 400, "bad-request", "unparseable rotation request");
    if (rot->old_req.idp != rot->fresh_req.idp)
      return reply_result(res, proto::SignOnResult::reject(proto::RejectReason::bad_request,
                                                           "rotation halves name different issuers"));
    std::string why;
    auto pk = app.issuer_key(rot->old_req.idp, why);
    if (!pk)
      return reply_result(res, proto::SignOnResult::reject(proto::RejectReason::unknown_idp, why));

    std::lock_guard lk(app.mu);
    auto result = proto::rp_apply_rotation(app.params, *pk, *rot, app.cfg.domain, app.y, app.h,
                                           app.now(), app.nonces, app.accounts);
    if (result.accepted) {  // both pseudonyms are present on any accepted rotation
      auto old_zeta = rot->old_req.zeta->serialize();
      auto new_zeta = rot->fresh_req.zeta->serialize();
      app.accounts_log.append({{"op", "remove"}, {"zeta", to_hex(old_zeta)}});
      app.accounts_log.append({{"op", "block"}, {"zeta", to_hex(old_zeta)}});
      app.by_account_id.erase(proto::account_id_for(old_zeta));
      if (auto* rec = app.accounts.find(new_zeta)) {
        app.by_account_id[proto::account_id_for(rec->zeta)] = rec->zeta;
        app.persist_account(*rec);
      }
    }
    reply_result(res, result);
  });

  // abuse report: gather partial decryptions from the authorities and combine
  svr.Post("/report", [&](const httplib::Request& req, httplib::Response& res) {
    auto j = json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.contains("account_id"))
      return svc::send_error(res, 400, "bad-request", "expected account_id");
    if (!app.keyset) return svc::send_error(res, 409, "no-retrieval", "no authority set configured");
    auto account_id = j["account_id"].get<std::string>();

    retrieval::RetrievalToken token;
    {
      std::lock_guard lk(app.mu);
      auto it = app.by_account_id.find(account_id);
      if (it == app.by_account_id.end()) return svc::send_error(res, 404, "unknown-account");
      auto* rec = app.accounts.find(it->second);
      if (!rec || !rec->token)
        return svc::send_error(res, 409, "no-retrieval-token",
                               "account has no stored retrieval token");
      token = *rec->token;
    }

    auto case_id = "case-" + svc::random_hex(6);
    proto::RetrievalReportMsg report{case_id, token};
    auto report_bytes = report.serialize();

    std::vector<retrieval::PartialDecryption> partials;
    std::vector<std::string> offline;
    for (const auto& url : app.cfg.authorities) {
      httplib::Client cli(url);
      cli.set_connection_timeout(2, 0);
      cli.set_read_timeout(10, 0);
      httplib::Headers headers;
      if (!app.cfg.authority_token.empty())
        headers.emplace("Authorization", "Bearer " + app.cfg.authority_token);
      auto r = cli.Post("/partial-decrypt", headers,
                        std::string(report_bytes.begin(), report_bytes.end()),
                        "application/octet-stream");
      if (!r || r->status != 200) {
        offline.push_back(url);
        continue;
      }
      std::vector<uint8_t> bytes(r->body.begin(), r->body.end());
      auto pd = retrieval::PartialDecryption::deserialize(bytes);
      if (!pd) {
        offline.push_back(url);
        continue;
      }
      partials.push_back(std::move(*pd));
    }

    if (partials.size() < app.keyset->threshold)
      return svc::send_error(res, 502, "insufficient-partials",
                             std::to_string(partials.size()) + " of " +
                                 std::to_string(app.keyset->threshold) + " needed");
    G1 recovered;
    try {
      recovered = retrieval::combine(app.params, partials, token, *app.keyset);
    } catch (const retrieval::BadPartial& e) {
      return svc::send_error(res, 502, "bad-partial",
                             "authority " + std::to_string(e.authority_index) +
                                 " returned a forged partial decryption");
    }
    auto recovered_hex = to_hex(recovered.serialize());
    json indices = json::array();
    for (const auto& p : partials) indices.push_back(p.index);
    app.cases_log.append({{"case_id", case_id},
                          {"account_id", account_id},
                          {"recovered", recovered_hex},
                          {"authorities", indices}});
    json out{{"case_id", case_id}, {"recovered", recovered_hex}, {"partials_used", partials.size()}};
    if (!offline.empty()) out["offline"] = offline;
    res.set_content(out.dump(), "application/json");
  });

  svr.Get("/stats", [&](const httplib::Request&, httplib::Response& res) {
    std::lock_guard lk(app.mu);
    json j{{"accounts", app.accounts.accounts.size()},
           {"blocked", app.accounts.blocked.size()},
           {"pending_nonces", app.nonces.pending.size()}};
    res.set_content(j.dump(), "application/json");
  });

  return svc::run_server(svr, app.cfg.listen, app.cfg.port, port_file);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"pseudonymous relying party"};
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
