// elpasso: the user-side wallet and sign-on tool.
//
// Keeps the long-term secret, per-device secret, and issued credentials in a
// passphrase-encrypted keystore (argon2id + XSalsa20-Poly1305).  The secret
// never leaves the keystore unencrypted: not in command output, not in logs,
// not on the wire.  Commands:
//
//   init              create an empty keystore for this device
//   fetch-credential  authenticate to an issuer and obtain a credential
//   signon            one unlinkable sign-on at a relying party
//   status            what the keystore holds (public facts only)
//   add-device        enroll this device under an existing identity
//   approve-device    approve a new device from an already-enrolled one
//   rotate            replace a compromised secret at a relying party
//   report-stolen     revoke a device at the issuer
//
// Exit codes: 0 ok, 2 bad usage or invalid input, 3 keystore problem,
// 4 network failure, 5 rejected by the remote end, 6 expired credential,
// 7 keystore locked by another process.

#include <sys/file.h>
#include <termios.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <json.hpp>
#include <thread>

#include "common/http_util.hpp"
#include "elpasso/protocol.hpp"

namespace {

using namespace elpasso;
namespace proto = elpasso::protocol;
using nlohmann::json;

struct CliError {
  int code;
  std::string msg;
};

// ---------------------------------------------------------------------------
// keystore

constexpr char KEYSTORE_MAGIC[] = "ELPKS1";
constexpr size_t MAGIC_LEN = 6;

std::string passphrase() {
  if (const char* env = ::getenv("ELPASSO_PASSPHRASE")) return env;
  fprintf(stderr, "keystore passphrase: ");
  fflush(stderr);
  termios saved{};
  bool tty = ::isatty(0) == 1 && ::tcgetattr(0, &saved) == 0;
  if (tty) {
    termios t = saved;
    t.c_lflag &= ~tcflag_t(ECHO);
    ::tcsetattr(0, TCSANOW, &t);
  }
  std::string line;
  std::getline(std::cin, line);
  if (tty) {
    ::tcsetattr(0, TCSANOW, &saved);
    fputc('\n', stderr);
  }
  return line;
}

class Keystore {
 public:
  json data;

  explicit Keystore(std::string path) : path_(std::move(path)) { ensure_sodium(); }

  ~Keystore() {
    if (lock_fd_ >= 0) ::close(lock_fd_);
    sodium_memzero(key_.data(), key_.size());
  }

  // one process at a time; others fail fast instead of corrupting state
  void lock() {
    lock_fd_ = ::open((path_ + ".lock").c_str(), O_CREAT | O_RDWR, 0600);
    if (lock_fd_ < 0) throw CliError{3, "cannot open lock file for " + path_};
    if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0)
      throw CliError{7, "keystore is locked by another process"};
  }

  bool exists() const { return std::ifstream(path_).good(); }

  void create() {
    if (exists()) throw CliError{3, "keystore already exists at " + path_};
    randombytes_buf(salt_.data(), salt_.size());
    derive_key(passphrase());
    data = json{{"device_id", ""}, {"idps", json::object()}};
  }

  void load() {
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw CliError{3, "no keystore at " + path_ + "; run init first"};
    std::vector<uint8_t> raw((std::istreambuf_iterator<char>(in)), {});
    if (raw.size() < MAGIC_LEN + salt_.size() + crypto_secretbox_NONCEBYTES + crypto_secretbox_MACBYTES ||
        std::memcmp(raw.data(), KEYSTORE_MAGIC, MAGIC_LEN) != 0)
      throw CliError{3, "not a keystore: " + path_};
    size_t off = MAGIC_LEN;
    std::memcpy(salt_.data(), raw.data() + off, salt_.size());
    off += salt_.size();
    std::array<uint8_t, crypto_secretbox_NONCEBYTES> nonce{};
    std::memcpy(nonce.data(), raw.data() + off, nonce.size());
    off += nonce.size();
    derive_key(passphrase());
    std::vector<uint8_t> plain(raw.size() - off - crypto_secretbox_MACBYTES);
    if (crypto_secretbox_open_easy(plain.data(), raw.data() + off, raw.size() - off, nonce.data(),
                                   key_.data()) != 0)
      throw CliError{3, "wrong passphrase or corrupted keystore"};
    data = json::parse(plain, nullptr, false);
    sodium_memzero(plain.data(), plain.size());
    if (data.is_discarded()) throw CliError{3, "corrupted keystore contents"};
  }

  void save() {
    auto plain = data.dump();
    std::array<uint8_t, crypto_secretbox_NONCEBYTES> nonce{};
    randombytes_buf(nonce.data(), nonce.size());
    std::vector<uint8_t> out(MAGIC_LEN + salt_.size() + nonce.size() + plain.size() +
                             crypto_secretbox_MACBYTES);
    size_t off = 0;
    std::memcpy(out.data(), KEYSTORE_MAGIC, MAGIC_LEN);
    off += MAGIC_LEN;
    std::memcpy(out.data() + off, salt_.data(), salt_.size());
    off += salt_.size();
    std::memcpy(out.data() + off, nonce.data(), nonce.size());
    off += nonce.size();
    crypto_secretbox_easy(out.data() + off, reinterpret_cast<const uint8_t*>(plain.data()),
                          plain.size(), nonce.data(), key_.data());
    sodium_memzero(plain.data(), plain.size());
    auto tmp = path_ + ".tmp";
    {
      std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
      if (!os) throw CliError{3, "cannot write " + tmp};
      os.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
    }
    ::chmod(tmp.c_str(), 0600);
    if (::rename(tmp.c_str(), path_.c_str()) != 0) throw CliError{3, "cannot replace " + path_};
  }

 private:
  void derive_key(const std::string& pass) {
    if (crypto_pwhash(key_.data(), key_.size(), pass.c_str(), pass.size(), salt_.data(),
                      crypto_pwhash_OPSLIMIT_INTERACTIVE, crypto_pwhash_MEMLIMIT_INTERACTIVE,
                      crypto_pwhash_ALG_ARGON2ID13) != 0)
      throw CliError{3, "key derivation failed (out of memory?)"};
  }

  std::string path_;
  int lock_fd_ = -1;
  std::array<uint8_t, crypto_pwhash_SALTBYTES> salt_{};
  std::array<uint8_t, crypto_secretbox_KEYBYTES> key_{};
};

// ---------------------------------------------------------------------------
// keystore <-> protocol object conversions

std::string scalar_hex(const Scalar& s) { return to_hex(s.to_bytes()); }

Scalar scalar_from_hex(const std::string& hex) {
  auto bytes = from_hex(hex);
  if (!bytes) throw CliError{3, "corrupted scalar in keystore"};
  auto s = Scalar::from_bytes(*bytes);
  if (!s) throw CliError{3, "corrupted scalar in keystore"};
  return *s;
}

json credential_to_json(const proto::StoredCredential& c) {
  json attrs = json::array();
  for (const auto& a : c.attrs) attrs.push_back(scalar_hex(a));
  json info = json::array();
  for (const auto& [l, v] : c.info) info.push_back({l, v});
  return {{"cred", to_hex(c.cred.serialize())}, {"attrs", attrs}, {"tp_day", c.tp_day},
          {"info", info}};
}

proto::StoredCredential credential_from_json(const json& j) {
  proto::StoredCredential c;
  auto bytes = from_hex(j.at("cred").get<std::string>());
  auto cred = bytes ? pscred::Credential::deserialize(*bytes) : std::nullopt;
  if (!cred) throw CliError{3, "corrupted credential in keystore"};
  c.cred = *cred;
  for (const auto& a : j.at("attrs")) c.attrs.push_back(scalar_from_hex(a.get<std::string>()));
  c.tp_day = j.at("tp_day").get<uint64_t>();
  for (const auto& p : j.at("info"))
    c.info.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
  return c;
}

pscred::IdpPublicKey pk_from_entry(const json& entry) {
  auto bytes = from_hex(entry.at("pk").get<std::string>());
  auto pk = bytes ? pscred::IdpPublicKey::deserialize(*bytes) : std::nullopt;
  if (!pk) throw CliError{3, "corrupted issuer key in keystore"};
  return *pk;
}

// ---------------------------------------------------------------------------
// http plumbing

struct Remote {
  std::string base;
  httplib::Client cli;

  explicit Remote(const std::string& url) : base(url), cli(url) {
    cli.set_connection_timeout(3, 0);
    cli.set_read_timeout(60, 0);
  }

  httplib::Result get(const std::string& path, const httplib::Headers& headers = {}) {
    auto r = cli.Get(path, headers);
    if (!r) throw CliError{4, "cannot reach " + base + path};
    return r;
  }

  httplib::Result post(const std::string& path, const httplib::Headers& headers,
                       const std::string& body, const std::string& type) {
    auto r = cli.Post(path, headers, body, type);
    if (!r) throw CliError{4, "cannot reach " + base + path};
    return r;
  }

  httplib::Result post_msg(const std::string& path, const std::string& token,
                           std::span<const uint8_t> msg) {
    httplib::Headers h;
    if (!token.empty()) h.emplace("Authorization", "Bearer " + token);
    return post(path, h, std::string(msg.begin(), msg.end()), "application/octet-stream");
  }
};

std::string remote_error(const httplib::Result& r) {
  auto j = json::parse(r->body, nullptr, false);
  if (!j.is_discarded() && j.contains("message")) return j["message"].get<std::string>();
  if (!j.is_discarded() && j.contains("error")) return j["error"].get<std::string>();
  return "http status " + std::to_string(r->status);
}

std::string mint_session(Remote& idp, const std::string& login, const std::string& password) {
  auto r = idp.post("/session", {}, json{{"login", login}, {"password", password}}.dump(),
                    "application/json");
  if (r->status != 200) throw CliError{5, "issuer refused the login: " + remote_error(r)};
  auto j = json::parse(r->body, nullptr, false);
  if (j.is_discarded() || !j.contains("token")) throw CliError{5, "issuer sent a malformed session"};
  return j["token"].get<std::string>();
}

// fresh session when credentials were given, the stored one otherwise
std::string ensure_session(Remote& idp, json& entry, const std::string& login,
                           const std::string& password) {
  if (!login.empty()) {
    auto token = mint_session(idp, login, password);
    entry["session"] = token;
    return token;
  }
  auto token = entry.value("session", "");
  if (token.empty())
    throw CliError{5, "no stored session for this issuer; pass --login and --password"};
  return token;
}

// ---------------------------------------------------------------------------
// shared context

struct Ctx {
  std::string keystore_path;
  bool json_out = false;
  int64_t time_offset = 0;
  SystemRng rng;

  uint64_t now() const {
    int64_t t = int64_t(::time(nullptr)) + time_offset;
    return t > 0 ? uint64_t(t) : 0;
  }

  Keystore open_existing() {
    Keystore ks(keystore_path);
    ks.lock();
    ks.load();
    return ks;
  }
};

void emit(const Ctx& ctx, const json& machine, const std::string& human) {
  if (ctx.json_out)
    printf("%s\n", machine.dump().c_str());
  else
    printf("%s\n", human.c_str());
}

json& entry_for(Keystore& ks, const std::string& idp_url, bool must_exist) {
  auto& idps = ks.data["idps"];
  if (must_exist && !idps.contains(idp_url))
    throw CliError{3, "no identity for " + idp_url + " in the keystore"};
  return idps[idp_url];
}

// ---------------------------------------------------------------------------
// commands

int cmd_init(Ctx& ctx, std::string device_id) {
  Keystore ks(ctx.keystore_path);
  ks.lock();
  ks.create();
  if (device_id.empty()) device_id = "dev-" + svc::random_hex(3);
  ks.data["device_id"] = device_id;
  ks.save();
  emit(ctx, {{"device_id", device_id}, {"keystore", ctx.keystore_path}},
       "created keystore for device " + device_id);
  return 0;
}

int cmd_fetch_credential(Ctx& ctx, const std::string& idp_url, const std::string& login,
                         const std::string& password) {
  auto ks = ctx.open_existing();
  Remote idp(idp_url);

  auto meta_r = idp.get("/meta");
  if (meta_r->status != 200) throw CliError{5, "issuer /meta failed: " + remote_error(meta_r)};
  auto meta = json::parse(meta_r->body, nullptr, false);
  if (meta.is_discarded() || !meta.contains("idp_id"))
    throw CliError{5, "issuer sent malformed metadata"};

  auto pk_r = idp.get("/pk");
  if (pk_r->status != 200) throw CliError{5, "issuer /pk failed: " + remote_error(pk_r)};
  auto params = setup(128);
  std::vector<uint8_t> pk_bytes(pk_r->body.begin(), pk_r->body.end());
  auto pk = pscred::IdpPublicKey::deserialize(pk_bytes);
  if (!pk || !pscred::pk_consistent(params, *pk))
    throw CliError{5, "issuer key failed its consistency check; refusing to use it"};

  auto& entry = entry_for(ks, idp_url, false);
  // the long-term secret survives re-issuance, otherwise every relying-party
  // account would be orphaned
  proto::UserSecrets secrets;
  if (entry.contains("s")) {
    secrets.s = scalar_from_hex(entry["s"].get<std::string>());
    secrets.s_d = scalar_from_hex(entry["s_d"].get<std::string>());
  } else {
    secrets = proto::UserSecrets::generate(ctx.rng);
  }

  auto token = ensure_session(idp, entry, login, password);
  auto device_id = ks.data["device_id"].get<std::string>();

  std::vector<std::string> info_request;
  for (uint32_t i = proto::first_info_index(pk->schema); i < pk->schema.n(); ++i)
    info_request.push_back(pk->schema.attrs[i].label);

  auto prepared = proto::request_id(params, *pk, secrets, device_id, info_request, ctx.rng);
  auto r = idp.post_msg("/request-id", token, prepared.msg.serialize());
  if (r->status != 200)
    throw CliError{5, "issuer refused the credential request: " + remote_error(r)};
  std::vector<uint8_t> reply_bytes(r->body.begin(), r->body.end());
  auto reply = proto::BlindedCredentialMsg::deserialize(reply_bytes);
  if (!reply) throw CliError{5, "issuer sent a malformed credential"};

  std::span<const uint8_t> mask_key(reinterpret_cast<const uint8_t*>(token.data()), token.size());
  auto stored = proto::unblind_id(params, *pk, secrets, prepared.d, *reply, mask_key);

  entry["idp_id"] = meta["idp_id"].get<std::string>();
  entry["pk"] = to_hex(pk_bytes);
  entry["s"] = scalar_hex(secrets.s);
  entry["s_d"] = scalar_hex(secrets.s_d);
  entry["credential"] = credential_to_json(stored);
  ks.save();

  json info = json::object();
  for (const auto& [l, v] : stored.info) info[l] = v;
  int64_t days_left = int64_t(stored.tp_day) - int64_t(proto::day_of(ctx.now()));
  emit(ctx,
       {{"idp_id", entry["idp_id"]}, {"tp_day", stored.tp_day}, {"days_left", days_left},
        {"info", info}},
       "credential from " + entry["idp_id"].get<std::string>() + ", valid " +
           std::to_string(days_left) + " more days");
  return 0;
}

struct SignonPlan {
  std::string idp_url;
  json meta;  // relying party metadata
  G1 y, h;
  bool retrieval = false;
};

SignonPlan plan_signon(Keystore& ks, Remote& rp, const std::string& idp_url_opt,
                       bool want_retrieval) {
  SignonPlan plan;
  auto meta_r = rp.get("/signon-meta");
  if (meta_r->status != 200)
    throw CliError{5, "relying party /signon-meta failed: " + remote_error(meta_r)};
  plan.meta = json::parse(meta_r->body, nullptr, false);
  if (plan.meta.is_discarded() || !plan.meta.contains("rp_nonce") || !plan.meta.contains("domain"))
    throw CliError{5, "relying party sent malformed metadata"};

  std::vector<std::string> accepted;
  for (const auto& a : plan.meta.value("accepted_idps", json::array()))
    accepted.push_back(a.get<std::string>());

  if (!idp_url_opt.empty()) {
    plan.idp_url = idp_url_opt;
  } else {
    std::vector<std::string> matches;
    for (const auto& [url, entry] : ks.data["idps"].items()) {
      if (!entry.contains("credential")) continue;
      auto id = entry.value("idp_id", "");
      if (std::find(accepted.begin(), accepted.end(), id) != accepted.end()) matches.push_back(url);
    }
    if (matches.empty()) throw CliError{5, "no credential from an issuer this relying party accepts"};
    if (matches.size() > 1) throw CliError{2, "several identities match; pick one with --idp"};
    plan.idp_url = matches[0];
  }

  bool policy_requires = plan.meta.contains("policy") &&
                         plan.meta["policy"].value("require_retrieval", false);
  plan.retrieval = want_retrieval || policy_requires;
  auto params = setup(128);
  plan.y = params.g;
  plan.h = params.g;
  if (plan.retrieval) {
    if (!plan.meta.contains("authorities"))
      throw CliError{2, "retrieval requested but the relying party announces no authority set"};
    auto yb = from_hex(plan.meta["authorities"]["y"].get<std::string>());
    auto hb = from_hex(plan.meta["authorities"]["h"].get<std::string>());
    auto y = yb ? G1::deserialize(*yb) : std::nullopt;
    auto h = hb ? G1::deserialize(*hb) : std::nullopt;
    if (!y || !h) throw CliError{5, "relying party sent malformed authority keys"};
    plan.y = *y;
    plan.h = *h;
  }
  return plan;
}

// --claim inputs are label=value only; anything fancier has no proof form
std::pair<std::string, std::string> parse_claim(const std::string& raw) {
  auto pos = raw.find('=');
  if (pos == std::string::npos || pos == 0)
    throw CliError{2, "claims take the form label=value: " + raw};
  if (raw[pos - 1] == '>' || raw[pos - 1] == '<' || raw[pos - 1] == '!')
    throw CliError{2, "only equality claims are supported: " + raw};
  return {raw.substr(0, pos), raw.substr(pos + 1)};
}

int cmd_signon(Ctx& ctx, const std::string& rp_url, const std::string& idp_url_opt,
               const std::vector<std::string>& disclose,
               const std::vector<std::string>& claims_raw, bool guest, bool two_fa,
               bool want_retrieval) {
  std::vector<std::pair<std::string, std::string>> claims;
  for (const auto& c : claims_raw) claims.push_back(parse_claim(c));

  auto ks = ctx.open_existing();
  Remote rp(rp_url);
  auto plan = plan_signon(ks, rp, idp_url_opt, want_retrieval);
  auto& entry = entry_for(ks, plan.idp_url, true);
  if (!entry.contains("credential"))
    throw CliError{3, "no credential stored for " + plan.idp_url + "; run fetch-credential"};

  auto params = setup(128);
  auto pk = pk_from_entry(entry);
  auto stored = credential_from_json(entry["credential"]);

  // bad labels die here, before anything goes on the wire
  std::set<uint32_t> disclose_idx;
  for (const auto& label : disclose) {
    auto idx = proto::index_of_label(pk.schema, label);
    if (!idx || *idx < proto::first_info_index(pk.schema))
      throw CliError{2, "not a disclosable attribute: " + label};
    disclose_idx.insert(*idx);
  }
  for (const auto& [label, value] : claims) {
    auto idx = proto::index_of_label(pk.schema, label);
    if (!idx || *idx < proto::first_info_index(pk.schema))
      throw CliError{2, "not a claimable attribute: " + label};
  }

  if (plan.meta.contains("policy") && plan.meta["policy"].value("require_2fa", false)) two_fa = true;

  auto nonce = from_hex(plan.meta["rp_nonce"].get<std::string>());
  if (!nonce) throw CliError{5, "relying party sent a malformed nonce"};

  proto::SignOnFlags flags;
  flags.guest = guest;
  flags.retrieval = plan.retrieval;
  flags.two_fa = two_fa;

  proto::SignOnRequest req;
  try {
    req = proto::prove_id(params, pk, stored, entry["idp_id"].get<std::string>(),
                          plan.meta["domain"].get<std::string>(), plan.y, plan.h, disclose_idx,
                          claims, flags, *nonce, ctx.now(), ctx.rng);
  } catch (const proto::ExpiredCredentialError& e) {
    throw CliError{6, std::string(e.what()) + "; run rotate or fetch-credential"};
  } catch (const std::invalid_argument& e) {
    throw CliError{2, e.what()};
  }

  auto r = rp.post_msg("/signon", "", req.serialize());
  auto result = json::parse(r->body, nullptr, false);
  if (r->status != 200 || result.is_discarded() || !result.contains("accepted"))
    throw CliError{5, "relying party error: " + remote_error(r)};

  bool accepted = result["accepted"].get<bool>();
  std::string line = accepted
                         ? "accepted (action: " + result.value("action", "") + ", account " +
                               result.value("account_id", "-") + ")"
                         : "rejected: " + result.value("reason", "?") + " - " +
                               result.value("message", "");
  emit(ctx, result, line);
  return accepted ? 0 : 5;
}

int cmd_status(Ctx& ctx) {
  auto ks = ctx.open_existing();
  json out{{"device_id", ks.data["device_id"]}, {"idps", json::object()}};
  std::string text = "device " + ks.data["device_id"].get<std::string>();
  for (const auto& [url, entry] : ks.data["idps"].items()) {
    json e{{"idp_id", entry.value("idp_id", "")},
           {"has_credential", entry.contains("credential")},
           {"pending_enroll", entry.contains("pending_enroll")},
           {"rotated", entry.contains("previous")}};
    text += "\n  " + url;
    if (entry.contains("credential")) {
      auto tp_day = entry["credential"]["tp_day"].get<uint64_t>();
      int64_t days_left = int64_t(tp_day) - int64_t(proto::day_of(ctx.now()));
      e["tp_day"] = tp_day;
      e["days_left"] = days_left;
      e["expired"] = days_left < 0;
      text += ": credential from " + entry.value("idp_id", "") +
              (days_left < 0 ? " (EXPIRED)" : ", " + std::to_string(days_left) + " days left");
    } else {
      text += ": no credential";
    }
    if (entry.contains("pending_enroll")) text += " [enrollment pending approval]";
    out["idps"][url] = e;
  }
  emit(ctx, out, text);
  return 0;
}

int cmd_add_device(Ctx& ctx, const std::string& idp_url, const std::string& login,
                   const std::string& password, bool complete, int wait_seconds) {
  auto ks = ctx.open_existing();
  Remote idp(idp_url);
  auto& entry = entry_for(ks, idp_url, false);
  auto device_id = ks.data["device_id"].get<std::string>();

  if (!complete && !entry.contains("pending_enroll")) {
    auto kp = proto::enroll_begin();
    auto salt = svc::random_hex(4);
    auto token = ensure_session(idp, entry, login, password);

    proto::EnrollInitMsg init;
    init.device_id = device_id;
    init.device_pk = kp.pk;
    auto r = idp.post_msg("/devices/enroll-init", token, init.serialize());
    if (r->status != 200)
      throw CliError{5, "issuer refused the enrollment: " + remote_error(r)};

    entry["pending_enroll"] = {{"sk", to_hex(kp.sk)}, {"pk", to_hex(kp.pk)}, {"salt", salt}};
    ks.save();
    auto fp = proto::enroll_fingerprint(kp.pk, salt);
    emit(ctx, {{"device_id", device_id}, {"salt", salt}, {"fingerprint", fp}},
         "enrollment started for device " + device_id +
             "\non your existing device, check the fingerprint and run:\n  elpasso approve-device"
             " --idp " + idp_url + " --device " + device_id + " --salt " + salt +
             " --fingerprint " + fp);
    if (wait_seconds <= 0) return 0;
  }

  if (!entry.contains("pending_enroll"))
    throw CliError{2, "no enrollment in progress; run add-device without --complete first"};

  auto sk_bytes = from_hex(entry["pending_enroll"]["sk"].get<std::string>());
  auto pk_bytes = from_hex(entry["pending_enroll"]["pk"].get<std::string>());
  if (!sk_bytes || !pk_bytes || sk_bytes->size() != crypto_box_SECRETKEYBYTES ||
      pk_bytes->size() != crypto_box_PUBLICKEYBYTES)
    throw CliError{3, "corrupted enrollment state in keystore"};
  proto::EnrollKeyPair kp;
  std::copy(sk_bytes->begin(), sk_bytes->end(), kp.sk.begin());
  std::copy(pk_bytes->begin(), pk_bytes->end(), kp.pk.begin());

  auto token = ensure_session(idp, entry, login, password);
  httplib::Headers hdrs{{"Authorization", "Bearer " + token}};
  auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(std::max(wait_seconds, 0));
  httplib::Result r{nullptr, httplib::Error::Unknown};
  for (;;) {
    r = idp.get("/devices/enroll-fetch?device=" + device_id, hdrs);
    if (r->status == 200 || std::chrono::steady_clock::now() >= deadline) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(400));
  }
  if (r->status != 200)
    throw CliError{5, "enrollment not approved yet: " + remote_error(r)};

  std::vector<uint8_t> body(r->body.begin(), r->body.end());
  auto msg = proto::EnrollTransferMsg::deserialize(body);
  if (!msg || msg->type != proto::MsgType::enroll_complete)
    throw CliError{5, "issuer sent a malformed enrollment transfer"};
  auto s = proto::enroll_complete(kp, msg->sealed_secret);
  if (!s) throw CliError{5, "sealed secret did not open; it was tampered with or misrouted"};

  entry["s"] = scalar_hex(*s);
  entry["s_d"] = scalar_hex(random_nonzero_scalar(ctx.rng));  // fresh per device
  entry.erase("pending_enroll");
  ks.save();
  emit(ctx, {{"enrolled", true}, {"device_id", device_id}},
       "device " + device_id + " enrolled; run fetch-credential to get its credential");
  return 0;
}

int cmd_approve_device(Ctx& ctx, const std::string& idp_url, const std::string& device_id,
                       const std::string& salt, const std::string& fingerprint,
                       const std::string& login, const std::string& password) {
  auto ks = ctx.open_existing();
  Remote idp(idp_url);
  auto& entry = entry_for(ks, idp_url, true);
  if (!entry.contains("s")) throw CliError{3, "this device holds no secret for " + idp_url};
  auto s = scalar_from_hex(entry["s"].get<std::string>());

  auto token = ensure_session(idp, entry, login, password);
  ks.save();  // session may have been refreshed
  httplib::Headers hdrs{{"Authorization", "Bearer " + token}};
  auto r = idp.get("/devices/enroll-pending", hdrs);
  if (r->status != 200) throw CliError{5, "issuer refused: " + remote_error(r)};
  auto pending = json::parse(r->body, nullptr, false);
  if (pending.is_discarded()) throw CliError{5, "issuer sent malformed pending list"};

  std::optional<std::vector<uint8_t>> device_pk;
  for (const auto& p : pending)
    if (p.value("device_id", "") == device_id) device_pk = from_hex(p["device_pk"].get<std::string>());
  if (!device_pk) throw CliError{5, "no pending enrollment for device " + device_id};

  std::vector<uint8_t> sealed;
  try {
    sealed = proto::enroll_approve(s, *device_pk, salt, fingerprint);
  } catch (const std::invalid_argument& e) {
    throw CliError{5, std::string(e.what()) + "; NOT approving"};
  }

  proto::EnrollTransferMsg msg;
  msg.type = proto::MsgType::enroll_approve;
  msg.device_id = device_id;
  msg.sealed_secret = std::move(sealed);
  auto ar = idp.post_msg("/devices/enroll-approve", token, msg.serialize());
  if (ar->status != 200) throw CliError{5, "issuer refused the approval: " + remote_error(ar)};
  emit(ctx, {{"approved", true}, {"device_id", device_id}}, "device " + device_id + " approved");
  return 0;
}

int cmd_rotate(Ctx& ctx, const std::string& idp_url, const std::string& rp_url,
               const std::string& login, const std::string& password) {
  auto ks = ctx.open_existing();
  auto& entry = entry_for(ks, idp_url, true);
  if (!entry.contains("credential")) throw CliError{3, "nothing to rotate for " + idp_url};

  auto params = setup(128);
  auto pk = pk_from_entry(entry);
  Remote idp(idp_url);
  Remote rp(rp_url);

  bool continuing = entry.contains("previous");
  proto::StoredCredential old_cred;
  Scalar old_s;
  proto::UserSecrets fresh;
  proto::StoredCredential new_cred;

  if (continuing) {
    // a rotation already happened at another relying party; replay the same
    // old/new pair so every account lands on the same replacement pseudonym
    old_s = scalar_from_hex(entry["previous"]["s"].get<std::string>());
    old_cred = credential_from_json(entry["previous"]["credential"]);
    fresh.s = scalar_from_hex(entry["s"].get<std::string>());
    fresh.s_d = scalar_from_hex(entry["s_d"].get<std::string>());
    new_cred = credential_from_json(entry["credential"]);
  } else {
    old_s = scalar_from_hex(entry["s"].get<std::string>());
    old_cred = credential_from_json(entry["credential"]);
    fresh.s = random_nonzero_scalar(ctx.rng);
    fresh.s_d = scalar_from_hex(entry["s_d"].get<std::string>());

    auto token = ensure_session(idp, entry, login, password);
    std::vector<std::string> info_request;
    for (uint32_t i = proto::first_info_index(pk.schema); i < pk.schema.n(); ++i)
      info_request.push_back(pk.schema.attrs[i].label);
    auto device_id = ks.data["device_id"].get<std::string>();
    auto prepared = proto::request_id(params, pk, fresh, device_id, info_request, ctx.rng);
    auto r = idp.post_msg("/request-id", token, prepared.msg.serialize());
    if (r->status != 200)
      throw CliError{5, "issuer refused the replacement credential: " + remote_error(r)};
    std::vector<uint8_t> reply_bytes(r->body.begin(), r->body.end());
    auto reply = proto::BlindedCredentialMsg::deserialize(reply_bytes);
    if (!reply) throw CliError{5, "issuer sent a malformed credential"};
    std::span<const uint8_t> mask_key(reinterpret_cast<const uint8_t*>(token.data()), token.size());
    new_cred = proto::unblind_id(params, pk, fresh, prepared.d, *reply, mask_key);
  }

  auto plan = plan_signon(ks, rp, idp_url, false);
  auto nonce = from_hex(plan.meta["rp_nonce"].get<std::string>());
  if (!nonce) throw CliError{5, "relying party sent a malformed nonce"};
  bool with_retrieval = plan.meta.contains("authorities");
  if (with_retrieval) {
    auto yb = from_hex(plan.meta["authorities"]["y"].get<std::string>());
    auto hb = from_hex(plan.meta["authorities"]["h"].get<std::string>());
    auto y = yb ? G1::deserialize(*yb) : std::nullopt;
    auto h = hb ? G1::deserialize(*hb) : std::nullopt;
    if (!y || !h) throw CliError{5, "relying party sent malformed authority keys"};
    plan.y = *y;
    plan.h = *h;
  }

  proto::RotationRequest rot;
  try {
    rot = proto::rotate_secret(params, pk, old_cred, new_cred,
                               entry["idp_id"].get<std::string>(),
                               plan.meta["domain"].get<std::string>(), plan.y, plan.h,
                               with_retrieval, *nonce, ctx.now(), ctx.rng);
  } catch (const std::invalid_argument& e) {
    throw CliError{2, e.what()};
  }

  auto r = rp.post_msg("/rotate", "", rot.serialize());
  auto result = json::parse(r->body, nullptr, false);
  if (r->status != 200 || result.is_discarded() || !result.contains("accepted"))
    throw CliError{5, "relying party error: " + remote_error(r)};
  if (!result["accepted"].get<bool>()) {
    emit(ctx, result,
         "rotation rejected: " + result.value("reason", "?") + " - " + result.value("message", ""));
    return 5;
  }

  if (!continuing) {
    entry["previous"] = {{"s", scalar_hex(old_s)},
                         {"credential", entry["credential"]}};
    entry["s"] = scalar_hex(fresh.s);
    entry["credential"] = credential_to_json(new_cred);
    ks.save();
  }
  emit(ctx, result, "rotated at " + plan.meta["domain"].get<std::string>() + ": account " +
                        result.value("account_id", "-"));
  return 0;
}

int cmd_report_stolen(Ctx& ctx, const std::string& idp_url, const std::string& device_id,
                      const std::string& login, const std::string& password) {
  auto ks = ctx.open_existing();
  Remote idp(idp_url);
  auto& entry = entry_for(ks, idp_url, true);
  auto token = ensure_session(idp, entry, login, password);
  ks.save();
  httplib::Headers hdrs{{"Authorization", "Bearer " + token}};
  auto r = idp.post("/devices/revoke", hdrs, json{{"device_id", device_id}}.dump(),
                    "application/json");
  if (r->status != 200) throw CliError{5, "issuer refused the revocation: " + remote_error(r)};
  emit(ctx, {{"revoked", true}, {"device_id", device_id}},
       "device " + device_id + " revoked; it can no longer obtain credentials");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Ctx ctx;
  const char* env_ks = ::getenv("ELPASSO_KEYSTORE");
  ctx.keystore_path = env_ks ? env_ks : "elpasso.keystore";

  CLI::App app{"privacy-preserving single sign-on wallet"};
  app.require_subcommand(1);
  app.add_option("--keystore", ctx.keystore_path, "keystore path (or ELPASSO_KEYSTORE)");
  app.add_flag("--json", ctx.json_out, "machine-readable output");
  app.add_option("--time-offset", ctx.time_offset, "clock adjustment in seconds (testing)");

  auto* init = app.add_subcommand("init", "create an empty keystore");
  std::string device_id;
  init->add_option("--device-id", device_id, "name for this device");

  std::string idp_url, rp_url, login, password;
  auto* fetch = app.add_subcommand("fetch-credential", "obtain a credential from an issuer");
  fetch->add_option("--idp", idp_url, "issuer base URL")->required();
  fetch->add_option("--login", login, "issuer account login");
  fetch->add_option("--password", password, "issuer account password");

  auto* signon = app.add_subcommand("signon", "sign on at a relying party");
  std::string signon_idp;
  std::vector<std::string> disclose, claims;
  bool guest = false, two_fa = false, retrieval = false;
  signon->add_option("--rp", rp_url, "relying party base URL")->required();
  signon->add_option("--idp", signon_idp, "issuer URL when several identities match");
  signon->add_option("--disclose", disclose, "attribute labels to reveal");
  signon->add_option("--claim", claims, "label=value equality claims over hidden attributes");
  signon->add_flag("--guest", guest, "leave no account: prove validity only");
  signon->add_flag("--2fa", two_fa, "include the second-device factor");
  signon->add_flag("--retrieval", retrieval, "attach an identity-retrieval token");

  auto* status = app.add_subcommand("status", "show what the keystore holds");

  auto* add_dev = app.add_subcommand("add-device", "enroll this device under an existing identity");
  bool complete = false;
  int wait_seconds = 0;
  add_dev->add_option("--idp", idp_url, "issuer base URL")->required();
  add_dev->add_option("--login", login, "issuer account login");
  add_dev->add_option("--password", password, "issuer account password");
  add_dev->add_flag("--complete", complete, "finish a previously started enrollment");
  add_dev->add_option("--wait", wait_seconds, "poll for approval up to this many seconds");

  auto* approve = app.add_subcommand("approve-device", "approve a new device from this one");
  std::string ap_device, ap_salt, ap_fp;
  approve->add_option("--idp", idp_url, "issuer base URL")->required();
  approve->add_option("--device", ap_device, "device id shown on the new device")->required();
  approve->add_option("--salt", ap_salt, "salt shown on the new device")->required();
  approve->add_option("--fingerprint", ap_fp, "fingerprint shown on the new device")->required();
  approve->add_option("--login", login, "issuer account login");
  approve->add_option("--password", password, "issuer account password");

  auto* rotate = app.add_subcommand("rotate", "replace a compromised secret at a relying party");
  rotate->add_option("--idp", idp_url, "issuer base URL")->required();
  rotate->add_option("--rp", rp_url, "relying party base URL")->required();
  rotate->add_option("--login", login, "issuer account login");
  rotate->add_option("--password", password, "issuer account password");

  auto* stolen = app.add_subcommand("report-stolen", "revoke a device at the issuer");
  stolen->add_option("--idp", idp_url, "issuer base URL")->required();
  stolen->add_option("--device", ap_device, "device id to revoke")->required();
  stolen->add_option("--login", login, "issuer account login");
  stolen->add_option("--password", password, "issuer account password");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (init->parsed()) return cmd_init(ctx, device_id);
    if (fetch->parsed()) return cmd_fetch_credential(ctx, idp_url, login, password);
    if (signon->parsed())
      return cmd_signon(ctx, rp_url, signon_idp, disclose, claims, guest, two_fa, retrieval);
    if (status->parsed()) return cmd_status(ctx);
    if (add_dev->parsed())
      return cmd_add_device(ctx, idp_url, login, password, complete, wait_seconds);
    if (approve->parsed())
      return cmd_approve_device(ctx, idp_url, ap_device, ap_salt, ap_fp, login, password);
    if (rotate->parsed()) return cmd_rotate(ctx, idp_url, rp_url, login, password);
    if (stolen->parsed()) return cmd_report_stolen(ctx, idp_url, ap_device, login, password);
  } catch (const CliError& e) {
    fprintf(stderr, "error: %s\n", e.msg.c_str());
    return e.code;
  } catch (const std::exception& e) {
    fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
