// Integration tests against the real service binaries: each case boots its
// own issuer/relying-party stack on loopback ports and talks to it over HTTP,
// either through the header library or through the wallet CLI.

#include <catch2/catch_amalgamated.hpp>

#include <fcntl.h>
#include <sys/file.h>

#include <regex>

#include "elpasso/hex.hpp"
#include "service_harness.hpp"

using namespace elpasso;
namespace proto = elpasso::protocol;
using harness::Stack;
using json = nlohmann::json;

namespace {

const PublicParams& params() {
  static PublicParams p = setup(128);
  return p;
}

pscred::IdpPublicKey fetch_pk(Stack& st) {
  auto cli = harness::client(st.idp_port);
  auto r = cli.Get("/pk");
  REQUIRE(r);
  REQUIRE(r->status == 200);
  std::vector<uint8_t> bytes(r->body.begin(), r->body.end());
  auto pk = pscred::IdpPublicKey::deserialize(bytes);
  REQUIRE(pk);
  REQUIRE(pscred::pk_consistent(params(), *pk));
  return *pk;
}

std::string mint_session(Stack& st, const std::string& login, const std::string& password) {
  auto cli = harness::client(st.idp_port);
  auto r = cli.Post("/session", json{{"login", login}, {"password", password}}.dump(),
                    "application/json");
  REQUIRE(r);
  REQUIRE(r->status == 200);
  return json::parse(r->body)["token"].get<std::string>();
}

std::span<const uint8_t> token_bytes(const std::string& token) {
  return {reinterpret_cast<const uint8_t*>(token.data()), token.size()};
}

// the whole client half of the setup phase, over the wire
proto::StoredCredential issue_credential(Stack& st, const pscred::IdpPublicKey& pk,
                                         const proto::UserSecrets& secrets,
                                         const std::string& token,
                                         const std::string& device_id, Rng& rng) {
  auto prep = proto::request_id(params(), pk, secrets, device_id, {"email", "tier"}, rng);
  auto cli = harness::client(st.idp_port);
  auto body = prep.msg.serialize();
  auto r = cli.Post("/request-id", {{"Authorization", "Bearer " + token}},
                    std::string(body.begin(), body.end()), "application/octet-stream");
  REQUIRE(r);
  REQUIRE(r->status == 200);
  std::vector<uint8_t> reply_bytes(r->body.begin(), r->body.end());
  auto reply = proto::BlindedCredentialMsg::deserialize(reply_bytes);
  REQUIRE(reply);
  return proto::unblind_id(params(), pk, secrets, prep.d, *reply, token_bytes(token));
}

json fetch_meta(Stack& st) {
  auto cli = harness::client(st.rp_port);
  auto r = cli.Get("/signon-meta");
  REQUIRE(r);
  REQUIRE(r->status == 200);
  return json::parse(r->body);
}

std::vector<uint8_t> nonce_of(const json& meta) {
  return *from_hex(meta["rp_nonce"].get<std::string>());
}

json post_signon(Stack& st, const std::vector<uint8_t>& bytes, int expect_status = 200) {
  auto cli = harness::client(st.rp_port);
  auto r = cli.Post("/signon", std::string(bytes.begin(), bytes.end()),
                    "application/octet-stream");
  REQUIRE(r);
  REQUIRE(r->status == expect_status);
  return json::parse(r->body);
}

uint64_t wall_now() { return uint64_t(::time(nullptr)); }

}  // namespace

TEST_CASE("issuer endpoints enforce auth, vetting, and device state", "[services]") {
  Stack st;
  st.start_idp();
  st.add_user("alice", "pw-alice", "primary");

  auto idp = harness::client(st.idp_port);

  SECTION("meta and key discovery") {
    auto r = idp.Get("/meta");
    REQUIRE(r);
    auto meta = json::parse(r->body);
    CHECK(meta["idp_id"] == "idp-main");
    CHECK(meta["device_secret_slot"] == true);
    CHECK(meta["info_labels"] == json::array({"email", "tier"}));

    auto pk_res = idp.Get("/pk");
    REQUIRE(pk_res);
    REQUIRE(pk_res->status == 200);
    REQUIRE(pk_res->has_header("ETag"));
    auto etag = pk_res->get_header_value("ETag");
    auto again = idp.Get("/pk", {{"If-None-Match", etag}});
    REQUIRE(again);
    CHECK(again->status == 304);

    fetch_pk(st);  // includes the pairing consistency check
  }

  SECTION("session and admin auth") {
    auto bad = idp.Post("/session", json{{"login", "alice"}, {"password", "nope"}}.dump(),
                        "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 401);

    auto noauth = idp.Post("/admin/users", json{{"login", "mallory"}, {"password", "x"}}.dump(),
                           "application/json");
    REQUIRE(noauth);
    CHECK(noauth->status == 401);

    auto dup = idp.Post("/admin/users", {{"Authorization", "Bearer admintok"}},
                        json{{"login", "alice"}, {"password", "x"}}.dump(), "application/json");
    REQUIRE(dup);
    CHECK(dup->status == 409);
  }

  SECTION("credential requests are gated per session, device, and proof") {
    SystemRng rng;
    auto pk = fetch_pk(st);
    auto secrets = proto::UserSecrets::generate(rng);

    auto prep = proto::request_id(params(), pk, secrets, "primary", {"email", "tier"}, rng);
    auto body = prep.msg.serialize();
    std::string body_str(body.begin(), body.end());

    auto anon = idp.Post("/request-id", body_str, "application/octet-stream");
    REQUIRE(anon);
    CHECK(anon->status == 401);

    auto stale = idp.Post("/request-id", {{"Authorization", "Bearer deadbeef"}}, body_str,
                          "application/octet-stream");
    REQUIRE(stale);
    CHECK(stale->status == 401);

    auto token = mint_session(st, "alice", "pw-alice");
    httplib::Headers auth{{"Authorization", "Bearer " + token}};

    auto ghost_prep = proto::request_id(params(), pk, secrets, "ghost", {"email", "tier"}, rng);
    auto ghost_body = ghost_prep.msg.serialize();
    auto ghost = idp.Post("/request-id", auth, std::string(ghost_body.begin(), ghost_body.end()),
                          "application/octet-stream");
    REQUIRE(ghost);
    CHECK(ghost->status == 404);

    // splice the opening proof of one request into another: commitment and
    // proof no longer match, so issuance must refuse
    auto other = proto::request_id(params(), pk, secrets, "primary", {"email", "tier"}, rng);
    auto spliced_msg = prep.msg;
    spliced_msg.request.opening_proof = other.msg.request.opening_proof;
    auto spliced = spliced_msg.serialize();
    auto refused = idp.Post("/request-id", auth, std::string(spliced.begin(), spliced.end()),
                            "application/octet-stream");
    REQUIRE(refused);
    CHECK(refused->status == 422);

    // the honest request still goes through and unblinds to a valid credential
    auto stored = issue_credential(st, pk, secrets, token, "primary", rng);
    CHECK(stored.tp_day >= proto::day_of(wall_now()));

    // revocation flips the device to 403 and double-revocation reports 409
    auto missing = idp.Post("/devices/revoke", auth, json{{"device_id", "ghost"}}.dump(),
                            "application/json");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    auto revoked = idp.Post("/devices/revoke", auth, json{{"device_id", "primary"}}.dump(),
                            "application/json");
    REQUIRE(revoked);
    CHECK(revoked->status == 200);
    auto after = idp.Post("/request-id", auth, body_str, "application/octet-stream");
    REQUIRE(after);
    CHECK(after->status == 403);
    auto again = idp.Post("/devices/revoke", auth, json{{"device_id", "primary"}}.dump(),
                          "application/json");
    REQUIRE(again);
    CHECK(again->status == 409);
  }

  SECTION("recovery lookup requires the authority token") {
    auto noauth = idp.Post("/lookup", json{{"h_gamma", "00"}}.dump(), "application/json");
    REQUIRE(noauth);
    CHECK(noauth->status == 401);
    auto unknown = idp.Post("/lookup", {{"Authorization", "Bearer authtok"}},
                            json{{"h_gamma", "0011"}}.dump(), "application/json");
    REQUIRE(unknown);
    CHECK(unknown->status == 404);
  }
}

TEST_CASE("issuance and enrollment transcripts carry no bare secrets", "[services]") {
  Stack st;
  st.start_idp();
  st.add_user("alice", "pw-alice", "primary");

  SystemRng rng;
  std::vector<std::string> transcript;  // every response body the wire saw
  auto idp = harness::client(st.idp_port);

  auto record = [&](const httplib::Result& r) {
    REQUIRE(r);
    transcript.push_back(r->body);
  };

  record(idp.Get("/meta"));
  record(idp.Get("/pk"));

  auto pk = fetch_pk(st);
  auto secrets = proto::UserSecrets::generate(rng);
  auto token = mint_session(st, "alice", "pw-alice");
  httplib::Headers auth{{"Authorization", "Bearer " + token}};

  auto prep = proto::request_id(params(), pk, secrets, "primary", {"email", "tier"}, rng);
  auto req_body = prep.msg.serialize();
  transcript.emplace_back(req_body.begin(), req_body.end());  // what the client sends, too
  auto issued = idp.Post("/request-id", auth, std::string(req_body.begin(), req_body.end()),
                         "application/octet-stream");
  record(issued);
  std::vector<uint8_t> reply_bytes(issued->body.begin(), issued->body.end());
  auto reply = proto::BlindedCredentialMsg::deserialize(reply_bytes);
  REQUIRE(reply);
  auto stored = proto::unblind_id(params(), pk, secrets, prep.d, *reply, token_bytes(token));

  // second-device enrollment: init from the new device, approve from the old
  auto kp = proto::enroll_begin();
  proto::EnrollInitMsg init;
  init.device_id = "laptop";
  init.device_pk = kp.pk;
  auto init_body = init.serialize();
  transcript.emplace_back(init_body.begin(), init_body.end());
  record(idp.Post("/devices/enroll-init", auth, std::string(init_body.begin(), init_body.end()),
                  "application/octet-stream"));
  REQUIRE(transcript.back().empty() == false);

  auto pending = idp.Get("/devices/enroll-pending", auth);
  record(pending);
  auto plist = json::parse(pending->body);
  REQUIRE(plist.size() == 1);
  auto device_pk = *from_hex(plist[0]["device_pk"].get<std::string>());
  auto fp = proto::enroll_fingerprint(device_pk, "saltsalt");
  auto sealed = proto::enroll_approve(secrets.s, device_pk, "saltsalt", fp);
  proto::EnrollTransferMsg transfer;
  transfer.device_id = "laptop";
  transfer.sealed_secret = sealed;
  auto approve_body = transfer.serialize();
  record(idp.Post("/devices/enroll-approve", auth,
                  std::string(approve_body.begin(), approve_body.end()),
                  "application/octet-stream"));

  auto fetched = idp.Get("/devices/enroll-fetch?device=laptop", auth);
  record(fetched);
  REQUIRE(fetched->status == 200);

  // the issuer must relay the sealed box byte for byte: it cannot read it,
  // so it has no business transforming it
  std::vector<uint8_t> fetched_bytes(fetched->body.begin(), fetched->body.end());
  auto relayed = proto::EnrollTransferMsg::deserialize(fetched_bytes);
  REQUIRE(relayed);
  CHECK(relayed->sealed_secret == sealed);
  auto recovered_s = proto::enroll_complete(kp, relayed->sealed_secret);
  REQUIRE(recovered_s);
  CHECK(*recovered_s == secrets.s);

  // gamma lives in the issuer's own store; the wire must never show it bare
  auto users_log = harness::read_file(st.dir.file("idp/users.jsonl"));
  auto user_line = json::parse(users_log.substr(0, users_log.find('\n')));
  std::string gamma_hex = user_line["gamma"].get<std::string>();
  REQUIRE(gamma_hex.size() == 64);

  std::vector<std::string> forbidden{
      to_hex(secrets.s.to_bytes()),
      to_hex(secrets.s_d.to_bytes()),
      gamma_hex,
  };
  for (const auto& body : transcript) {
    std::string body_hex = to_hex(std::span(reinterpret_cast<const uint8_t*>(body.data()),
                                            body.size()));
    for (const auto& bad : forbidden) {
      INFO("secret " << bad.substr(0, 12) << "... leaked into a transcript body");
      CHECK(body_hex.find(bad) == std::string::npos);
    }
  }

  // and the masked gamma on the wire still unblinds to the real one: the
  // issuer can find the account back through exp(h, gamma)
  G1 h = hash_to_g1(retrieval::H_GENERATOR_SEED);
  auto lookup = idp.Post("/lookup", {{"Authorization", "Bearer authtok"}},
                         json{{"h_gamma",
                               to_hex(exp(h, stored.attrs[proto::ATTR_GAMMA]).serialize())}}
                             .dump(),
                         "application/json");
  REQUIRE(lookup);
  REQUIRE(lookup->status == 200);
  CHECK(json::parse(lookup->body)["login"] == "alice");
}

TEST_CASE("relying party rejects tampering, replay, and policy misses over http", "[services]") {
  Stack st;
  st.start_idp();
  st.add_user("alice", "pw-alice", "primary");
  st.start_rp();

  SystemRng rng;
  auto pk = fetch_pk(st);
  auto secrets = proto::UserSecrets::generate(rng);
  auto token = mint_session(st, "alice", "pw-alice");
  auto stored = issue_credential(st, pk, secrets, token, "primary", rng);

  auto meta = fetch_meta(st);
  CHECK(meta["domain"] == "forum.example");
  CHECK(meta["accepted_idps"] == json::array({"idp-main"}));
  CHECK_FALSE(meta.contains("authorities"));

  auto prove = [&](const json& m, proto::SignOnFlags flags,
                   std::vector<std::pair<std::string, std::string>> claims = {}) {
    return proto::prove_id(params(), pk, stored, "idp-main", m["domain"].get<std::string>(),
                           params().g, params().g, {}, claims, flags, nonce_of(m), wall_now(),
                           rng);
  };

  // an honest first sign-on creates the account, the second matches it
  auto first = post_signon(st, prove(meta, {}).serialize());
  CHECK(first["accepted"] == true);
  CHECK(first["action"] == "created");
  auto account_id = first["account_id"].get<std::string>();
  REQUIRE(!account_id.empty());

  auto meta2 = fetch_meta(st);
  auto req2 = prove(meta2, {});
  auto second = post_signon(st, req2.serialize());
  CHECK(second["accepted"] == true);
  CHECK(second["action"] == "matched");
  CHECK(second["account_id"] == account_id);

  SECTION("replays and unissued nonces are refused") {
    auto replay = post_signon(st, req2.serialize());
    CHECK(replay["accepted"] == false);
    CHECK(replay["reason"] == "replay");

    json fake_meta = meta2;
    fake_meta["rp_nonce"] = "00112233445566778899aabbccddeeff";  // never issued
    auto unissued = post_signon(st, prove(fake_meta, {}).serialize());
    CHECK(unissued["accepted"] == false);
    CHECK(unissued["reason"] == "replay");
  }

  SECTION("requests bound to another domain or issuer bounce") {
    json foreign = fetch_meta(st);
    foreign["domain"] = "other.example";
    auto wrong_domain = post_signon(st, prove(foreign, {}).serialize());
    CHECK(wrong_domain["accepted"] == false);
    CHECK(wrong_domain["reason"] == "bad-request");

    auto m = fetch_meta(st);
    auto req = proto::prove_id(params(), pk, stored, "idp-other", "forum.example", params().g,
                               params().g, {}, {}, {}, nonce_of(m), wall_now(), rng);
    auto unknown = post_signon(st, req.serialize());
    CHECK(unknown["accepted"] == false);
    CHECK(unknown["reason"] == "unknown-idp");
  }

  SECTION("claim tampering and false claims fail the proof") {
    auto m = fetch_meta(st);
    auto req = prove(m, {}, {{"tier", "gold"}});
    req.equality_claims[0].second = "platinum";  // flip the claim after proving
    auto tampered = post_signon(st, req.serialize());
    CHECK(tampered["accepted"] == false);
    CHECK(tampered["reason"] == "bad-proof");

    // a false claim never leaves the wallet: the prover checks its own
    // statement and refuses to fabricate an unsatisfiable proof
    auto m2 = fetch_meta(st);
    CHECK_THROWS_AS(prove(m2, {}, {{"tier", "platinum"}}), std::invalid_argument);
  }

  SECTION("garbage and envelope mismatches get 400") {
    auto cli = harness::client(st.rp_port);
    auto garbage = cli.Post("/signon", "not a protocol message", "application/octet-stream");
    REQUIRE(garbage);
    CHECK(garbage->status == 400);
  }

  SECTION("policy gates report policy-unmet") {
    st.rp_cfg["require_2fa"] = true;
    st.restart_rp();
    auto m = fetch_meta(st);
    CHECK(m["policy"]["require_2fa"] == true);
    auto res = post_signon(st, prove(m, {}).serialize());
    CHECK(res["accepted"] == false);
    CHECK(res["reason"] == "policy-unmet");
  }
}

TEST_CASE("abuse reports tolerate outages and identify forged partials", "[services]") {
  Stack st;
  st.start_idp();
  st.add_user("alice", "pw-alice", "primary");
  st.add_user("bob", "pw-bob", "primary");

  st.deal_authorities(3, 2);
  st.start_authority(1);
  st.start_authority(2);
  auto keyset = harness::load_keyset(st.dir.file("auth/keyset.pub"));

  // a third "authority" that signs wrong answers with a straight face
  harness::FakeAuthority forger;
  forger.start(params(), harness::load_share(st.dir.file("auth/share-3.bin")), /*forge=*/true);

  std::string auth1 = "http://127.0.0.1:" + std::to_string(st.authority_ports[0]);
  std::string auth2 = "http://127.0.0.1:" + std::to_string(st.authority_ports[1]);
  std::string dead = "http://127.0.0.1:9";  // discard port, nothing listens

  // tokens are optional for users here, so bob can opt out
  st.rp_cfg["keyset_file"] = st.dir.file("auth/keyset.pub");
  st.rp_cfg["authorities"] = json::array({auth1, dead, auth2});
  st.start_rp();

  SystemRng rng;
  auto pk = fetch_pk(st);

  auto signon_with = [&](const proto::StoredCredential& stored, bool with_token) {
    auto meta = fetch_meta(st);
    proto::SignOnFlags flags;
    flags.retrieval = with_token;
    auto req = proto::prove_id(params(), pk, stored, "idp-main",
                               meta["domain"].get<std::string>(), keyset.y, keyset.h, {}, {},
                               flags, nonce_of(meta), wall_now(), rng);
    return post_signon(st, req.serialize());
  };

  auto alice = proto::UserSecrets::generate(rng);
  auto alice_cred = issue_credential(st, pk, alice, mint_session(st, "alice", "pw-alice"),
                                     "primary", rng);
  auto res_a = signon_with(alice_cred, true);
  REQUIRE(res_a["accepted"] == true);
  auto alice_account = res_a["account_id"].get<std::string>();

  auto bob = proto::UserSecrets::generate(rng);
  auto bob_cred = issue_credential(st, pk, bob, mint_session(st, "bob", "pw-bob"), "primary",
                                   rng);
  auto res_b = signon_with(bob_cred, false);
  REQUIRE(res_b["accepted"] == true);
  auto bob_account = res_b["account_id"].get<std::string>();

  auto rp = harness::client(st.rp_port);

  SECTION("report needs a real account with a stored token") {
    auto missing = rp.Post("/report", json{{"account_id", "feedfeedfeedfeed"}}.dump(),
                           "application/json");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    auto tokenless = rp.Post("/report", json{{"account_id", bob_account}}.dump(),
                             "application/json");
    REQUIRE(tokenless);
    CHECK(tokenless->status == 409);
  }

  SECTION("two live authorities out of three recover the handle") {
    auto r = rp.Post("/report", json{{"account_id", alice_account}}.dump(), "application/json");
    REQUIRE(r);
    REQUIRE(r->status == 200);
    auto out = json::parse(r->body);
    CHECK(out["partials_used"] == 2);
    REQUIRE(out.contains("offline"));
    CHECK(out["offline"] == json::array({dead}));

    // the recovered group element is the issuer's lookup key for alice
    auto idp = harness::client(st.idp_port);
    auto lookup = idp.Post("/lookup", {{"Authorization", "Bearer authtok"}},
                           json{{"h_gamma", out["recovered"].get<std::string>()}}.dump(),
                           "application/json");
    REQUIRE(lookup);
    REQUIRE(lookup->status == 200);
    CHECK(json::parse(lookup->body)["login"] == "alice");
  }

  SECTION("a forged partial is pinned to the authority that sent it") {
    // restart the relying party with the forger in the authority list; the
    // account (and its retrieval token) must survive the restart via the log
    st.rp_cfg["authorities"] =
        json::array({auth1, auth2, "http://127.0.0.1:" + std::to_string(forger.port)});
    st.restart_rp();
    auto rp2 = harness::client(st.rp_port);

    auto r = rp2.Post("/report", json{{"account_id", alice_account}}.dump(), "application/json");
    REQUIRE(r);
    CHECK(r->status == 502);
    auto out = json::parse(r->body);
    CHECK(out["error"] == "bad-partial");
    CHECK(out["message"].get<std::string>().find("authority 3") != std::string::npos);
  }
}

TEST_CASE("rotation crosses the expiry boundary and retires the old pseudonym", "[services]") {
  Stack st;
  st.start_idp();
  st.add_user("alice", "pw-alice", "primary");
  st.start_rp();

  auto keystore = st.dir.file("wallet.keystore");
  auto cli = [&](std::vector<std::string> args) { return harness::run_cli(keystore, args); };

  REQUIRE(cli({"init", "--device-id", "primary"}).code == 0);
  auto fetched = cli({"fetch-credential", "--idp", st.idp_url, "--login", "alice", "--password",
                      "pw-alice"});
  REQUIRE(fetched.code == 0);

  auto first = cli({"--json", "signon", "--rp", st.rp_url});
  REQUIRE(first.code == 0);
  auto first_res = json::parse(first.out);
  REQUIRE(first_res["accepted"] == true);
  auto old_account = first_res["account_id"].get<std::string>();

  // move both services eight days into the future; the credential (seven-day
  // validity) is now expired from their point of view
  constexpr int64_t eight_days = 8 * 24 * 3600;
  st.idp_cfg["time_offset_seconds"] = eight_days;
  st.restart_idp();
  st.rp_cfg["time_offset_seconds"] = eight_days;
  st.restart_rp();

  auto expired = cli({"--json", "signon", "--rp", st.rp_url});
  CHECK(expired.code == 5);
  auto expired_res = json::parse(expired.out);
  CHECK(expired_res["accepted"] == false);
  CHECK(expired_res["reason"] == "expired");

  // the wallet itself refuses to build a sign-on once its own clock agrees
  auto local = cli({"--time-offset", std::to_string(eight_days), "signon", "--rp", st.rp_url});
  CHECK(local.code == 6);

  // the restarted issuer forgot its sessions, so sign in again for the
  // replacement credential
  auto rotated = cli({"--time-offset", std::to_string(eight_days), "rotate", "--idp", st.idp_url,
                      "--rp", st.rp_url, "--login", "alice", "--password", "pw-alice"});
  INFO(rotated.out << rotated.err);
  REQUIRE(rotated.code == 0);

  auto after = cli({"--time-offset", std::to_string(eight_days), "--json", "signon", "--rp",
                    st.rp_url});
  REQUIRE(after.code == 0);
  auto after_res = json::parse(after.out);
  CHECK(after_res["accepted"] == true);
  CHECK(after_res["action"] == "matched");  // the moved account, not a new one
  CHECK(after_res["account_id"] != old_account);

  // the old pseudonym is blocked, not merely forgotten
  auto rp = harness::client(st.rp_port);
  auto stats_res = rp.Get("/stats");
  REQUIRE(stats_res);
  auto stats = json::parse(stats_res->body);
  CHECK(stats["accounts"] == 1);
  CHECK(stats["blocked"] == 1);

  // and the keystore came out of the swap still serving status
  auto status = cli({"--time-offset", std::to_string(eight_days), "--json", "status"});
  REQUIRE(status.code == 0);
  auto sj = json::parse(status.out);
  CHECK(sj["idps"][st.idp_url]["rotated"] == true);
  CHECK(sj["idps"][st.idp_url]["expired"] == false);
}

TEST_CASE("wallet exit codes separate failure classes", "[services]") {
  Stack st;
  st.start_idp();
  st.add_user("alice", "pw-alice", "primary");

  auto keystore = st.dir.file("wallet.keystore");
  auto cli = [&](std::vector<std::string> args) { return harness::run_cli(keystore, args); };

  CHECK(cli({"signon"}).code == 2);                      // missing required --rp
  CHECK(cli({"status"}).code == 3);                      // no keystore yet
  REQUIRE(cli({"init", "--device-id", "primary"}).code == 0);
  CHECK(cli({"init"}).code == 3);                        // refuse to clobber

  // unreachable issuer: the discard port never answers
  CHECK(cli({"fetch-credential", "--idp", "http://127.0.0.1:9", "--login", "alice",
             "--password", "pw-alice"})
            .code == 4);

  // live issuer, wrong password: remote rejection
  CHECK(cli({"fetch-credential", "--idp", st.idp_url, "--login", "alice", "--password", "nope"})
            .code == 5);

  // someone else holds the keystore lock
  int lock_fd = ::open((keystore + ".lock").c_str(), O_CREAT | O_RDWR, 0600);
  REQUIRE(lock_fd >= 0);
  REQUIRE(::flock(lock_fd, LOCK_EX) == 0);
  CHECK(cli({"status"}).code == 7);
  ::flock(lock_fd, LOCK_UN);
  ::close(lock_fd);

  // wrong passphrase distinguishes itself from a missing keystore
  {
    std::string cmd = "env ELPASSO_KEYSTORE='" + keystore +
                      "' ELPASSO_PASSPHRASE=wrong-passphrase '" + harness::bin("elpasso") +
                      "' status >/dev/null 2>&1";
    int status = ::system(cmd.c_str());
    CHECK(WEXITSTATUS(status) == 3);
  }

  // the keystore at rest is ciphertext behind a short magic, not JSON
  auto raw = harness::read_file(keystore);
  REQUIRE(raw.size() > 6);
  CHECK(raw.compare(0, 6, "ELPKS1") == 0);
  CHECK(raw.find("\"idps\"") == std::string::npos);
  CHECK(raw.find("device_id") == std::string::npos);
}

TEST_CASE("service logs replay after a crash and skip torn tails", "[services]") {
  Stack st;
  st.start_idp();
  st.add_user("alice", "pw-alice", "primary");
  st.add_user("bob", "pw-bob", "primary");

  // crash the issuer mid-life and leave a torn half-record at the log tail,
  // as a power cut would
  st.idp_proc.stop(SIGKILL);
  {
    std::ofstream out(st.dir.file("idp/users.jsonl"), std::ios::app | std::ios::binary);
    out << "{\"op\":\"user\",\"login\":\"tru";  // no newline, cut mid-write
  }
  st.restart_idp();

  mint_session(st, "alice", "pw-alice");
  mint_session(st, "bob", "pw-bob");
  st.add_user("carol", "pw-carol", "primary");  // the log accepts appends again

  // corruption in the middle of the log is a different story: refuse to start
  st.idp_proc.stop(SIGKILL);
  auto log_path = st.dir.file("idp/users.jsonl");
  auto contents = harness::read_file(log_path);
  auto first_newline = contents.find('\n');
  REQUIRE(first_newline != std::string::npos);
  contents.insert(first_newline + 1, "{]{ not json\n");
  harness::write_file(log_path, contents);

  harness::Proc doomed;
  doomed.start({harness::bin("elpasso-idp"), "--config", st.dir.file("idp.json"), "--port-file",
                st.dir.file("idp2.port")});
  int code = doomed.wait_exit();
  CHECK(code > 0);  // exited by itself, unhappily
}
