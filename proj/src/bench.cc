// elpasso-bench: CPU-time and payload measurements for the protocol phases,
// plus a closed-loop load generator for a live issuer or relying party.
//
//   phases      time each phase in isolation, sweep schema sizes, dump sizes
//   throughput  hammer a running service and report ops/s with percentiles
//
// Phase timings use per-process CPU time with warmup iterations discarded;
// wall time only matters for the throughput command.

#include <time.h>

#include <CLI11.hpp>
#include <atomic>
#include <cmath>
#include <fstream>
#include <httplib.h>
#include <json.hpp>
#include <thread>

#include "elpasso/hex.hpp"
#include "elpasso/protocol.hpp"

using json = nlohmann::json;
using namespace elpasso;
namespace proto = elpasso::protocol;

namespace {

double cpu_now_us() {
  timespec ts{};
  clock_gettime(CLOCK_PROCESS_CPUTIME_ID, &ts);
  return double(ts.tv_sec) * 1e6 + double(ts.tv_nsec) / 1e3;
}

struct Stats {
  size_t n = 0;
  double mean_us = 0;
  double stdev_us = 0;

  json to_json() const { return {{"n", n}, {"mean_us", mean_us}, {"stdev_us", stdev_us}}; }
};

Stats stats_of(const std::vector<double>& xs) {
  Stats st;
  st.n = xs.size();
  if (xs.empty()) return st;
  for (double x : xs) st.mean_us += x;
  st.mean_us /= double(xs.size());
  if (xs.size() > 1) {
    double acc = 0;
    for (double x : xs) acc += (x - st.mean_us) * (x - st.mean_us);
    st.stdev_us = std::sqrt(acc / double(xs.size() - 1));
  }
  return st;
}

// run f() iters times after `warmup` throwaway rounds; per-call CPU deltas
template <class F>
Stats time_op(size_t iters, size_t warmup, F&& f) {
  std::vector<double> samples;
  samples.reserve(iters);
  for (size_t i = 0; i < warmup + iters; ++i) {
    double t0 = cpu_now_us();
    f();
    double dt = cpu_now_us() - t0;
    if (i >= warmup) samples.push_back(dt);
  }
  return stats_of(samples);
}

// ---------------------------------------------------------------------------
// a full issuer + user fixture for one schema size

std::vector<std::string> info_labels_for(size_t attrs) {
  // slots: s, gamma, tp always; s_d from four attributes up; info fills the rest
  size_t fixed = attrs >= 4 ? 4 : 3;
  std::vector<std::string> labels;
  for (size_t i = 0; i + fixed < attrs; ++i) labels.push_back("field" + std::to_string(i));
  return labels;
}

struct Fixture {
  PublicParams params = setup(128);
  std::vector<std::string> labels;
  pscred::IdpKeyPair kp;
  G1 h;
  proto::UserRecord user;
  proto::UserSecrets secrets;
  proto::StoredCredential stored;
  std::vector<uint8_t> mask_key{1, 2, 3, 4};
  uint64_t now;

  Fixture(size_t attrs, uint64_t now_, Rng& rng) : now(now_) {
    if (attrs < 3) throw std::invalid_argument("a schema needs at least 3 attributes");
    labels = info_labels_for(attrs);
    kp = pscred::keygen(params, proto::build_schema(attrs >= 4, labels), rng);
    h = hash_to_g1(retrieval::H_GENERATOR_SEED);
    std::map<std::string, std::string> info;
    for (const auto& l : labels) info[l] = "value-of-" + l;
    user = proto::create_user("bench-user", info, h, rng);
    user.devices["dev"] = {};
    secrets = proto::UserSecrets::generate(rng);
    stored = issue(rng);
  }

  proto::StoredCredential issue(Rng& rng) const {
    auto prep = proto::request_id(params, kp.pk, secrets, "dev", labels, rng);
    auto reply = proto::provide_id(params, kp, user, prep.msg, now, {7}, mask_key, rng);
    return proto::unblind_id(params, kp.pk, secrets, prep.d, reply, mask_key);
  }

  proto::SignOnRequest prove(proto::SignOnFlags flags, const G1& y, const G1& hh,
                             const std::set<uint32_t>& disclose,
                             std::span<const uint8_t> nonce, Rng& rng) const {
    return proto::prove_id(params, kp.pk, stored, "bench-idp", "bench.example", y, hh, disclose,
                           {}, flags, nonce, now, rng);
  }
};

// ---------------------------------------------------------------------------
// phases command

json bench_phases_at(size_t attrs, size_t iters, size_t warmup, uint64_t now, Rng& rng) {
  Fixture fx(attrs, now, rng);

  json out;
  out["request_id"] = time_op(iters, warmup, [&] {
                        proto::request_id(fx.params, fx.kp.pk, fx.secrets, "dev", fx.labels, rng);
                      }).to_json();

  auto prep = proto::request_id(fx.params, fx.kp.pk, fx.secrets, "dev", fx.labels, rng);
  out["provide_id"] = time_op(iters, warmup, [&] {
                        proto::provide_id(fx.params, fx.kp, fx.user, prep.msg, now, {7},
                                          fx.mask_key, rng);
                      }).to_json();

  auto reply = proto::provide_id(fx.params, fx.kp, fx.user, prep.msg, now, {7}, fx.mask_key, rng);
  out["unblind_id"] = time_op(iters, warmup, [&] {
                        proto::unblind_id(fx.params, fx.kp.pk, fx.secrets, prep.d, reply,
                                          fx.mask_key);
                      }).to_json();

  std::vector<uint8_t> nonce(16, 0x42);
  out["prove_id"] = time_op(iters, warmup, [&] {
                      fx.prove({}, fx.params.g, fx.params.g, {}, nonce, rng);
                    }).to_json();

  // nonce issue and request build happen off the clock; only the
  // verification is timed
  proto::NonceCache nonces;
  proto::AccountStore accounts;
  std::vector<double> samples;
  samples.reserve(iters);
  for (size_t i = 0; i < warmup + iters; ++i) {
    std::vector<uint8_t> n(16);
    for (size_t b = 0; b < 8; ++b) n[b] = uint8_t((i + 1) >> (8 * b));
    nonces.issue(n, now, 3600);
    auto req = fx.prove({}, fx.params.g, fx.params.g, {}, n, rng);
    double t0 = cpu_now_us();
    auto res = proto::verify_id(fx.params, fx.kp.pk, req, "bench.example", fx.params.g,
                                fx.params.g, now, nonces, accounts, {});
    double dt = cpu_now_us() - t0;
    if (!res.accepted) throw std::runtime_error("verify_id rejected during benchmarking");
    if (i >= warmup) samples.push_back(dt);
  }
  out["verify_id"] = stats_of(samples).to_json();
  return out;
}

json attr_sweep(size_t iters, size_t warmup, uint64_t now, Rng& rng) {
  json rows = json::array();
  for (size_t attrs = 3; attrs <= 13; ++attrs) {
    Fixture fx(attrs, now, rng);
    std::vector<uint8_t> nonce(16, 0x42);
    auto prove_stats = time_op(iters, warmup, [&] {
      fx.prove({}, fx.params.g, fx.params.g, {}, nonce, rng);
    });

    proto::NonceCache nonces;
    proto::AccountStore accounts;
    std::vector<double> verify_samples;
    for (size_t i = 0; i < warmup + iters; ++i) {
      std::vector<uint8_t> n(16);
      for (size_t b = 0; b < 8; ++b) n[b] = uint8_t((i + 1) >> (8 * b));
      nonces.issue(n, now, 3600);
      auto req = fx.prove({}, fx.params.g, fx.params.g, {}, n, rng);
      double t0 = cpu_now_us();
      proto::verify_id(fx.params, fx.kp.pk, req, "bench.example", fx.params.g, fx.params.g, now,
                       nonces, accounts, {});
      if (i >= warmup) verify_samples.push_back(cpu_now_us() - t0);
    }
    rows.push_back({{"attrs", attrs},
                    {"prove_id", prove_stats.to_json()},
                    {"verify_id", stats_of(verify_samples).to_json()}});
  }
  return rows;
}

// fixed 12-attribute schema, disclose progressively fewer info slots so more
// stay hidden; proving cost must grow with the hidden count
json hidden_sweep(size_t iters, size_t warmup, uint64_t now, Rng& rng) {
  constexpr size_t attrs = 12;
  Fixture fx(attrs, now, rng);
  uint32_t first_info = proto::first_info_index(fx.kp.pk.schema);
  size_t info_count = attrs - first_info;

  json rows = json::array();
  std::vector<uint8_t> nonce(16, 0x42);
  for (size_t disclosed = info_count + 1; disclosed-- > 0;) {
    std::set<uint32_t> disclose;
    for (size_t i = 0; i < disclosed; ++i) disclose.insert(first_info + uint32_t(i));
    // hidden = everything not disclosed, minus the always-public expiry slot
    size_t hidden = attrs - 1 - disclosed;
    auto st = time_op(iters, warmup, [&] {
      fx.prove({}, fx.params.g, fx.params.g, disclose, nonce, rng);
    });
    rows.push_back({{"hidden", hidden}, {"disclosed_info", disclosed},
                    {"prove_id", st.to_json()}});
  }
  return rows;
}

json payload_sizes(size_t attrs, uint64_t now, Rng& rng) {
  auto sizes_for = [&](size_t n_attrs) {
    Fixture fx(n_attrs, now, rng);
    auto keyset = retrieval::authority_keygen(fx.params, 3, 2, rng);

    json out;
    auto prep = proto::request_id(fx.params, fx.kp.pk, fx.secrets, "dev", fx.labels, rng);
    out["request_id_msg"] = prep.msg.serialize().size();
    auto reply =
        proto::provide_id(fx.params, fx.kp, fx.user, prep.msg, now, {7}, fx.mask_key, rng);
    out["blinded_credential_msg"] = reply.serialize().size();

    std::vector<uint8_t> nonce(16, 0x42);
    out["signon_request"] = fx.prove({}, fx.params.g, fx.params.g, {}, nonce, rng)
                                .serialize().size();
    proto::SignOnFlags with_token;
    with_token.retrieval = true;
    auto tokened = fx.prove(with_token, keyset.pub.y, keyset.pub.h, {}, nonce, rng);
    out["signon_request_retrieval"] = tokened.serialize().size();
    proto::SignOnFlags guest;
    guest.guest = true;
    out["signon_request_guest"] =
        fx.prove(guest, fx.params.g, fx.params.g, {}, nonce, rng).serialize().size();
    if (proto::schema_has_device_slot(fx.kp.pk.schema)) {
      proto::SignOnFlags two_fa;
      two_fa.two_fa = true;
      out["signon_request_2fa"] =
          fx.prove(two_fa, fx.params.g, fx.params.g, {}, nonce, rng).serialize().size();
    }

    // both rotation halves have the same shape, so one credential serves twice
    auto rot = proto::rotate_secret(fx.params, fx.kp.pk, fx.stored, fx.stored, "bench-idp",
                                    "bench.example", keyset.pub.y, keyset.pub.h, true, nonce,
                                    now, rng);
    out["rotation_request"] = rot.serialize().size();

    proto::RetrievalReportMsg report{"case-123456", *tokened.token};
    out["retrieval_report_msg"] = report.serialize().size();
    auto pd = retrieval::partial_decrypt(fx.params, keyset.shares[0], *tokened.token, rng);
    out["partial_decryption"] = pd.serialize().size();

    auto ek = proto::enroll_begin();
    proto::EnrollInitMsg init;
    init.device_id = "device-two";
    init.device_pk = ek.pk;
    out["enroll_init_msg"] = init.serialize().size();
    auto fp = proto::enroll_fingerprint(ek.pk, "salt");
    proto::EnrollTransferMsg transfer;
    transfer.device_id = "device-two";
    transfer.sealed_secret = proto::enroll_approve(fx.secrets.s, ek.pk, "salt", fp);
    out["enroll_transfer_msg"] = transfer.serialize().size();
    return out;
  };

  json out;
  out["attrs_3"] = sizes_for(3);
  if (attrs != 3) out["attrs_" + std::to_string(attrs)] = sizes_for(attrs);
  return out;
}

void write_sweep_csv(const std::string& path, const json& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "table,param,op,n,mean_us,stdev_us\n";
  for (const auto& row : report["attr_sweep"]) {
    for (const char* op : {"prove_id", "verify_id"}) {
      out << "attr_sweep," << row["attrs"] << ',' << op << ',' << row[op]["n"] << ','
          << row[op]["mean_us"] << ',' << row[op]["stdev_us"] << '\n';
    }
  }
  for (const auto& row : report["hidden_sweep"]) {
    out << "hidden_sweep," << row["hidden"] << ",prove_id," << row["prove_id"]["n"] << ','
        << row["prove_id"]["mean_us"] << ',' << row["prove_id"]["stdev_us"] << '\n';
  }
}

void print_phase_table(const json& report) {
  printf("per-phase CPU time, %zu-attribute schema (%s iterations, %s warmup):\n",
         size_t(report["config"]["attrs"]), report["config"]["iters"].dump().c_str(),
         report["config"]["warmup"].dump().c_str());
  for (const char* op : {"request_id", "provide_id", "unblind_id", "prove_id", "verify_id"}) {
    const auto& st = report["phases"][op];
    printf("  %-12s mean %8.0f us   stdev %7.0f us   n=%zu\n", op,
           st["mean_us"].get<double>(), st["stdev_us"].get<double>(), size_t(st["n"]));
  }
  printf("\nattribute sweep (prove_id / verify_id mean us):\n");
  for (const auto& row : report["attr_sweep"]) {
    printf("  n=%2zu  prove %8.0f   verify %8.0f\n", size_t(row["attrs"]),
           row["prove_id"]["mean_us"].get<double>(), row["verify_id"]["mean_us"].get<double>());
  }
  printf("\nhidden-count sweep at 12 attributes (prove_id mean us):\n");
  for (const auto& row : report["hidden_sweep"]) {
    printf("  hidden=%2zu  prove %8.0f\n", size_t(row["hidden"]),
           row["prove_id"]["mean_us"].get<double>());
  }
  printf("\npayload bytes:\n");
  for (const auto& [group, table] : report["payload_bytes"].items()) {
    printf("  %s:\n", group.c_str());
    for (const auto& [msg, bytes] : table.items())
      printf("    %-28s %5zu\n", msg.c_str(), size_t(bytes));
  }
}

int cmd_phases(size_t attrs, size_t iters, const std::string& seed, bool json_out,
               const std::string& csv_path) {
  DeterministicRng rng(seed);
  uint64_t now = 1755561600;  // fixed so expiry encoding never shifts a payload
  size_t warmup = iters == 0 ? 0 : std::min<size_t>(3, iters);

  json report;
  report["config"] = {{"attrs", attrs}, {"iters", iters}, {"warmup", warmup}, {"seed", seed}};
  report["phases"] = bench_phases_at(attrs, iters, warmup, now, rng);
  report["attr_sweep"] = attr_sweep(iters, warmup, now, rng);
  report["hidden_sweep"] = hidden_sweep(iters, warmup, now, rng);
  report["payload_bytes"] = payload_sizes(attrs, now, rng);

  if (!csv_path.empty()) write_sweep_csv(csv_path, report);
  if (json_out)
    printf("%s\n", report.dump(2).c_str());
  else
    print_phase_table(report);
  return 0;
}

// ---------------------------------------------------------------------------
// throughput command

struct WorkerResult {
  size_t ops = 0;
  size_t errors = 0;
  std::vector<double> post_ms;  // round-trip of the measured POST only
  size_t request_bytes = 0;
  size_t response_bytes = 0;
};

double percentile(std::vector<double>& xs, double p) {
  if (xs.empty()) return 0;
  size_t rank = size_t(std::ceil(p / 100.0 * double(xs.size())));
  if (rank > 0) --rank;
  return xs[std::min(rank, xs.size() - 1)];
}

json throughput_report(const std::string& target, const std::string& url, size_t concurrency,
                       double elapsed_s, std::vector<WorkerResult>& results) {
  size_t ops = 0, errors = 0, req_bytes = 0, resp_bytes = 0;
  std::vector<double> lat;
  for (auto& w : results) {
    ops += w.ops;
    errors += w.errors;
    req_bytes = std::max(req_bytes, w.request_bytes);
    resp_bytes = std::max(resp_bytes, w.response_bytes);
    lat.insert(lat.end(), w.post_ms.begin(), w.post_ms.end());
  }
  std::sort(lat.begin(), lat.end());
  double mean = 0;
  for (double x : lat) mean += x;
  if (!lat.empty()) mean /= double(lat.size());
  return {{"target", target},
          {"url", url},
          {"concurrency", concurrency},
          {"elapsed_s", elapsed_s},
          {"ops", ops},
          {"errors", errors},
          {"ops_per_sec", elapsed_s > 0 ? double(ops) / elapsed_s : 0.0},
          {"latency_ms",
           {{"mean", mean},
            {"p50", percentile(lat, 50)},
            {"p95", percentile(lat, 95)},
            {"p99", percentile(lat, 99)}}},
          {"payload_bytes", {{"request", req_bytes}, {"response", resp_bytes}}}};
}

std::unique_ptr<httplib::Client> make_client(const std::string& url) {
  auto cli = std::make_unique<httplib::Client>(url);
  cli->set_connection_timeout(5, 0);
  cli->set_read_timeout(30, 0);
  return cli;
}

std::string mint_session(const std::string& url, const std::string& login,
                         const std::string& password) {
  auto cli = make_client(url);
  auto r = cli->Post("/session", json{{"login", login}, {"password", password}}.dump(),
                     "application/json");
  if (!r || r->status != 200) throw std::runtime_error("cannot open a session at " + url);
  return json::parse(r->body)["token"].get<std::string>();
}

pscred::IdpPublicKey fetch_pk(const PublicParams& params, const std::string& url) {
  auto cli = make_client(url);
  auto r = cli->Get("/pk");
  if (!r || r->status != 200) throw std::runtime_error("cannot fetch the issuer key from " + url);
  std::vector<uint8_t> bytes(r->body.begin(), r->body.end());
  auto pk = pscred::IdpPublicKey::deserialize(bytes);
  if (!pk || !pscred::pk_consistent(params, *pk))
    throw std::runtime_error("issuer key failed its consistency check");
  return *pk;
}

// setup-phase load: one session and one prebuilt credential request per
// worker, then POST /request-id in a closed loop
int cmd_throughput_idp(const std::string& url, const std::string& login,
                       const std::string& password, const std::string& device,
                       size_t concurrency, double seconds, bool json_out) {
  auto params = setup(128);
  auto pk = fetch_pk(params, url);
  std::vector<std::string> labels;
  for (uint32_t i = proto::first_info_index(pk.schema); i < pk.schema.n(); ++i)
    labels.push_back(pk.schema.attrs[i].label);

  SystemRng rng;
  std::vector<std::string> bodies(concurrency);
  std::vector<std::string> tokens(concurrency);
  for (size_t w = 0; w < concurrency; ++w) {
    tokens[w] = mint_session(url, login, password);
    auto secrets = proto::UserSecrets::generate(rng);
    auto prep = proto::request_id(params, pk, secrets, device, labels, rng);
    auto bytes = prep.msg.serialize();
    bodies[w].assign(bytes.begin(), bytes.end());
  }

  std::atomic<bool> stop{false};
  std::vector<WorkerResult> results(concurrency);
  std::vector<std::thread> workers;
  auto t0 = std::chrono::steady_clock::now();
  for (size_t w = 0; w < concurrency; ++w) {
    workers.emplace_back([&, w] {
      auto cli = make_client(url);
      httplib::Headers auth{{"Authorization", "Bearer " + tokens[w]}};
      auto& res = results[w];
      res.request_bytes = bodies[w].size();
      while (!stop.load(std::memory_order_relaxed)) {
        auto p0 = std::chrono::steady_clock::now();
        auto r = cli->Post("/request-id", auth, bodies[w], "application/octet-stream");
        double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - p0).count();
        if (r && r->status == 200) {
          ++res.ops;
          res.post_ms.push_back(ms);
          res.response_bytes = std::max(res.response_bytes, r->body.size());
        } else if (++res.errors > 20 && res.ops == 0) {
          return;  // the service is not answering at all; stop spinning
        }
      }
    });
  }
  std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
  stop = true;
  for (auto& t : workers) t.join();
  double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  auto report = throughput_report("idp", url, concurrency, elapsed, results);
  if (json_out)
    printf("%s\n", report.dump(2).c_str());
  else
    printf("idp setup phase: %.1f ops/s over %zu workers (%zu ops, %zu errors, p50 %.1f ms, "
           "p99 %.1f ms)\n",
           report["ops_per_sec"].get<double>(), concurrency, size_t(report["ops"]),
           size_t(report["errors"]), report["latency_ms"]["p50"].get<double>(),
           report["latency_ms"]["p99"].get<double>());
  return 0;
}

// sign-on load: each worker owns a credential; every loop iteration fetches a
// fresh nonce, builds a proof (client CPU inside the loop, as in real life),
// and POSTs it; only the POST round-trip lands in the latency column
int cmd_throughput_rp(const std::string& url, const std::string& idp_url,
                      const std::string& login, const std::string& password,
                      const std::string& device, size_t concurrency, double seconds,
                      bool json_out) {
  auto params = setup(128);
  auto pk = fetch_pk(params, idp_url);
  std::vector<std::string> labels;
  for (uint32_t i = proto::first_info_index(pk.schema); i < pk.schema.n(); ++i)
    labels.push_back(pk.schema.attrs[i].label);

  // learn the issuer id and the relying party's expectations
  auto idp_cli = make_client(idp_url);
  auto meta_r = idp_cli->Get("/meta");
  if (!meta_r || meta_r->status != 200)
    throw std::runtime_error("cannot fetch issuer metadata from " + idp_url);
  auto idp_id = json::parse(meta_r->body)["idp_id"].get<std::string>();

  auto rp_cli = make_client(url);
  auto rp_meta_r = rp_cli->Get("/signon-meta");
  if (!rp_meta_r || rp_meta_r->status != 200)
    throw std::runtime_error("cannot fetch sign-on metadata from " + url);
  auto rp_meta = json::parse(rp_meta_r->body);
  auto domain = rp_meta["domain"].get<std::string>();
  proto::SignOnFlags flags;
  G1 y = params.g, h = params.g;
  if (rp_meta["policy"]["require_retrieval"].get<bool>()) {
    flags.retrieval = true;
    auto yb = from_hex(rp_meta["authorities"]["y"].get<std::string>());
    auto hb = from_hex(rp_meta["authorities"]["h"].get<std::string>());
    auto yy = yb ? G1::deserialize(*yb) : std::nullopt;
    auto hh = hb ? G1::deserialize(*hb) : std::nullopt;
    if (!yy || !hh) throw std::runtime_error("relying party sent malformed authority keys");
    y = *yy;
    h = *hh;
  }

  SystemRng rng;
  struct WorkerIdentity {
    proto::UserSecrets secrets;
    proto::StoredCredential stored;
  };
  std::vector<WorkerIdentity> ids;
  for (size_t w = 0; w < concurrency; ++w) {
    auto token = mint_session(idp_url, login, password);
    auto secrets = proto::UserSecrets::generate(rng);
    auto prep = proto::request_id(params, pk, secrets, device, labels, rng);
    auto body = prep.msg.serialize();
    auto cli = make_client(idp_url);
    auto r = cli->Post("/request-id", {{"Authorization", "Bearer " + token}},
                       std::string(body.begin(), body.end()), "application/octet-stream");
    if (!r || r->status != 200)
      throw std::runtime_error("credential issuance failed while provisioning workers");
    std::vector<uint8_t> reply_bytes(r->body.begin(), r->body.end());
    auto reply = proto::BlindedCredentialMsg::deserialize(reply_bytes);
    if (!reply) throw std::runtime_error("issuer sent a malformed credential");
    std::span<const uint8_t> mask(reinterpret_cast<const uint8_t*>(token.data()), token.size());
    ids.push_back({secrets, proto::unblind_id(params, pk, secrets, prep.d, *reply, mask)});
  }

  std::atomic<bool> stop{false};
  std::vector<WorkerResult> results(concurrency);
  std::vector<std::thread> workers;
  auto t0 = std::chrono::steady_clock::now();
  for (size_t w = 0; w < concurrency; ++w) {
    workers.emplace_back([&, w] {
      auto cli = make_client(url);
      SystemRng wrng;
      auto& res = results[w];
      uint64_t now = uint64_t(::time(nullptr));
      while (!stop.load(std::memory_order_relaxed)) {
        auto m = cli->Get("/signon-meta");
        if (!m || m->status != 200) {
          if (++res.errors > 20 && res.ops == 0) return;
          continue;
        }
        auto nonce = from_hex(json::parse(m->body)["rp_nonce"].get<std::string>());
        if (!nonce) {
          ++res.errors;
          continue;
        }
        auto req = proto::prove_id(params, pk, ids[w].stored, idp_id, domain, y, h, {}, {}, flags,
                                   *nonce, now, wrng);
        auto bytes = req.serialize();
        res.request_bytes = std::max(res.request_bytes, bytes.size());
        auto p0 = std::chrono::steady_clock::now();
        auto r = cli->Post("/signon", std::string(bytes.begin(), bytes.end()),
                           "application/octet-stream");
        double ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - p0).count();
        if (r && r->status == 200 && json::parse(r->body).value("accepted", false)) {
          ++res.ops;
          res.post_ms.push_back(ms);
          res.response_bytes = std::max(res.response_bytes, r->body.size());
        } else if (++res.errors > 20 && res.ops == 0) {
          return;
        }
      }
    });
  }
  std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
  stop = true;
  for (auto& t : workers) t.join();
  double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  auto report = throughput_report("rp", url, concurrency, elapsed, results);
  report["note"] = "loop includes client-side proof generation; latency covers the POST only";
  if (json_out)
    printf("%s\n", report.dump(2).c_str());
  else
    printf("rp sign-on: %.1f ops/s over %zu workers (%zu ops, %zu errors, p50 %.1f ms, "
           "p99 %.1f ms)\n",
           report["ops_per_sec"].get<double>(), concurrency, size_t(report["ops"]),
           size_t(report["errors"]), report["latency_ms"]["p50"].get<double>(),
           report["latency_ms"]["p99"].get<double>());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"protocol benchmarks"};
  app.require_subcommand(1);

  size_t attrs = 5, iters = 20;
  std::string seed = "bench";
  bool json_out = false;
  std::string csv_path;
  auto* phases = app.add_subcommand("phases", "CPU time per phase, sweeps, payload sizes");
  phases->add_option("--attrs", attrs, "schema size for the per-phase table")
      ->check(CLI::Range(3, 64));
  phases->add_option("--iters", iters, "timed iterations per operation");
  phases->add_option("--seed", seed, "deterministic randomness seed");
  phases->add_flag("--json", json_out, "machine-readable output");
  phases->add_option("--csv", csv_path, "write the sweep tables as CSV");

  std::string target, url, idp_url, login, password, device = "primary";
  size_t concurrency = 1;
  double seconds = 5;
  bool t_json = false;
  auto* tput = app.add_subcommand("throughput", "closed-loop load against a live service");
  tput->add_option("--target", target, "idp or rp")
      ->required()
      ->check(CLI::IsMember({"idp", "rp"}));
  tput->add_option("--url", url, "base URL of the service under load")->required();
  tput->add_option("--idp", idp_url, "issuer URL (rp target: where credentials come from)");
  tput->add_option("--login", login, "issuer account login")->required();
  tput->add_option("--password", password, "issuer account password")->required();
  tput->add_option("--device", device, "device id registered at the issuer");
  tput->add_option("--concurrency", concurrency, "parallel workers")->check(CLI::Range(1, 256));
  tput->add_option("--seconds", seconds, "measurement window")->check(CLI::Range(0.1, 3600.0));
  tput->add_flag("--json", t_json, "machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (phases->parsed()) return cmd_phases(attrs, iters, seed, json_out, csv_path);
    if (target == "idp")
      return cmd_throughput_idp(url, login, password, device, concurrency, seconds, t_json);
    if (idp_url.empty()) {
      fprintf(stderr, "error: --target rp needs --idp to provision credentials\n");
      return 2;
    }
    return cmd_throughput_rp(url, idp_url, login, password, device, concurrency, seconds, t_json);
  } catch (const std::exception& e) {
    fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
}
