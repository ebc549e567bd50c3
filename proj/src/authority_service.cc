// elpasso-authority: one identity-retrieval authority.
//
//   deal   trusted-dealer setup; writes the public key set and one secret
//          share file per authority
//   serve  answer partial-decryption requests for the share this instance
//          holds; every request is audit-logged
//
// No authority ever sees another share, and a single instance can never open
// a token by itself.

#include <sys/stat.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <mutex>

#include "common/http_util.hpp"
#include "common/jsonl_store.hpp"
#include "elpasso/protocol.hpp"
#include "elpasso/retrieval.hpp"

namespace {

using namespace elpasso;
namespace svc = elpasso::svc;

void write_private_file(const std::string& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  out.close();
  ::chmod(path.c_str(), 0600);
}

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

std::vector<uint8_t> serialize_share(const retrieval::SecretShare& share) {
  wire::Writer w;
  w.u8(pscred::WIRE_VERSION);
  w.u32(share.index);
  wire::put_scalar(w, share.value);
  return w.out;
}

std::optional<retrieval::SecretShare> deserialize_share(std::span<const uint8_t> in) {
  wire::Reader r(in);
  uint8_t ver = 0;
  retrieval::SecretShare s;
  if (!r.u8(ver) || ver != pscred::WIRE_VERSION) return std::nullopt;
  if (!r.u32(s.index) || !wire::get_scalar(r, s.value) || !r.done()) return std::nullopt;
  return s;
}

int cmd_deal(uint32_t n, uint32_t t, const std::string& out_dir, const std::string& seed) {
  auto params = setup(128);
  std::unique_ptr<Rng> rng;
  if (seed.empty())
    rng = std::make_unique<SystemRng>();
  else
    rng = std::make_unique<DeterministicRng>(seed);

  auto ks = retrieval::authority_keygen(params, n, t, *rng);
  std::filesystem::create_directories(out_dir);
  write_private_file(out_dir + "/keyset.pub", ks.pub.serialize());
  ::chmod((out_dir + "/keyset.pub").c_str(), 0644);  // public material
  for (const auto& share : ks.shares)
    write_private_file(out_dir + "/share-" + std::to_string(share.index) + ".bin",
                       serialize_share(share));
  printf("dealt %u shares (threshold %u) into %s\n", n, t, out_dir.c_str());
  return 0;
}

struct ServeState {
  PublicParams params = setup(128);
  retrieval::PublicKeySet keyset;
  retrieval::SecretShare share;
  std::string token;  // empty means no auth required
  std::mutex mu;
  std::unique_ptr<svc::JsonlLog> audit;
  SystemRng rng;
};

int cmd_serve(const std::string& config_path, const std::string& port_file) {
  auto cfg = svc::load_json_file(config_path);
  ServeState st;

  auto keyset_bytes = read_file(cfg.at("keyset_file").get<std::string>());
  auto ks = retrieval::PublicKeySet::deserialize(keyset_bytes);
  if (!ks) {
    fprintf(stderr, "invalid keyset file\n");
    return 1;
  }
  st.keyset = *ks;

  auto share_bytes = read_file(cfg.at("share_file").get<std::string>());
  auto share = deserialize_share(share_bytes);
  if (!share) {
    fprintf(stderr, "invalid share file\n");
    return 1;
  }
  st.share = *share;
  st.token = cfg.value("token", "");
  if (auto audit_path = cfg.value("audit_file", ""); !audit_path.empty())
    st.audit = std::make_unique<svc::JsonlLog>(audit_path);

  httplib::Server svr;

  svr.Get("/info", [&](const httplib::Request&, httplib::Response& res) {
    nlohmann::json j{{"index", st.share.index},
                     {"n", st.keyset.n_auth},
                     {"threshold", st.keyset.threshold},
                     {"y", to_hex(st.keyset.y.serialize())},
                     {"h", to_hex(st.keyset.h.serialize())},
                     {"keyset", to_hex(st.keyset.serialize())}};
    res.set_content(j.dump(), "application/json");
  });

  svr.Post("/partial-decrypt", [&](const httplib::Request& req, httplib::Response& res) {
    if (!st.token.empty() && svc::bearer_token(req) != st.token)
      return svc::send_error(res, 401, "unauthorized");
    auto body = svc::read_envelope(req);
    if (!body) return svc::send_error(res, 400, "bad-request", "unreadable envelope");
    auto report = protocol::RetrievalReportMsg::deserialize(*body);
    if (!report) return svc::send_error(res, 400, "bad-request", "not a retrieval report");

    std::lock_guard lk(st.mu);
    auto pd = retrieval::partial_decrypt(st.params, st.share, report->token, st.rng);
    if (st.audit)
      st.audit->append({{"case_id", report->case_id},
                        {"c1", to_hex(report->token.c1.serialize())},
                        {"index", st.share.index}});
    svc::send_envelope(req, res, pd.serialize());
  });

  return svc::run_server(svr, cfg.value("listen", "127.0.0.1"), cfg.value("port", 0), port_file);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"identity-retrieval authority"};
  app.require_subcommand(1);

  auto* deal = app.add_subcommand("deal", "generate a threshold key set and share files");
  uint32_t n = 3, t = 2;
  std::string out_dir = ".", seed;
  deal->add_option("--n", n, "number of authorities")->required();
  deal->add_option("--t", t, "decryption threshold")->required();
  deal->add_option("--out", out_dir, "output directory")->required();
  deal->add_option("--seed", seed, "deterministic seed (testing only)");

  auto* serve = app.add_subcommand("serve", "serve partial decryptions for one share");
  std::string config_path, port_file;
  serve->add_option("--config", config_path, "JSON config file")->required();
  serve->add_option("--port-file", port_file, "write the bound port here");

  CLI11_PARSE(app, argc, argv);
  try {
    if (deal->parsed()) return cmd_deal(n, t, out_dir, seed);
    return cmd_serve(config_path, port_file);
  } catch (const std::exception& e) {
    fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
