#pragma once
// The single sign-on protocol tying the pieces together.  Setup phase: a
// client requests a blind credential over its secret s; the issuer embeds a
// long-term identity exponent gamma, an expiry day tp, and verified info
// attributes.  Sign-on phase: the client shows the credential to a relying
// party under a per-domain pseudonym zeta = H(domain)^s, optionally with a
// device pseudonym zeta_d, an identity-retrieval token E, and selective
// disclosure.  Also here: replay protection via RP nonces, account
// resolution, secret rotation after device theft, and the device-enrollment
// handshake.

#include "elpasso/hex.hpp"
#include "elpasso/retrieval.hpp"

namespace elpasso::protocol {

inline constexpr uint8_t MSG_VERSION = 1;

enum class MsgType : uint8_t {
  request_id = 1,
  blinded_credential = 2,
  sign_on_request = 3,
  sign_on_result = 4,
  enroll_init = 5,
  enroll_approve = 6,
  enroll_complete = 7,
  rotation_request = 8,
  retrieval_report = 9,
};

// fixed attribute slots; info attributes follow
inline constexpr uint32_t ATTR_SECRET = 0;
inline constexpr uint32_t ATTR_GAMMA = 1;
inline constexpr uint32_t ATTR_EXPIRY = 2;
inline constexpr uint32_t ATTR_DEVICE = 3;  // only in device-secret schemas

inline constexpr std::string_view LABEL_SECRET = "s";
inline constexpr std::string_view LABEL_GAMMA = "gamma";
inline constexpr std::string_view LABEL_EXPIRY = "tp";
inline constexpr std::string_view LABEL_DEVICE = "s_d";

// days are the expiry denomination: finer-grained timestamps would let
// colluding RPs correlate users by issuance instant
inline constexpr uint64_t SECONDS_PER_DAY = 86400;
inline uint64_t day_of(uint64_t unix_seconds) { return unix_seconds / SECONDS_PER_DAY; }

inline Scalar encode_int_attr(uint64_t v) { return Scalar::from_u64(v); }
inline Scalar encode_info_value(std::string_view v) { return hash_to_scalar(v); }

// small scalars round-trip; anything wider than 64 bits is not a timestamp
inline std::optional<uint64_t> scalar_to_u64(const Scalar& s) {
  auto limbs = s.canonical();
  for (size_t i = 1; i < limbs.size(); ++i)
    if (limbs[i] != 0) return std::nullopt;
  return limbs[0];
}

// schema layout: s, gamma, tp, [s_d], info...
inline pscred::AttributeSchema build_schema(bool device_secret,
                                            const std::vector<std::string>& info_labels) {
  pscred::AttributeSchema schema;
  schema.attrs.push_back({std::string(LABEL_SECRET), pscred::AttrKind::always_hidden});
  schema.attrs.push_back({std::string(LABEL_GAMMA), pscred::AttrKind::idp_assigned});
  schema.attrs.push_back({std::string(LABEL_EXPIRY), pscred::AttrKind::idp_assigned});
  if (device_secret)
    schema.attrs.push_back({std::string(LABEL_DEVICE), pscred::AttrKind::always_hidden});
  for (const auto& label : info_labels) {
    if (label == LABEL_SECRET || label == LABEL_GAMMA || label == LABEL_EXPIRY ||
        label == LABEL_DEVICE)
      throw std::invalid_argument("build_schema: info label collides with a reserved slot");
    schema.attrs.push_back({label, pscred::AttrKind::user_info});
  }
  if (!schema.valid()) throw std::invalid_argument("build_schema: invalid label set");
  return schema;
}

inline bool schema_has_device_slot(const pscred::AttributeSchema& schema) {
  return schema.n() > ATTR_DEVICE && schema.attrs[ATTR_DEVICE].label == LABEL_DEVICE &&
         schema.attrs[ATTR_DEVICE].kind == pscred::AttrKind::always_hidden;
}

inline uint32_t first_info_index(const pscred::AttributeSchema& schema) {
  return schema_has_device_slot(schema) ? ATTR_DEVICE + 1 : ATTR_EXPIRY + 1;
}

inline std::optional<uint32_t> index_of_label(const pscred::AttributeSchema& schema,
                                              std::string_view label) {
  for (uint32_t i = 0; i < schema.n(); ++i)
    if (schema.attrs[i].label == label) return i;
  return std::nullopt;
}

struct UserSecrets {
  Scalar s;    // global secret, identical across the user's devices
  Scalar s_d;  // per-device secret

  static UserSecrets generate(Rng& rng) {
    return {random_nonzero_scalar(rng), random_nonzero_scalar(rng)};
  }
};

inline G1 derive_pseudonym(const Scalar& secret, std::string_view domain) {
  return exp(hash_to_g1(domain), secret);
}

// ---------------------------------------------------------------------------
// setup phase

struct RequestIDMsg {
  std::string device_id;
  std::vector<std::string> info_labels;
  pscred::BlindSignRequest request;

  std::vector<uint8_t> serialize() const {
    wire::Writer w;
    w.u8(MSG_VERSION);
    w.u8(uint8_t(MsgType::request_id));
    w.u32(uint32_t(device_id.size()));
    w.str(device_id);
    w.u32(uint32_t(info_labels.size()));
    for (const auto& l : info_labels) {
      w.u8(uint8_t(l.size()));
      w.str(l);
    }
    auto req = request.serialize();
    w.u32(uint32_t(req.size()));
    w.bytes(req);
    return w.out;
  }

  static std::optional<RequestIDMsg> deserialize(std::span<const uint8_t> in) {
    wire::Reader r(in);
    uint8_t ver = 0, type = 0;
    if (!r.u8(ver) || ver != MSG_VERSION) return std::nullopt;
    if (!r.u8(type) || type != uint8_t(MsgType::request_id)) return std::nullopt;
    RequestIDMsg m;
    uint32_t len = 0;
    std::span<const uint8_t> chunk;
    if (!r.u32(len) || len > 255 || !r.slice(len, chunk)) return std::nullopt;
    m.device_id.assign(chunk.begin(), chunk.end());
    uint32_t count = 0;
    if (!r.u32(count) || count > 0xffff) return std::nullopt;
    for (uint32_t i = 0; i < count; ++i) {
      uint8_t llen = 0;
      if (!r.u8(llen) || !r.slice(llen, chunk)) return std::nullopt;
      m.info_labels.emplace_back(chunk.begin(), chunk.end());
    }
    if (!r.u32(len) || !r.slice(len, chunk) || !r.done()) return std::nullopt;
    auto req = pscred::BlindSignRequest::deserialize(chunk);
    if (!req) return std::nullopt;
    m.request = std::move(*req);
    return m;
  }
};

struct PreparedIdRequest {
  Scalar d;  // unblinding secret, held until the reply arrives
  RequestIDMsg msg;
};

// client side: commit to s (and s_d when the schema carries a device slot)
// and ask for the listed info attributes to be certified
inline PreparedIdRequest request_id(const PublicParams& params, const pscred::IdpPublicKey& pk,
                                    const UserSecrets& secrets, std::string_view device_id,
                                    const std::vector<std::string>& info_request, Rng& rng) {
  const auto& schema = pk.schema;
  if (device_id.empty() || device_id.size() > 255)
    throw std::invalid_argument("request_id: device id must be 1..255 bytes");
  // the issuer certifies its whole schema or nothing, so the requested info
  // labels must line up with the info slots exactly
  std::set<std::string_view> requested(info_request.begin(), info_request.end());
  if (requested.size() != info_request.size())
    throw std::invalid_argument("request_id: duplicate info label");
  for (uint32_t i = first_info_index(schema); i < schema.n(); ++i) {
    if (!requested.erase(std::string_view(schema.attrs[i].label)))
      throw std::invalid_argument("request_id: credential would cover unrequested attribute '" +
                                  schema.attrs[i].label + "'");
  }
  if (!requested.empty())
    throw std::invalid_argument("request_id: unknown info label '" +
                                std::string(*requested.begin()) + "'");

  std::map<uint32_t, Scalar> hidden{{ATTR_SECRET, secrets.s}};
  if (schema_has_device_slot(schema)) hidden.emplace(ATTR_DEVICE, secrets.s_d);
  auto prep = pscred::prepare_blind_sign(params, pk, hidden, rng);
  PreparedIdRequest out;
  out.d = prep.d;
  out.msg.device_id = std::string(device_id);
  out.msg.info_labels = info_request;
  out.msg.request = std::move(prep.request);
  return out;
}

struct BlindedCredentialMsg {
  pscred::BlindedCredential blinded;
  Scalar gamma_masked;  // gamma + H(mask key); never the bare scalar on the wire
  uint64_t tp_day = 0;
  std::vector<std::pair<std::string, std::string>> info;  // label -> certified value

  std::vector<uint8_t> serialize() const {
    wire::Writer w;
    w.u8(MSG_VERSION);
    w.u8(uint8_t(MsgType::blinded_credential));
    auto bl = blinded.serialize();
    w.u32(uint32_t(bl.size()));
    w.bytes(bl);
    wire::put_scalar(w, gamma_masked);
    w.u64(tp_day);
    w.u32(uint32_t(info.size()));
    for (const auto& [label, value] : info) {
      w.u8(uint8_t(label.size()));
      w.str(label);
      w.u32(uint32_t(value.size()));
      w.str(value);
    }
    return w.out;
  }

  static std::optional<BlindedCredentialMsg> deserialize(std::span<const uint8_t> in) {
    wire::Reader r(in);
    uint8_t ver = 0, type = 0;
    if (!r.u8(ver) || ver != MSG_VERSION) return std::nullopt;
    if (!r.u8(type) || type != uint8_t(MsgType::blinded_credential)) return std::nullopt;
    BlindedCredentialMsg m;
    uint32_t len = 0;
    std::span<const uint8_t> chunk;
    if (!r.u32(len) || !r.slice(len, chunk)) return std::nullopt;
    auto bl = pscred::BlindedCredential::deserialize(chunk);
    if (!bl) return std::nullopt;
    m.blinded = *bl;
    if (!wire::get_scalar(r, m.gamma_masked)) return std::nullopt;
    if (!r.u64(m.tp_day)) return std::nullopt;
    uint32_t count = 0;
    if (!r.u32(count) || count > 0xffff) return std::nullopt;
    for (uint32_t i = 0; i < count; ++i) {
      uint8_t llen = 0;
      std::span<const uint8_t> label, value;
      uint32_t vlen = 0;
      if (!r.u8(llen) || !r.slice(llen, label)) return std::nullopt;
      if (!r.u32(vlen) || vlen > 0xffff || !r.slice(vlen, value)) return std::nullopt;
      m.info.emplace_back(std::string(label.begin(), label.end()),
                          std::string(value.begin(), value.end()));
    }
    if (!r.done()) return std::nullopt;
    return m;
  }
};

// the identity exponent crosses the wire only additively masked under a key
// both ends of the authenticated session hold, so logged or cached response
// bodies never contain it
inline Scalar gamma_mask(std::span<const uint8_t> mask_key) {
  nizk::Transcript t;
  t.append("elpasso-gamma-mask");
  t.append(mask_key);
  return hash_to_scalar(t.bytes);
}

struct DeviceInfo {
  bool revoked = false;
};

struct UserRecord {
  std::string login;
  Scalar gamma;  // assigned once, at account creation
  G1 h_gamma;    // exp(h, gamma), also the recovery-lookup key
  std::map<std::string, std::string> info;  // verified attribute values
  std::map<std::string, DeviceInfo> devices;
};

inline UserRecord create_user(std::string login, std::map<std::string, std::string> info,
                              const G1& h, Rng& rng) {
  UserRecord u;
  u.login = std::move(login);
  u.gamma = random_nonzero_scalar(rng);
  u.h_gamma = exp(h, u.gamma);
  u.info = std::move(info);
  return u;
}

struct RevokedDeviceError : std::invalid_argument {
  RevokedDeviceError() : std::invalid_argument("device has been reported stolen") {}
};
struct UnknownDeviceError : std::invalid_argument {
  UnknownDeviceError() : std::invalid_argument("device is not registered for this user") {}
};
struct UnknownInfoError : std::invalid_argument {
  explicit UnknownInfoError(const std::string& label)
      : std::invalid_argument("no verified value for attribute '" + label + "'") {}
};

struct IssuancePolicy {
  uint32_t validity_days = 7;
};

// issuer side: check the device and the opening proof, fill in the public
// slots (gamma, expiry day, verified info) and blind-sign
inline BlindedCredentialMsg provide_id(const PublicParams& params, const pscred::IdpKeyPair& kp,
                                       const UserRecord& user, const RequestIDMsg& msg,
                                       uint64_t now, const IssuancePolicy& policy,
                                       std::span<const uint8_t> mask_key, Rng& rng) {
  auto dev = user.devices.find(msg.device_id);
  if (dev == user.devices.end()) throw UnknownDeviceError();
  if (dev->second.revoked) throw RevokedDeviceError();

  const auto& schema = kp.pk.schema;
  BlindedCredentialMsg reply;
  reply.tp_day = day_of(now) + policy.validity_days;
  std::map<uint32_t, Scalar> public_attrs{{ATTR_GAMMA, user.gamma},
                                          {ATTR_EXPIRY, encode_int_attr(reply.tp_day)}};
  for (uint32_t i = first_info_index(schema); i < schema.n(); ++i) {
    const auto& label = schema.attrs[i].label;
    auto it = user.info.find(label);
    if (it == user.info.end()) throw UnknownInfoError(label);
    public_attrs.emplace(i, encode_info_value(it->second));
    reply.info.emplace_back(label, it->second);
  }
  // throws on a bad opening proof or a hidden/public split not matching the
  // schema
  reply.blinded = pscred::blind_sign(params, kp, public_attrs, msg.request, rng);
  reply.gamma_masked = user.gamma + gamma_mask(mask_key);
  return reply;
}

// client side: unblind and assemble the full attribute vector
struct StoredCredential {
  pscred::Credential cred;
  std::vector<Scalar> attrs;
  uint64_t tp_day = 0;
  std::vector<std::pair<std::string, std::string>> info;
};

inline StoredCredential unblind_id(const PublicParams& params, const pscred::IdpPublicKey& pk,
                                   const UserSecrets& secrets, const Scalar& d,
                                   const BlindedCredentialMsg& reply,
                                   std::span<const uint8_t> mask_key) {
  StoredCredential out;
  out.cred = pscred::unblind(d, reply.blinded);
  out.tp_day = reply.tp_day;
  out.info = reply.info;
  Scalar gamma = reply.gamma_masked - gamma_mask(mask_key);
  out.attrs.assign(pk.schema.n(), Scalar::zero());
  out.attrs[ATTR_SECRET] = secrets.s;
  out.attrs[ATTR_GAMMA] = gamma;
  out.attrs[ATTR_EXPIRY] = encode_int_attr(reply.tp_day);
  if (schema_has_device_slot(pk.schema)) out.attrs[ATTR_DEVICE] = secrets.s_d;
  for (const auto& [label, value] : reply.info) {
    auto idx = index_of_label(pk.schema, label);
    if (!idx || *idx < first_info_index(pk.schema))
      throw std::invalid_argument("unblind_id: reply carries unknown attribute '" + label + "'");
    out.attrs[*idx] = encode_info_value(value);
  }
  if (!pscred::credential_valid(params, pk, out.cred, out.attrs))
    throw std::invalid_argument("unblind_id: credential does not verify; wrong d or tampered reply");
  return out;
}

// ---------------------------------------------------------------------------
// sign-on phase

struct SignOnFlags {
  bool guest = false;      // no zeta: anonymous, unlinkable even within the RP
  bool retrieval = false;  // carry an identity-retrieval token E
  bool two_fa = false;     // carry the device pseudonym zeta_d

  uint8_t to_byte() const {
    return uint8_t((guest ? 1 : 0) | (retrieval ? 2 : 0) | (two_fa ? 4 : 0));
  }
  static std::optional<SignOnFlags> from_byte(uint8_t b) {
    if (b > 7) return std::nullopt;
    return SignOnFlags{(b & 1) != 0, (b & 2) != 0, (b & 4) != 0};
  }
};

struct SignOnRequest {
  std::string idp;  // issuer identifier the RP resolves to a cached pk
  std::string domain;
  std::vector<uint8_t> rp_nonce;
  SignOnFlags flags;
  std::optional<G1> zeta;
  std::optional<G1> zeta_d;
  std::optional<retrieval::RetrievalToken> token;
  // disclosed info attributes as strings; each must hash to the scalar the
  // show discloses at that label's slot
  std::vector<std::pair<std::string, std::string>> disclosed_info;
  // hidden info attributes whose value is proven equal to a public string
  std::vector<std::pair<std::string, std::string>> equality_claims;
  pscred::ShowProof show;

  std::vector<uint8_t> serialize() const {
    wire::Writer w;
    w.u8(MSG_VERSION);
    w.u8(uint8_t(MsgType::sign_on_request));
    w.u8(uint8_t(idp.size()));
    w.str(idp);
    w.u8(flags.to_byte());
    w.u32(uint32_t(domain.size()));
    w.str(domain);
    w.u32(uint32_t(rp_nonce.size()));
    w.bytes(rp_nonce);
    w.u8(zeta ? 1 : 0);
    if (zeta) wire::put_point(w, *zeta);
    w.u8(zeta_d ? 1 : 0);
    if (zeta_d) wire::put_point(w, *zeta_d);
    w.u8(token ? 1 : 0);
    if (token) {
      auto tb = token->serialize();
      w.bytes(tb);
    }
    auto put_pairs = [&](const std::vector<std::pair<std::string, std::string>>& pairs) {
      w.u32(uint32_t(pairs.size()));
      for (const auto& [label, value] : pairs) {
        w.u8(uint8_t(label.size()));
        w.str(label);
        w.u32(uint32_t(value.size()));
        w.str(value);
      }
    };
    put_pairs(disclosed_info);
    put_pairs(equality_claims);
    auto sp = show.serialize();
    w.u32(uint32_t(sp.size()));
    w.bytes(sp);
    return w.out;
  }

  static std::optional<SignOnRequest> deserialize(std::span<const uint8_t> in) {
    wire::Reader r(in);
    uint8_t ver = 0, type = 0, b = 0;
    if (!r.u8(ver) || ver != MSG_VERSION) return std::nullopt;
    if (!r.u8(type) || type != uint8_t(MsgType::sign_on_request)) return std::nullopt;
    SignOnRequest req;
    std::span<const uint8_t> chunk;
    uint8_t slen = 0;
    if (!r.u8(slen) || !r.slice(slen, chunk)) return std::nullopt;
    req.idp.assign(chunk.begin(), chunk.end());
    if (!r.u8(b)) return std::nullopt;
    auto flags = SignOnFlags::from_byte(b);
    if (!flags) return std::nullopt;
    req.flags = *flags;
    uint32_t len = 0;
    if (!r.u32(len) || len > 255 || !r.slice(len, chunk)) return std::nullopt;
    req.domain.assign(chunk.begin(), chunk.end());
    if (!r.u32(len) || len > 255 || !r.slice(len, chunk)) return std::nullopt;
    req.rp_nonce.assign(chunk.begin(), chunk.end());
    auto get_opt_point = [&](std::optional<G1>& dst) {
      uint8_t present = 0;
      if (!r.u8(present) || present > 1) return false;
      if (present) {
        G1 p;
        if (!wire::get_point(r, p)) return false;
        dst = p;
      }
      return true;
    };
    if (!get_opt_point(req.zeta) || !get_opt_point(req.zeta_d)) return std::nullopt;
    uint8_t has_token = 0;
    if (!r.u8(has_token) || has_token > 1) return std::nullopt;
    if (has_token) {
      std::span<const uint8_t> tb;
      if (!r.slice(1 + 2 * G1::BYTES, tb)) return std::nullopt;
      auto t = retrieval::RetrievalToken::deserialize(tb);
      if (!t) return std::nullopt;
      req.token = *t;
    }
    auto get_pairs = [&](std::vector<std::pair<std::string, std::string>>& pairs) {
      uint32_t count = 0;
      if (!r.u32(count) || count > 0xffff) return false;
      for (uint32_t i = 0; i < count; ++i) {
        uint8_t llen = 0;
        uint32_t vlen = 0;
        std::span<const uint8_t> label, value;
        if (!r.u8(llen) || !r.slice(llen, label)) return false;
        if (!r.u32(vlen) || vlen > 0xffff || !r.slice(vlen, value)) return false;
        pairs.emplace_back(std::string(label.begin(), label.end()),
                           std::string(value.begin(), value.end()));
      }
      return true;
    };
    if (!get_pairs(req.disclosed_info) || !get_pairs(req.equality_claims)) return std::nullopt;
    if (!r.u32(len) || !r.slice(len, chunk) || !r.done()) return std::nullopt;
    auto sp = pscred::ShowProof::deserialize(chunk);
    if (!sp) return std::nullopt;
    req.show = std::move(*sp);
    // structural invariants: a guest has no zeta, a token travels iff the
    // retrieval flag says so, a device pseudonym iff the 2FA flag does
    if (req.zeta.has_value() == req.flags.guest) return std::nullopt;
    if (req.token.has_value() != req.flags.retrieval) return std::nullopt;
    if (req.zeta_d.has_value() != req.flags.two_fa) return std::nullopt;
    return req;
  }
};

enum class AccountAction : uint8_t {
  none = 0,
  created = 1,
  matched = 2,
  device_enrolled = 3,
  rotated = 4,
};

enum class RejectReason : uint8_t {
  none = 0,
  bad_request = 1,
  bad_proof = 2,
  expired = 3,
  replay = 4,
  policy_unmet = 5,
  unknown_idp = 6,
  unknown_account = 7,
  blocked = 8,
  two_fa_pending = 9,
};

inline std::string_view reject_reason_name(RejectReason r) {
  switch (r) {
    case RejectReason::none: return "none";
    case RejectReason::bad_request: return "bad-request";
    case RejectReason::bad_proof: return "bad-proof";
    case RejectReason::expired: return "expired";
    case RejectReason::replay: return "replay";
    case RejectReason::policy_unmet: return "policy-unmet";
    case RejectReason::unknown_idp: return "unknown-idp";
    case RejectReason::unknown_account: return "unknown-account";
    case RejectReason::blocked: return "blocked";
    case RejectReason::two_fa_pending: return "two-fa-pending";
  }
  return "unknown";
}

inline std::string_view account_action_name(AccountAction a) {
  switch (a) {
    case AccountAction::none: return "none";
    case AccountAction::created: return "created";
    case AccountAction::matched: return "matched";
    case AccountAction::device_enrolled: return "device-enrolled";
    case AccountAction::rotated: return "rotated";
  }
  return "unknown";
}

struct SignOnResult {
  bool accepted = false;
  AccountAction action = AccountAction::none;
  RejectReason reason = RejectReason::none;
  std::string message;
  std::string account_id;  // stable per account; empty for guests and rejects

  std::vector<uint8_t> serialize() const {
    wire::Writer w;
    w.u8(MSG_VERSION);
    w.u8(uint8_t(MsgType::sign_on_result));
    w.u8(accepted ? 1 : 0);
    w.u8(uint8_t(action));
    w.u8(uint8_t(reason));
    w.u32(uint32_t(message.size()));
    w.str(message);
    w.u32(uint32_t(account_id.size()));
    w.str(account_id);
    return w.out;
  }

  static std::optional<SignOnResult> deserialize(std::span<const uint8_t> in) {
    wire::Reader r(in);
    uint8_t ver = 0, type = 0, acc = 0, action = 0, reason = 0;
    if (!r.u8(ver) || ver != MSG_VERSION) return std::nullopt;
    if (!r.u8(type) || type != uint8_t(MsgType::sign_on_result)) return std::nullopt;
    if (!r.u8(acc) || acc > 1 || !r.u8(action) || action > 4 || !r.u8(reason) || reason > 9)
      return std::nullopt;
    SignOnResult res;
    res.accepted = acc == 1;
    res.action = AccountAction(action);
    res.reason = RejectReason(reason);
    uint32_t len = 0;
    std::span<const uint8_t> chunk;
    if (!r.u32(len) || len > 0xffff || !r.slice(len, chunk)) return std::nullopt;
    res.message.assign(chunk.begin(), chunk.end());
    if (!r.u32(len) || len > 255 || !r.slice(len, chunk) || !r.done()) return std::nullopt;
    res.account_id.assign(chunk.begin(), chunk.end());
    return res;
  }

  static SignOnResult reject(RejectReason why, std::string msg) {
    return {false, AccountAction::none, why, std::move(msg), {}};
  }
};

namespace detail {

// the conjoined statement fragment both sides build: zeta = H(domain)^s,
// optionally zeta_d = H(domain)^{s_d}, optionally the token equations, plus
// equality claims over hidden info slots; context binds purpose, domain,
// nonce and flags
inline std::optional<pscred::StatementFragment> signon_fragment(
    const PublicParams& params, const pscred::IdpPublicKey& pk, const SignOnRequest& req,
    const G1& y, const G1& h, std::string_view purpose) {
  const uint32_t n = uint32_t(pk.schema.n());
  pscred::StatementFragment frag;
  if (req.token) frag = retrieval::statement_fragment_for_token(params, n, y, h, *req.token);

  G1 domain_base = hash_to_g1(req.domain);
  if (req.zeta) frag.g1_eqs.push_back({*req.zeta, {{domain_base, ATTR_SECRET}}});
  if (req.zeta_d) {
    if (!schema_has_device_slot(pk.schema)) return std::nullopt;
    frag.g1_eqs.push_back({*req.zeta_d, {{domain_base, ATTR_DEVICE}}});
  }
  // an equality claim proves a hidden slot equals the hash of a public
  // string: the only witness satisfying base^w = base^{H(v)} is H(v) itself
  G1 eq_base = hash_to_g1("elpasso:equality-claim");
  for (const auto& [label, value] : req.equality_claims) {
    auto idx = index_of_label(pk.schema, label);
    if (!idx || *idx < first_info_index(pk.schema)) return std::nullopt;
    frag.g1_eqs.push_back({exp(eq_base, encode_info_value(value)), {{eq_base, *idx}}});
  }

  nizk::Transcript ctx;
  ctx.append("elpasso-signon-v1");
  ctx.append(purpose);
  ctx.append(req.idp);
  ctx.append(req.domain);
  ctx.append(req.rp_nonce);
  ctx.append_u32(req.flags.to_byte());
  frag.context = std::move(ctx.bytes);
  return frag;
}

// checks everything about a request that needs no clock, nonce cache, or
// account store: structure, disclosed-value consistency, and the proof
inline RejectReason check_signon_crypto(const PublicParams& params,
                                        const pscred::IdpPublicKey& pk, const SignOnRequest& req,
                                        std::string_view domain, const G1& y, const G1& h,
                                        std::string_view purpose) {
  if (req.domain != domain) return RejectReason::bad_request;
  if (req.zeta.has_value() == req.flags.guest) return RejectReason::bad_request;
  if (req.token.has_value() != req.flags.retrieval) return RejectReason::bad_request;
  if (req.zeta_d.has_value() != req.flags.two_fa) return RejectReason::bad_request;

  // the expiry slot must be disclosed and every disclosed info string must
  // hash to the scalar the show discloses at its slot
  if (!req.show.disclosed.count(ATTR_EXPIRY)) return RejectReason::bad_proof;
  size_t matched = 1;
  for (const auto& [label, value] : req.disclosed_info) {
    auto idx = index_of_label(pk.schema, label);
    if (!idx || *idx < first_info_index(pk.schema)) return RejectReason::bad_request;
    auto it = req.show.disclosed.find(*idx);
    if (it == req.show.disclosed.end()) return RejectReason::bad_proof;
    if (!(it->second == encode_info_value(value))) return RejectReason::bad_proof;
    ++matched;
  }
  // no disclosed scalar may lack its plaintext counterpart
  if (matched != req.show.disclosed.size()) return RejectReason::bad_proof;

  auto frag = signon_fragment(params, pk, req, y, h, purpose);
  if (!frag) return RejectReason::bad_request;
  if (!pscred::verify(params, pk, req.show, *frag)) return RejectReason::bad_proof;
  return RejectReason::none;
}

}  // namespace detail

struct ExpiredCredentialError : std::invalid_argument {
  ExpiredCredentialError()
      : std::invalid_argument("credential has expired; fetch a fresh one first") {}
};

namespace detail {

// shared by sign-on and rotation proving; rotation shows deliberately use an
// expired credential for the old secret
inline SignOnRequest build_signon(const PublicParams& params, const pscred::IdpPublicKey& pk,
                                  const StoredCredential& stored, std::string_view idp,
                                  std::string_view domain, const G1& y, const G1& h,
                                  const std::set<uint32_t>& disclose_info,
                                  const std::vector<std::pair<std::string, std::string>>& claims,
                                  SignOnFlags flags, std::span<const uint8_t> rp_nonce,
                                  uint64_t now, bool require_unexpired, std::string_view purpose,
                                  Rng& rng) {
  if (flags.guest && flags.two_fa)
    throw std::invalid_argument("sign-on: a guest login has no device identity");
  if (flags.two_fa && !schema_has_device_slot(pk.schema))
    throw std::invalid_argument("sign-on: credential has no device-secret slot");
  if (require_unexpired && day_of(now) > stored.tp_day) throw ExpiredCredentialError();
  if (idp.size() > 255 || domain.size() > 255 || rp_nonce.size() > 255)
    throw std::invalid_argument("sign-on: issuer id, domain, and nonce are capped at 255 bytes");

  SignOnRequest req;
  req.idp = std::string(idp);
  req.domain = std::string(domain);
  req.rp_nonce.assign(rp_nonce.begin(), rp_nonce.end());
  req.flags = flags;
  if (!flags.guest) req.zeta = derive_pseudonym(stored.attrs[ATTR_SECRET], domain);
  if (flags.two_fa) req.zeta_d = derive_pseudonym(stored.attrs[ATTR_DEVICE], domain);

  std::vector<Scalar> extra;
  if (flags.retrieval) {
    auto enc = retrieval::encrypt(params, y, h, stored.attrs[ATTR_GAMMA], rng);
    req.token = enc.token;
    extra.push_back(enc.eps);
  }

  std::set<uint32_t> disclose{ATTR_EXPIRY};
  for (uint32_t idx : disclose_info) {
    if (idx < first_info_index(pk.schema) || idx >= pk.schema.n())
      throw std::invalid_argument("sign-on: only info attributes can be disclosed");
    disclose.insert(idx);
    req.disclosed_info.emplace_back(pk.schema.attrs[idx].label, std::string());
  }
  // fill plaintext values from the stored credential
  for (auto& [label, value] : req.disclosed_info) {
    auto it = std::find_if(stored.info.begin(), stored.info.end(),
                           [&](const auto& kv) { return kv.first == label; });
    if (it == stored.info.end())
      throw std::invalid_argument("sign-on: no stored value for attribute '" + label + "'");
    value = it->second;
  }
  for (const auto& [label, value] : claims) {
    auto idx = index_of_label(pk.schema, label);
    if (!idx || *idx < first_info_index(pk.schema))
      throw std::invalid_argument("sign-on: unknown claim attribute '" + label + "'");
    if (disclose.count(*idx))
      throw std::invalid_argument("sign-on: attribute '" + label +
                                  "' is already disclosed; claims cover hidden slots");
    req.equality_claims.emplace_back(label, value);
  }

  auto frag = detail::signon_fragment(params, pk, req, y, h, purpose);
  if (!frag) throw std::invalid_argument("sign-on: malformed statement fragment");
  req.show = pscred::prove(params, pk, stored.cred, stored.attrs, disclose, *frag, extra, rng);
  return req;
}

}  // namespace detail

inline SignOnRequest prove_id(const PublicParams& params, const pscred::IdpPublicKey& pk,
                              const StoredCredential& stored, std::string_view idp,
                              std::string_view domain, const G1& y, const G1& h,
                              const std::set<uint32_t>& disclose_info,
                              const std::vector<std::pair<std::string, std::string>>& claims,
                              SignOnFlags flags, std::span<const uint8_t> rp_nonce, uint64_t now,
                              Rng& rng) {
  return detail::build_signon(params, pk, stored, idp, domain, y, h, disclose_info, claims, flags,
                              rp_nonce, now, /*require_unexpired=*/true, "signon", rng);
}

// ---------------------------------------------------------------------------
// relying-party state

// single-use nonces with a TTL; consuming twice fails, which is the whole
// replay story
struct NonceCache {
  std::map<std::vector<uint8_t>, uint64_t> pending;  // nonce -> expiry time

  void issue(std::span<const uint8_t> nonce, uint64_t now, uint64_t ttl_seconds) {
    pending.emplace(std::vector<uint8_t>(nonce.begin(), nonce.end()), now + ttl_seconds);
  }
  bool consume(std::span<const uint8_t> nonce, uint64_t now) {
    auto it = pending.find(std::vector<uint8_t>(nonce.begin(), nonce.end()));
    if (it == pending.end() || now > it->second) return false;
    pending.erase(it);
    return true;
  }
  void prune(uint64_t now) {
    for (auto it = pending.begin(); it != pending.end();)
      it = now > it->second ? pending.erase(it) : std::next(it);
  }
};

struct AccountRecord {
  std::vector<uint8_t> zeta;                             // serialized, the account key
  std::vector<std::vector<uint8_t>> device_pseudonyms;   // serialized zeta_d values
  std::optional<retrieval::RetrievalToken> token;        // latest E
  std::vector<std::pair<std::string, std::string>> disclosed;  // last snapshot
  uint64_t created_day = 0;
  uint64_t last_seen_day = 0;
  // first factor of an in-progress 2FA sign-on
  std::optional<std::vector<uint8_t>> pending_factor;

  bool has_device(std::span<const uint8_t> zd) const {
    for (const auto& d : device_pseudonyms)
      if (d.size() == zd.size() && std::equal(d.begin(), d.end(), zd.begin())) return true;
    return false;
  }
};

inline std::string account_id_for(std::span<const uint8_t> zeta_bytes) {
  std::array<uint8_t, 32> digest{};
  crypto_hash_sha256(digest.data(), zeta_bytes.data(), zeta_bytes.size());
  return to_hex(std::span(digest).first(8));
}

struct AccountStore {
  std::map<std::vector<uint8_t>, AccountRecord> accounts;  // by zeta bytes
  std::set<std::vector<uint8_t>> blocked;                  // rotated-out pseudonyms

  AccountRecord* find(std::span<const uint8_t> zeta) {
    auto it = accounts.find(std::vector<uint8_t>(zeta.begin(), zeta.end()));
    return it == accounts.end() ? nullptr : &it->second;
  }
  bool is_blocked(std::span<const uint8_t> zeta) const {
    return blocked.count(std::vector<uint8_t>(zeta.begin(), zeta.end())) > 0;
  }
};

struct RpPolicy {
  bool require_retrieval = false;
  bool require_2fa = false;
  uint64_t nonce_ttl_seconds = 300;
};

// full relying-party decision procedure: structure and proof, freshness,
// expiry, policy, then account resolution
inline SignOnResult verify_id(const PublicParams& params, const pscred::IdpPublicKey& pk,
                              const SignOnRequest& req, std::string_view domain, const G1& y,
                              const G1& h, uint64_t now, NonceCache& nonces,
                              AccountStore& accounts, const RpPolicy& policy) {
  if (policy.require_retrieval && !req.flags.retrieval)
    return SignOnResult::reject(RejectReason::policy_unmet,
                                "this relying party requires an identity-retrieval token");
  if (policy.require_2fa && (!req.flags.two_fa || req.flags.guest))
    return SignOnResult::reject(RejectReason::policy_unmet,
                                "this relying party requires a second device factor");

  if (!nonces.consume(req.rp_nonce, now))
    return SignOnResult::reject(RejectReason::replay, "nonce unknown, expired, or already used");

  auto tp_it = req.show.disclosed.find(ATTR_EXPIRY);
  auto tp_day = tp_it == req.show.disclosed.end() ? std::nullopt : scalar_to_u64(tp_it->second);
  if (!tp_day) return SignOnResult::reject(RejectReason::bad_proof, "expiry slot not disclosed");
  if (day_of(now) > *tp_day)
    return SignOnResult::reject(RejectReason::expired, "credential expiry day has passed");

  auto why = detail::check_signon_crypto(params, pk, req, domain, y, h, "signon");
  if (why != RejectReason::none)
    return SignOnResult::reject(why, "request failed verification");

  if (req.flags.guest)
    return {true, AccountAction::none, RejectReason::none, "guest sign-on accepted", {}};

  auto zeta_bytes_arr = req.zeta->serialize();
  std::vector<uint8_t> zeta_bytes(zeta_bytes_arr.begin(), zeta_bytes_arr.end());
  if (accounts.is_blocked(zeta_bytes))
    return SignOnResult::reject(RejectReason::blocked,
                                "this pseudonym was retired by a secret rotation");

  AccountRecord* rec = accounts.find(zeta_bytes);
  AccountAction action = AccountAction::matched;
  if (!rec) {
    AccountRecord fresh;
    fresh.zeta = zeta_bytes;
    fresh.created_day = day_of(now);
    rec = &accounts.accounts.emplace(zeta_bytes, std::move(fresh)).first->second;
    action = AccountAction::created;
  }
  rec->last_seen_day = day_of(now);

  std::vector<uint8_t> zd_bytes;
  if (req.zeta_d) {
    auto zd = req.zeta_d->serialize();
    zd_bytes.assign(zd.begin(), zd.end());
    if (!rec->has_device(zd_bytes)) {
      rec->device_pseudonyms.push_back(zd_bytes);
      if (action != AccountAction::created) action = AccountAction::device_enrolled;
    }
  }

  if (policy.require_2fa) {
    // a sign-on completes only as the second of two requests from distinct
    // enrolled devices
    if (!rec->pending_factor) {
      rec->pending_factor = zd_bytes;
      return {false, action, RejectReason::two_fa_pending,
              "first factor recorded; sign on from a second device", account_id_for(zeta_bytes)};
    }
    if (*rec->pending_factor == zd_bytes)
      return SignOnResult::reject(RejectReason::policy_unmet,
                                  "second factor must come from a different device");
    rec->pending_factor.reset();
  }

  if (req.token) rec->token = *req.token;
  rec->disclosed = req.disclosed_info;
  return {true, action, RejectReason::none, "sign-on accepted", account_id_for(zeta_bytes)};
}

// ---------------------------------------------------------------------------
// secret rotation (device-theft recovery)

struct RotationRequest {
  SignOnRequest old_req;    // over the expired credential on s, purpose "rotate-old"
  SignOnRequest fresh_req;  // over the current credential on s', purpose "rotate-new"

  std::vector<uint8_t> serialize() const {
    wire::Writer w;
    w.u8(MSG_VERSION);
    w.u8(uint8_t(MsgType::rotation_request));
    auto a = old_req.serialize(), b = fresh_req.serialize();
    w.u32(uint32_t(a.size()));
    w.bytes(a);
    w.u32(uint32_t(b.size()));
    w.bytes(b);
    return w.out;
  }

  static std::optional<RotationRequest> deserialize(std::span<const uint8_t> in) {
    wire::Reader r(in);
    uint8_t ver = 0, type = 0;
    if (!r.u8(ver) || ver != MSG_VERSION) return std::nullopt;
    if (!r.u8(type) || type != uint8_t(MsgType::rotation_request)) return std::nullopt;
    uint32_t len = 0;
    std::span<const uint8_t> chunk;
    RotationRequest rot;
    if (!r.u32(len) || !r.slice(len, chunk)) return std::nullopt;
    auto a = SignOnRequest::deserialize(chunk);
    if (!a) return std::nullopt;
    rot.old_req = std::move(*a);
    if (!r.u32(len) || !r.slice(len, chunk) || !r.done()) return std::nullopt;
    auto b = SignOnRequest::deserialize(chunk);
    if (!b) return std::nullopt;
    rot.fresh_req = std::move(*b);
    return rot;
  }
};

// client side: prove possession of both the retired and the replacement
// secret to the same RP under one nonce
inline RotationRequest rotate_secret(const PublicParams& params, const pscred::IdpPublicKey& pk,
                                     const StoredCredential& old_cred,
                                     const StoredCredential& new_cred, std::string_view idp,
                                     std::string_view domain, const G1& y, const G1& h,
                                     bool with_retrieval, std::span<const uint8_t> rp_nonce,
                                     uint64_t now, Rng& rng) {
  RotationRequest rot;
  rot.old_req = detail::build_signon(params, pk, old_cred, idp, domain, y, h, {}, {}, {},
                                     rp_nonce, now, /*require_unexpired=*/false, "rotate-old",
                                     rng);
  SignOnFlags fresh_flags;
  fresh_flags.retrieval = with_retrieval;
  rot.fresh_req = detail::build_signon(params, pk, new_cred, idp, domain, y, h, {}, {},
                                       fresh_flags, rp_nonce, now, /*require_unexpired=*/true,
                                       "rotate-new", rng);
  return rot;
}

// relying-party side: both proofs must hold, the old credential must already
// be expired (a thief holding a live credential cannot race the owner), and
// the old pseudonym must belong to an existing account.  The account moves
// to the new pseudonym and the old one is blocked for good.
inline SignOnResult rp_apply_rotation(const PublicParams& params, const pscred::IdpPublicKey& pk,
                                      const RotationRequest& rot, std::string_view domain,
                                      const G1& y, const G1& h, uint64_t now, NonceCache& nonces,
                                      AccountStore& accounts) {
  const auto& oldr = rot.old_req;
  const auto& newr = rot.fresh_req;
  if (oldr.flags.guest || newr.flags.guest || !oldr.zeta || !newr.zeta)
    return SignOnResult::reject(RejectReason::bad_request, "rotation requires both pseudonyms");
  if (oldr.rp_nonce != newr.rp_nonce || oldr.domain != newr.domain)
    return SignOnResult::reject(RejectReason::bad_request,
                                "rotation halves disagree on nonce or domain");
  if (!nonces.consume(oldr.rp_nonce, now))
    return SignOnResult::reject(RejectReason::replay, "nonce unknown, expired, or already used");

  auto old_tp = scalar_to_u64(oldr.show.disclosed.count(ATTR_EXPIRY)
                                  ? oldr.show.disclosed.at(ATTR_EXPIRY)
                                  : Scalar::zero());
  auto new_tp = scalar_to_u64(newr.show.disclosed.count(ATTR_EXPIRY)
                                  ? newr.show.disclosed.at(ATTR_EXPIRY)
                                  : Scalar::zero());
  if (!old_tp || !new_tp)
    return SignOnResult::reject(RejectReason::bad_proof, "expiry slots not disclosed");
  if (day_of(now) <= *old_tp)
    return SignOnResult::reject(RejectReason::bad_request,
                                "old credential is still valid; rotation refused");
  if (day_of(now) > *new_tp)
    return SignOnResult::reject(RejectReason::expired, "replacement credential has expired");

  if (detail::check_signon_crypto(params, pk, oldr, domain, y, h, "rotate-old") !=
      RejectReason::none)
    return SignOnResult::reject(RejectReason::bad_proof, "old-secret proof failed");
  if (detail::check_signon_crypto(params, pk, newr, domain, y, h, "rotate-new") !=
      RejectReason::none)
    return SignOnResult::reject(RejectReason::bad_proof, "new-secret proof failed");

  auto oz = oldr.zeta->serialize();
  auto nz = newr.zeta->serialize();
  std::vector<uint8_t> old_zeta(oz.begin(), oz.end()), new_zeta(nz.begin(), nz.end());
  if (old_zeta == new_zeta)
    return SignOnResult::reject(RejectReason::bad_request, "rotation must change the secret");
  AccountRecord* rec = accounts.find(old_zeta);
  if (!rec)
    return SignOnResult::reject(RejectReason::unknown_account,
                                "no account under the old pseudonym");
  if (accounts.find(new_zeta))
    return SignOnResult::reject(RejectReason::bad_request, "new pseudonym already has an account");

  AccountRecord moved = *rec;
  moved.zeta = new_zeta;
  moved.last_seen_day = day_of(now);
  moved.pending_factor.reset();
  if (newr.token) moved.token = *newr.token;
  accounts.accounts.erase(old_zeta);
  accounts.accounts.emplace(new_zeta, std::move(moved));
  accounts.blocked.insert(old_zeta);
  return {true, AccountAction::rotated, RejectReason::none, "pseudonym rotated",
          account_id_for(new_zeta)};
}

// ---------------------------------------------------------------------------
// device enrollment: hand the global secret s to a new device through the
// issuer, with integrity anchored in a short salt the user types on both
// devices

struct EnrollKeyPair {
  std::array<uint8_t, crypto_box_PUBLICKEYBYTES> pk{};
  std::array<uint8_t, crypto_box_SECRETKEYBYTES> sk{};
};

inline EnrollKeyPair enroll_begin() {
  ensure_sodium();
  EnrollKeyPair kp;
  crypto_box_keypair(kp.pk.data(), kp.sk.data());
  return kp;
}

// short code both devices display; equal iff both saw the same public key
// and the same salt, so an issuer swapping the key is caught by eye
inline std::string enroll_fingerprint(std::span<const uint8_t> device_pk,
                                      std::string_view salt) {
  nizk::Transcript t;
  t.append("elpasso-enroll-fingerprint");
  t.append(device_pk);
  t.append(salt);
  std::array<uint8_t, 32> digest{};
  crypto_hash_sha256(digest.data(), t.bytes.data(), t.bytes.size());
  return to_hex(std::span(digest).first(4));
}

// old device: verify the fingerprint the new device displays, then seal s to
// the new device's key
inline std::vector<uint8_t> enroll_approve(const Scalar& s, std::span<const uint8_t> device_pk,
                                           std::string_view salt,
                                           std::string_view expected_fingerprint) {
  if (device_pk.size() != crypto_box_PUBLICKEYBYTES)
    throw std::invalid_argument("enroll_approve: bad public key size");
  if (enroll_fingerprint(device_pk, salt) != expected_fingerprint)
    throw std::invalid_argument(
        "enroll_approve: fingerprint mismatch; wrong salt or substituted key");
  auto msg = s.to_bytes();
  std::vector<uint8_t> sealed(crypto_box_SEALBYTES + msg.size());
  crypto_box_seal(sealed.data(), msg.data(), msg.size(), device_pk.data());
  return sealed;
}

// new device: open the relayed ciphertext; any tampering or a key swap makes
// this fail
inline std::optional<Scalar> enroll_complete(const EnrollKeyPair& kp,
                                             std::span<const uint8_t> sealed) {
  if (sealed.size() != crypto_box_SEALBYTES + Scalar::BYTES) return std::nullopt;
  std::array<uint8_t, Scalar::BYTES> msg{};
  if (crypto_box_seal_open(msg.data(), sealed.data(), sealed.size(), kp.pk.data(),
                           kp.sk.data()) != 0)
    return std::nullopt;
  return Scalar::from_bytes(msg);
}

// relay messages (issuer stores and forwards, never reads)
struct EnrollInitMsg {
  std::string device_id;
  std::array<uint8_t, crypto_box_PUBLICKEYBYTES> device_pk{};

  std::vector<uint8_t> serialize() const {
    wire::Writer w;
    w.u8(MSG_VERSION);
    w.u8(uint8_t(MsgType::enroll_init));
    w.u8(uint8_t(device_id.size()));
    w.str(device_id);
    w.bytes(device_pk);
    return w.out;
  }

  static std::optional<EnrollInitMsg> deserialize(std::span<const uint8_t> in) {
    wire::Reader r(in);
    uint8_t ver = 0, type = 0, len = 0;
    if (!r.u8(ver) || ver != MSG_VERSION) return std::nullopt;
    if (!r.u8(type) || type != uint8_t(MsgType::enroll_init)) return std::nullopt;
    EnrollInitMsg m;
    std::span<const uint8_t> chunk;
    if (!r.u8(len) || !r.slice(len, chunk)) return std::nullopt;
    m.device_id.assign(chunk.begin(), chunk.end());
    if (!r.bytes(m.device_pk) || !r.done()) return std::nullopt;
    return m;
  }
};

struct EnrollTransferMsg {  // approve (old -> issuer) and complete (issuer -> new)
  MsgType type = MsgType::enroll_approve;
  std::string device_id;
  std::vector<uint8_t> sealed_secret;

  std::vector<uint8_t> serialize() const {
    wire::Writer w;
    w.u8(MSG_VERSION);
    w.u8(uint8_t(type));
    w.u8(uint8_t(device_id.size()));
    w.str(device_id);
    w.u32(uint32_t(sealed_secret.size()));
    w.bytes(sealed_secret);
    return w.out;
  }

  static std::optional<EnrollTransferMsg> deserialize(std::span<const uint8_t> in) {
    wire::Reader r(in);
    uint8_t ver = 0, type = 0, len = 0;
    if (!r.u8(ver) || ver != MSG_VERSION) return std::nullopt;
    if (!r.u8(type) || (type != uint8_t(MsgType::enroll_approve) &&
                        type != uint8_t(MsgType::enroll_complete)))
      return std::nullopt;
    EnrollTransferMsg m;
    m.type = MsgType(type);
    std::span<const uint8_t> chunk;
    if (!r.u8(len) || !r.slice(len, chunk)) return std::nullopt;
    m.device_id.assign(chunk.begin(), chunk.end());
    uint32_t slen = 0;
    if (!r.u32(slen) || slen > 4096 || !r.slice(slen, chunk) || !r.done()) return std::nullopt;
    m.sealed_secret.assign(chunk.begin(), chunk.end());
    return m;
  }
};

// report sent to each decryption authority when an account is investigated
struct RetrievalReportMsg {
  std::string case_id;
  retrieval::RetrievalToken token;

  std::vector<uint8_t> serialize() const {
    wire::Writer w;
    w.u8(MSG_VERSION);
    w.u8(uint8_t(MsgType::retrieval_report));
    w.u8(uint8_t(case_id.size()));
    w.str(case_id);
    auto t = token.serialize();
    w.bytes(t);
    return w.out;
  }

  static std::optional<RetrievalReportMsg> deserialize(std::span<const uint8_t> in) {
    wire::Reader r(in);
    uint8_t ver = 0, type = 0, len = 0;
    if (!r.u8(ver) || ver != MSG_VERSION) return std::nullopt;
    if (!r.u8(type) || type != uint8_t(MsgType::retrieval_report)) return std::nullopt;
    RetrievalReportMsg m;
    std::span<const uint8_t> chunk;
    if (!r.u8(len) || !r.slice(len, chunk)) return std::nullopt;
    m.case_id.assign(chunk.begin(), chunk.end());
    if (!r.slice(1 + 2 * G1::BYTES, chunk)) return std::nullopt;
    auto t = retrieval::RetrievalToken::deserialize(chunk);
    if (!t || !r.done()) return std::nullopt;
    m.token = *t;
    return m;
  }
};

}  // namespace elpasso::protocol
