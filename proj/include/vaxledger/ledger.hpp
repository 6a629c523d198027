#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vaxledger/credential.hpp"
#include "vaxledger/crypto.hpp"
#include "vaxledger/error.hpp"

namespace vaxledger {

using Document = nlohmann::json;

// ---------------------------------------------------------------------------
// Member states
// ---------------------------------------------------------------------------

inline constexpr std::array<std::string_view, 27> kEuRoster = {
    "AT", "BE", "BG", "CY", "CZ", "DE", "DK", "EE", "ES", "FI", "FR", "GR", "HR", "HU",
    "IE", "IT", "LT", "LU", "LV", "MT", "NL", "PL", "PT", "RO", "SE", "SI", "SK"};

class MemberStateId {
 public:
  MemberStateId() = default;

  explicit MemberStateId(std::string_view code) : code_(code) {
    require(std::find(kEuRoster.begin(), kEuRoster.end(), code) != kEuRoster.end(), Errc::invalid_argument,
            "'" + std::string(code) + "' is not a roster member state");
  }

  static MemberStateId at(std::size_t roster_index) { return MemberStateId(kEuRoster.at(roster_index)); }

  const std::string& code() const { return code_; }

  std::size_t roster_index() const {
    return static_cast<std::size_t>(std::find(kEuRoster.begin(), kEuRoster.end(), code_) - kEuRoster.begin());
  }

  /// Key prefix owned by this member state, e.g. "DE/".
  std::string ns() const { return code_ + "/"; }

  friend bool operator==(const MemberStateId&, const MemberStateId&) = default;
  friend auto operator<=>(const MemberStateId&, const MemberStateId&) = default;

 private:
  std::string code_;
};

inline std::vector<MemberStateId> roster() {
  std::vector<MemberStateId> out;
  for (std::size_t i = 0; i < kEuRoster.size(); ++i) out.push_back(MemberStateId::at(i));
  return out;
}

// ---------------------------------------------------------------------------
// Transactions and blocks
// ---------------------------------------------------------------------------

/// Position of the transaction that last wrote a key.
struct Version {
  std::uint64_t block = 0;
  std::uint32_t tx = 0;

  friend bool operator==(const Version&, const Version&) = default;
  friend auto operator<=>(const Version&, const Version&) = default;
};

struct ChaincodeCall {
  std::string name;
  std::vector<Bytes> args;

  /// Operation name then argument count then each argument, all length-prefixed.
  Bytes encode() const {
    CanonicalWriter w("VCC1");
    w.field(name).field(std::uint64_t{args.size()});
    for (const auto& a : args) w.field(ByteView(a));
    return std::move(w).bytes();
  }

  friend bool operator==(const ChaincodeCall&, const ChaincodeCall&) = default;
};

struct ReadEntry {
  std::string key;
  std::optional<Version> version;  // nullopt: key was absent when read

  friend bool operator==(const ReadEntry&, const ReadEntry&) = default;
};

struct WriteEntry {
  std::string key;
  Document value;

  friend bool operator==(const WriteEntry&, const WriteEntry&) = default;
};

struct Endorsement {
  MemberStateId endorser;
  Bytes signature;

  friend bool operator==(const Endorsement&, const Endorsement&) = default;
};

struct Transaction {
  std::string tx_id;
  MemberStateId submitter;
  ChaincodeCall call;
  std::vector<ReadEntry> read_set;
  std::vector<WriteEntry> write_set;
  std::vector<Endorsement> endorsements;
  std::uint64_t payload_size = 0;

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

namespace detail {
inline void write_body(CanonicalWriter& w, const Transaction& tx) {
  w.field(tx.tx_id).field(tx.submitter.code()).field(ByteView(tx.call.encode()));
  w.field(std::uint64_t{tx.read_set.size()});
  for (const auto& r : tx.read_set) {
    w.field(r.key).field(std::uint64_t{r.version.has_value()});
    if (r.version) w.field(r.version->block).field(std::uint64_t{r.version->tx});
  }
  w.field(std::uint64_t{tx.write_set.size()});
  for (const auto& wr : tx.write_set) w.field(wr.key).field(wr.value.dump());
}
}  // namespace detail

/// Bytes covered by endorsement signatures.
inline Bytes signing_bytes(const Transaction& tx) {
  CanonicalWriter w("VTS1");
  detail::write_body(w, tx);
  return std::move(w).bytes();
}

/// Full canonical encoding, endorsements and declared payload size included.
inline Bytes encode_transaction(const Transaction& tx) {
  CanonicalWriter w("VTX1");
  detail::write_body(w, tx);
  w.field(std::uint64_t{tx.endorsements.size()});
  for (const auto& e : tx.endorsements) w.field(e.endorser.code()).field(ByteView(e.signature));
  w.field(tx.payload_size);
  return std::move(w).bytes();
}

inline void endorse(Transaction& tx, const MemberStateId& endorser, const KeyPair& key) {
  tx.endorsements.push_back(Endorsement{endorser, sign(signing_bytes(tx), key.private_key)});
}

struct BlockHeader {
  std::uint64_t number = 0;
  Digest prev_hash{};
  Digest data_hash{};
};

enum class TxValidity : std::uint8_t { valid, bad_signature, foreign_namespace, stale_read, duplicate_tx_id };

inline std::string_view to_string(TxValidity v) {
  switch (v) {
    case TxValidity::valid: return "valid";
    case TxValidity::bad_signature: return "bad-signature";
    case TxValidity::foreign_namespace: return "foreign-namespace";
    case TxValidity::stale_read: return "stale-read";
    case TxValidity::duplicate_tx_id: return "duplicate-tx-id";
  }
  return "unknown";
}

struct Block {
  BlockHeader header;
  std::vector<Transaction> transactions;
  Bytes sealer_signature;
  // Commit-time metadata; not covered by any hash.
  std::vector<TxValidity> validity;

  std::uint64_t number() const { return header.number; }
};

inline Digest compute_block_hash(const BlockHeader& h) {
  return sha256(CanonicalWriter("VBH1").field(h.number).field(ByteView(h.prev_hash)).field(ByteView(h.data_hash)).bytes());
}

inline Digest compute_data_hash(std::span<const Transaction> txs) {
  CanonicalWriter w("VBD1");
  w.field(std::uint64_t{txs.size()});
  for (const auto& tx : txs) w.field(ByteView(encode_transaction(tx)));
  return sha256(w.bytes());
}

inline std::uint64_t encoded_block_size(const Block& b) {
  std::uint64_t size = 8 + 2 * kDigestSize + b.sealer_signature.size();
  for (const auto& tx : b.transactions) size += tx.payload_size;
  return size;
}

/// Ordered sequence of hash-chained blocks held by one peer.
class Chain {
 public:
  std::size_t size() const { return blocks_.size(); }
  bool empty() const { return blocks_.empty(); }
  const std::vector<Block>& blocks() const { return blocks_; }
  const Block& at(std::size_t i) const { return blocks_.at(i); }
  Block& mutable_at(std::size_t i) { return blocks_.at(i); }

  /// Header hash of the tip, or the all-zero digest for an empty chain.
  Digest tip_hash() const { return blocks_.empty() ? Digest{} : compute_block_hash(blocks_.back().header); }

  void append(Block block) {
    if (block.header.number != blocks_.size()) {
      fail(Errc::out_of_order, "expected block " + std::to_string(blocks_.size()) + ", got " +
                                   std::to_string(block.header.number));
    }
    if (block.header.prev_hash != tip_hash()) {
      fail(Errc::broken_chain, "block " + std::to_string(block.header.number) + " does not extend the tip");
    }
    blocks_.push_back(std::move(block));
  }

  /// Recomputes every data hash and back-link, and checks sealer signatures
  /// when a key is supplied. Returns the index of the first bad block.
  std::optional<std::size_t> first_invalid_block(const Bytes* sealer_public_key = nullptr) const {
    Digest prev{};
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const auto& b = blocks_[i];
      if (b.header.number != i || b.header.prev_hash != prev) return i;
      if (b.header.data_hash != compute_data_hash(b.transactions)) return i;
      Digest h = compute_block_hash(b.header);
      if (sealer_public_key && !verify_signature(h, b.sealer_signature, *sealer_public_key)) return i;
      prev = h;
    }
    return std::nullopt;
  }

 private:
  std::vector<Block> blocks_;
};

// ---------------------------------------------------------------------------
// World state
// ---------------------------------------------------------------------------

struct StateEntry {
  std::string key;
  Document value;
  Version version;
};

/// Record type of a key: the segment between the member-state prefix and the
/// record id, e.g. "cert" for "DE/cert/<hex>".
inline std::string_view record_type_of(std::string_view key) {
  auto first = key.find('/');
  if (first == std::string_view::npos) return {};
  auto second = key.find('/', first + 1);
  if (second == std::string_view::npos) return {};
  return key.substr(first + 1, second - first - 1);
}

/// Versioned key-value map. Iteration follows first-insertion order, and a
/// per-record-type index keeps that order for typed scans.
class WorldState {
 public:
  const StateEntry* find(std::string_view key) const {
    auto it = index_.find(std::string(key));
    return it == index_.end() ? nullptr : &entries_[it->second];
  }

  std::optional<Version> version_of(std::string_view key) const {
    const auto* e = find(key);
    return e ? std::optional<Version>(e->version) : std::nullopt;
  }

  void put(const std::string& key, Document value, Version version) {
    auto [it, inserted] = index_.try_emplace(key, entries_.size());
    if (inserted) {
      entries_.push_back(StateEntry{key, std::move(value), version});
      by_type_[std::string(record_type_of(key))].push_back(it->second);
    } else {
      auto& e = entries_[it->second];
      e.value = std::move(value);
      e.version = version;
    }
  }

  std::size_t size() const { return entries_.size(); }
  const std::vector<StateEntry>& entries() const { return entries_; }

  std::size_t count_of_type(std::string_view type) const {
    auto it = by_type_.find(std::string(type));
    return it == by_type_.end() ? 0 : it->second.size();
  }

  template <typename Visitor>
  void scan_type(std::string_view type, Visitor&& visit) const {
    auto it = by_type_.find(std::string(type));
    if (it == by_type_.end()) return;
    for (auto idx : it->second) visit(entries_[idx]);
  }

  Digest digest() const {
    CanonicalWriter w("VWS1");
    w.field(std::uint64_t{entries_.size()});
    for (const auto& e : entries_) {
      w.field(e.key).field(e.value.dump()).field(e.version.block).field(std::uint64_t{e.version.tx});
    }
    return sha256(w.bytes());
  }

  friend bool operator==(const WorldState& a, const WorldState& b) { return a.digest() == b.digest(); }

 private:
  std::vector<StateEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::map<std::string, std::vector<std::size_t>, std::less<>> by_type_;
};

// ---------------------------------------------------------------------------
// Endorsement policy and validation
// ---------------------------------------------------------------------------

/// Memo of signature checks keyed by (message digest, signature, key).
/// Verification is a pure function, so replicas may share one.
class SignatureMemo {
 public:
  bool verify(ByteView msg, ByteView sig, ByteView pk) {
    Bytes key = CanonicalWriter("VSM1").field(ByteView(sha256(msg))).field(sig).field(pk).bytes();
    std::lock_guard lock(mu_);
    auto it = known_.find(key);
    if (it != known_.end()) return it->second;
    bool ok = verify_signature(msg, sig, pk);
    known_.emplace(std::move(key), ok);
    return ok;
  }

 private:
  struct BytesHash {
    std::size_t operator()(const Bytes& b) const {
      return std::hash<std::string_view>{}(std::string_view(reinterpret_cast<const char*>(b.data()), b.size()));
    }
  };
  std::mutex mu_;
  std::unordered_map<Bytes, bool, BytesHash> known_;
};

/// Disjunctive policy: a transaction needs a valid signature from its own
/// submitter and nobody else.
struct EndorsementPolicy {
  std::map<MemberStateId, Bytes> roster;  // member state -> public key
  std::shared_ptr<SignatureMemo> memo;    // optional, shared by copies

  const Bytes* key_of(const MemberStateId& ms) const {
    auto it = roster.find(ms);
    return it == roster.end() ? nullptr : &it->second;
  }

  bool check(ByteView msg, ByteView sig, ByteView pk) const {
    return memo ? memo->verify(msg, sig, pk) : verify_signature(msg, sig, pk);
  }
};

inline TxValidity validate_transaction(const Transaction& tx, const EndorsementPolicy& policy,
                                       const WorldState& state) {
  require(!policy.roster.empty(), Errc::invalid_argument, "endorsement policy roster is empty");
  const Bytes* key = policy.key_of(tx.submitter);
  bool self_signed = false;
  if (key) {
    Bytes msg = signing_bytes(tx);
    self_signed = std::any_of(tx.endorsements.begin(), tx.endorsements.end(), [&](const Endorsement& e) {
      return e.endorser == tx.submitter && policy.check(msg, e.signature, *key);
    });
  }
  if (!self_signed) return TxValidity::bad_signature;

  const std::string prefix = tx.submitter.ns();
  for (const auto& w : tx.write_set) {
    if (!w.key.starts_with(prefix)) return TxValidity::foreign_namespace;
  }
  for (const auto& r : tx.read_set) {
    if (state.version_of(r.key) != r.version) return TxValidity::stale_read;
  }
  return TxValidity::valid;
}

/// Evaluates the block's transactions in order against `state`, applying the
/// write sets of valid ones at version (block, index). When `seen_tx_ids` is
/// supplied, repeated ids are flagged and the set is updated.
inline std::vector<TxValidity> apply_block(WorldState& state, const Block& block, const EndorsementPolicy& policy,
                                           std::unordered_set<std::string>* seen_tx_ids = nullptr) {
  std::vector<TxValidity> flags;
  flags.reserve(block.transactions.size());
  for (std::size_t i = 0; i < block.transactions.size(); ++i) {
    const auto& tx = block.transactions[i];
    TxValidity v = TxValidity::valid;
    if (seen_tx_ids && seen_tx_ids->contains(tx.tx_id)) v = TxValidity::duplicate_tx_id;
    if (v == TxValidity::valid) v = validate_transaction(tx, policy, state);
    if (v == TxValidity::valid) {
      Version at{block.header.number, static_cast<std::uint32_t>(i)};
      for (const auto& w : tx.write_set) state.put(w.key, w.value, at);
    }
    if (seen_tx_ids) seen_tx_ids->insert(tx.tx_id);
    flags.push_back(v);
  }
  return flags;
}

/// One peer's ledger: chain, world state and the policy it validates with.
/// Single writer (commit); readers see only committed blocks.
class PeerLedger {
 public:
  explicit PeerLedger(EndorsementPolicy policy) : policy_(std::move(policy)) {}

  const std::vector<TxValidity>& commit(Block block) {
    chain_.append(std::move(block));
    Block& stored = chain_.mutable_at(chain_.size() - 1);
    stored.validity = apply_block(state_, stored, policy_, &seen_tx_ids_);
    return stored.validity;
  }

  const Chain& chain() const { return chain_; }
  const WorldState& state() const { return state_; }
  const EndorsementPolicy& policy() const { return policy_; }

  std::size_t valid_transaction_count() const {
    std::size_t n = 0;
    for (const auto& b : chain_.blocks()) n += static_cast<std::size_t>(std::count(b.validity.begin(), b.validity.end(), TxValidity::valid));
    return n;
  }

 private:
  EndorsementPolicy policy_;
  Chain chain_;
  WorldState state_;
  std::unordered_set<std::string> seen_tx_ids_;
};

// ---------------------------------------------------------------------------
// Certificate records and queries
// ---------------------------------------------------------------------------

inline constexpr std::string_view kCertType = "cert";
inline constexpr std::string_view kCenterType = "center";

inline std::string cert_key(const MemberStateId& ms, const CertificateHash& h) {
  return ms.ns() + std::string(kCertType) + "/" + h.hex();
}

struct CertificateRecord {
  CertificateHash cert_hash;
  MemberStateId ms;
  Did issuer_did;
  Version registered_at;
  Document metadata = Document::object();

  Document to_document() const {
    return Document{{"docType", kCertType},
                    {"certHash", cert_hash.hex()},
                    {"ms", ms.code()},
                    {"issuerDid", issuer_did.text()},
                    {"metadata", metadata}};
  }

  static CertificateRecord from_entry(const StateEntry& e) {
    const auto& d = e.value;
    return CertificateRecord{CertificateHash::from_hex(d.at("certHash").get<std::string>()),
                             MemberStateId(d.at("ms").get<std::string>()),
                             Did::parse(d.at("issuerDid").get<std::string>()), e.version, d.at("metadata")};
  }

  friend bool operator==(const CertificateRecord&, const CertificateRecord&) = default;
};

struct LookupResult {
  std::optional<CertificateRecord> record;
  std::size_t scan_count = 0;
};

inline LookupResult get_record(const WorldState& state, std::string_view key) {
  const auto* e = state.find(key);
  if (!e || record_type_of(key) != kCertType) return {std::nullopt, 1};
  return {CertificateRecord::from_entry(*e), 1};
}

/// Conjunction of field == value terms over certificate records.
struct RecordQuery {
  std::vector<std::pair<std::string, std::string>> equals;

  static inline const std::array<std::string_view, 3> kFields = {"certHash", "ms", "issuerDid"};

  RecordQuery& where(std::string field, std::string value) {
    equals.emplace_back(std::move(field), std::move(value));
    return *this;
  }
};

struct QueryResult {
  std::vector<CertificateRecord> matches;
  std::size_t scan_count = 0;
};

/// Linear scan over certificate records in insertion order; scan_count is the
/// number of records visited, i.e. the full record count.
inline QueryResult rich_query(const WorldState& state, const RecordQuery& query) {
  for (const auto& [field, _] : query.equals) {
    if (std::find(RecordQuery::kFields.begin(), RecordQuery::kFields.end(), field) == RecordQuery::kFields.end()) {
      fail(Errc::invalid_query, "unknown field '" + field + "'");
    }
  }
  QueryResult out;
  state.scan_type(kCertType, [&](const StateEntry& e) {
    ++out.scan_count;
    bool match = std::all_of(query.equals.begin(), query.equals.end(), [&](const auto& term) {
      auto it = e.value.find(term.first);
      return it != e.value.end() && it->is_string() && it->template get_ref<const std::string&>() == term.second;
    });
    if (match) out.matches.push_back(CertificateRecord::from_entry(e));
  });
  return out;
}

// ---------------------------------------------------------------------------
// Snapshot export: one JSON block per line, schema "vaxledger.block/1".
// ---------------------------------------------------------------------------

inline constexpr std::string_view kBlockSchema = "vaxledger.block/1";

inline nlohmann::ordered_json block_to_json(const Block& b) {
  nlohmann::ordered_json j;
  j["schema"] = kBlockSchema;
  j["number"] = b.header.number;
  j["prevHash"] = to_hex(b.header.prev_hash);
  j["dataHash"] = to_hex(b.header.data_hash);
  j["headerHash"] = to_hex(compute_block_hash(b.header));
  j["sealerSignature"] = to_hex(b.sealer_signature);
  auto txs = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < b.transactions.size(); ++i) {
    const auto& tx = b.transactions[i];
    nlohmann::ordered_json t;
    t["txId"] = tx.tx_id;
    t["submitter"] = tx.submitter.code();
    auto args = nlohmann::ordered_json::array();
    for (const auto& a : tx.call.args) args.push_back(to_hex(a));
    t["call"] = {{"name", tx.call.name}, {"args", args}};
    auto reads = nlohmann::ordered_json::array();
    for (const auto& r : tx.read_set) {
      nlohmann::ordered_json rv = nullptr;
      if (r.version) rv = {r.version->block, r.version->tx};
      reads.push_back({{"key", r.key}, {"version", rv}});
    }
    t["readSet"] = reads;
    auto writes = nlohmann::ordered_json::array();
    for (const auto& w : tx.write_set) writes.push_back({{"key", w.key}, {"value", w.value}});
    t["writeSet"] = writes;
    auto ends = nlohmann::ordered_json::array();
    for (const auto& e : tx.endorsements) ends.push_back({{"ms", e.endorser.code()}, {"signature", to_hex(e.signature)}});
    t["endorsements"] = ends;
    t["payloadSize"] = tx.payload_size;
    t["validity"] = i < b.validity.size() ? std::string(to_string(b.validity[i])) : std::string("pending");
    txs.push_back(std::move(t));
  }
  j["transactions"] = std::move(txs);
  return j;
}

inline void export_snapshot(const Chain& chain, std::ostream& out) {
  for (const auto& b : chain.blocks()) out << block_to_json(b).dump() << '\n';
}

}  // namespace vaxledger
