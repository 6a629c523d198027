#pragma once

#include <algorithm>
#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "vaxledger/bench_config.hpp"
#include "vaxledger/chaincode.hpp"
#include "vaxledger/credential.hpp"
#include "vaxledger/ledger.hpp"
#include "vaxledger/netsim.hpp"
#include "vaxledger/ordering.hpp"
#include "vaxledger/workload.hpp"

namespace vaxledger {

// ---------------------------------------------------------------------------
// Fixed identities. Independent of the scenario seed so that fixtures made by
// the CLI stay valid across runs.
// ---------------------------------------------------------------------------

struct CenterIdentity {
  MedicalCenterRecord record;
  KeyPair key;
};

inline CenterIdentity center_identity(const MemberStateId& ms) {
  Did issuer = generate_did("vax", "center-" + ms.code());
  std::string id = "center-" + ms.code();
  std::transform(id.begin(), id.end(), id.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return {MedicalCenterRecord{id, ms, "Vaccination centre " + ms.code(), "Capital, " + ms.code(), issuer},
          make_keypair(issuer, "center-key-" + ms.code())};
}

inline KeyPair member_state_key(const MemberStateId& ms) {
  Did owner = generate_did("vax", "ms-" + ms.code());
  return make_keypair(owner, "ms-key-" + ms.code());
}

inline KeyPair sealer_key() {
  Did owner = generate_did("vax", "ordering-sealer");
  return make_keypair(owner, "ordering-sealer-key");
}

inline EndorsementPolicy default_policy() {
  EndorsementPolicy p;
  p.memo = std::make_shared<SignatureMemo>();
  for (const auto& ms : roster()) p.roster.emplace(ms, member_state_key(ms).public_key);
  return p;
}

inline IssuerKeys center_issuer_keys() {
  IssuerKeys keys;
  for (const auto& ms : roster()) {
    auto c = center_identity(ms);
    keys.emplace(c.record.issuer_did.text(), c.key.public_key);
  }
  return keys;
}

/// Member state whose medical center owns `issuer`, if any.
inline std::optional<MemberStateId> member_state_of_issuer(const Did& issuer) {
  for (const auto& ms : roster()) {
    if (center_identity(ms).record.issuer_did == issuer) return ms;
  }
  return std::nullopt;
}

inline constexpr std::int64_t kIssuanceBase = 1'640'995'200;  // 2022-01-01T00:00:00Z

inline VaccineMetadata sample_vaccine(std::size_t i) {
  return VaccineMetadata{"Comirnaty", 2, 2, "BATCH-" + std::to_string(1000 + i % 9000)};
}

inline Document metadata_document(const VaccinationCredential& c) {
  return Document{{"product", c.vaccine_product},
                  {"doseNumber", c.dose_number},
                  {"totalDoses", c.total_doses},
                  {"batchId", c.batch_id}};
}

// ---------------------------------------------------------------------------
// Bootstrap ledger: center registrations, then preloaded certificates.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kBootstrapBlockSize = 500;

struct Bootstrap {
  std::optional<PeerLedger> ledger;  // full fidelity only
  std::size_t block_count = 0;
  std::size_t cert_count = 0;
  std::optional<BlockTip> tip;
  std::optional<CertificateHash> target_hash;  // last preloaded record
  std::optional<MemberStateId> target_owner;
};

namespace detail {

inline Transaction bootstrap_register(const WorldState& state, const VaccinationCredential& cred,
                                      const MemberStateId& ms, const KeyPair& ms_key, std::size_t i, bool* ok) {
  ChaincodeContext ctx(ms, true, state);
  auto hash = hash_credential(cred);
  auto resp = register_certificate(ctx, ByteView(hash.digest), cred.issuer, metadata_document(cred));
  *ok = resp.ok();
  return make_transaction(resp, register_certificate_call(hash, cred.issuer), ms, ms_key, "preload-" + std::to_string(i));
}

}  // namespace detail

/// `extra` becomes the last preloaded record when its issuer is a known center.
inline Bootstrap build_bootstrap(std::size_t preloaded, Fidelity fidelity,
                                 const std::optional<VaccinationCredential>& extra = std::nullopt) {
  Bootstrap b;
  std::size_t total = preloaded + (extra ? 1 : 0);
  b.block_count = 1 + (total + kBootstrapBlockSize - 1) / kBootstrapBlockSize;
  if (fidelity == Fidelity::timing) {
    b.cert_count = total;
    if (total > 0) b.target_owner = extra ? member_state_of_issuer(extra->issuer) : MemberStateId::at((total - 1) % 27);
    return b;
  }

  auto sealer = sealer_key();
  std::vector<KeyPair> ms_keys;
  for (const auto& ms : roster()) ms_keys.push_back(member_state_key(ms));
  b.ledger.emplace(default_policy());
  PeerLedger& ledger = *b.ledger;

  std::vector<Envelope> genesis;
  for (const auto& ms : roster()) {
    ChaincodeContext ctx(ms, true, ledger.state());
    auto center = center_identity(ms);
    auto resp = register_medical_center(ctx, center.record);
    genesis.push_back(Envelope{make_transaction(resp, register_center_call(center.record), ms,
                                                ms_keys[ms.roster_index()], "center"),
                               kSimEpoch});
  }
  ledger.commit(seal_block(genesis, std::nullopt, sealer));

  std::vector<Envelope> batch;
  auto flush = [&] {
    if (batch.empty()) return;
    ledger.commit(seal_block(batch, tip_of(ledger.chain()), sealer));
    batch.clear();
  };
  for (std::size_t i = 0; i < total; ++i) {
    VaccinationCredential cred;
    MemberStateId ms;
    if (extra && i + 1 == total) {
      cred = *extra;
      auto owner = member_state_of_issuer(cred.issuer);
      ms = owner.value_or(MemberStateId::at(i % 27));
    } else {
      ms = MemberStateId::at(i % 27);
      auto center = center_identity(ms);
      Did subject = generate_did("vax", "preloaded-subject-" + std::to_string(i));
      cred = issue_credential(center.key, center.record.issuer_did, subject, sample_vaccine(i),
                              kIssuanceBase + static_cast<std::int64_t>(i), kSecondsPerYear);
    }
    bool ok = false;
    auto tx = detail::bootstrap_register(ledger.state(), cred, ms, ms_keys[ms.roster_index()], i, &ok);
    if (i + 1 == total) {
      b.target_hash = hash_credential(cred);
      b.target_owner = ms;
    }
    if (ok) batch.push_back(Envelope{std::move(tx), kSimEpoch});
    if (batch.size() == kBootstrapBlockSize) flush();
  }
  flush();
  b.block_count = ledger.chain().size();
  b.cert_count = ledger.state().count_of_type(kCertType);
  b.tip = tip_of(ledger.chain());
  return b;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// In-flight growth above this fraction of the offered rate, per second,
/// over the second half of a run counts as unbounded queue growth.
inline constexpr double kSaturationGrowthFraction = 0.05;

struct BusyFractions {
  double rest = 0;
  double endorser = 0;
  double orderer = 0;
  double committer = 0;

  friend bool operator==(const BusyFractions&, const BusyFractions&) = default;
};

struct LevelMetrics {
  Step step = Step::register_cert;
  double tps = 0;
  std::size_t submitted = 0;
  std::size_t completed = 0;
  std::size_t unavailable = 0;
  std::size_t invalid = 0;
  std::size_t timed_out = 0;
  double mean_ms = 0;
  double median_ms = 0;
  double p95_ms = 0;
  double peer_bandwidth_kb = 0;
  double ordering_bandwidth_kb = 0;
  BusyFractions busy;
  double queue_growth_per_s = 0;
  std::size_t blocks = 0;
  bool saturated = false;

  std::size_t error_count() const { return unavailable + invalid + timed_out; }

  friend bool operator==(const LevelMetrics&, const LevelMetrics&) = default;
};

struct MetricsReport {
  Step step = Step::register_cert;
  Fidelity fidelity = Fidelity::full;
  std::vector<LevelMetrics> levels;
};

struct RunOptions {
  bool keep_trace = false;
  bool keep_snapshot = false;
  std::optional<VaccinationCredential> credential;  // register: request 0; verify: last preloaded record
};

struct RequestTimeline {
  std::optional<CertificateHash> cert_hash;
  bool found = false;
  std::size_t scan_count = 0;
};

struct LevelRun {
  LevelMetrics metrics;
  std::size_t client_request_events = 0;
  std::string snapshot;                // target peer chain, NDJSON (keep_snapshot)
  Digest snapshot_digest{};            // full fidelity only
  Digest state_digest{};               // target peer world state, full fidelity only
  bool ledgers_consistent = true;      // every peer holds the same chain
  std::size_t ledger_committed = 0;    // valid level transactions on the target peer
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::vector<TraceRecord> trace;
  std::vector<std::string> host_names;
  RequestTimeline first_request;
};

namespace detail {

inline double percentile(std::vector<double> sorted, double q) {
  if (sorted.empty()) return 0;
  std::sort(sorted.begin(), sorted.end());
  double pos = q * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - static_cast<double>(lo));
}

inline double regression_slope(const std::vector<std::pair<double, double>>& xy) {
  if (xy.size() < 2) return 0;
  double mx = 0, my = 0;
  for (const auto& [x, y] : xy) mx += x, my += y;
  mx /= static_cast<double>(xy.size());
  my /= static_cast<double>(xy.size());
  double sxy = 0, sxx = 0;
  for (const auto& [x, y] : xy) sxy += (x - mx) * (y - my), sxx += (x - mx) * (x - mx);
  return sxx > 0 ? sxy / sxx : 0;
}

// One tps level: client -> REST -> endorser -> sequencer -> broker
// replication -> block cut -> delivery to every peer -> commit -> client ack.
class LevelSimulation {
 public:
  LevelSimulation(const ScenarioConfig& cfg, double tps, const Bootstrap& boot, const RunOptions& opt)
      : cfg_(cfg),
        tps_(tps),
        boot_(boot),
        opt_(opt),
        net_(topo_, cfg.link, queue_, opt.keep_trace),
        cluster_(cfg.batch),
        target_(MemberStateId(cfg.target_ms)),
        rest_(27),
        endorser_(27),
        committer_(27),
        sequencer_(role_cardinality(OrderingRole::sequencer)),
        reorder_(27),
        next_block_(27, boot.block_count),
        cert_count_(27, boot.cert_count) {
    if (full()) {
      peers_.assign(27, *boot.ledger);
      ms_key_ = member_state_key(target_);
      sealer_ = sealer_key();
    }
    orderer_tip_ = boot.tip;
    next_number_ = boot.block_count;
  }

  LevelRun run() {
    const auto& p = cfg_.service_profile;
    SimTime horizon = at_seconds(cfg_.duration_seconds);
    SimTime stop = horizon + from_millis(cfg_.request_timeout_ms);

    auto arrivals = generate_arrivals(tps_, cfg_.duration_seconds, cfg_.arrival_mode, cfg_.seed);
    requests_.resize(arrivals.arrivals.size());
    for (std::size_t i = 0; i < arrivals.arrivals.size(); ++i) {
      queue_.schedule(arrivals.arrivals[i], [this, i] { on_arrival(i); });
    }
    for (const auto& f : cfg_.fault_schedule) {
      queue_.schedule(at_seconds(f.time_seconds), [this, f] {
        cluster_.set_instance_status(f.role, f.index, f.status);
        net_.note(f.status == InstanceStatus::up ? "fault.up" : "fault.down", topo_.ordering(f.role, f.index));
      });
    }
    schedule_background(horizon, from_millis(p.gossip_interval_ms), p.gossip_bytes, /*peers=*/true);
    schedule_background(horizon, from_millis(p.heartbeat_interval_ms), p.heartbeat_bytes, /*peers=*/false);
    for (SimTime t = kSimEpoch; t < horizon; t += kSampleInterval) {
      queue_.schedule(t, [this] { samples_.emplace_back(to_seconds(queue_.now() - kSimEpoch), double(in_flight_)); });
    }

    queue_.run_until(stop, [](auto& event) { event(); });
    return collect(horizon);
  }

 private:
  static constexpr SimDuration kSampleInterval = std::chrono::milliseconds(100);

  enum class Outcome : std::uint8_t { pending, ok, unavailable, invalid };

  struct Request {
    SimTime start{};
    SimTime end{};
    Outcome outcome = Outcome::pending;
  };

  bool full() const { return cfg_.fidelity == Fidelity::full; }
  bool is_register() const { return cfg_.step == Step::register_cert; }
  HostId client() const { return topo_.client(0); }
  HostId target_host() const { return topo_.peer(target_.roster_index()); }

  std::uint64_t tx_bytes() const {
    return is_register() ? cfg_.service_profile.register_tx_bytes : cfg_.service_profile.verify_tx_bytes;
  }

  void schedule_background(SimTime horizon, SimDuration interval, std::uint64_t bytes, bool peers) {
    if (bytes == 0) return;
    std::vector<HostId> hosts;
    if (peers) {
      for (std::size_t i = 0; i < 27; ++i) hosts.push_back(topo_.peer(i));
    } else {
      for (auto role : kOrderingRoles) {
        for (std::size_t i = 0; i < role_cardinality(role); ++i) hosts.push_back(topo_.ordering(role, i));
      }
    }
    auto n = static_cast<std::int64_t>(hosts.size());
    for (std::int64_t k = 0; k < n; ++k) {
      SimDuration offset(interval.count() * k / n);
      for (SimTime t = kSimEpoch + offset; t < horizon; t += interval) {
        queue_.schedule(t, [this, hosts, k, bytes, peers] {
          if (!peers && !host_up(hosts[k])) return;
          for (auto dst : hosts) {
            if (dst != hosts[k]) net_.send(hosts[k], dst, bytes, peers ? MessageKind::gossip : MessageKind::heartbeat);
          }
        });
      }
    }
  }

  bool host_up(HostId h) const {
    std::size_t base = topo_.peer_count();
    for (auto role : kOrderingRoles) {
      if (h < base + role_cardinality(role)) return cluster_.status(role, h - base) == InstanceStatus::up;
      base += role_cardinality(role);
    }
    return true;
  }

  void finish(std::size_t i, Outcome outcome) {
    auto& r = requests_[i];
    if (r.outcome != Outcome::pending) return;
    r.outcome = outcome;
    r.end = queue_.now();
    --in_flight_;
    net_.note("request.done", client(), i);
  }

  void on_arrival(std::size_t i) {
    ++client_events_;
    ++in_flight_;
    requests_[i].start = queue_.now();
    net_.note("request.arrive", client(), i);
    net_.send(client(), target_host(), cfg_.service_profile.proposal_bytes, MessageKind::proposal,
              [this, i] { on_proposal(i); });
  }

  std::size_t scan_count() const {
    if (is_register()) return 0;
    if (cfg_.query_mode == QueryMode::exact_lookup) return 1;
    return full() ? peers_[target_.roster_index()].state().count_of_type(kCertType) : cert_count_[target_.roster_index()];
  }

  void on_proposal(std::size_t i) {
    const auto& p = cfg_.service_profile;
    auto P = target_.roster_index();
    SimDuration work = is_register()
                           ? from_millis(p.endorse_ms)
                           : SimDuration(std::llround(static_cast<double>(scan_count()) * p.query_per_record_us));
    SimTime t1 = rest_[P].submit(queue_.now(), from_millis(p.rest_overhead_ms));
    SimTime t2 = endorser_[P].submit(t1, work);
    queue_.schedule(t2, [this, i] { on_endorsed(i); });
  }

  Transaction execute(std::size_t i) {
    Transaction tx;
    if (!full()) {
      tx.tx_id = std::to_string(i);
      tx.submitter = target_;
    } else {
      const WorldState& view = peers_[target_.roster_index()].state();
      ChaincodeContext ctx(target_, true, view);
      std::string nonce = "level-" + std::to_string(tps_) + "-" + std::to_string(i);
      if (is_register()) {
        VaccinationCredential cred;
        if (i == 0 && opt_.credential) {
          cred = *opt_.credential;
        } else {
          auto center = center_identity(target_);
          Did subject = generate_did("vax", "subject-" + std::to_string(cfg_.seed) + "-" + nonce);
          cred = issue_credential(center.key, center.record.issuer_did, subject, sample_vaccine(i),
                                  kIssuanceBase + static_cast<std::int64_t>(i), kSecondsPerYear);
        }
        auto hash = hash_credential(cred);
        auto resp = register_certificate(ctx, ByteView(hash.digest), cred.issuer, metadata_document(cred));
        if (i == 0) first_.cert_hash = hash;
        tx = make_transaction(resp, register_certificate_call(hash, cred.issuer), target_, ms_key_, nonce);
        if (!resp.ok()) tx.tx_id.clear();
      } else {
        CertificateHash hash = boot_.target_hash.value_or(CertificateHash{});
        auto vr = verify_certificate(ctx, hash, cfg_.query_mode, boot_.target_owner);
        if (i == 0) {
          first_.cert_hash = hash;
          first_.found = vr.found();
          first_.scan_count = vr.scan_count;
        }
        tx = make_transaction(vr.response, verify_certificate_call(hash), target_, ms_key_, nonce);
      }
      tx_index_.emplace(tx.tx_id, i);
    }
    tx.payload_size = tx_bytes();
    return tx;
  }

  void on_endorsed(std::size_t i) {
    const auto& p = cfg_.service_profile;
    Transaction tx = execute(i);
    net_.note("request.endorsed", target_host(), i);
    if (full() && tx.tx_id.empty()) {
      net_.send(target_host(), client(), p.ack_bytes, MessageKind::response, [this, i] { finish(i, Outcome::invalid); });
      return;
    }
    if (!is_register() && !cfg_.ordered_verify) {
      net_.send(target_host(), client(), p.query_response_bytes, MessageKind::response,
                [this, i] { finish(i, Outcome::ok); });
      return;
    }
    auto seq = cluster_.leader(OrderingRole::sequencer);
    if (!cluster_.available() || !seq) {
      net_.send(target_host(), client(), p.ack_bytes, MessageKind::response,
                [this, i] { finish(i, Outcome::unavailable); });
      return;
    }
    auto shared = std::make_shared<Transaction>(std::move(tx));
    HostId seq_host = topo_.ordering(OrderingRole::sequencer, *seq);
    net_.send(target_host(), seq_host, shared->payload_size, MessageKind::envelope,
              [this, i, shared, s = *seq] { on_envelope(i, shared, s); });
  }

  void on_envelope(std::size_t i, std::shared_ptr<Transaction> tx, std::size_t s) {
    SimTime done = sequencer_[s].submit(queue_.now(), from_millis(cfg_.service_profile.orderer_per_envelope_ms));
    queue_.schedule(done, [this, i, tx, s] { replicate(i, tx, s); });
  }

  // Sequencer -> broker leader -> followers; the leader acknowledges back
  // after the first follower ack.
  void replicate(std::size_t i, std::shared_ptr<Transaction> tx, std::size_t s) {
    auto b = cluster_.leader(OrderingRole::broker);
    if (!cluster_.available() || !b) {
      reject_unavailable(i);
      return;
    }
    HostId seq_host = topo_.ordering(OrderingRole::sequencer, s);
    HostId leader = topo_.ordering(OrderingRole::broker, *b);
    net_.send(seq_host, leader, tx->payload_size, MessageKind::replication, [this, i, tx, seq_host, leader, b] {
      auto ack_to_sequencer = [this, i, tx, seq_host, leader] {
        net_.send(leader, seq_host, cfg_.service_profile.replication_ack_bytes, MessageKind::replication,
                  [this, i, tx] { on_ordered(i, tx); });
      };
      std::vector<std::size_t> followers;
      for (auto f : cluster_.up_instances(OrderingRole::broker)) {
        if (f != *b) followers.push_back(f);
      }
      if (followers.empty()) {
        ack_to_sequencer();
        return;
      }
      auto acked = std::make_shared<bool>(false);
      for (auto f : followers) {
        HostId fh = topo_.ordering(OrderingRole::broker, f);
        net_.send(leader, fh, tx->payload_size, MessageKind::replication, [this, fh, leader, acked, ack_to_sequencer] {
          net_.send(fh, leader, cfg_.service_profile.replication_ack_bytes, MessageKind::replication,
                    [acked, ack_to_sequencer] {
                      if (*acked) return;
                      *acked = true;
                      ack_to_sequencer();
                    });
        });
      }
    });
  }

  void reject_unavailable(std::size_t i) {
    net_.note("request.unavailable", client(), i);
    finish(i, Outcome::unavailable);
  }

  void on_ordered(std::size_t i, std::shared_ptr<Transaction> tx) {
    if (cluster_.submit(Envelope{*tx, queue_.now()}) == SubmitResult::unavailable) {
      reject_unavailable(i);
      return;
    }
    net_.note("request.ordered", client(), i);
    try_cut();
  }

  void try_cut() {
    while (auto batch = cluster_.cut_batch(queue_.now())) seal_and_deliver(std::move(*batch));
    arm_timer();
  }

  void arm_timer() {
    auto deadline = cluster_.timeout_deadline();
    if (!deadline) return;
    if (armed_ && *armed_ == *deadline) return;
    armed_ = deadline;
    std::uint64_t gen = ++timer_generation_;
    queue_.schedule(std::max(*deadline, queue_.now()), [this, gen] {
      if (gen != timer_generation_) return;
      armed_.reset();
      try_cut();
    });
  }

  void seal_and_deliver(std::vector<Envelope> batch) {
    const auto& p = cfg_.service_profile;
    auto block = std::make_shared<Block>();
    if (full()) {
      *block = seal_block(batch, orderer_tip_, sealer_);
      orderer_tip_ = BlockTip{block->header.number, compute_block_hash(block->header)};
    } else {
      block->header.number = next_number_;
      for (auto& e : batch) block->transactions.push_back(std::move(e.transaction));
    }
    ++next_number_;
    ++blocks_;
    std::uint64_t size = p.block_overhead_bytes;
    for (const auto& tx : block->transactions) size += tx.payload_size;
    auto seq = cluster_.leader(OrderingRole::sequencer).value_or(0);
    HostId from = topo_.ordering(OrderingRole::sequencer, seq);
    net_.note("block.cut", from, block->transactions.size());
    std::shared_ptr<const Block> shared = block;
    for (std::size_t peer = 0; peer < 27; ++peer) {
      net_.send(from, topo_.peer(peer), size, MessageKind::block, [this, peer, shared] { on_block(peer, shared); });
    }
  }

  void on_block(std::size_t peer, std::shared_ptr<const Block> block) {
    auto& buffer = reorder_[peer];
    buffer.emplace(block->header.number, std::move(block));
    for (auto it = buffer.find(next_block_[peer]); it != buffer.end(); it = buffer.find(next_block_[peer])) {
      process_block(peer, it->second);
      buffer.erase(it);
      ++next_block_[peer];
    }
  }

  void process_block(std::size_t peer, std::shared_ptr<const Block> block) {
    const auto& p = cfg_.service_profile;
    double per_tx = is_register() ? p.commit_per_tx_ms : p.commit_per_readonly_tx_ms;
    SimDuration work = from_millis(p.commit_per_block_ms + per_tx * static_cast<double>(block->transactions.size()));
    SimTime done = committer_[peer].submit(queue_.now(), work);
    queue_.schedule(done, [this, peer, block] { on_committed(peer, block); });
  }

  void on_committed(std::size_t peer, const std::shared_ptr<const Block>& block) {
    std::vector<TxValidity> flags(block->transactions.size(), TxValidity::valid);
    if (full()) {
      flags = peers_[peer].commit(*block);
    } else if (is_register()) {
      cert_count_[peer] += block->transactions.size();
    }
    if (peer != target_.roster_index()) return;
    net_.note("block.commit", topo_.peer(peer), block->header.number);
    for (std::size_t k = 0; k < block->transactions.size(); ++k) {
      std::size_t i = request_of(block->transactions[k]);
      Outcome outcome = flags[k] == TxValidity::valid ? Outcome::ok : Outcome::invalid;
      net_.send(topo_.peer(peer), client(), cfg_.service_profile.ack_bytes, MessageKind::response,
                [this, i, outcome] { finish(i, outcome); });
    }
  }

  std::size_t request_of(const Transaction& tx) const {
    if (!full()) return static_cast<std::size_t>(std::stoull(tx.tx_id));
    return tx_index_.at(tx.tx_id);
  }

  LevelRun collect(SimTime horizon) {
    LevelRun out;
    auto& m = out.metrics;
    m.step = cfg_.step;
    m.tps = tps_;
    m.submitted = requests_.size();
    SimDuration timeout = from_millis(cfg_.request_timeout_ms);
    std::vector<double> latencies;
    for (const auto& r : requests_) {
      switch (r.outcome) {
        case Outcome::pending: ++m.timed_out; break;
        case Outcome::unavailable: ++m.unavailable; break;
        case Outcome::invalid: ++m.invalid; break;
        case Outcome::ok:
          if (r.end - r.start > timeout) {
            ++m.timed_out;
          } else {
            ++m.completed;
            latencies.push_back(to_millis(r.end - r.start));
          }
          break;
      }
    }
    if (!latencies.empty()) {
      m.mean_ms = std::accumulate(latencies.begin(), latencies.end(), 0.0) / static_cast<double>(latencies.size());
      m.median_ms = percentile(latencies, 0.5);
      m.p95_ms = percentile(latencies, 0.95);
    }

    double seconds = cfg_.duration_seconds;
    const auto& acct = net_.accounting();
    for (std::size_t i = 0; i < 27; ++i) {
      m.peer_bandwidth_kb = std::max(m.peer_bandwidth_kb, bandwidth_report(acct, topo_.peer(i), kSimEpoch, horizon) / seconds);
    }
    for (auto role : kOrderingRoles) {
      for (std::size_t i = 0; i < role_cardinality(role); ++i) {
        m.ordering_bandwidth_kb += bandwidth_report(acct, topo_.ordering(role, i), kSimEpoch, horizon) / seconds;
      }
    }

    auto P = target_.roster_index();
    m.busy.rest = rest_[P].busy_fraction(kSimEpoch, horizon);
    m.busy.endorser = endorser_[P].busy_fraction(kSimEpoch, horizon);
    m.busy.committer = committer_[P].busy_fraction(kSimEpoch, horizon);
    for (const auto& s : sequencer_) m.busy.orderer = std::max(m.busy.orderer, s.busy_fraction(kSimEpoch, horizon));

    std::vector<std::pair<double, double>> second_half;
    for (const auto& s : samples_) {
      if (s.first >= seconds / 2) second_half.push_back(s);
    }
    m.queue_growth_per_s = regression_slope(second_half);
    m.blocks = blocks_;
    m.saturated = m.queue_growth_per_s > kSaturationGrowthFraction * tps_ || m.error_count() > 0;

    out.client_request_events = client_events_;
    out.bytes_sent = net_.total_sent();
    out.bytes_received = net_.total_received();
    out.first_request = first_;
    if (full()) {
      const auto& chain = peers_[P].chain();
      std::ostringstream snap;
      export_snapshot(chain, snap);
      std::string text = std::move(snap).str();
      out.snapshot_digest = sha256(std::string_view(text));
      if (opt_.keep_snapshot) out.snapshot = std::move(text);
      out.state_digest = peers_[P].state().digest();
      Digest tip = chain.tip_hash();
      for (const auto& peer : peers_) {
        out.ledgers_consistent = out.ledgers_consistent && peer.chain().tip_hash() == tip &&
                                 peer.chain().size() == chain.size();
      }
      for (std::size_t b = boot_.block_count; b < chain.size(); ++b) {
        const auto& v = chain.at(b).validity;
        out.ledger_committed += static_cast<std::size_t>(std::count(v.begin(), v.end(), TxValidity::valid));
      }
    }
    if (opt_.keep_trace) {
      out.trace = net_.trace_records();
      std::stable_sort(out.trace.begin(), out.trace.end(),
                       [](const TraceRecord& a, const TraceRecord& b) { return a.time < b.time; });
      for (std::size_t h = 0; h < topo_.size(); ++h) out.host_names.push_back(topo_.info(h).name);
    }
    return out;
  }

  const ScenarioConfig& cfg_;
  double tps_;
  const Bootstrap& boot_;
  const RunOptions& opt_;
  Topology topo_;
  Network::Queue queue_;
  Network net_;
  OrderingCluster cluster_;
  MemberStateId target_;
  std::vector<FifoServer> rest_, endorser_, committer_, sequencer_;
  std::vector<std::map<std::uint64_t, std::shared_ptr<const Block>>> reorder_;
  std::vector<std::uint64_t> next_block_;
  std::vector<std::size_t> cert_count_;
  std::vector<PeerLedger> peers_;
  KeyPair ms_key_;
  KeyPair sealer_;
  std::optional<BlockTip> orderer_tip_;
  std::uint64_t next_number_ = 0;
  std::size_t blocks_ = 0;
  std::vector<Request> requests_;
  std::unordered_map<std::string, std::size_t> tx_index_;
  std::optional<SimTime> armed_;
  std::uint64_t timer_generation_ = 0;
  std::int64_t in_flight_ = 0;
  std::size_t client_events_ = 0;
  std::vector<std::pair<double, double>> samples_;
  RequestTimeline first_;
};

}  // namespace detail

inline LevelRun run_level(const ScenarioConfig& cfg, double tps, const Bootstrap& boot, const RunOptions& opt = {}) {
  return detail::LevelSimulation(cfg, tps, boot, opt).run();
}

inline LevelRun run_level(const ScenarioConfig& cfg, double tps, const RunOptions& opt = {}) {
  cfg.validate();
  auto boot = build_bootstrap(cfg.step == Step::verify_cert ? cfg.preloaded_records : 0, cfg.fidelity,
                              cfg.step == Step::verify_cert ? opt.credential : std::nullopt);
  return run_level(cfg, tps, boot, opt);
}

struct ScenarioRun {
  MetricsReport report;
  std::vector<LevelRun> levels;
};

/// Levels are independent simulations. Timing-fidelity levels run on worker
/// threads; full-fidelity levels run one at a time to bound memory.
inline ScenarioRun run_scenario_detailed(const ScenarioConfig& cfg, const RunOptions& opt = {}) {
  cfg.validate();
  auto boot = build_bootstrap(cfg.step == Step::verify_cert ? cfg.preloaded_records : 0, cfg.fidelity,
                              cfg.step == Step::verify_cert ? opt.credential : std::nullopt);
  ScenarioRun out;
  out.report.step = cfg.step;
  out.report.fidelity = cfg.fidelity;
  out.levels.resize(cfg.tps_levels.size());
  std::size_t workers = cfg.fidelity == Fidelity::timing ? std::max(1u, std::thread::hardware_concurrency()) : 1;
  for (std::size_t start = 0; start < cfg.tps_levels.size(); start += workers) {
    std::vector<std::future<LevelRun>> running;
    std::size_t end = std::min(start + workers, cfg.tps_levels.size());
    for (std::size_t i = start; i < end; ++i) {
      if (workers == 1) {
        out.levels[i] = run_level(cfg, cfg.tps_levels[i], boot, opt);
      } else {
        running.push_back(std::async(std::launch::async, [&, i] { return run_level(cfg, cfg.tps_levels[i], boot, opt); }));
      }
    }
    for (std::size_t k = 0; k < running.size(); ++k) out.levels[start + k] = running[k].get();
  }
  for (const auto& l : out.levels) out.report.levels.push_back(l.metrics);
  return out;
}

inline MetricsReport run_scenario(const ScenarioConfig& cfg) { return run_scenario_detailed(cfg).report; }

}  // namespace vaxledger
