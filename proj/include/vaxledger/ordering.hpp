#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "vaxledger/credential.hpp"
#include "vaxledger/ledger.hpp"
#include "vaxledger/sim_time.hpp"

namespace vaxledger {

enum class OrderingRole : std::uint8_t { coordinator, broker, sequencer };
enum class InstanceStatus : std::uint8_t { up, down };

inline constexpr std::array<OrderingRole, 3> kOrderingRoles = {OrderingRole::coordinator, OrderingRole::broker,
                                                               OrderingRole::sequencer};

inline constexpr std::size_t role_cardinality(OrderingRole role) {
  switch (role) {
    case OrderingRole::coordinator: return 3;
    case OrderingRole::broker: return 4;
    case OrderingRole::sequencer: return 3;
  }
  return 0;
}

inline constexpr std::size_t kOrderingHostCount = 10;

inline std::string_view to_string(OrderingRole role) {
  switch (role) {
    case OrderingRole::coordinator: return "coordinator";
    case OrderingRole::broker: return "broker";
    case OrderingRole::sequencer: return "sequencer";
  }
  return "unknown";
}

inline OrderingRole parse_ordering_role(std::string_view s) {
  for (auto r : kOrderingRoles) {
    if (to_string(r) == s) return r;
  }
  fail(Errc::invalid_argument, "unknown ordering role '" + std::string(s) + "'");
}

/// Block cutting knobs. A batch is cut as soon as it is full (count or
/// bytes); otherwise once the oldest pending envelope has waited
/// batch_timeout, but never sooner than min_block_interval after the
/// previous cut. min_block_interval = 0 disables pacing.
struct BatchConfig {
  std::uint32_t max_message_count = 10;
  std::uint64_t max_batch_bytes = 512 * 1024;
  SimDuration batch_timeout = std::chrono::milliseconds(50);
  SimDuration min_block_interval{0};

  void validate() const {
    require(max_message_count > 0 && max_batch_bytes > 0 && batch_timeout.count() > 0, Errc::invalid_argument,
            "batch limits must be strictly positive");
    require(min_block_interval.count() >= 0, Errc::invalid_argument, "min_block_interval must be non-negative");
  }
};

struct Envelope {
  Transaction transaction;
  SimTime received_at{};

  std::uint64_t size() const { return transaction.payload_size; }
};

enum class SubmitResult { accepted, unavailable };

/// A single logical replicated log gated by per-role instance health. The
/// cluster stays available while every role has at most one instance down.
class OrderingCluster {
 public:
  explicit OrderingCluster(BatchConfig config = {}) : config_(config) {
    config_.validate();
    for (auto role : kOrderingRoles) status_[index(role)].assign(role_cardinality(role), InstanceStatus::up);
  }

  const BatchConfig& config() const { return config_; }

  bool available() const {
    for (const auto& statuses : status_) {
      if (std::count(statuses.begin(), statuses.end(), InstanceStatus::down) > 1) return false;
    }
    return true;
  }

  InstanceStatus status(OrderingRole role, std::size_t i) const { return status_[index(role)].at(i); }

  void set_instance_status(OrderingRole role, std::size_t i, InstanceStatus s) {
    auto& statuses = status_[index(role)];
    require(i < statuses.size(), Errc::invalid_argument,
            "instance index " + std::to_string(i) + " out of range for " + std::string(to_string(role)));
    statuses[i] = s;
  }

  /// First Up instance of a role, the one that currently leads it.
  std::optional<std::size_t> leader(OrderingRole role) const {
    const auto& statuses = status_[index(role)];
    for (std::size_t i = 0; i < statuses.size(); ++i) {
      if (statuses[i] == InstanceStatus::up) return i;
    }
    return std::nullopt;
  }

  std::vector<std::size_t> up_instances(OrderingRole role) const {
    std::vector<std::size_t> out;
    const auto& statuses = status_[index(role)];
    for (std::size_t i = 0; i < statuses.size(); ++i) {
      if (statuses[i] == InstanceStatus::up) out.push_back(i);
    }
    return out;
  }

  SubmitResult submit(Envelope envelope) {
    if (!available()) return SubmitResult::unavailable;
    if (!seen_.insert(envelope.transaction.tx_id).second) return SubmitResult::accepted;
    pending_bytes_ += envelope.size();
    log_.push_back(std::move(envelope));
    return SubmitResult::accepted;
  }

  std::size_t pending_count() const { return log_.size() - cut_cursor_; }
  std::uint64_t pending_bytes() const { return pending_bytes_; }
  const std::vector<Envelope>& log() const { return log_; }

  /// Earliest time at which the timeout path could cut the current pending
  /// set, or nullopt when nothing is pending.
  std::optional<SimTime> timeout_deadline() const {
    if (pending_count() == 0) return std::nullopt;
    SimTime by_age = log_[cut_cursor_].received_at + config_.batch_timeout;
    if (last_cut_) return std::max(by_age, *last_cut_ + config_.min_block_interval);
    return by_age;
  }

  std::optional<std::vector<Envelope>> cut_batch(SimTime now) {
    if (pending_count() == 0) return std::nullopt;
    bool full = pending_count() >= config_.max_message_count || pending_bytes_ >= config_.max_batch_bytes;
    auto deadline = timeout_deadline();
    if (!full && now < *deadline) return std::nullopt;

    std::vector<Envelope> batch;
    std::uint64_t bytes = 0;
    while (cut_cursor_ < log_.size() && batch.size() < config_.max_message_count) {
      const auto& next = log_[cut_cursor_];
      if (!batch.empty() && bytes + next.size() > config_.max_batch_bytes) break;
      bytes += next.size();
      batch.push_back(next);
      ++cut_cursor_;
    }
    pending_bytes_ -= bytes;
    last_cut_ = now;
    return batch;
  }

 private:
  static std::size_t index(OrderingRole role) { return static_cast<std::size_t>(role); }

  BatchConfig config_;
  std::array<std::vector<InstanceStatus>, 3> status_;
  std::vector<Envelope> log_;
  std::size_t cut_cursor_ = 0;
  std::uint64_t pending_bytes_ = 0;
  std::optional<SimTime> last_cut_;
  std::unordered_set<std::string> seen_;
};

struct BlockTip {
  std::uint64_t number = 0;
  Digest hash{};
};

inline std::optional<BlockTip> tip_of(const Chain& chain) {
  if (chain.empty()) return std::nullopt;
  return BlockTip{chain.size() - 1, chain.tip_hash()};
}

/// Builds the next block after `prev` (genesis when prev is empty) and signs
/// its header hash with the sealer key.
inline Block seal_block(std::span<const Envelope> batch, const std::optional<BlockTip>& prev, const KeyPair& sealer) {
  require(!batch.empty(), Errc::invalid_argument, "cannot seal an empty batch");
  Block b;
  b.header.number = prev ? prev->number + 1 : 0;
  b.header.prev_hash = prev ? prev->hash : Digest{};
  b.transactions.reserve(batch.size());
  for (const auto& e : batch) b.transactions.push_back(e.transaction);
  b.header.data_hash = compute_data_hash(b.transactions);
  b.sealer_signature = sign(compute_block_hash(b.header), sealer.private_key);
  return b;
}

}  // namespace vaxledger
