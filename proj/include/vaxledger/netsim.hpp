#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <ostream>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vaxledger/error.hpp"
#include "vaxledger/ledger.hpp"
#include "vaxledger/ordering.hpp"
#include "vaxledger/sim_time.hpp"

namespace vaxledger {

// ---------------------------------------------------------------------------
// Links
// ---------------------------------------------------------------------------

struct LinkParams {
  SimDuration latency = std::chrono::milliseconds(3);  // one way, per traversal
  std::uint64_t bandwidth_bps = 1'000'000'000;
  std::uint32_t tls_overhead = 60;                    // bytes added to every message

  void validate() const {
    require(latency.count() >= 0, Errc::invalid_argument, "link latency must be non-negative");
    require(bandwidth_bps > 0, Errc::invalid_argument, "link bandwidth must be positive");
  }
};

/// Serialisation time of the message plus its TLS overhead, rounded up to
/// whole microseconds.
inline SimDuration transmission_time(const LinkParams& link, std::uint64_t size) {
  std::uint64_t bits = (size + link.tls_overhead) * 8;
  std::uint64_t us = (bits * 1'000'000 + link.bandwidth_bps - 1) / link.bandwidth_bps;
  return SimDuration(static_cast<SimDuration::rep>(us));
}

inline SimDuration transit_delay(const LinkParams& link, std::uint64_t size) {
  require(size > 0, Errc::invalid_argument, "message size must be positive");
  return link.latency + transmission_time(link, size);
}

// ---------------------------------------------------------------------------
// Event queue
// ---------------------------------------------------------------------------

/// Min-heap on (time, insertion sequence): equal-time events fire in the
/// order they were scheduled.
template <typename Event>
class EventQueue {
 public:
  SimTime now() const { return clock_; }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

  void schedule(SimTime at, Event event) {
    require(at >= clock_, Errc::invalid_argument, "cannot schedule an event in the past");
    heap_.push(Entry{at, next_seq_++, std::move(event)});
  }

  void schedule_after(SimDuration delay, Event event) { schedule(clock_ + delay, std::move(event)); }

  /// Fires every event with time <= t_end, then leaves the clock at t_end.
  template <typename Handler>
  std::size_t run_until(SimTime t_end, Handler&& handle) {
    std::size_t processed = 0;
    while (!heap_.empty() && heap_.top().at <= t_end) {
      Entry e = std::move(const_cast<Entry&>(heap_.top()));
      heap_.pop();
      clock_ = e.at;
      handle(e.event);
      ++processed;
    }
    if (t_end > clock_) clock_ = t_end;
    return processed;
  }

 private:
  struct Entry {
    SimTime at;
    std::uint64_t seq;
    Event event;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.at != b.at ? a.at > b.at : a.seq > b.seq;
    }
  };

  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
  SimTime clock_{};
  std::uint64_t next_seq_ = 0;
};

// ---------------------------------------------------------------------------
// Topology
// ---------------------------------------------------------------------------

using HostId = std::size_t;

enum class HostKind : std::uint8_t { peer, ordering, client };

struct HostInfo {
  std::string name;
  HostKind kind;
};

/// 27 peers (roster order), then the ordering cluster (coordinators,
/// brokers, sequencers), then client hosts. Links form a uniform full mesh.
class Topology {
 public:
  explicit Topology(std::size_t client_count = 1) {
    for (auto code : kEuRoster) hosts_.push_back({"peer-" + std::string(code), HostKind::peer});
    for (auto role : kOrderingRoles) {
      for (std::size_t i = 0; i < role_cardinality(role); ++i) {
        hosts_.push_back({std::string(to_string(role)) + "-" + std::to_string(i), HostKind::ordering});
      }
    }
    for (std::size_t i = 0; i < client_count; ++i) hosts_.push_back({"client-" + std::to_string(i), HostKind::client});
  }

  static constexpr std::size_t peer_count() { return kEuRoster.size(); }

  HostId peer(std::size_t roster_index) const {
    require(roster_index < peer_count(), Errc::invalid_argument, "peer index out of range");
    return roster_index;
  }

  HostId ordering(OrderingRole role, std::size_t i) const {
    require(i < role_cardinality(role), Errc::invalid_argument, "ordering instance out of range");
    std::size_t base = peer_count();
    for (auto r : kOrderingRoles) {
      if (r == role) return base + i;
      base += role_cardinality(r);
    }
    return base;
  }

  HostId client(std::size_t i) const { return peer_count() + kOrderingHostCount + i; }

  std::size_t size() const { return hosts_.size(); }
  const HostInfo& info(HostId h) const { return hosts_.at(h); }
  bool is_ordering(HostId h) const { return hosts_.at(h).kind == HostKind::ordering; }

 private:
  std::vector<HostInfo> hosts_;
};

// ---------------------------------------------------------------------------
// Messages, bandwidth accounting, traces
// ---------------------------------------------------------------------------

enum class MessageKind : std::uint8_t {
  proposal,
  endorsement,
  envelope,
  block,
  query,
  response,
  replication,
  gossip,
  heartbeat,
};

inline std::string_view to_string(MessageKind k) {
  switch (k) {
    case MessageKind::proposal: return "proposal";
    case MessageKind::endorsement: return "endorsement";
    case MessageKind::envelope: return "envelope";
    case MessageKind::block: return "block";
    case MessageKind::query: return "query";
    case MessageKind::response: return "response";
    case MessageKind::replication: return "replication";
    case MessageKind::gossip: return "gossip";
    case MessageKind::heartbeat: return "heartbeat";
  }
  return "unknown";
}

struct TraceRecord {
  SimTime time;
  std::string kind;
  HostId host;
  std::uint64_t size;
};

inline void write_trace(const std::vector<TraceRecord>& trace, const Topology& topo, std::ostream& out) {
  for (const auto& r : trace) {
    nlohmann::ordered_json j;
    j["t_us"] = r.time.time_since_epoch().count();
    j["kind"] = r.kind;
    j["host"] = topo.info(r.host).name;
    j["size"] = r.size;
    out << j.dump() << '\n';
  }
}

/// Per-host log of bytes crossing the host (sent at send time, received at
/// delivery time), wire bytes including TLS overhead.
class BandwidthAccounting {
 public:
  explicit BandwidthAccounting(std::size_t hosts = 0) : samples_(hosts) {}

  void record(HostId host, SimTime at, std::uint64_t bytes) {
    samples_.at(host).push_back({at, bytes});
  }

  std::uint64_t bytes_in_window(HostId host, SimTime from, SimTime to) const {
    std::uint64_t total = 0;
    for (const auto& s : samples_.at(host)) {
      if (s.at >= from && s.at < to) total += s.bytes;
    }
    return total;
  }

  std::size_t host_count() const { return samples_.size(); }

 private:
  struct Sample {
    SimTime at;
    std::uint64_t bytes;
  };
  std::vector<std::vector<Sample>> samples_;
};

/// KB (1000 bytes) sent plus received by `host` in [from, to).
inline double bandwidth_report(const BandwidthAccounting& acct, HostId host, SimTime from, SimTime to) {
  require(from <= to, Errc::invalid_argument, "bandwidth window is inverted");
  return static_cast<double>(acct.bytes_in_window(host, from, to)) / 1000.0;
}

/// Delivers messages over the uniform mesh, charging both endpoints.
class Network {
 public:
  using Queue = EventQueue<std::function<void()>>;

  Network(const Topology& topo, LinkParams link, Queue& queue, bool keep_trace = false)
      : topo_(topo),
        link_(link),
        queue_(queue),
        acct_(topo.size()),
        keep_trace_(keep_trace),
        last_arrival_(topo.size() * topo.size()) {
    link_.validate();
  }

  const LinkParams& link() const { return link_; }

  /// Returns the delivery time; `on_delivery` runs then. Each directed link
  /// delivers in send order. Messages without a handler are charged to the
  /// receiver at delivery time without an event.
  SimTime send(HostId src, HostId dst, std::uint64_t size, MessageKind kind, std::function<void()> on_delivery = {}) {
    SimTime now = queue_.now();
    SimTime& last = last_arrival_.at(src * topo_.size() + dst);
    SimTime arrive = std::max(now + transit_delay(link_, size), last);
    last = arrive;
    std::uint64_t wire = size + link_.tls_overhead;
    acct_.record(src, now, wire);
    sent_ += wire;
    trace(now, kind, "send", src, wire);
    if (!on_delivery) {
      acct_.record(dst, arrive, wire);
      received_ += wire;
      trace(arrive, kind, "recv", dst, wire);
      return arrive;
    }
    queue_.schedule(arrive, [this, dst, wire, kind, cb = std::move(on_delivery)]() mutable {
      acct_.record(dst, queue_.now(), wire);
      received_ += wire;
      trace(queue_.now(), kind, "recv", dst, wire);
      if (cb) cb();
    });
    return arrive;
  }

  void note(std::string_view what, HostId host, std::uint64_t size = 0) {
    if (keep_trace_) trace_.push_back({queue_.now(), std::string(what), host, size});
  }

  const BandwidthAccounting& accounting() const { return acct_; }
  std::uint64_t total_sent() const { return sent_; }
  std::uint64_t total_received() const { return received_; }
  const std::vector<TraceRecord>& trace_records() const { return trace_; }

 private:
  void trace(SimTime t, MessageKind kind, std::string_view dir, HostId host, std::uint64_t size) {
    if (!keep_trace_) return;
    trace_.push_back({t, std::string(to_string(kind)) + "." + std::string(dir), host, size});
  }

  const Topology& topo_;
  LinkParams link_;
  Queue& queue_;
  BandwidthAccounting acct_;
  bool keep_trace_;
  std::uint64_t sent_ = 0;
  std::uint64_t received_ = 0;
  std::vector<TraceRecord> trace_;
  std::vector<SimTime> last_arrival_;
};

/// Single FIFO server: jobs start when both they and the server are ready.
class FifoServer {
 public:
  SimTime submit(SimTime ready, SimDuration service) {
    SimTime start = std::max(ready, free_at_);
    free_at_ = start + service;
    intervals_.push_back({start, free_at_});
    ++jobs_;
    return free_at_;
  }

  SimTime free_at() const { return free_at_; }
  std::uint64_t jobs() const { return jobs_; }

  double busy_fraction(SimTime from, SimTime to) const {
    if (to <= from) return 0.0;
    std::int64_t busy = 0;
    for (const auto& [s, e] : intervals_) {
      auto lo = std::max(s, from);
      auto hi = std::min(e, to);
      if (hi > lo) busy += (hi - lo).count();
    }
    return static_cast<double>(busy) / static_cast<double>((to - from).count());
  }

 private:
  SimTime free_at_{};
  std::uint64_t jobs_ = 0;
  std::vector<std::pair<SimTime, SimTime>> intervals_;
};

}  // namespace vaxledger
