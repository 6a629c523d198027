#include <gtest/gtest.h>

#include <chrono>
#include <random>

#include "vaxledger/netsim.hpp"

namespace vx = vaxledger;
using namespace std::chrono_literals;

TEST(Link, TransitIsLatencyPlusTransmission) {
  vx::LinkParams link;
  EXPECT_EQ(vx::transit_delay(link, 125'000 - 60), 4000us);
  EXPECT_EQ(vx::transit_delay(link, 125 - 60), 3001us);
  vx::LinkParams slow = link;
  slow.bandwidth_bps = 100'000'000;
  EXPECT_EQ(vx::transit_delay(slow, 125'000 - 60), 13000us);
  EXPECT_THROW(vx::transit_delay(link, 0), vx::Error);
}

TEST(Link, SlowerLinkScalesOnlyTransmission) {
  vx::LinkParams fast, slow;
  slow.bandwidth_bps = fast.bandwidth_bps / 10;
  for (std::uint64_t size : {940u, 12'440u, 99'940u}) {
    EXPECT_EQ(vx::transmission_time(slow, size), 10 * vx::transmission_time(fast, size));
    EXPECT_EQ(vx::transit_delay(slow, size) - slow.latency, vx::transmission_time(slow, size));
  }
}

TEST(EventQueue, FiresInTimeThenInsertionOrder) {
  vx::EventQueue<int> q;
  std::vector<int> order;
  q.schedule(vx::kSimEpoch + 5us, 1);
  q.schedule(vx::kSimEpoch + 2us, 2);
  q.schedule(vx::kSimEpoch + 5us, 3);
  q.schedule(vx::kSimEpoch + 2us, 4);
  auto n = q.run_until(vx::kSimEpoch + 10us, [&](int e) { order.push_back(e); });
  EXPECT_EQ(n, 4u);
  EXPECT_EQ(order, (std::vector<int>{2, 4, 1, 3}));
  EXPECT_EQ(q.now(), vx::kSimEpoch + 10us);
}

TEST(EventQueue, RunUntilIsInclusiveAndStopsAtTheBound) {
  vx::EventQueue<int> q;
  q.schedule(vx::kSimEpoch + 10us, 1);
  q.schedule(vx::kSimEpoch + 11us, 2);
  std::vector<int> seen;
  EXPECT_EQ(q.run_until(vx::kSimEpoch + 10us, [&](int e) { seen.push_back(e); }), 1u);
  EXPECT_EQ(q.size(), 1u);
  EXPECT_EQ(q.now(), vx::kSimEpoch + 10us);
  EXPECT_THROW(q.schedule(vx::kSimEpoch + 9us, 3), vx::Error);
  q.schedule(vx::kSimEpoch + 10us, 4);  // the present is allowed
  EXPECT_EQ(q.run_until(vx::kSimEpoch + 20us, [&](int e) { seen.push_back(e); }), 2u);
  EXPECT_EQ(seen, (std::vector<int>{1, 4, 2}));
}

TEST(EventQueue, HandlersMayScheduleFollowUps) {
  vx::EventQueue<int> q;
  std::vector<std::pair<std::int64_t, int>> seen;
  q.schedule(vx::kSimEpoch, 0);
  q.run_until(vx::kSimEpoch + 1s, [&](int e) {
    seen.emplace_back(q.now().time_since_epoch().count(), e);
    if (e < 3) q.schedule_after(100ms, e + 1);
  });
  ASSERT_EQ(seen.size(), 4u);
  EXPECT_EQ(seen.back(), (std::pair<std::int64_t, int>{300'000, 3}));
}

TEST(Topology, HostLayout) {
  vx::Topology t(2);
  EXPECT_EQ(t.size(), 27u + 10u + 2u);
  EXPECT_EQ(t.info(t.peer(0)).name, "peer-AT");
  EXPECT_EQ(t.info(t.ordering(vx::OrderingRole::broker, 3)).name, "broker-3");
  EXPECT_TRUE(t.is_ordering(t.ordering(vx::OrderingRole::sequencer, 2)));
  EXPECT_FALSE(t.is_ordering(t.client(1)));
  EXPECT_EQ(t.info(t.client(1)).name, "client-1");
}

TEST(Bandwidth, ReportsKilobytesInWindow) {
  vx::Topology topo;
  vx::Network::Queue q;
  vx::Network net(topo, vx::LinkParams{0us, 1'000'000'000, 0}, q);
  auto a = topo.peer(0), b = topo.peer(1);
  EXPECT_EQ(vx::bandwidth_report(net.accounting(), a, vx::kSimEpoch, vx::kSimEpoch + 1s), 0.0);
  net.send(a, b, 1000, vx::MessageKind::gossip);
  q.run_until(vx::kSimEpoch + 1s, [](auto& f) { f(); });
  EXPECT_DOUBLE_EQ(vx::bandwidth_report(net.accounting(), a, vx::kSimEpoch, vx::kSimEpoch + 1s), 1.0);
  EXPECT_DOUBLE_EQ(vx::bandwidth_report(net.accounting(), b, vx::kSimEpoch, vx::kSimEpoch + 1s), 1.0);
  EXPECT_DOUBLE_EQ(vx::bandwidth_report(net.accounting(), topo.peer(2), vx::kSimEpoch, vx::kSimEpoch + 1s), 0.0);
  EXPECT_THROW(vx::bandwidth_report(net.accounting(), a, vx::kSimEpoch + 1s, vx::kSimEpoch), vx::Error);
}

TEST(Network, ConservationCausalityAndLinkOrder) {
  vx::Topology topo;
  vx::Network::Queue q;
  vx::Network net(topo, vx::LinkParams{}, q, true);
  std::mt19937_64 rng(3);
  std::vector<std::pair<vx::SimTime, vx::SimTime>> send_recv;
  std::vector<int> sent_order, delivered;
  for (int i = 0; i < 200; ++i) {
    q.schedule(vx::kSimEpoch + std::chrono::microseconds(rng() % 10'000), [&, i] {
      auto sent = q.now();
      // Alternate large and small messages over one link to exercise FIFO.
      std::uint64_t size = i % 2 ? 100 : 200'000;
      sent_order.push_back(i);
      net.send(topo.peer(0), topo.peer(1), size, vx::MessageKind::gossip, [&, sent, i] {
        send_recv.emplace_back(sent, q.now());
        delivered.push_back(i);
      });
    });
  }
  q.run_until(vx::kSimEpoch + 10s, [](auto& f) { f(); });
  EXPECT_EQ(net.total_sent(), net.total_received());
  ASSERT_EQ(send_recv.size(), 200u);
  for (std::size_t k = 0; k < send_recv.size(); ++k) {
    EXPECT_GE(send_recv[k].second - send_recv[k].first, vx::LinkParams{}.latency);
    if (k) EXPECT_GE(send_recv[k].second, send_recv[k - 1].second);
  }
  EXPECT_EQ(delivered, sent_order);
  for (const auto& r : net.trace_records()) EXPECT_TRUE(r.kind == "gossip.send" || r.kind == "gossip.recv");
}

TEST(Network, IdenticalInputsGiveIdenticalTraces) {
  auto run = [] {
    vx::Topology topo;
    vx::Network::Queue q;
    vx::Network net(topo, vx::LinkParams{}, q, true);
    std::mt19937_64 rng(99);
    for (int i = 0; i < 100; ++i) {
      auto src = topo.peer(rng() % 27), dst = topo.ordering(vx::OrderingRole::broker, rng() % 4);
      auto size = 1 + rng() % 5000;
      q.schedule(vx::kSimEpoch + std::chrono::microseconds(rng() % 1000),
                 [&, src, dst, size] { net.send(src, dst, size, vx::MessageKind::envelope, [] {}); });
    }
    q.run_until(vx::kSimEpoch + 1s, [](auto& f) { f(); });
    std::ostringstream out;
    vx::write_trace(net.trace_records(), topo, out);
    return out.str();
  };
  auto a = run();
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, run());
}

TEST(FifoServer, QueuesJobsAndReportsUtilisation) {
  vx::FifoServer s;
  EXPECT_EQ(s.submit(vx::kSimEpoch, 10ms), vx::kSimEpoch + 10ms);
  EXPECT_EQ(s.submit(vx::kSimEpoch + 5ms, 10ms), vx::kSimEpoch + 20ms);
  EXPECT_EQ(s.submit(vx::kSimEpoch + 50ms, 10ms), vx::kSimEpoch + 60ms);
  EXPECT_EQ(s.jobs(), 3u);
  EXPECT_DOUBLE_EQ(s.busy_fraction(vx::kSimEpoch, vx::kSimEpoch + 100ms), 0.3);
  EXPECT_DOUBLE_EQ(s.busy_fraction(vx::kSimEpoch + 15ms, vx::kSimEpoch + 25ms), 0.5);
}
