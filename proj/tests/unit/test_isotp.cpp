#include <gtest/gtest.h>

#include "autosec/isotp.hpp"
#include "autosec/rng.hpp"
#include "oracles.hpp"

using namespace autosec;
using namespace autosec::isotp;

namespace {

Bytes random_payload(CounterRng& rng, std::size_t len) {
  Bytes p(len);
  for (auto& b : p) b = rng.byte();
  return p;
}

std::vector<Bytes> frame_data(const std::vector<bus::CanFrame>& frames) {
  std::vector<Bytes> out;
  for (const auto& f : frames) out.push_back(f.data);
  return out;
}

// Feeds frames to a receiver, acknowledging FirstFrames internally.
std::optional<Bytes> feed_all(const std::vector<bus::CanFrame>& frames, std::vector<TpEvent>* events = nullptr) {
  TpChannelState st;
  std::optional<Bytes> out;
  for (const auto& f : frames) {
    auto ev = tp_feed(st, f, 0x7E8);
    if (events) events->push_back(ev);
    if (auto* m = std::get_if<event::MessageComplete>(&ev)) out = m->payload;
  }
  return out;
}

}  // namespace

TEST(IsoTpEncode, MatchesReferenceEncoderAtBoundaries) {
  CounterRng rng(11);
  for (std::size_t len : {1, 2, 6, 7, 8, 9, 13, 14, 62, 63, 4094, 4095}) {
    const auto payload = random_payload(rng, len);
    EXPECT_EQ(frame_data(tp_encode(payload)), oracle::isotp_encode(payload)) << "len " << len;
  }
}

TEST(IsoTpEncode, RejectsEmptyAndOversizedPayloads) {
  EXPECT_THROW(tp_encode(Bytes{}), TpError);
  EXPECT_THROW(tp_encode(Bytes(4096, 0)), TpError);
}

TEST(IsoTpEncode, FrameCountFormula) {
  CounterRng rng(2);
  for (int i = 0; i < 200; ++i) {
    const std::size_t len = 1 + rng.below(kMaxPayload);
    const auto frames = tp_encode(random_payload(rng, len));
    const std::size_t expected = len <= 7 ? 1 : 1 + (len - 6 + 6) / 7;
    EXPECT_EQ(frames.size(), expected) << len;
    for (const auto& f : frames) EXPECT_EQ(f.data.size(), 8u);
  }
}

TEST(IsoTpFeed, RoundTripProperty) {
  CounterRng rng(0xC0FFEE);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t len = 1 + rng.below(kMaxPayload);
    const auto payload = random_payload(rng, len);
    const auto frames = tp_encode(payload);
    EXPECT_EQ(feed_all(frames), payload) << "len " << len;
    EXPECT_EQ(oracle::isotp_decode(frame_data(frames)), payload);
  }
}

TEST(IsoTpFeed, FirstFrameAnswersWithFlowControl) {
  const auto frames = tp_encode(Bytes(20, 0xAB), 0x7E0);
  TpChannelState st;
  st.block_size = 4;
  st.stmin_ticks = 2;
  auto ev = tp_feed(st, frames[0], 0x7E8);
  auto* emit = std::get_if<event::Emit>(&ev);
  ASSERT_NE(emit, nullptr);
  EXPECT_EQ(emit->frame.id, 0x7E8u);
  EXPECT_EQ(emit->frame.data, (Bytes{0x30, 4, 2, 0xCC, 0xCC, 0xCC, 0xCC, 0xCC}));
  EXPECT_EQ(st.phase, TpPhase::receiving_cf);
}

TEST(IsoTpFeed, WrongSequenceResetsReception) {
  auto frames = tp_encode(Bytes(30, 1));
  std::swap(frames[1], frames[2]);
  std::vector<TpEvent> events;
  EXPECT_FALSE(feed_all(frames, &events).has_value());
  ASSERT_GE(events.size(), 2u);
  EXPECT_EQ(events[1], TpEvent{event::ProtocolError{ProtocolErrorKind::WrongSequence}});
}

TEST(IsoTpFeed, SequenceNibbleWrapsAfterFifteen) {
  const auto frames = tp_encode(Bytes(6 + 7 * 17, 5));
  EXPECT_EQ(frames[15].data[0], 0x2F);
  EXPECT_EQ(frames[16].data[0], 0x20);
  EXPECT_EQ(frames[17].data[0], 0x21);
  EXPECT_EQ(feed_all(frames), Bytes(6 + 7 * 17, 5));
}

TEST(IsoTpFeed, MalformedFramesAreProtocolErrors) {
  TpChannelState st;
  const auto unexpected = TpEvent{event::ProtocolError{ProtocolErrorKind::UnexpectedFrame}};
  EXPECT_EQ(tp_feed(st, {0x1, false, {}}), unexpected);
  EXPECT_EQ(tp_feed(st, {0x1, false, {0x00, 1, 2}}), unexpected);             // SF length 0
  EXPECT_EQ(tp_feed(st, {0x1, false, {0x08, 1, 2, 3, 4, 5, 6, 7}}), unexpected);  // SF length 8
  EXPECT_EQ(tp_feed(st, {0x1, false, {0x05, 1, 2}}), unexpected);             // truncated SF
  EXPECT_EQ(tp_feed(st, {0x1, false, {0x10, 0x07, 1, 2, 3, 4, 5, 6}}), unexpected);  // FF < 8
  EXPECT_EQ(tp_feed(st, {0x1, false, {0x21, 1, 2, 3, 4, 5, 6, 7}}), unexpected);     // stray CF
  EXPECT_EQ(tp_feed(st, {0x1, false, {0x30, 0, 0}}), unexpected);                    // stray FC
  EXPECT_EQ(tp_feed(st, {0x1, false, {0x40, 0, 0}}), unexpected);                    // reserved PCI
  EXPECT_EQ(st.phase, TpPhase::idle);
}

TEST(IsoTpFeed, SingleFrameAbortsPartialReception) {
  const auto frames = tp_encode(Bytes(30, 1));
  TpChannelState st;
  tp_feed(st, frames[0]);
  auto ev = tp_feed(st, {0x1, false, {0x02, 0xAA, 0xBB}});
  EXPECT_EQ(ev, (TpEvent{event::MessageComplete{{0xAA, 0xBB}}}));
  EXPECT_EQ(st.phase, TpPhase::idle);
}

namespace {

struct Link {
  bus::VirtualBus bus;
  bus::EndpointId sniffer;
  TpChannel tx;
  TpChannel rx;

  Link(std::uint8_t rx_block_size, std::uint8_t rx_stmin)
      : sniffer(bus.attach("sniffer")),
        tx(bus, bus.attach("tx"), TpConfig{0x7E0, 0x7E8}),
        rx(bus, bus.attach("rx"), TpConfig{0x7E8, 0x7E0, false, rx_block_size, rx_stmin}) {}

  void tick() {
    bus.step();
    rx.service();
    tx.service();
  }
};

}  // namespace

TEST(IsoTpChannel, StminScheduleMatchesHandDerivedTicks) {
  // 20 bytes = FF + 2 CF. Receiver asks for 2 ticks between CFs.
  // tick 1: FF on the wire; tick 2: FC; tick 3: CF1; tick 5: CF2.
  Link link(0, 2);
  link.tx.send(Bytes(20, 0x42));
  std::vector<std::pair<bus::Tick, Byte>> wire;
  for (int i = 0; i < 10; ++i) {
    link.tick();
    for (const auto& f : link.bus.drain(link.sniffer)) wire.emplace_back(link.bus.now(), f.data[0]);
  }
  const std::vector<std::pair<bus::Tick, Byte>> expected = {{1, 0x10}, {2, 0x30}, {3, 0x21}, {5, 0x22}};
  EXPECT_EQ(wire, expected);
  EXPECT_EQ(link.rx.take_message(), Bytes(20, 0x42));
  EXPECT_EQ(link.tx.send_status(), SendStatus::complete);
}

TEST(IsoTpChannel, BlockSizeRequestsFreshFlowControl) {
  Link link(2, 0);
  const Bytes payload(6 + 7 * 5, 0x11);  // FF + 5 CF
  link.tx.send(payload);
  int flow_controls = 0;
  for (int i = 0; i < 20; ++i) {
    link.tick();
    for (const auto& f : link.bus.drain(link.sniffer)) flow_controls += f.data[0] == 0x30;
  }
  EXPECT_EQ(flow_controls, 3);  // after FF, after CF2, after CF4
  EXPECT_EQ(link.rx.take_message(), payload);
}

TEST(IsoTpChannel, MissingFlowControlTimesOut) {
  bus::VirtualBus bus;
  TpChannel tx(bus, bus.attach("tx"), TpConfig{0x7E0, 0x7E8});
  tx.send(Bytes(20, 1));
  for (bus::Tick t = 0; t < kFlowControlTimeout - 1; ++t) {
    bus.step();
    tx.service();
  }
  EXPECT_EQ(tx.send_status(), SendStatus::in_progress);
  bus.step();
  tx.service();
  EXPECT_EQ(tx.send_status(), SendStatus::timed_out);
  EXPECT_EQ(tx.state().phase, TpPhase::idle);
}

TEST(IsoTpChannel, BusyChannelRejectsSecondSend) {
  bus::VirtualBus bus;
  TpChannel tx(bus, bus.attach("tx"), TpConfig{0x7E0, 0x7E8});
  tx.send(Bytes(20, 1));
  EXPECT_THROW(tx.send(Bytes{1}), TpError);
}

TEST(IsoTpChannel, RandomLengthsSurviveTheBus) {
  CounterRng rng(99);
  for (int trial = 0; trial < 40; ++trial) {
    Link link(static_cast<std::uint8_t>(rng.below(4)), static_cast<std::uint8_t>(rng.below(3)));
    const auto payload = random_payload(rng, 1 + rng.below(600));
    link.tx.send(payload);
    for (int i = 0; i < 400 && link.tx.send_status() != SendStatus::complete; ++i) link.tick();
    link.tick();
    EXPECT_EQ(link.rx.take_message(), payload);
  }
}
