#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include "ridc/level_buffer.hpp"

using namespace ridc;
using namespace std::chrono_literals;

namespace {

NodePtr node(double v) { return std::make_shared<const LevelNode>(LevelNode{{v}, {0.0}, {0.0}}); }

}  // namespace

TEST(LevelBuffer, CapacityIsLevelPlusTwo) {
  for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(LevelBuffer(j).capacity(), j + 2);
}

TEST(LevelBuffer, PublishAndRead) {
  LevelBuffer buf(1);
  EXPECT_EQ(buf.watermark(), LevelBuffer::kNone);
  EXPECT_EQ(buf.resident(), 0u);
  buf.publish(0, node(0.0));
  buf.publish(1, node(1.0));
  EXPECT_EQ(buf.watermark(), 1);
  EXPECT_EQ(buf.resident(), 2u);
  EXPECT_EQ(buf.at(1).state[0], 1.0);
  EXPECT_EQ(buf.at(0).state[0], 0.0);
}

TEST(LevelBuffer, OutOfOrderPublishIsViolation) {
  LevelBuffer buf(1);
  EXPECT_THROW(buf.publish(1, node(1.0)), ProtocolViolation);
  buf.publish(0, node(0.0));
  EXPECT_THROW(buf.publish(0, node(0.0)), ProtocolViolation);
}

TEST(LevelBuffer, ReadBeyondWatermarkIsViolation) {
  LevelBuffer buf(0);
  EXPECT_THROW(buf.at(0), ProtocolViolation);
  buf.publish(0, node(0.0));
  EXPECT_THROW(buf.at(1), ProtocolViolation);
}

TEST(LevelBuffer, EvictionNeedsRelease) {
  LevelBuffer buf(0);  // two slots
  buf.publish(0, node(0.0));
  buf.publish(1, node(1.0));
  EXPECT_FALSE(buf.can_publish(2));
  EXPECT_THROW(buf.publish(2, node(2.0)), ProtocolViolation);
  buf.release_below(1);
  EXPECT_THROW(buf.at(0), ProtocolViolation);  // released
  EXPECT_TRUE(buf.can_publish(2));
  buf.publish(2, node(2.0));
  EXPECT_EQ(buf.at(2).state[0], 2.0);
  EXPECT_EQ(buf.at(1).state[0], 1.0);
  EXPECT_EQ(buf.resident(), 2u);
}

TEST(LevelBuffer, ReleaseIsMonotone) {
  LevelBuffer buf(2);
  buf.release_below(3);
  buf.release_below(1);
  EXPECT_EQ(buf.floor(), 3u);
}

TEST(LevelBuffer, WaitPublishedWakesOnPublish) {
  auto signal = std::make_shared<PipelineSignal>();
  LevelBuffer buf(1, signal);
  std::jthread writer([&] {
    std::this_thread::sleep_for(20ms);
    buf.publish(0, node(0.0));
    buf.publish(1, node(1.0));
  });
  buf.wait_published(1, 5000ms);
  EXPECT_EQ(buf.at(1).state[0], 1.0);
}

TEST(LevelBuffer, WatchdogFiresWhenStalled) {
  LevelBuffer buf(1);
  buf.publish(0, node(0.0));
  EXPECT_THROW(buf.wait_published(1, 50ms), ProtocolViolation);
}

TEST(LevelBuffer, AbortPropagatesToWaiters) {
  auto signal = std::make_shared<PipelineSignal>();
  LevelBuffer buf(1, signal);
  std::jthread killer([&] {
    std::this_thread::sleep_for(20ms);
    signal->abort(std::make_exception_ptr(std::runtime_error("boom")));
  });
  EXPECT_THROW(buf.wait_published(0, 5000ms), std::runtime_error);
  EXPECT_TRUE(signal->aborted());
}
