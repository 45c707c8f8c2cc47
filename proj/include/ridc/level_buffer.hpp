#pragma once

// Sliding window of one correction level's most recent nodes, shared between
// that level (single writer) and the level above it (single reader).
//
// Level j keeps j+2 slots: exactly the stencil the level above needs for one
// correction step. The writer may only overwrite a slot once the reader has
// released it; the reader may only look at indices at or below the watermark.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ridc/errors.hpp"
#include "ridc/linalg.hpp"

namespace ridc {

/// State of one level at one time node, with both right-hand-side splits
/// evaluated there.
struct LevelNode {
  StateVector state;
  StateVector f_stiff;
  StateVector f_nonstiff;
};

using NodePtr = std::shared_ptr<const LevelNode>;

/// Wake-up channel shared by every buffer in one pipeline. Any publish or
/// release bumps the generation; an error aborts all waiters.
class PipelineSignal {
 public:
  std::uint64_t generation() const {
    std::lock_guard lock(mutex_);
    return generation_;
  }

  void notify() {
    {
      std::lock_guard lock(mutex_);
      ++generation_;
    }
    cv_.notify_all();
  }

  /// Returns false if the generation did not move within `timeout`.
  bool wait_changed(std::uint64_t seen, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    return cv_.wait_for(lock, timeout, [&] { return generation_ != seen || error_ != nullptr; });
  }

  void abort(std::exception_ptr error) {
    {
      std::lock_guard lock(mutex_);
      if (!error_) error_ = std::move(error);
      ++generation_;
    }
    cv_.notify_all();
  }

  bool aborted() const {
    std::lock_guard lock(mutex_);
    return error_ != nullptr;
  }

  std::exception_ptr error() const {
    std::lock_guard lock(mutex_);
    return error_;
  }

 private:
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::uint64_t generation_ = 0;
  std::exception_ptr error_;
};

class LevelBuffer {
 public:
  static constexpr std::int64_t kNone = -1;

  explicit LevelBuffer(std::size_t level,
                       std::shared_ptr<PipelineSignal> signal = std::make_shared<PipelineSignal>())
      : level_(level), slots_(level + 2), signal_(std::move(signal)) {}

  LevelBuffer(const LevelBuffer&) = delete;
  LevelBuffer& operator=(const LevelBuffer&) = delete;

  std::size_t level() const noexcept { return level_; }
  std::size_t capacity() const noexcept { return slots_.size(); }

  /// Highest published step index, or kNone.
  std::int64_t watermark() const noexcept { return watermark_.load(std::memory_order_acquire); }

  /// Oldest step index the reader still needs.
  std::size_t floor() const noexcept { return floor_.load(std::memory_order_acquire); }

  /// Number of steps currently held (never above capacity).
  std::size_t resident() const noexcept {
    const auto w = watermark();
    return w == kNone ? 0 : std::min<std::size_t>(static_cast<std::size_t>(w) + 1, capacity());
  }

  /// Publishing `step` evicts step - capacity; allowed once the reader is past it.
  bool can_publish(std::size_t step) const noexcept {
    return step < capacity() || step - capacity() < floor();
  }

  void publish(std::size_t step, NodePtr node) {
    if (static_cast<std::int64_t>(step) != watermark() + 1) {
      throw ProtocolViolation("level " + std::to_string(level_) + ": published step " +
                              std::to_string(step) + " after watermark " +
                              std::to_string(watermark()));
    }
    if (!can_publish(step)) {
      throw ProtocolViolation("level " + std::to_string(level_) + ": step " +
                              std::to_string(step) + " would evict a slot still in use");
    }
    slots_[step % capacity()] = std::move(node);
    watermark_.store(static_cast<std::int64_t>(step), std::memory_order_release);
    signal_->notify();
  }

  /// Reader side. Throws if the step is unpublished, evicted, or released.
  const LevelNode& at(std::size_t step) const {
    const auto w = watermark();
    if (w == kNone || static_cast<std::int64_t>(step) > w) {
      throw ProtocolViolation("level " + std::to_string(level_) + ": read of step " +
                              std::to_string(step) + " beyond watermark " + std::to_string(w));
    }
    if (static_cast<std::size_t>(w) - step >= capacity() || step < floor()) {
      throw ProtocolViolation("level " + std::to_string(level_) + ": step " +
                              std::to_string(step) + " is no longer resident");
    }
    return *slots_[step % capacity()];
  }

  /// Reader declares it no longer needs steps below `oldest`. Monotone.
  void release_below(std::size_t oldest) {
    std::size_t cur = floor_.load(std::memory_order_relaxed);
    if (oldest <= cur) return;
    floor_.store(oldest, std::memory_order_release);
    signal_->notify();
  }

  void release_all() { release_below(std::numeric_limits<std::size_t>::max() / 2); }

  /// Blocks until `step` is published. Throws ProtocolViolation if nothing
  /// moves for `timeout` (the watermark can never advance).
  void wait_published(std::size_t step, std::chrono::milliseconds timeout) const {
    while (watermark() < static_cast<std::int64_t>(step)) {
      const auto seen = signal_->generation();
      if (watermark() >= static_cast<std::int64_t>(step)) return;
      if (signal_->aborted()) std::rethrow_exception(signal_->error());
      if (!signal_->wait_changed(seen, timeout)) {
        throw ProtocolViolation("level " + std::to_string(level_) + ": waited " +
                                std::to_string(timeout.count()) + " ms for step " +
                                std::to_string(step) + ", watermark stuck at " +
                                std::to_string(watermark()));
      }
    }
  }

 private:
  std::size_t level_;
  std::vector<NodePtr> slots_;
  std::atomic<std::int64_t> watermark_{kNone};
  std::atomic<std::size_t> floor_{0};
  std::shared_ptr<PipelineSignal> signal_;
};

}  // namespace ridc
