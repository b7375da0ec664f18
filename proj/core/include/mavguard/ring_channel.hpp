// Bounded single-producer/single-consumer frame ring over one contiguous
// byte region — the in-process model of the shared-memory partition
// boundary. Whole frames are the unit of transfer; storage is fixed at
// creation and push/pop never allocate.
//
// SPSC discipline is enforced by the endpoint types: RingProducer and
// RingConsumer are move-only, so each side can be owned by exactly one
// execution context at a time. Publication uses a release store on the head
// counter and an acquire load on the consumer side, so a consumer never
// observes a partially written frame.
#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <thread>
#include <utility>
#include <vector>

namespace mavguard {

enum class PushResult : std::uint8_t { Ok, Full, FrameTooLarge };

inline constexpr std::uint32_t kDefaultSlotSize = 300;  // >= largest MAVLink v2 frame

namespace detail {

struct RingBuffer {
  std::uint32_t capacity = 0;   // slot count, power of two
  std::uint32_t slot_size = 0;  // payload bytes per slot
  std::uint32_t stride = 0;     // slot_size + 2-byte length prefix
  alignas(64) std::atomic<std::uint64_t> head{0};  // frames published
  alignas(64) std::atomic<std::uint64_t> tail{0};  // frames consumed
  std::vector<std::uint8_t> storage;

  std::uint8_t* slot(std::uint64_t counter) {
    return storage.data() + static_cast<std::size_t>(counter & (capacity - 1)) * stride;
  }
};

}  // namespace detail

class RingProducer {
 public:
  RingProducer() = default;
  RingProducer(RingProducer&&) = default;
  RingProducer& operator=(RingProducer&&) = default;
  RingProducer(const RingProducer&) = delete;
  RingProducer& operator=(const RingProducer&) = delete;

  PushResult push(std::span<const std::uint8_t> frame);
  bool valid() const { return ring_ != nullptr; }

 private:
  friend std::pair<RingProducer, class RingConsumer> ring_create(std::uint32_t, std::uint32_t);
  explicit RingProducer(std::shared_ptr<detail::RingBuffer> ring) : ring_(std::move(ring)) {}
  std::shared_ptr<detail::RingBuffer> ring_;
};

class RingConsumer {
 public:
  RingConsumer() = default;
  RingConsumer(RingConsumer&&) = default;
  RingConsumer& operator=(RingConsumer&&) = default;
  RingConsumer(const RingConsumer&) = delete;
  RingConsumer& operator=(const RingConsumer&) = delete;

  // Oldest unread frame, byte-identical to what was pushed; nullopt if empty.
  std::optional<std::vector<std::uint8_t>> pop();
  // Allocation-free variant: copies into out, returns frame length, 0 if empty.
  std::size_t pop_into(std::span<std::uint8_t> out);
  bool valid() const { return ring_ != nullptr; }

 private:
  friend std::pair<RingProducer, RingConsumer> ring_create(std::uint32_t, std::uint32_t);
  explicit RingConsumer(std::shared_ptr<detail::RingBuffer> ring) : ring_(std::move(ring)) {}
  std::shared_ptr<detail::RingBuffer> ring_;
};

// capacity must be a power of two >= 2; throws std::invalid_argument otherwise.
std::pair<RingProducer, RingConsumer> ring_create(std::uint32_t capacity,
                                                  std::uint32_t slot_size = kDefaultSlotSize);

// Spin-then-sleep backoff used by the gateway poll loops (busy-wait contract).
struct SpinBackoff {
  std::uint32_t spin_limit = 1000;
  std::chrono::microseconds sleep{50};

  void wait(std::uint32_t& spins) const {
    if (++spins <= spin_limit) {
      std::this_thread::yield();
    } else {
      std::this_thread::sleep_for(sleep);
    }
  }
  static void reset(std::uint32_t& spins) { spins = 0; }
};

}  // namespace mavguard
