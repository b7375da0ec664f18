#include "mavguard/ring_channel.hpp"

#include <cstring>
#include <stdexcept>

namespace mavguard {

PushResult RingProducer::push(std::span<const std::uint8_t> frame) {
  detail::RingBuffer& rb = *ring_;
  if (frame.size() > rb.slot_size) return PushResult::FrameTooLarge;
  const std::uint64_t head = rb.head.load(std::memory_order_relaxed);
  const std::uint64_t tail = rb.tail.load(std::memory_order_acquire);
  if (head - tail >= rb.capacity) return PushResult::Full;

  std::uint8_t* slot = rb.slot(head);
  slot[0] = static_cast<std::uint8_t>(frame.size() & 0xFF);
  slot[1] = static_cast<std::uint8_t>(frame.size() >> 8);
  std::memcpy(slot + 2, frame.data(), frame.size());
  // the slot is written completely before this release publishes it
  rb.head.store(head + 1, std::memory_order_release);
  return PushResult::Ok;
}

std::optional<std::vector<std::uint8_t>> RingConsumer::pop() {
  detail::RingBuffer& rb = *ring_;
  const std::uint64_t tail = rb.tail.load(std::memory_order_relaxed);
  const std::uint64_t head = rb.head.load(std::memory_order_acquire);
  if (tail == head) return std::nullopt;

  const std::uint8_t* slot = rb.slot(tail);
  const std::size_t len = slot[0] | (static_cast<std::size_t>(slot[1]) << 8);
  std::vector<std::uint8_t> frame(slot + 2, slot + 2 + len);
  rb.tail.store(tail + 1, std::memory_order_release);
  return frame;
}

std::size_t RingConsumer::pop_into(std::span<std::uint8_t> out) {
  detail::RingBuffer& rb = *ring_;
  const std::uint64_t tail = rb.tail.load(std::memory_order_relaxed);
  const std::uint64_t head = rb.head.load(std::memory_order_acquire);
  if (tail == head) return 0;

  const std::uint8_t* slot = rb.slot(tail);
  const std::size_t len = slot[0] | (static_cast<std::size_t>(slot[1]) << 8);
  if (len > out.size()) return 0;  // caller buffer must hold slot_size bytes
  std::memcpy(out.data(), slot + 2, len);
  rb.tail.store(tail + 1, std::memory_order_release);
  return len;
}

std::pair<RingProducer, RingConsumer> ring_create(std::uint32_t capacity,
                                                  std::uint32_t slot_size) {
  if (capacity < 2 || (capacity & (capacity - 1)) != 0)
    throw std::invalid_argument("ring capacity must be a power of two >= 2");
  if (slot_size == 0 || slot_size > 0xFFFF)
    throw std::invalid_argument("ring slot size must be in 1..65535");

  auto rb = std::make_shared<detail::RingBuffer>();
  rb->capacity = capacity;
  rb->slot_size = slot_size;
  rb->stride = slot_size + 2;
  rb->storage.assign(static_cast<std::size_t>(capacity) * rb->stride, 0);
  return {RingProducer(rb), RingConsumer(std::move(rb))};
}

}  // namespace mavguard
