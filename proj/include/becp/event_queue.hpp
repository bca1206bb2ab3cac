#pragma once

#include <algorithm>
#include <cstdint>
#include <utility>
#include <vector>

namespace becp {

/// Min-heap of timestamped events, ordered by (time, insertion sequence) so
/// equal-time events pop in a total, replayable order.
template <typename Payload>
class EventQueue {
 public:
  struct Event {
    double time;
    std::uint64_t seq;
    Payload payload;
  };

  void push(double time, Payload p) {
    heap_.push_back(Event{time, next_seq_++, std::move(p)});
    std::push_heap(heap_.begin(), heap_.end(), Later{});
  }

  Event pop() {
    std::pop_heap(heap_.begin(), heap_.end(), Later{});
    Event e = std::move(heap_.back());
    heap_.pop_back();
    return e;
  }

  const Event& top() const { return heap_.front(); }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

  // Unordered view of pending events (in-flight inspection).
  const std::vector<Event>& pending() const { return heap_; }

 private:
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.time != b.time) return a.time > b.time;
      return a.seq > b.seq;
    }
  };

  std::vector<Event> heap_;
  std::uint64_t next_seq_ = 0;
};

}  // namespace becp
