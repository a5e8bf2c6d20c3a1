#pragma once

// Bounded-history stream model: per-stream windows keep the last m+1 samples
// ending at the current index, advanced in lockstep once per tick.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpsmon/ec.hpp"
#include "cpsmon/util.hpp"

namespace cpsmon::streams {

struct Sample {
    Tick tick = 0;
    std::int64_t scalar = 0;          // register word, measured period, address, flag
    std::vector<std::uint8_t> bytes;  // frame payloads and the like
    std::string tag;                  // short discriminator, e.g. "byte", "frame"
};

class StreamWindow {
public:
    StreamWindow() = default;
    StreamWindow(std::string stream_id, int depth_m);

    const std::string& id() const { return id_; }
    int depth() const { return depth_; }
    bool empty() const { return buffer_.empty(); }
    std::size_t size() const { return buffer_.size(); }

    // Appends a sample; evicts the oldest once length exceeds m+1.
    // Throws NonMonotonicTick unless sample.tick > last buffered tick.
    void push(Sample sample);

    // Oldest-first copy of the buffer. Throws EmptyWindow when empty.
    std::vector<Sample> prefix() const;
    // Zero-copy oldest-first view; invalidated by the next push.
    std::span<const Sample> view() const { return buffer_; }

    const Sample& latest() const;
    std::optional<Sample> latest_at(Tick tick) const;  // sample whose tick == tick
    Tick last_tick() const { return buffer_.empty() ? -1 : buffer_.back().tick; }

    // Consecutive ticks since the last sample (maintained by advance()).
    Tick gap_ticks() const { return gap_ticks_; }

private:
    friend class MonitoredStreams;
    std::string id_;
    int depth_ = 32;
    std::vector<Sample> buffer_;  // small (m+1 elements); erase-from-front on eviction
    Tick gap_ticks_ = 0;
};

struct TransitionRecord {
    Tick tick = 0;
    std::string from_state;
    std::string to_state;
    ec::ActionLabel cause;  // call | return | jump
    // raw branch tuple carried alongside the state view
    std::uint64_t site_address = 0;
    std::uint64_t target_address = 0;
    std::uint64_t return_address = 0;
};

// The monitored-stream tuple: input, output, transition and named state
// windows, all sharing the current tick after each advance.
class MonitoredStreams {
public:
    explicit MonitoredStreams(int default_depth = 32) : default_depth_(default_depth) {}

    StreamWindow& add_stream(const std::string& id, int depth = -1);
    StreamWindow& add_state_stream(const std::string& id, int depth = -1);

    bool has_stream(const std::string& id) const { return windows_.count(id) != 0; }
    const StreamWindow& window(const std::string& id) const;
    StreamWindow& window(const std::string& id);
    std::vector<std::string> stream_ids() const;

    // Advances every window to `tick`; windows without a sample record a gap.
    // Throws SkippedTick unless tick == current_tick() + 1.
    void advance(Tick tick, const std::map<std::string, Sample>& samples);

    // Monitor-produced sample at the current tick (resets the gap counter).
    void push_sample(const std::string& id, Sample sample);

    void push_transition(TransitionRecord record);
    const std::deque<TransitionRecord>& transitions() const { return delta_; }
    int delta_depth() const { return default_depth_; }

    Tick current_tick() const { return current_; }

private:
    int default_depth_;
    Tick current_ = -1;
    std::map<std::string, StreamWindow> windows_;
    std::deque<TransitionRecord> delta_;
};

}  // namespace cpsmon::streams
