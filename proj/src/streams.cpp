#include "cpsmon/streams.hpp"

#include <algorithm>

namespace cpsmon::streams {

StreamWindow::StreamWindow(std::string stream_id, int depth_m)
    : id_(std::move(stream_id)), depth_(depth_m) {
    if (depth_ < 1) throw SimError("window depth must be positive");
}

void StreamWindow::push(Sample sample) {
    if (!buffer_.empty() && sample.tick <= buffer_.back().tick)
        throw NonMonotonicTick(id_ + ": push tick " + std::to_string(sample.tick) +
                               " not after " + std::to_string(buffer_.back().tick));
    buffer_.push_back(std::move(sample));
    while (buffer_.size() > static_cast<std::size_t>(depth_) + 1) buffer_.erase(buffer_.begin());
    gap_ticks_ = 0;
}

std::vector<Sample> StreamWindow::prefix() const {
    if (buffer_.empty()) throw EmptyWindow(id_ + ": prefix of empty window");
    return {buffer_.begin(), buffer_.end()};
}

const Sample& StreamWindow::latest() const {
    if (buffer_.empty()) throw EmptyWindow(id_ + ": latest of empty window");
    return buffer_.back();
}

std::optional<Sample> StreamWindow::latest_at(Tick tick) const {
    if (buffer_.empty() || buffer_.back().tick != tick) return std::nullopt;
    return buffer_.back();
}

StreamWindow& MonitoredStreams::add_stream(const std::string& id, int depth) {
    auto [it, inserted] =
        windows_.emplace(id, StreamWindow(id, depth > 0 ? depth : default_depth_));
    if (!inserted) throw SimError("stream " + id + " already registered");
    return it->second;
}

StreamWindow& MonitoredStreams::add_state_stream(const std::string& id, int depth) {
    return add_stream(id, depth);
}

const StreamWindow& MonitoredStreams::window(const std::string& id) const {
    auto it = windows_.find(id);
    if (it == windows_.end()) throw UnregisteredStream("no stream " + id);
    return it->second;
}

StreamWindow& MonitoredStreams::window(const std::string& id) {
    auto it = windows_.find(id);
    if (it == windows_.end()) throw UnregisteredStream("no stream " + id);
    return it->second;
}

std::vector<std::string> MonitoredStreams::stream_ids() const {
    std::vector<std::string> out;
    out.reserve(windows_.size());
    for (const auto& [id, w] : windows_) out.push_back(id);
    return out;
}

void MonitoredStreams::advance(Tick tick, const std::map<std::string, Sample>& samples) {
    if (tick != current_ + 1)
        throw SkippedTick("advance to tick " + std::to_string(tick) + " from " +
                          std::to_string(current_));
    for (auto& [id, w] : windows_) {
        auto it = samples.find(id);
        if (it != samples.end()) {
            Sample s = it->second;
            s.tick = tick;
            w.push(std::move(s));
        } else {
            w.gap_ticks_ += 1;
        }
    }
    current_ = tick;
}

void MonitoredStreams::push_sample(const std::string& id, Sample sample) {
    sample.tick = current_;
    window(id).push(std::move(sample));
}

void MonitoredStreams::push_transition(TransitionRecord record) {
    if (!delta_.empty() && delta_.back().to_state != record.from_state)
        throw SimError("transition chain broken: " + delta_.back().to_state + " -> " +
                       record.from_state);
    delta_.push_back(std::move(record));
    while (delta_.size() > static_cast<std::size_t>(default_depth_) + 1) delta_.pop_front();
}

}  // namespace cpsmon::streams
