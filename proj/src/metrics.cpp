#include "replab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "replab/text_io.hpp"

namespace replab {

std::string UseEvent::to_line() const {
    std::ostringstream out;
    out << rollout_id << ',' << creation_step << ',' << use_step << ','
        << batch_id << ',' << within_batch_rank;
    return out.str();
}

UseEvent UseEvent::from_line(std::string_view line) {
    const std::vector<std::string> fields = split(line, ',');
    if (fields.size() != 5) {
        throw std::invalid_argument("use event line must have 5 fields, got " +
                                    std::to_string(fields.size()));
    }
    UseEvent e;
    e.rollout_id = parse_uint64(fields[0]);
    e.creation_step = parse_int64(fields[1]);
    e.use_step = parse_int64(fields[2]);
    e.batch_id = parse_int64(fields[3]);
    e.within_batch_rank = parse_int64(fields[4]);
    return e;
}

std::int64_t staleness(const UseEvent& event) {
    const std::int64_t value = event.use_step - event.creation_step;
    if (value < 0) {
        throw std::invalid_argument(
            "corrupted use ledger: rollout " + std::to_string(event.rollout_id) +
            " used at step " + std::to_string(event.use_step) +
            " before its creation step " + std::to_string(event.creation_step));
    }
    return value;
}

void MetricsLedger::note_generated(std::uint64_t rollout_id) {
    std::lock_guard<std::mutex> lock(*mutex_);
    if (!generated_index_.insert(rollout_id).second) {
        throw std::invalid_argument("rollout " + std::to_string(rollout_id) +
                                    " noted as generated twice");
    }
    generated_.push_back(rollout_id);
}

void MetricsLedger::record_use(const UseEvent& event) {
    std::lock_guard<std::mutex> lock(*mutex_);
    if (event.use_step < event.creation_step) {
        throw std::invalid_argument("use event for rollout " +
                                    std::to_string(event.rollout_id) +
                                    " precedes its creation step");
    }
    if (!batch_slots_.insert({event.batch_id, event.within_batch_rank}).second) {
        throw std::invalid_argument("duplicate batch slot (batch " +
                                    std::to_string(event.batch_id) + ", rank " +
                                    std::to_string(event.within_batch_rank) + ")");
    }
    events_.push_back(event);
}

std::string MetricsLedger::export_text() const {
    std::lock_guard<std::mutex> lock(*mutex_);
    std::ostringstream out;
    out << "# use_ledger v1\n";
    out << "# generated " << generated_.size() << '\n';
    for (std::uint64_t id : generated_) out << id << '\n';
    out << "# events " << events_.size() << '\n';
    for (const UseEvent& e : events_) out << e.to_line() << '\n';
    return out.str();
}

MetricsLedger MetricsLedger::import_text(std::string_view text) {
    const std::vector<std::string> lines = split(text, '\n');
    std::size_t pos = 0;
    auto next_line = [&]() -> std::string {
        while (pos < lines.size() && trim(lines[pos]).empty()) ++pos;
        if (pos >= lines.size()) {
            throw std::invalid_argument("truncated use ledger text");
        }
        return std::string(trim(lines[pos++]));
    };

    if (next_line() != "# use_ledger v1") {
        throw std::invalid_argument("use ledger text missing '# use_ledger v1' header");
    }

    auto counted_header = [](const std::string& line, std::string_view prefix) {
        if (line.rfind(prefix, 0) != 0) {
            throw std::invalid_argument("use ledger: expected '" + std::string(prefix) +
                                        " <count>' header, got '" + line + "'");
        }
        return parse_uint64(trim(line.substr(prefix.size())));
    };

    MetricsLedger ledger;
    const std::uint64_t n_generated = counted_header(next_line(), "# generated");
    for (std::uint64_t i = 0; i < n_generated; ++i) {
        ledger.note_generated(parse_uint64(next_line()));
    }
    const std::uint64_t n_events = counted_header(next_line(), "# events");
    for (std::uint64_t i = 0; i < n_events; ++i) {
        ledger.record_use(UseEvent::from_line(next_line()));
    }
    while (pos < lines.size()) {
        if (!trim(lines[pos]).empty()) {
            throw std::invalid_argument("use ledger: trailing content after events");
        }
        ++pos;
    }
    return ledger;
}

std::map<std::uint64_t, std::uint64_t> replay_counts(const MetricsLedger& ledger,
                                                     bool include_zero_use) {
    std::map<std::uint64_t, std::uint64_t> counts;
    if (include_zero_use) {
        for (std::uint64_t id : ledger.generated_ids()) counts[id] = 0;
    }
    for (const UseEvent& e : ledger.events()) ++counts[e.rollout_id];
    return counts;
}

std::vector<std::size_t> global_use_order(const std::vector<UseEvent>& events, Rng& rng) {
    // Group event indices by batch in deterministic (use_step, batch_id)
    // order, then shuffle inside each batch to realize the random
    // within-batch ordering.
    std::map<std::pair<std::int64_t, std::int64_t>, std::vector<std::size_t>> batches;
    for (std::size_t i = 0; i < events.size(); ++i) {
        batches[{events[i].use_step, events[i].batch_id}].push_back(i);
    }
    std::vector<std::size_t> order;
    order.reserve(events.size());
    for (auto& [key, members] : batches) {
        std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
            return events[a].within_batch_rank < events[b].within_batch_rank;
        });
        rng.shuffle(members);
        order.insert(order.end(), members.begin(), members.end());
    }
    return order;
}

std::vector<UseGapLabel> steps_since_last_use(const MetricsLedger& ledger, Rng& rng) {
    const std::vector<UseEvent>& events = ledger.events();
    const std::vector<std::size_t> order = global_use_order(events, rng);
    std::unordered_map<std::uint64_t, std::int64_t> last_use;
    last_use.reserve(events.size());
    std::vector<UseGapLabel> labels;
    labels.reserve(events.size());
    for (std::size_t idx : order) {
        const UseEvent& e = events[idx];
        UseGapLabel label;
        label.event_index = idx;
        auto it = last_use.find(e.rollout_id);
        if (it != last_use.end()) label.gap = e.use_step - it->second;
        last_use[e.rollout_id] = e.use_step;
        labels.push_back(label);
    }
    return labels;
}

namespace {

double nearest_rank(const std::vector<double>& sorted, double q) {
    // 1-indexed nearest-rank quantile: value at rank ceil(q * n).
    const std::size_t n = sorted.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
    if (rank < 1) rank = 1;
    if (rank > n) rank = n;
    return sorted[rank - 1];
}

}  // namespace

MetricSummary summarize(const std::vector<double>& values) {
    if (values.empty()) {
        throw std::invalid_argument("summarize requires at least one value");
    }
    MetricSummary s;
    s.count = values.size();
    for (double v : values) {
        s.histogram[static_cast<std::int64_t>(std::llround(v))] += 1;
    }
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) /
             static_cast<double>(values.size());
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    s.median = nearest_rank(sorted, 0.5);
    s.q25 = nearest_rank(sorted, 0.25);
    s.q75 = nearest_rank(sorted, 0.75);
    return s;
}

std::string summary_table(const std::vector<std::pair<std::string, MetricSummary>>& rows) {
    std::ostringstream out;
    out << "name,mean,median,q25,q75,count\n";
    for (const auto& [name, s] : rows) {
        out << name << ',' << format_double(s.mean) << ',' << format_double(s.median)
            << ',' << format_double(s.q25) << ',' << format_double(s.q75) << ','
            << s.count << '\n';
    }
    return out.str();
}

std::string histogram_table(const MetricSummary& summary) {
    std::ostringstream out;
    out << "bin,count\n";
    for (const auto& [bin, count] : summary.histogram) {
        out << bin << ',' << count << '\n';
    }
    return out.str();
}

}  // namespace replab
