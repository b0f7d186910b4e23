#include "espice/stream.hpp"

#include "espice/errors.hpp"
#include "espice/kv_config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace espice {

namespace {

double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::uint64_t uniform_in(Rng& rng, std::uint64_t lo, std::uint64_t hi) {
    return lo + rng() % (hi - lo + 1);
}

} // namespace

void SynthConfig::validate() const {
    if (type_count == 0) throw ConfigError("synth: type_count must be >= 1");
    if (base_rate <= 0) throw ConfigError("synth: base_rate must be > 0");
    if (!noise_mix.empty() && noise_mix.size() != type_count)
        throw ConfigError("synth: noise_mix size must equal type_count");
    double total = 0.0;
    for (double w : noise_mix) {
        if (w < 0) throw ConfigError("synth: noise weight must be >= 0");
        total += w;
    }
    if (!noise_mix.empty() && total <= 0)
        throw ConfigError("synth: noise_mix must have positive total weight");
    for (const auto& r : rules) {
        if (r.prob < 0.0 || r.prob > 1.0)
            throw ConfigError("synth: rule probability out of [0,1]");
        if (r.offset_min < 1 || r.offset_max < r.offset_min)
            throw ConfigError("synth: rule offsets must satisfy 1 <= min <= max");
        if (r.trigger >= type_count || r.correlated >= type_count)
            throw ConfigError("synth: rule type id out of range");
    }
}

SyntheticSource::SyntheticSource(SynthConfig cfg, std::size_t count)
    : cfg_(std::move(cfg)), remaining_(count), rng_(cfg_.seed) {
    cfg_.validate();
    noise_cdf_.resize(cfg_.type_count);
    double acc = 0.0;
    for (std::uint32_t t = 0; t < cfg_.type_count; ++t) {
        acc += cfg_.noise_mix.empty() ? 1.0 : cfg_.noise_mix[t];
        noise_cdf_[t] = acc;
    }
}

TypeId SyntheticSource::draw_type(SeqNo at) {
    auto it = pending_.find(at);
    if (it != pending_.end()) {
        TypeId t = it->second;
        pending_.erase(it);
        return t;
    }
    double u = uniform01(rng_) * noise_cdf_.back();
    auto pos = std::upper_bound(noise_cdf_.begin(), noise_cdf_.end(), u);
    if (pos == noise_cdf_.end()) --pos;
    return static_cast<TypeId>(pos - noise_cdf_.begin());
}

std::optional<Event> SyntheticSource::next() {
    if (remaining_ == 0) return std::nullopt;
    --remaining_;

    Event ev;
    ev.seq_no = next_seq_++;
    ev.type_id = draw_type(ev.seq_no);
    ev.timestamp_ms = std::llround(static_cast<double>(ev.seq_no - 1) * 1000.0 / cfg_.base_rate);

    // Emitting a trigger schedules its correlated type; first booking of a
    // future slot wins.
    for (const auto& r : cfg_.rules) {
        if (r.trigger != ev.type_id) continue;
        const bool fire = uniform01(rng_) < r.prob;
        const SeqNo target = ev.seq_no + uniform_in(rng_, r.offset_min, r.offset_max);
        if (fire) pending_.emplace(target, r.correlated);
    }
    return ev;
}

std::vector<Event> generate_synthetic(const SynthConfig& cfg, std::size_t count) {
    SyntheticSource src(cfg, count);
    std::vector<Event> out;
    out.reserve(count);
    while (auto ev = src.next()) out.push_back(std::move(*ev));
    return out;
}

struct FileReplaySource::Impl {
    std::ifstream in;
    std::string path;
    TypeRegistry* registry = nullptr;
    std::size_t lineno = 0;
    bool have_last = false;
    SeqNo last_seq = 0;
};

FileReplaySource::FileReplaySource(const std::string& path, TypeRegistry& registry)
    : impl_(std::make_shared<Impl>()) {
    impl_->in.open(path);
    if (!impl_->in) throw ConfigError("cannot open event file: " + path);
    impl_->path = path;
    impl_->registry = &registry;
}

std::optional<Event> FileReplaySource::next() {
    std::string line;
    while (std::getline(impl_->in, line)) {
        ++impl_->lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;

        std::vector<std::string> fields;
        std::stringstream ss(t);
        std::string tok;
        while (std::getline(ss, tok, ',')) fields.push_back(trim(tok));
        if (fields.size() < 3)
            throw ParseError("expected `seq_no,timestamp_ms,type_name`", impl_->lineno);

        Event ev;
        char* end = nullptr;
        ev.seq_no = std::strtoull(fields[0].c_str(), &end, 10);
        if (end == fields[0].c_str() || *end != '\0')
            throw ParseError("bad seq_no: " + fields[0], impl_->lineno);
        ev.timestamp_ms = std::strtoll(fields[1].c_str(), &end, 10);
        if (end == fields[1].c_str() || *end != '\0')
            throw ParseError("bad timestamp: " + fields[1], impl_->lineno);
        if (fields[2].empty()) throw ParseError("empty type name", impl_->lineno);
        ev.type_id = impl_->registry->intern(fields[2]);

        for (std::size_t i = 3; i < fields.size(); ++i) {
            auto eq = fields[i].find('=');
            if (eq == std::string::npos)
                throw ParseError("bad attribute (want name=value): " + fields[i], impl_->lineno);
            Attr a;
            a.name = fields[i].substr(0, eq);
            const std::string v = fields[i].substr(eq + 1);
            a.value = std::strtod(v.c_str(), &end);
            if (end == v.c_str() || *end != '\0')
                throw ParseError("bad attribute value: " + v, impl_->lineno);
            ev.payload.push_back(std::move(a));
        }

        if (impl_->have_last && ev.seq_no <= impl_->last_seq)
            throw OrderError("seq_no " + std::to_string(ev.seq_no) + " after " +
                                 std::to_string(impl_->last_seq) + " in " + impl_->path,
                             impl_->lineno);
        impl_->have_last = true;
        impl_->last_seq = ev.seq_no;
        return ev;
    }
    return std::nullopt;
}

RateSchedule::RateSchedule(double initial_rate) {
    if (initial_rate <= 0) throw ConfigError("rate must be > 0");
    steps_[0.0] = initial_rate;
}

void RateSchedule::add_step(double at_seconds, double rate) {
    if (rate <= 0) throw ConfigError("rate must be > 0");
    steps_[std::max(0.0, at_seconds)] = rate;
}

double RateSchedule::rate_at(double t_seconds) const {
    auto it = steps_.upper_bound(t_seconds);
    --it; // steps_ always holds t=0
    return it->second;
}

PacedSource::PacedSource(std::unique_ptr<StreamSource> inner, RateSchedule schedule)
    : inner_(std::move(inner)), schedule_(std::move(schedule)) {}

std::optional<PacedSource::Arrival> PacedSource::next() {
    auto ev = inner_->next();
    if (!ev) return std::nullopt;
    if (!first_) clock_s_ += 1.0 / schedule_.rate_at(clock_s_);
    first_ = false;
    return Arrival{std::move(*ev), clock_s_};
}

void PacedSource::set_rate(double from_seconds, double rate) {
    schedule_.add_step(std::max(from_seconds, clock_s_), rate);
}

} // namespace espice
