#include "espice/utility_model.hpp"

#include "espice/errors.hpp"
#include "espice/kv_config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace espice {

UtilityTable UtilityTable::zeros(std::uint32_t m, std::uint32_t n, std::uint32_t bs) {
    if (m == 0 || n == 0 || bs == 0) throw ConfigError("utility table: M, N, bs must be > 0");
    UtilityTable ut;
    ut.type_count = m;
    ut.ref_size = n;
    ut.bin_size = bs;
    ut.columns = (n + bs - 1) / bs;
    ut.cells.assign(static_cast<std::size_t>(m) * ut.columns, 0);
    return ut;
}

void UtilityTable::set(TypeId t, std::uint32_t col, int u) {
    if (u < 0 || u > 100) throw UsageError("utility value out of [0,100]");
    cells[static_cast<std::size_t>(t) * columns + (col - 1)] = static_cast<std::uint8_t>(u);
}

double PositionShares::column_sum(std::uint32_t col) const {
    double s = 0.0;
    for (TypeId t = 0; t < type_count; ++t) s += at(t, col);
    return s;
}

std::vector<CdtArray> compute_cdt(const UtilityTable& ut, const PositionShares& shares,
                                  std::uint32_t rho) {
    if (rho < 1) throw UsageError("compute_cdt: rho must be >= 1");
    if (ut.type_count != shares.type_count || ut.columns != shares.columns)
        throw UsageError("compute_cdt: UT and shares shapes differ");
    if (rho > ut.columns) rho = ut.columns; // at least one column per partition

    ColumnPartitions parts{ut.columns, rho};
    std::vector<CdtArray> out(rho);
    for (std::uint32_t k = 0; k < rho; ++k) {
        std::array<double, 101> occ{};
        for (std::uint32_t col = parts.begin(k); col < parts.end(k); ++col)
            for (TypeId t = 0; t < ut.type_count; ++t)
                occ[static_cast<std::size_t>(ut.at(t, col))] += shares.at(t, col);

        out[k].partition_id = k;
        double acc = 0.0;
        for (std::size_t u = 0; u <= 100; ++u) {
            acc += occ[u];
            out[k].values[u] = acc;
        }
    }
    return out;
}

int ModelSnapshot::utility(TypeId t, std::uint32_t pos, std::uint32_t ws) const {
    if (t >= ut.type_count) return unknown_type_utility;
    if (pos < 1) pos = 1;
    if (ws < 1) ws = 1;
    const ScalingMap map{ws, ut.ref_size};
    if (ws >= ut.ref_size) return ut.at(t, ut.column_of(map.down(pos)));

    // Scale-up: the position covers a reference range; average the distinct
    // columns it touches.
    auto [lo, hi] = map.up(pos);
    const std::uint32_t clo = ut.column_of(lo);
    const std::uint32_t chi = ut.column_of(hi);
    double sum = 0.0;
    for (std::uint32_t c = clo; c <= chi; ++c) sum += ut.at(t, c);
    return round_half_up(sum / (chi - clo + 1));
}

std::uint32_t ModelSnapshot::partition_index(std::uint32_t pos, std::uint32_t ws) const {
    if (pos < 1) pos = 1;
    if (ws < 1) ws = 1;
    const ScalingMap map{ws, ut.ref_size};
    const std::uint32_t ref = ws >= ut.ref_size ? map.down(pos) : map.up(pos).first;
    return std::min(partitions.of_column(ut.column_of(ref)), partitions.rho - 1);
}

void ModelSnapshot::export_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write model file: " + path);
    out << "# M,N,bs\n";
    out << ut.type_count << ',' << ut.ref_size << ',' << ut.bin_size << '\n';
    for (TypeId t = 0; t < ut.type_count; ++t) {
        for (std::uint32_t c = 1; c <= ut.columns; ++c) {
            if (c > 1) out << ',';
            out << ut.at(t, c);
        }
        out << '\n';
    }
    char buf[40];
    for (const auto& cdt : cdts) {
        out << "# cdt " << cdt.partition_id << '\n';
        for (std::size_t u = 0; u <= 100; ++u) {
            std::snprintf(buf, sizeof buf, "%.17g", cdt.values[u]);
            out << (u ? "," : "") << buf;
        }
        out << '\n';
    }
}

ModelSnapshot ModelSnapshot::import_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open model file: " + path);

    ModelSnapshot snap;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    TypeId row = 0;
    bool in_cdt = false;

    auto parse_row = [&](const std::string& s) {
        std::vector<double> vals;
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            char* end = nullptr;
            double v = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str() || *end != '\0') throw ParseError("bad number: " + tok, lineno);
            vals.push_back(v);
        }
        return vals;
    };

    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            if (t.find("cdt") != std::string::npos) in_cdt = true;
            continue;
        }
        auto vals = parse_row(t);
        if (!have_header) {
            if (vals.size() != 3) throw ParseError("expected M,N,bs", lineno);
            snap.ut = UtilityTable::zeros(static_cast<std::uint32_t>(vals[0]),
                                          static_cast<std::uint32_t>(vals[1]),
                                          static_cast<std::uint32_t>(vals[2]));
            have_header = true;
            continue;
        }
        if (!in_cdt) {
            if (row >= snap.ut.type_count) throw ParseError("too many UT rows", lineno);
            if (vals.size() != snap.ut.columns) throw ParseError("wrong UT row width", lineno);
            for (std::uint32_t c = 1; c <= snap.ut.columns; ++c) {
                int u = static_cast<int>(vals[c - 1]);
                if (u < 0 || u > 100) throw ParseError("utility out of [0,100]", lineno);
                snap.ut.set(row, c, u);
            }
            ++row;
        } else {
            if (vals.size() != 101) throw ParseError("CDT row must have 101 values", lineno);
            CdtArray cdt;
            cdt.partition_id = static_cast<std::uint32_t>(snap.cdts.size());
            std::copy(vals.begin(), vals.end(), cdt.values.begin());
            snap.cdts.push_back(cdt);
        }
    }
    if (!have_header) throw ConfigError("model file has no header: " + path);
    if (row != snap.ut.type_count) throw ConfigError("model file truncated: " + path);
    if (snap.cdts.empty()) throw ConfigError("model file has no CDT section: " + path);
    snap.partitions = ColumnPartitions{snap.ut.columns, static_cast<std::uint32_t>(snap.cdts.size())};
    snap.shares.type_count = snap.ut.type_count;
    snap.shares.ref_size = snap.ut.ref_size;
    snap.shares.bin_size = snap.ut.bin_size;
    snap.shares.columns = snap.ut.columns;
    snap.shares.shares.assign(static_cast<std::size_t>(snap.ut.type_count) * snap.ut.columns, 0.0);
    return snap;
}

UtilityModel::UtilityModel(std::uint32_t type_count, Params params)
    : type_count_(type_count), params_(params) {
    if (type_count_ == 0) throw ConfigError("model: type_count must be > 0");
    if (params_.bin_size == 0) throw ConfigError("model: bin_size must be > 0");
    if (params_.retrain_decay < 0.0 || params_.retrain_decay > 1.0)
        throw ConfigError("model: retrain_decay must be in [0,1]");
    if (params_.ref_size > 0) fix_reference(params_.ref_size);
}

std::uint32_t UtilityModel::ref_size() const {
    if (built_) return fixed_ref_size_;
    if (params_.ref_size > 0) return params_.ref_size;
    if (window_count_ == 0) return 0;
    return static_cast<std::uint32_t>(
        std::max<std::uint64_t>(1, (total_window_events_ + window_count_ / 2) / window_count_));
}

UtilityModel::Shape UtilityModel::shape_for(std::uint32_t n) const {
    return {n, params_.bin_size, (n + params_.bin_size - 1) / params_.bin_size};
}

void UtilityModel::add_contribution(std::vector<double>& m, const Shape& s, TypeId t,
                                    std::uint32_t pos, std::uint32_t ws) {
    const ScalingMap map{ws, s.ref_size};
    if (ws >= s.ref_size) {
        const std::uint32_t col = (map.down(pos) - 1) / s.bin_size;
        m[static_cast<std::size_t>(t) * s.columns + col] += 1.0;
    } else {
        auto [lo, hi] = map.up(pos);
        const std::uint32_t clo = (lo - 1) / s.bin_size;
        const std::uint32_t chi = (hi - 1) / s.bin_size;
        for (std::uint32_t c = clo; c <= chi; ++c)
            m[static_cast<std::size_t>(t) * s.columns + c] += 1.0;
    }
}

void UtilityModel::add_window(std::vector<double>& m, const Shape& s, std::uint32_t type_count,
                              const Window& w) {
    const std::uint32_t ws = w.size_events;
    const ScalingMap map{ws, s.ref_size};
    for (const auto& mem : w.events) {
        if (mem.type_id >= type_count) continue;
        if (ws >= s.ref_size) {
            // Several raw positions share one reference slot: weight so a
            // window adds about unit mass per slot.
            const std::uint32_t col = (map.down(mem.position) - 1) / s.bin_size;
            m[static_cast<std::size_t>(mem.type_id) * s.columns + col] +=
                static_cast<double>(s.ref_size) / ws;
        } else {
            auto [lo, hi] = map.up(mem.position);
            const std::uint32_t clo = (lo - 1) / s.bin_size;
            const std::uint32_t chi = (hi - 1) / s.bin_size;
            for (std::uint32_t c = clo; c <= chi; ++c)
                m[static_cast<std::size_t>(mem.type_id) * s.columns + c] += 1.0;
        }
    }
}

void UtilityModel::fix_reference(std::uint32_t n) {
    const Shape s = shape_for(n);
    fixed_ref_size_ = n;
    columns_ = s.columns;
    contrib_counts_.assign(static_cast<std::size_t>(type_count_) * columns_, 0.0);
    occupancy_.assign(static_cast<std::size_t>(type_count_) * columns_, 0.0);
    built_ = true;
    for (const auto& r : contrib_buffer_) add_contribution(contrib_counts_, s, r.t, r.pos, r.ws);
    for (const auto& w : window_buffer_) add_window(occupancy_, s, type_count_, w);
    contrib_buffer_.clear();
    contrib_buffer_.shrink_to_fit();
    window_buffer_.clear();
    window_buffer_.shrink_to_fit();
}

std::vector<double> UtilityModel::counts_for(std::uint32_t n) const {
    if (built_) return contrib_counts_;
    const Shape s = shape_for(n);
    std::vector<double> m(static_cast<std::size_t>(type_count_) * s.columns, 0.0);
    for (const auto& r : contrib_buffer_) add_contribution(m, s, r.t, r.pos, r.ws);
    return m;
}

std::vector<double> UtilityModel::occupancy_for(std::uint32_t n) const {
    if (built_) return occupancy_;
    const Shape s = shape_for(n);
    std::vector<double> m(static_cast<std::size_t>(type_count_) * s.columns, 0.0);
    for (const auto& w : window_buffer_) add_window(m, s, type_count_, w);
    return m;
}

void UtilityModel::record_contribution(TypeId t, std::uint32_t pos, std::uint32_t ws) {
    if (t >= type_count_) throw UsageError("record_contribution: type out of range");
    if (pos < 1 || pos > ws) throw UsageError("record_contribution: position outside [1, ws]");
    ++contribution_count_;
    if (!built_) {
        contrib_buffer_.push_back({t, pos, ws});
        return;
    }
    add_contribution(contrib_counts_, shape_for(fixed_ref_size_), t, pos, ws);
}

void UtilityModel::observe_window(const Window& w) {
    if (w.size_events == 0) return;
    ++window_count_;
    total_window_events_ += w.size_events;
    if (!built_) {
        window_buffer_.push_back(w);
        return;
    }
    add_window(occupancy_, shape_for(fixed_ref_size_), type_count_, w);
}

UtilityTable UtilityModel::build_ut() const {
    if (contribution_count_ == 0) throw NotReadyError("model: no contributions recorded");
    const std::uint32_t n = ref_size();
    if (n == 0) throw NotReadyError("model: reference window size unknown");

    UtilityTable ut = UtilityTable::zeros(type_count_, n, params_.bin_size);
    const std::vector<double> counts = counts_for(n);
    const double max_count = *std::max_element(counts.begin(), counts.end());
    if (max_count <= 0.0) throw NotReadyError("model: no contributions recorded");
    for (TypeId t = 0; t < type_count_; ++t)
        for (std::uint32_t c = 1; c <= ut.columns; ++c) {
            const double raw = counts[static_cast<std::size_t>(t) * ut.columns + (c - 1)];
            ut.set(t, c, round_half_up(100.0 * raw / max_count));
        }
    return ut;
}

PositionShares UtilityModel::estimate_shares() const {
    if (window_count_ == 0) throw NotReadyError("model: no complete training window");
    const std::uint32_t n = ref_size();
    if (n == 0) throw NotReadyError("model: reference window size unknown");

    const std::vector<double> occ = occupancy_for(n);
    const Shape sh = shape_for(n);

    PositionShares s;
    s.type_count = type_count_;
    s.ref_size = n;
    s.bin_size = sh.bin_size;
    s.columns = sh.columns;
    s.shares.assign(static_cast<std::size_t>(type_count_) * sh.columns, 0.0);

    UtilityTable shape = UtilityTable::zeros(type_count_, n, sh.bin_size);
    for (std::uint32_t c = 1; c <= sh.columns; ++c) {
        double colsum = 0.0;
        for (TypeId t = 0; t < type_count_; ++t)
            colsum += occ[static_cast<std::size_t>(t) * sh.columns + (c - 1)];
        if (colsum <= 0.0) continue;
        const double target = shape.column_coverage(c);
        for (TypeId t = 0; t < type_count_; ++t)
            s.cell(t, c) = occ[static_cast<std::size_t>(t) * sh.columns + (c - 1)] / colsum * target;
    }
    return s;
}

void UtilityModel::publish(std::uint32_t rho) {
    if (!built_) {
        const std::uint32_t n = ref_size();
        if (n == 0) throw NotReadyError("model: reference window size unknown");
        fix_reference(n);
    }
    auto snap = std::make_unique<ModelSnapshot>();
    snap->ut = build_ut();
    snap->shares = estimate_shares();
    if (rho < 1) rho = 1;
    if (rho > snap->ut.columns) rho = snap->ut.columns;
    snap->cdts = compute_cdt(snap->ut, snap->shares, rho);
    snap->partitions = ColumnPartitions{snap->ut.columns, rho};
    snap->unknown_type_utility = params_.unknown_type_utility;
    published_rho_ = rho;

    published_.store(snap.get(), std::memory_order_release);
    retired_.push_back(std::move(snap));
}

void UtilityModel::on_window_closed() {
    if (params_.retrain_interval == 0 || published_.load(std::memory_order_relaxed) == nullptr)
        return;
    if (++windows_since_publish_ < params_.retrain_interval) return;
    windows_since_publish_ = 0;
    const bool have_counts =
        built_ && *std::max_element(contrib_counts_.begin(), contrib_counts_.end()) > 0.0 &&
        window_count_ > 0;
    if (have_counts) publish(published_rho_);
    for (double& v : contrib_counts_) v *= params_.retrain_decay;
    for (double& v : occupancy_) v *= params_.retrain_decay;
}

void UtilityModel::import_snapshot(ModelSnapshot snap) {
    auto owned = std::make_unique<ModelSnapshot>(std::move(snap));
    if (!built_) fix_reference(owned->ut.ref_size);
    published_rho_ = owned->partitions.rho;
    published_.store(owned.get(), std::memory_order_release);
    retired_.push_back(std::move(owned));
}

} // namespace espice
