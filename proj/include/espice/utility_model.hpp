#pragma once

#include "espice/event.hpp"
#include "espice/window.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace espice {

// Maps a raw per-window position (1-based, window of `ws` events) onto the
// reference coordinate system of `ref_size` positions. Windows larger than the
// reference scale down (several raw positions share a reference position),
// smaller ones scale up (one raw position covers a reference range).
struct ScalingMap {
    std::uint32_t ws = 1;
    std::uint32_t ref_size = 1;

    double sf() const { return static_cast<double>(ws) / ref_size; }

    std::uint32_t down(std::uint32_t pos) const { // ws >= ref_size
        auto r = (static_cast<std::uint64_t>(pos) * ref_size + ws - 1) / ws;
        return static_cast<std::uint32_t>(std::min<std::uint64_t>(std::max<std::uint64_t>(r, 1), ref_size));
    }
    // Inclusive reference range covered by a raw position (ws < ref_size).
    std::pair<std::uint32_t, std::uint32_t> up(std::uint32_t pos) const {
        std::uint64_t lo = (static_cast<std::uint64_t>(pos - 1) * ref_size) / ws + 1;
        std::uint64_t hi = (static_cast<std::uint64_t>(pos) * ref_size + ws - 1) / ws;
        lo = std::min<std::uint64_t>(std::max<std::uint64_t>(lo, 1), ref_size);
        hi = std::min<std::uint64_t>(std::max<std::uint64_t>(hi, lo), ref_size);
        return {static_cast<std::uint32_t>(lo), static_cast<std::uint32_t>(hi)};
    }
};

inline int round_half_up(double x) { return static_cast<int>(std::floor(x + 0.5)); }

// M x ceil(N/bs) utilities in [0,100]. Cells are stored as bytes so even the
// largest evaluated tables stay cache-friendly.
struct UtilityTable {
    std::uint32_t type_count = 0;  // M
    std::uint32_t ref_size = 0;    // N, raw reference positions
    std::uint32_t bin_size = 1;    // bs
    std::uint32_t columns = 0;     // ceil(N / bs)
    std::vector<std::uint8_t> cells;

    static UtilityTable zeros(std::uint32_t m, std::uint32_t n, std::uint32_t bs);

    int at(TypeId t, std::uint32_t col) const { // col is 1-based
        return cells[static_cast<std::size_t>(t) * columns + (col - 1)];
    }
    void set(TypeId t, std::uint32_t col, int u);
    std::uint32_t column_of(std::uint32_t ref_pos) const { return (ref_pos - 1) / bin_size + 1; }
    // Raw positions aggregated by a column; the last bin covers the remainder.
    std::uint32_t column_coverage(std::uint32_t col) const {
        return col < columns ? bin_size : ref_size - (columns - 1) * bin_size;
    }
};

// Fractional per-column type-occupancy probabilities; each column sums to the
// number of raw positions it covers.
struct PositionShares {
    std::uint32_t type_count = 0;
    std::uint32_t ref_size = 0;
    std::uint32_t bin_size = 1;
    std::uint32_t columns = 0;
    std::vector<double> shares;

    double at(TypeId t, std::uint32_t col) const {
        return shares[static_cast<std::size_t>(t) * columns + (col - 1)];
    }
    double& cell(TypeId t, std::uint32_t col) {
        return shares[static_cast<std::size_t>(t) * columns + (col - 1)];
    }
    double column_sum(std::uint32_t col) const;
};

// Cumulative utility occurrences O(u) for one partition, indexed by u in
// [0,100]; values carry fractional position-share mass.
struct CdtArray {
    std::uint32_t partition_id = 0;
    std::array<double, 101> values{};
};

// Contiguous equal split of the table's columns into rho partitions
// (boundaries floor(k * columns / rho), so sizes differ by at most one).
struct ColumnPartitions {
    std::uint32_t columns = 0;
    std::uint32_t rho = 1;

    std::uint32_t begin(std::uint32_t k) const { // 1-based first column
        return static_cast<std::uint32_t>((static_cast<std::uint64_t>(k) * columns) / rho) + 1;
    }
    std::uint32_t end(std::uint32_t k) const { // 1-based past-the-end column
        return static_cast<std::uint32_t>((static_cast<std::uint64_t>(k + 1) * columns) / rho) + 1;
    }
    std::uint32_t of_column(std::uint32_t col) const {
        auto k = (static_cast<std::uint64_t>(col) * rho - 1) / columns;
        return static_cast<std::uint32_t>(k);
    }
};

// Algorithm: bucket each cell's share mass by its utility value, then prefix-sum.
std::vector<CdtArray> compute_cdt(const UtilityTable& ut, const PositionShares& shares,
                                  std::uint32_t rho);

// Immutable published model state; shed-side lookups read one snapshot.
struct ModelSnapshot {
    UtilityTable ut;
    PositionShares shares;
    std::vector<CdtArray> cdts;
    ColumnPartitions partitions;
    int unknown_type_utility = 0;

    // U(T, P) for a window of ws events. Scale-up positions average every cell
    // they map to; unseen types get the configured default.
    int utility(TypeId t, std::uint32_t pos, std::uint32_t ws) const;
    // Partition of the first column the position maps to.
    std::uint32_t partition_index(std::uint32_t pos, std::uint32_t ws) const;

    void export_csv(const std::string& path) const;
    static ModelSnapshot import_csv(const std::string& path);
};

// Trains the utility model from contributor statistics and window occupancy,
// builds tables, and publishes immutable snapshots. Training-side calls and
// shed-side lookups may overlap: snapshot() is wait-free.
class UtilityModel {
public:
    struct Params {
        std::uint32_t ref_size = 0;      // N; 0 = average seen training window size
        std::uint32_t bin_size = 1;      // bs
        int unknown_type_utility = 0;
        std::uint32_t retrain_interval = 0; // windows between republishes; 0 = off
        double retrain_decay = 0.0;         // count multiplier at each republish
    };

    UtilityModel(std::uint32_t type_count, Params params);

    // Statistics ingestion. Both buffer until the reference size is fixed by
    // the first build.
    void record_contribution(TypeId t, std::uint32_t pos, std::uint32_t ws);
    void observe_window(const Window& w);

    UtilityTable build_ut() const;       // NotReadyError without contributions
    PositionShares estimate_shares() const; // NotReadyError without a complete window

    // Fixes N (if auto), builds UT + shares + per-partition CDTs and publishes
    // them as one atomic snapshot.
    void publish(std::uint32_t rho);

    // Periodic retraining: call once per closed window after the first
    // publish; republishes (and decays counts) every retrain_interval windows.
    void on_window_closed();

    const ModelSnapshot* snapshot() const { return published_.load(std::memory_order_acquire); }

    std::uint32_t type_count() const { return type_count_; }
    std::uint32_t ref_size() const;      // fixed or projected average
    std::uint64_t contribution_count() const { return contribution_count_; }
    std::uint64_t window_count() const { return window_count_; }

    void import_snapshot(ModelSnapshot snap); // publishes a loaded snapshot

private:
    std::uint32_t type_count_;
    Params params_;

    bool built_ = false;              // N fixed, matrices live
    std::uint32_t fixed_ref_size_ = 0;
    std::uint32_t columns_ = 0;

    struct ContribRec { TypeId t; std::uint32_t pos; std::uint32_t ws; };
    std::vector<ContribRec> contrib_buffer_;
    std::vector<Window> window_buffer_;

    std::vector<double> contrib_counts_;   // M x columns
    std::vector<double> occupancy_;        // M x columns
    std::uint64_t contribution_count_ = 0;
    std::uint64_t window_count_ = 0;
    std::uint64_t total_window_events_ = 0;
    std::uint32_t windows_since_publish_ = 0;
    std::uint32_t published_rho_ = 1;

    std::atomic<const ModelSnapshot*> published_{nullptr};
    std::vector<std::unique_ptr<ModelSnapshot>> retired_; // keeps old snapshots alive

    void fix_reference(std::uint32_t n);

    struct Shape {
        std::uint32_t ref_size;
        std::uint32_t bin_size;
        std::uint32_t columns;
    };
    Shape shape_for(std::uint32_t n) const;
    static void add_contribution(std::vector<double>& m, const Shape& s, TypeId t,
                                 std::uint32_t pos, std::uint32_t ws);
    static void add_window(std::vector<double>& m, const Shape& s, std::uint32_t type_count,
                           const Window& w);
    std::vector<double> counts_for(std::uint32_t n) const;   // contribution matrix at size n
    std::vector<double> occupancy_for(std::uint32_t n) const;
};

} // namespace espice
