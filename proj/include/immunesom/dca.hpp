#pragma once

// Dendritic Cell Algorithm.
//
// A population of cells samples antigen (process IDs) from a shared tissue
// while fusing the tissue's current signal matrix into three cumulative
// outputs: costimulation (csm), semi-mature and mature. A cell migrates once
// its csm output exceeds its private migration threshold, presenting every
// antigen it carries in mature context iff its mature output exceeds its
// semi-mature output. The cell is then reset and rejoins the population.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "immunesom/error.hpp"
#include "immunesom/rng.hpp"
#include "immunesom/signal_pipeline.hpp"

namespace immunesom {

/// Antigen type: the PID of the process that issued a system call. A label
/// only; no structure is inferred from its value.
enum class Pid : std::int32_t {};

constexpr std::int32_t to_int(Pid p) noexcept { return static_cast<std::int32_t>(p); }

struct AntigenEvent {
    Timestamp timestamp = 0;
    Pid pid{};

    friend bool operator==(const AntigenEvent&, const AntigenEvent&) = default;
};

enum class Context : std::uint8_t { semi_mature = 0, mature = 1 };

enum class SignalCategory : std::size_t { pamp = 0, danger = 1, safe = 2 };
enum class OutputSignal : std::size_t { csm = 0, semi = 1, mature = 2 };

inline constexpr std::size_t kFusedCategories = 3;
inline constexpr std::size_t kOutputs = 3;

/// Counts below are capacities, i.e. the zero-indexed table value plus one.
struct DcaParams {
    std::size_t signals_per_category = 1;  // I+1
    std::size_t categories = 4;            // J+1, fixed: pamp, danger, safe, inflammation
    std::size_t tissue_antigen_capacity = 500;  // K+1
    std::size_t max_cycles = std::numeric_limits<std::size_t>::max();  // L+1
    std::size_t population_size = 100;          // M+1
    std::size_t dc_antigen_capacity = 50;       // N+1
    std::size_t outputs_per_dc = 3;             // P
    std::size_t antigens_sampled_per_cycle = 10;  // Q+1
    double migration_threshold_center = 60.0;
    double migration_threshold_halfwidth = 30.0;
    std::uint64_t rng_seed = 0;

    /// Configuration used with the seven-signal SYN-scan input: two signals
    /// per category, everything else at its default.
    static DcaParams seven_signal() {
        DcaParams p;
        p.signals_per_category = 2;
        return p;
    }

    void validate() const {
        auto positive = [](std::size_t v, const char* name) {
            if (v < 1) {
                throw DomainError(std::string("DcaParams.") + name + " must be >= 1");
            }
        };
        positive(signals_per_category, "signals_per_category");
        positive(tissue_antigen_capacity, "tissue_antigen_capacity");
        positive(max_cycles, "max_cycles");
        positive(population_size, "population_size");
        positive(dc_antigen_capacity, "dc_antigen_capacity");
        positive(antigens_sampled_per_cycle, "antigens_sampled_per_cycle");
        if (categories != 4) {
            throw DomainError("DcaParams.categories is fixed at 4");
        }
        if (outputs_per_dc != kOutputs) {
            throw DomainError("DcaParams.outputs_per_dc is fixed at 3");
        }
        if (!(migration_threshold_halfwidth >= 0.0) ||
            !(migration_threshold_center - migration_threshold_halfwidth > 0.0)) {
            throw DomainError("migration threshold range must lie above zero");
        }
    }
};

/// Signal-to-output weights, shared across signals of one category.
class WeightMatrix {
public:
    using Table = std::array<std::array<double, kOutputs>, kFusedCategories>;

    WeightMatrix() : WeightMatrix(from_pamp_weights(4.0, 8.0)) {}
    explicit WeightMatrix(const Table& w) : w_(w) {}

    /// Derives all nine weights from the PAMP->csm weight `w1` and the
    /// PAMP->mature weight `w2`.
    static WeightMatrix from_pamp_weights(double w1, double w2) {
        Table w{};
        auto set = [&w](SignalCategory j, OutputSignal p, double v) {
            w[static_cast<std::size_t>(j)][static_cast<std::size_t>(p)] = v;
        };
        set(SignalCategory::pamp, OutputSignal::csm, w1);
        set(SignalCategory::danger, OutputSignal::csm, w1 / 2.0);
        set(SignalCategory::safe, OutputSignal::csm, w1 * 1.5);
        set(SignalCategory::pamp, OutputSignal::semi, 0.0);
        set(SignalCategory::danger, OutputSignal::semi, 0.0);
        set(SignalCategory::safe, OutputSignal::semi, 1.0);
        set(SignalCategory::pamp, OutputSignal::mature, w2);
        set(SignalCategory::danger, OutputSignal::mature, w2 / 2.0);
        set(SignalCategory::safe, OutputSignal::mature, -w2 * 1.5);
        return WeightMatrix(w);
    }

    double at(SignalCategory j, OutputSignal p) const {
        return w_[static_cast<std::size_t>(j)][static_cast<std::size_t>(p)];
    }

    const Table& table() const noexcept { return w_; }

    friend bool operator==(const WeightMatrix&, const WeightMatrix&) = default;

private:
    Table w_;
};

/// Tissue signal matrix: up to kMaxPerCategory signals in each fused
/// category plus the binary inflammation signal.
class SignalMatrix {
public:
    static constexpr std::size_t kMaxPerCategory = 8;

    SignalMatrix() = default;
    explicit SignalMatrix(std::size_t per_category) : per_category_(per_category) {
        if (per_category == 0 || per_category > kMaxPerCategory) {
            throw DomainError("signals per category must be in [1, 8]");
        }
    }

    static SignalMatrix from_frame(const NormalizedSignalFrame& f) {
        SignalMatrix m(2);
        m.set(SignalCategory::pamp, 0, f.pamp1);
        m.set(SignalCategory::pamp, 1, f.pamp2);
        m.set(SignalCategory::danger, 0, f.ds1);
        m.set(SignalCategory::danger, 1, f.ds2);
        m.set(SignalCategory::safe, 0, f.ss1);
        m.set(SignalCategory::safe, 1, f.ss2);
        m.inflammation = f.inflammation;
        return m;
    }

    std::size_t per_category() const noexcept { return per_category_; }

    double get(SignalCategory j, std::size_t i) const { return s_[static_cast<std::size_t>(j)][i]; }
    void set(SignalCategory j, std::size_t i, double v) { s_[static_cast<std::size_t>(j)][i] = v; }

    bool inflammation = false;

    friend bool operator==(const SignalMatrix&, const SignalMatrix&) = default;

private:
    std::size_t per_category_ = 0;
    std::array<std::array<double, kMaxPerCategory>, kFusedCategories> s_{};
};

struct OutputSignals {
    double csm = 0.0;
    double semi = 0.0;
    double mature = 0.0;

    OutputSignals& operator+=(const OutputSignals& o) {
        csm += o.csm;
        semi += o.semi;
        mature += o.mature;
        return *this;
    }

    friend bool operator==(const OutputSignals&, const OutputSignals&) = default;
};

/// Mature iff the mature output strictly exceeds the semi-mature one.
inline Context context_of(const OutputSignals& o) {
    return o.mature > o.semi ? Context::mature : Context::semi_mature;
}

/// Weighted sum over every fused signal, doubled under inflammation.
inline OutputSignals compute_interim_outputs(const SignalMatrix& s, const WeightMatrix& w) {
    OutputSignals out;
    for (std::size_t j = 0; j < kFusedCategories; ++j) {
        const auto cat = static_cast<SignalCategory>(j);
        for (std::size_t i = 0; i < s.per_category(); ++i) {
            const double v = s.get(cat, i);
            out.csm += w.at(cat, OutputSignal::csm) * v;
            out.semi += w.at(cat, OutputSignal::semi) * v;
            out.mature += w.at(cat, OutputSignal::mature) * v;
        }
    }
    if (s.inflammation) {
        out.csm *= 2.0;
        out.semi *= 2.0;
        out.mature *= 2.0;
    }
    return out;
}

inline OutputSignals compute_interim_outputs(const NormalizedSignalFrame& f, const WeightMatrix& w) {
    return compute_interim_outputs(SignalMatrix::from_frame(f), w);
}

struct DendriticCell {
    SignalMatrix signal_snapshot;
    std::vector<Pid> antigen;
    OutputSignals cumulative;
    double migration_threshold = 0.0;
    std::size_t lifetime_cycles = 0;

    void reset() {
        signal_snapshot = SignalMatrix{};
        antigen.clear();
        cumulative = OutputSignals{};
        lifetime_cycles = 0;
    }
};

struct PresentedAntigenRecord {
    std::size_t cycle = 0;
    Pid antigen_type{};
    Context context = Context::semi_mature;
    double o_semi = 0.0;
    double o_mature = 0.0;
    bool forced = false;

    friend bool operator==(const PresentedAntigenRecord&, const PresentedAntigenRecord&) = default;
};

/// Shared signal matrix plus a bounded FIFO antigen store. Overflow evicts the
/// oldest stored antigen. Keeps per-type ingest/evict tallies so antigen
/// conservation can be audited.
class Tissue {
public:
    explicit Tissue(std::size_t antigen_capacity) : capacity_(antigen_capacity) {
        if (capacity_ == 0) {
            throw DomainError("tissue antigen capacity must be >= 1");
        }
    }

    void ingest(const AntigenEvent& e) {
        if (store_.size() == capacity_) {
            ++evicted_[store_.front()];
            store_.pop_front();
        }
        store_.push_back(e.pid);
        ++ingested_[e.pid];
    }

    /// Overwrites the signal matrix; the previous one is not retained.
    void update_signals(const SignalMatrix& s, Timestamp t) {
        if (has_signals_ && t < signal_time_) {
            throw SequencingError("signal update at t=" + std::to_string(t) +
                                  " precedes current t=" + std::to_string(signal_time_));
        }
        signals_ = s;
        signal_time_ = t;
        has_signals_ = true;
    }

    /// Removes up to `n` antigen from the head of the store.
    std::size_t take(std::size_t n, std::vector<Pid>& into) {
        std::size_t taken = 0;
        while (taken < n && !store_.empty()) {
            into.push_back(store_.front());
            store_.pop_front();
            ++taken;
        }
        return taken;
    }

    /// Discards whatever is still stored, counting it as evicted.
    void flush() {
        for (Pid p : store_) {
            ++evicted_[p];
        }
        store_.clear();
    }

    const SignalMatrix& signals() const noexcept { return signals_; }
    bool has_signals() const noexcept { return has_signals_; }
    Timestamp signal_time() const noexcept { return signal_time_; }
    std::size_t stored() const noexcept { return store_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    const std::deque<Pid>& store() const noexcept { return store_; }
    const std::map<Pid, std::uint64_t>& ingested() const noexcept { return ingested_; }
    const std::map<Pid, std::uint64_t>& evicted() const noexcept { return evicted_; }

private:
    std::size_t capacity_;
    std::deque<Pid> store_;
    SignalMatrix signals_;
    Timestamp signal_time_ = 0;
    bool has_signals_ = false;
    std::map<Pid, std::uint64_t> ingested_;
    std::map<Pid, std::uint64_t> evicted_;
};

/// Ingests new antigen then overwrites the signal matrix.
inline void tissue_update(Tissue& tissue, const NormalizedSignalFrame& frame,
                          std::span<const AntigenEvent> new_antigen) {
    for (const auto& e : new_antigen) {
        tissue.ingest(e);
    }
    tissue.update_signals(SignalMatrix::from_frame(frame), frame.timestamp);
}

/// Thresholds are drawn uniformly from center +/- halfwidth in cell order.
inline std::vector<DendriticCell> init_population(const DcaParams& params) {
    params.validate();
    Rng rng(params.rng_seed);
    std::vector<DendriticCell> cells(params.population_size);
    const double lo = params.migration_threshold_center - params.migration_threshold_halfwidth;
    const double hi = params.migration_threshold_center + params.migration_threshold_halfwidth;
    for (auto& c : cells) {
        c.antigen.reserve(params.dc_antigen_capacity);
        c.migration_threshold = lo == hi ? lo : rng.uniform(lo, hi);
    }
    return cells;
}

namespace detail {

inline void present(DendriticCell& cell, std::size_t cycle, bool forced,
                    std::vector<PresentedAntigenRecord>& out) {
    const Context ctx = context_of(cell.cumulative);
    for (Pid p : cell.antigen) {
        out.push_back({cycle, p, ctx, cell.cumulative.semi, cell.cumulative.mature, forced});
    }
    cell.reset();
}

} // namespace detail

/// One pass over the population in index order: sample antigen, copy the
/// signal matrix, accumulate outputs, migrate if csm exceeds the threshold.
/// Appends the presented antigen of every migrating cell to `out`.
inline void cell_cycle(Tissue& tissue, std::vector<DendriticCell>& population,
                       const WeightMatrix& weights, const DcaParams& params, std::size_t cycle,
                       std::vector<PresentedAntigenRecord>& out) {
    if (!tissue.has_signals()) {
        throw SequencingError("cell cycle before any signal update");
    }
    if (tissue.signals().per_category() != params.signals_per_category) {
        throw DomainError("tissue carries " + std::to_string(tissue.signals().per_category()) +
                          " signals per category, params expect " +
                          std::to_string(params.signals_per_category));
    }
    for (auto& cell : population) {
        const std::size_t room = params.dc_antigen_capacity - cell.antigen.size();
        tissue.take(std::min(room, params.antigens_sampled_per_cycle), cell.antigen);
        cell.signal_snapshot = tissue.signals();
        cell.cumulative += compute_interim_outputs(cell.signal_snapshot, weights);
        ++cell.lifetime_cycles;
        if (cell.cumulative.csm > cell.migration_threshold) {
            detail::present(cell, cycle, false, out);
        }
    }
}

inline std::vector<PresentedAntigenRecord> cell_cycle(Tissue& tissue,
                                                      std::vector<DendriticCell>& population,
                                                      const WeightMatrix& weights,
                                                      const DcaParams& params, std::size_t cycle) {
    std::vector<PresentedAntigenRecord> out;
    cell_cycle(tissue, population, weights, params, cycle, out);
    return out;
}

/// End of input: every cell still holding antigen presents it, flagged forced.
inline void force_migrate(std::vector<DendriticCell>& population, std::size_t cycle,
                          std::vector<PresentedAntigenRecord>& out) {
    for (auto& cell : population) {
        if (!cell.antigen.empty()) {
            detail::present(cell, cycle, true, out);
        }
    }
}

struct DcaSessionResult {
    std::vector<PresentedAntigenRecord> records;
    std::map<Pid, std::uint64_t> ingested;
    /// Overflow evictions plus antigen still in the store when input ended.
    std::map<Pid, std::uint64_t> evicted;
    std::size_t cycles = 0;
};

/// Deterministic replay. For every frame, in order: ingest the antigen
/// stamped with the frame's second, overwrite the signal matrix, run one cell
/// cycle. Cells still holding antigen afterwards are force-migrated with
/// cycle index == number of cycles run. Antigen must be sorted by timestamp
/// and every antigen second must have a frame.
inline DcaSessionResult run_session(std::span<const NormalizedSignalFrame> frames,
                                    std::span<const AntigenEvent> antigen,
                                    const DcaParams& params, const WeightMatrix& weights) {
    params.validate();
    DcaSessionResult result;
    Tissue tissue(params.tissue_antigen_capacity);
    auto population = init_population(params);

    std::size_t next = 0;
    std::size_t cycle = 0;
    std::optional<Timestamp> prev_frame;
    for (const auto& frame : frames) {
        if (cycle >= params.max_cycles) {
            break;
        }
        if (prev_frame && frame.timestamp <= *prev_frame) {
            throw SequencingError("frame timestamps must strictly increase (t=" +
                                  std::to_string(frame.timestamp) + ")");
        }
        prev_frame = frame.timestamp;
        const std::size_t begin = next;
        while (next < antigen.size() && antigen[next].timestamp <= frame.timestamp) {
            if (antigen[next].timestamp < frame.timestamp) {
                throw SequencingError("antigen at t=" + std::to_string(antigen[next].timestamp) +
                                      " has no matching signal frame");
            }
            ++next;
        }
        tissue_update(tissue, frame, antigen.subspan(begin, next - begin));
        cell_cycle(tissue, population, weights, params, cycle, result.records);
        ++cycle;
    }
    if (cycle < params.max_cycles && next < antigen.size()) {
        throw SequencingError("antigen at t=" + std::to_string(antigen[next].timestamp) +
                              " lies beyond the last signal frame");
    }
    force_migrate(population, cycle, result.records);
    tissue.flush();
    result.ingested = tissue.ingested();
    result.evicted = tissue.evicted();
    result.cycles = cycle;
    return result;
}

/// Live mode: signal updates, antigen ingest and cell cycles may be driven
/// from three independent threads. Each update holds the tissue exclusively;
/// record order is only guaranteed per cell.
class LiveDca {
public:
    LiveDca(DcaParams params, WeightMatrix weights)
        : params_(params), weights_(weights), tissue_(params.tissue_antigen_capacity),
          population_(init_population(params_)) {}

    void post_signals(const NormalizedSignalFrame& frame) {
        std::lock_guard lock(mu_);
        tissue_.update_signals(SignalMatrix::from_frame(frame), frame.timestamp);
    }

    void post_antigen(const AntigenEvent& e) {
        std::lock_guard lock(mu_);
        tissue_.ingest(e);
    }

    /// Runs one cycle if signals have arrived; returns false otherwise.
    bool run_cycle() {
        std::lock_guard lock(mu_);
        if (!tissue_.has_signals()) {
            return false;
        }
        cell_cycle(tissue_, population_, weights_, params_, cycles_, records_);
        ++cycles_;
        return true;
    }

    /// Stops sampling: forces out held antigen and flushes the store.
    DcaSessionResult finish() {
        std::lock_guard lock(mu_);
        force_migrate(population_, cycles_, records_);
        tissue_.flush();
        DcaSessionResult r;
        r.records = std::move(records_);
        r.ingested = tissue_.ingested();
        r.evicted = tissue_.evicted();
        r.cycles = cycles_;
        records_.clear();
        return r;
    }

private:
    DcaParams params_;
    WeightMatrix weights_;
    std::mutex mu_;
    Tissue tissue_;
    std::vector<DendriticCell> population_;
    std::vector<PresentedAntigenRecord> records_;
    std::size_t cycles_ = 0;
};

} // namespace immunesom
