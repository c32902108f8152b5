#pragma once

// Incremental Kohonen self-organizing map on a square lattice.
//
// Training repeats three steps once per epoch: pick a random stimulus, find
// its best matching unit (BMU), pull every node toward the stimulus through a
// Gaussian neighbourhood kernel. The first `global_ordering_steps` epochs use
// a decaying learning rate and a shrinking neighbourhood; the remainder run at
// the fine-tuning constants.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "immunesom/error.hpp"
#include "immunesom/rng.hpp"

namespace immunesom {

struct SomParams {
    std::size_t grid_rows = 10;
    std::size_t grid_cols = 10;
    std::size_t epoch_limit = 100'000;
    double alpha_initial_global = 0.9;
    double alpha_fine = 0.02;
    std::size_t global_ordering_steps = 1'000;
    double neighborhood_initial = 5.0;
    double neighborhood_fine = 1.0;
    double anomaly_threshold = 65.0;
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (grid_rows == 0 || grid_cols == 0) {
            throw DomainError("SOM grid must have at least one row and column");
        }
        if (!(alpha_fine > 0.0 && alpha_fine < alpha_initial_global && alpha_initial_global <= 1.0)) {
            throw DomainError("SOM learning rates must satisfy 0 < alpha_fine < alpha_initial_global <= 1");
        }
        if (!(neighborhood_initial > 0.0 && neighborhood_fine > 0.0)) {
            throw DomainError("SOM neighbourhood sizes must be positive");
        }
    }

    /// Kohonen's rule of thumb: at least 500 epochs per map unit.
    std::optional<std::string> epoch_warning() const {
        const std::size_t minimum = 500 * grid_rows * grid_cols;
        if (epoch_limit < minimum) {
            return "epoch_limit " + std::to_string(epoch_limit) + " is below 500 x map units (" +
                   std::to_string(minimum) + ")";
        }
        return std::nullopt;
    }
};

struct GridLocation {
    std::size_t row = 0;
    std::size_t col = 0;

    friend bool operator==(const GridLocation&, const GridLocation&) = default;
};

class SomMap {
public:
    SomMap(std::size_t rows, std::size_t cols, std::size_t dim)
        : rows_(rows), cols_(cols), dim_(dim), weights_(rows * cols * dim, 0.0) {
        if (rows == 0 || cols == 0 || dim == 0) {
            throw DomainError("SOM map needs rows, cols and dim >= 1");
        }
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t node_count() const noexcept { return rows_ * cols_; }

    /// Row-major node index.
    std::size_t index(GridLocation r) const { return r.row * cols_ + r.col; }
    GridLocation location(std::size_t node) const { return {node / cols_, node % cols_}; }

    std::span<double> weights(std::size_t node) {
        return {weights_.data() + node * dim_, dim_};
    }
    std::span<const double> weights(std::size_t node) const {
        return {weights_.data() + node * dim_, dim_};
    }

    std::size_t epoch() const noexcept { return epoch_; }
    void set_epoch(std::size_t t) noexcept { epoch_ = t; }

    /// True once the map has been adapted at least once or was loaded from a
    /// trained map file.
    bool trained() const noexcept { return trained_; }
    void mark_trained() noexcept { trained_ = true; }

    friend bool operator==(const SomMap&, const SomMap&) = default;

private:
    std::size_t rows_;
    std::size_t cols_;
    std::size_t dim_;
    std::vector<double> weights_;
    std::size_t epoch_ = 0;
    bool trained_ = false;
};

/// Uniform random weights over the [0, 100] signal range.
inline SomMap init_map(const SomParams& params, std::size_t dim) {
    params.validate();
    if (dim == 0) {
        throw DomainError("SOM input dimension must be >= 1");
    }
    SomMap map(params.grid_rows, params.grid_cols, dim);
    Rng rng(params.rng_seed);
    for (std::size_t n = 0; n < map.node_count(); ++n) {
        for (double& w : map.weights(n)) {
            w = rng.uniform(0.0, 100.0);
        }
    }
    return map;
}

struct BestMatch {
    std::size_t node = 0;
    double distance = 0.0;

    friend bool operator==(const BestMatch&, const BestMatch&) = default;
};

/// Nearest node by Euclidean distance; ties go to the lowest row-major index.
/// Partial sums are abandoned once they reach the best squared distance.
inline BestMatch find_bmu(const SomMap& map, std::span<const double> x) {
    if (x.size() != map.dim()) {
        throw DomainError("input has dimension " + std::to_string(x.size()) + ", map expects " +
                          std::to_string(map.dim()));
    }
    std::size_t best = 0;
    double best_sq = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < map.node_count(); ++n) {
        const auto w = map.weights(n);
        double sq = 0.0;
        std::size_t k = 0;
        for (; k < x.size(); ++k) {
            const double d = x[k] - w[k];
            sq += d * d;
            if (sq >= best_sq) {
                break;
            }
        }
        if (k == x.size() && sq < best_sq) {
            best_sq = sq;
            best = n;
        }
    }
    return {best, std::sqrt(best_sq)};
}

/// Learning rate: linear decay from the initial value across the global
/// ordering phase, never below alpha_fine; alpha_fine afterwards.
inline double learning_rate(std::size_t t, const SomParams& p) {
    if (t >= p.global_ordering_steps) {
        return p.alpha_fine;
    }
    const double decayed = p.alpha_initial_global *
                           (1.0 - static_cast<double>(t) / static_cast<double>(p.global_ordering_steps));
    return std::max(decayed, p.alpha_fine);
}

/// Neighbourhood width: linear from neighborhood_initial to neighborhood_fine
/// across the global ordering phase, constant afterwards.
inline double neighborhood_width(std::size_t t, const SomParams& p) {
    if (t >= p.global_ordering_steps) {
        return p.neighborhood_fine;
    }
    const double frac = static_cast<double>(t) / static_cast<double>(p.global_ordering_steps);
    return p.neighborhood_initial + (p.neighborhood_fine - p.neighborhood_initial) * frac;
}

inline double grid_distance_sq(GridLocation a, GridLocation b) {
    const double dr = static_cast<double>(a.row) - static_cast<double>(b.row);
    const double dc = static_cast<double>(a.col) - static_cast<double>(b.col);
    return dr * dr + dc * dc;
}

/// Gaussian kernel h_ci(t) = alpha(t) * exp(-|r_c - r_i|^2 / (2 sigma(t)^2)).
inline double neighborhood_kernel(std::size_t t, GridLocation winner, GridLocation node,
                                  const SomParams& p) {
    const double sigma = neighborhood_width(t, p);
    return learning_rate(t, p) * std::exp(-grid_distance_sq(winner, node) / (2.0 * sigma * sigma));
}

/// w <- w + h (x - w)
inline void pull_toward(std::span<double> w, std::span<const double> x, double h) {
    for (std::size_t k = 0; k < w.size(); ++k) {
        w[k] += h * (x[k] - w[k]);
    }
}

/// One adaptation step at the map's current epoch, then advances the epoch.
inline void adapt(SomMap& map, std::span<const double> x, std::size_t winner, const SomParams& p) {
    if (x.size() != map.dim()) {
        throw DomainError("adapt: dimension mismatch");
    }
    if (winner >= map.node_count()) {
        throw DomainError("adapt: winner index out of range");
    }
    const GridLocation rc = map.location(winner);
    const std::size_t t = map.epoch();
    for (std::size_t n = 0; n < map.node_count(); ++n) {
        pull_toward(map.weights(n), x, neighborhood_kernel(t, rc, map.location(n), p));
    }
    map.set_epoch(t + 1);
    map.mark_trained();
}

template <typename Vec>
std::span<const double> as_span(const Vec& v) {
    return std::span<const double>(v.data(), v.size());
}

/// Runs epoch_limit epochs of (random stimulus, BMU, adapt). The stimulus
/// stream is seeded from rng_seed, offset from the initialisation stream.
template <typename Vec>
void train(SomMap& map, std::span<const Vec> data, const SomParams& p) {
    p.validate();
    if (data.empty()) {
        throw DomainError("SOM training set is empty");
    }
    Rng rng(p.rng_seed ^ 0x9E3779B97F4A7C15ULL);
    for (std::size_t e = 0; e < p.epoch_limit; ++e) {
        const auto& x = data[rng.below(data.size())];
        const auto bmu = find_bmu(map, as_span(x));
        adapt(map, as_span(x), bmu.node, p);
    }
}

/// Mean BMU distance over `data`.
template <typename Vec>
double quantization_error(const SomMap& map, std::span<const Vec> data) {
    if (data.empty()) {
        throw DomainError("quantization error of an empty data set");
    }
    double sum = 0.0;
    for (const auto& x : data) {
        sum += find_bmu(map, as_span(x)).distance;
    }
    return sum / static_cast<double>(data.size());
}

/// 1 when the BMU distance strictly exceeds `threshold`.
inline int classify_frame(const SomMap& map, std::span<const double> x, double threshold) {
    return find_bmu(map, x).distance > threshold ? 1 : 0;
}

/// Mean Euclidean distance from each node to its 4-connected lattice neighbours.
inline std::vector<double> u_matrix(const SomMap& map) {
    std::vector<double> u(map.node_count(), 0.0);
    auto dist = [&map](std::size_t a, std::size_t b) {
        const auto wa = map.weights(a);
        const auto wb = map.weights(b);
        double sq = 0.0;
        for (std::size_t k = 0; k < wa.size(); ++k) {
            sq += (wa[k] - wb[k]) * (wa[k] - wb[k]);
        }
        return std::sqrt(sq);
    };
    for (std::size_t n = 0; n < map.node_count(); ++n) {
        const auto [r, c] = map.location(n);
        double sum = 0.0;
        int count = 0;
        if (r > 0) { sum += dist(n, map.index({r - 1, c})); ++count; }
        if (r + 1 < map.rows()) { sum += dist(n, map.index({r + 1, c})); ++count; }
        if (c > 0) { sum += dist(n, map.index({r, c - 1})); ++count; }
        if (c + 1 < map.cols()) { sum += dist(n, map.index({r, c + 1})); ++count; }
        u[n] = count > 0 ? sum / count : 0.0;
    }
    return u;
}

} // namespace immunesom
