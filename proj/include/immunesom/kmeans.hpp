#pragma once

// Lloyd's k-means in Euclidean space; the signals-only baseline.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <span>
#include <vector>

#include "immunesom/error.hpp"
#include "immunesom/rng.hpp"

namespace immunesom {

struct KMeansResult {
    std::vector<std::size_t> assignment;
    std::vector<std::vector<double>> centroids;
    std::vector<double> fractions;  // share of points per cluster
    std::size_t iterations = 0;
    bool converged = false;
};

namespace detail {

template <typename Vec>
double squared_distance(const Vec& x, const std::vector<double>& c) {
    double sq = 0.0;
    for (std::size_t k = 0; k < c.size(); ++k) {
        const double d = static_cast<double>(x[k]) - c[k];
        sq += d * d;
    }
    return sq;
}

} // namespace detail

/// Seeds with k distinct points chosen at random, then alternates
/// assignment and centroid update until assignments stop changing or
/// `max_iterations` passes. An emptied cluster takes the point farthest from
/// its own centroid.
template <typename Vec>
KMeansResult kmeans(std::span<const Vec> data, std::size_t k, std::uint64_t seed,
                    std::size_t max_iterations = 300) {
    if (k == 0) {
        throw DomainError("k-means needs k >= 1");
    }
    if (data.empty()) {
        throw DomainError("k-means on an empty data set");
    }
    const std::size_t n = data.size();
    const std::size_t dim = data[0].size();
    auto point = [&](std::size_t i) { return std::vector<double>(data[i].begin(), data[i].end()); };

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    shuffle(order.begin(), order.end(), rng);

    KMeansResult res;
    std::set<std::vector<double>> chosen;
    for (std::size_t idx : order) {
        auto p = point(idx);
        if (chosen.insert(p).second) {
            res.centroids.push_back(std::move(p));
            if (res.centroids.size() == k) {
                break;
            }
        }
    }
    if (res.centroids.size() < k) {
        throw DomainError("k-means: k exceeds the number of distinct points");
    }

    res.assignment.assign(n, std::numeric_limits<std::size_t>::max());
    std::vector<std::size_t> sizes(k);
    for (res.iterations = 0; res.iterations < max_iterations; ++res.iterations) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t best = 0;
            double best_sq = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                const double sq = detail::squared_distance(data[i], res.centroids[c]);
                if (sq < best_sq) {
                    best_sq = sq;
                    best = c;
                }
            }
            if (res.assignment[i] != best) {
                res.assignment[i] = best;
                changed = true;
            }
        }

        std::fill(sizes.begin(), sizes.end(), 0);
        for (std::size_t a : res.assignment) {
            ++sizes[a];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (sizes[c] != 0) {
                continue;
            }
            std::size_t far = 0;
            double far_sq = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (sizes[res.assignment[i]] < 2) {
                    continue;
                }
                const double sq = detail::squared_distance(data[i], res.centroids[res.assignment[i]]);
                if (sq > far_sq) {
                    far_sq = sq;
                    far = i;
                }
            }
            --sizes[res.assignment[far]];
            res.assignment[far] = c;
            ++sizes[c];
            changed = true;
        }

        for (auto& c : res.centroids) {
            std::fill(c.begin(), c.end(), 0.0);
        }
        for (std::size_t i = 0; i < n; ++i) {
            auto& c = res.centroids[res.assignment[i]];
            for (std::size_t d = 0; d < dim; ++d) {
                c[d] += static_cast<double>(data[i][d]);
            }
        }
        for (std::size_t c = 0; c < k; ++c) {
            for (double& v : res.centroids[c]) {
                v /= static_cast<double>(sizes[c]);
            }
        }

        if (!changed) {
            res.converged = true;
            break;
        }
    }

    res.fractions.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        res.fractions[c] = static_cast<double>(sizes[c]) / static_cast<double>(n);
    }
    return res;
}

} // namespace immunesom
