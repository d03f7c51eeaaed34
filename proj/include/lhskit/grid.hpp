#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "lhskit/chart.hpp"
#include "lhskit/errors.hpp"
#include "lhskit/rng.hpp"

namespace lhskit {

// Verification grid: a full lattice plus seeded random extras that catch sign
// violations hiding between lattice points.
struct GridSpec {
    std::vector<int> samples;     // per coordinate; a single entry broadcasts
    int random_extra = 0;
    std::uint64_t seed = 0;

    int samples_for(int coord, int dim) const {
        if (samples.empty()) throw Error("grid: no sample counts");
        int n = samples.size() == 1 ? samples[0]
                                    : samples.at(static_cast<std::size_t>(coord));
        if (static_cast<int>(samples.size()) != 1 &&
            static_cast<int>(samples.size()) != dim)
            throw Error("grid: sample count list does not match chart dimension");
        if (n < 2) throw Error("grid: need at least 2 samples per coordinate");
        return n;
    }

    static GridSpec uniform(int n, int random_extra = 0, std::uint64_t seed = 0) {
        return GridSpec{{n}, random_extra, seed};
    }
};

// Lattice + random points over a chart. When fiber_log_index >= 0, that
// coordinate is sampled log-uniformly over [lo, lo*scale) -- the fundamental
// interval of a deck map -- so the deck action becomes a grid translation.
inline std::vector<Point> make_grid(const Chart& chart, const GridSpec& spec,
                                    int fiber_log_index = -1, double fiber_scale = 1.0) {
    int dim = chart.dim();
    std::vector<std::vector<double>> axes(static_cast<std::size_t>(dim));
    for (int c = 0; c < dim; ++c) {
        int n = spec.samples_for(c, dim);
        auto& axis = axes[static_cast<std::size_t>(c)];
        axis.reserve(static_cast<std::size_t>(n));
        if (chart.periodic(c)) {
            for (int j = 0; j < n; ++j) axis.push_back(static_cast<double>(j) / n);
        } else if (c == fiber_log_index) {
            double lo = chart.bounds(c)[0];
            double nu = std::log(fiber_scale);
            for (int j = 0; j < n; ++j) axis.push_back(lo * std::exp(nu * j / n));
        } else {
            double lo = chart.bounds(c)[0], hi = chart.bounds(c)[1];
            for (int j = 0; j < n; ++j)
                axis.push_back(lo + (hi - lo) * j / (n - 1));
        }
    }
    std::size_t total = 1;
    for (const auto& a : axes) total *= a.size();
    std::vector<Point> pts;
    pts.reserve(total + static_cast<std::size_t>(spec.random_extra));
    Point cur(static_cast<std::size_t>(dim));
    for (std::size_t flat = 0; flat < total; ++flat) {
        std::size_t rem = flat;
        for (int c = dim - 1; c >= 0; --c) {
            const auto& a = axes[static_cast<std::size_t>(c)];
            cur[static_cast<std::size_t>(c)] = a[rem % a.size()];
            rem /= a.size();
        }
        pts.push_back(cur);
    }
    SplitMix64 rng(spec.seed);
    for (int r = 0; r < spec.random_extra; ++r) {
        Point p(static_cast<std::size_t>(dim));
        for (int c = 0; c < dim; ++c) {
            if (chart.periodic(c)) {
                p[static_cast<std::size_t>(c)] = rng.next_double();
            } else if (c == fiber_log_index) {
                double lo = chart.bounds(c)[0];
                p[static_cast<std::size_t>(c)] =
                    lo * std::exp(std::log(fiber_scale) * rng.next_double());
            } else {
                p[static_cast<std::size_t>(c)] =
                    rng.next_in(chart.bounds(c)[0], chart.bounds(c)[1]);
            }
        }
        pts.push_back(std::move(p));
    }
    return pts;
}

}  // namespace lhskit
