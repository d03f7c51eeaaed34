#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "lhskit/errors.hpp"

namespace lhskit {

using Point = std::vector<double>;

// A single coordinate chart. Periodic coordinates have period 1; bounds are
// the closed interval a grid scan samples for the non-periodic ones (they do
// not restrict evaluation, which is total wherever the expressions are
// defined).
class Chart {
public:
    Chart() = default;
    Chart(std::vector<std::string> names, std::vector<bool> periodic,
          std::vector<std::array<double, 2>> bounds)
        : names_(std::move(names)), periodic_(std::move(periodic)), bounds_(std::move(bounds)) {
        if (names_.size() != periodic_.size() || names_.size() != bounds_.size())
            throw Error("chart: coordinate name/periodic/bounds counts differ");
        if (names_.empty()) throw Error("chart: no coordinates");
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (names_[i] == "pi")
                throw Error("chart: 'pi' is a reserved constant, not a coordinate name");
            if (!periodic_[i] && !(bounds_[i][0] < bounds_[i][1]))
                throw Error("chart: empty bound interval for coordinate " + names_[i]);
        }
    }

    int dim() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& coord_names() const { return names_; }
    bool periodic(int i) const { return periodic_[static_cast<std::size_t>(i)]; }
    const std::array<double, 2>& bounds(int i) const { return bounds_[static_cast<std::size_t>(i)]; }

    // -1 when the name is not declared
    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return static_cast<int>(i);
        return -1;
    }

    // Reduce periodic coordinates mod 1 so deck-map and return-map logic is total.
    Point reduce(Point p) const {
        for (int i = 0; i < dim(); ++i)
            if (periodic_[static_cast<std::size_t>(i)]) {
                double& x = p[static_cast<std::size_t>(i)];
                x -= std::floor(x);
                if (x >= 1.0) x = 0.0;  // guard against floor rounding at the seam
            }
        return p;
    }

    // Signed difference b - a with periodic components wrapped to [-1/2, 1/2).
    Point wrapped_difference(const Point& a, const Point& b) const {
        Point d(static_cast<std::size_t>(dim()));
        for (int i = 0; i < dim(); ++i) {
            double v = b[static_cast<std::size_t>(i)] - a[static_cast<std::size_t>(i)];
            if (periodic_[static_cast<std::size_t>(i)]) {
                v -= std::floor(v + 0.5);
            }
            d[static_cast<std::size_t>(i)] = v;
        }
        return d;
    }

    // Product chart with one extra non-periodic coordinate appended.
    Chart extended(const std::string& name, double lo, double hi) const {
        auto names = names_;
        auto per = periodic_;
        auto bnd = bounds_;
        names.push_back(name);
        per.push_back(false);
        bnd.push_back({lo, hi});
        return Chart(std::move(names), std::move(per), std::move(bnd));
    }

private:
    std::vector<std::string> names_;
    std::vector<bool> periodic_;
    std::vector<std::array<double, 2>> bounds_;
};

}  // namespace lhskit
