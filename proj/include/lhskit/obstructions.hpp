#pragma once

#include <string>
#include <vector>

#include "lhskit/errors.hpp"

namespace lhskit {

// Closed-surface admissibility for Lagrangian embeddings in the trivial
// bi-filling domains: only tori survive among orientable surfaces, the Klein
// bottle is excluded outright, odd Euler characteristic is excluded by
// parity, and the optional mod-4 rule further filters connected sums of an
// even number of projective planes.

struct SurfaceDescriptor {
    bool orientable = true;
    int genus_or_crosscaps = 0;  // genus when orientable, crosscap count otherwise
};

struct AdmissibilityVerdict {
    bool admissible = false;
    bool candidate = false;  // admissible non-orientable case: allowed, not realized
    int euler_characteristic = 0;
    std::vector<std::string> reasons;  // subset of {chi_nonzero, chi_odd, klein_bottle, mod4_filter}
};

inline AdmissibilityVerdict admissible_surface(const SurfaceDescriptor& d,
                                               bool apply_mod4_filter) {
    if (d.genus_or_crosscaps < 0)
        throw Error("surface descriptor needs a non-negative genus/crosscap count");
    if (!d.orientable && d.genus_or_crosscaps < 1)
        throw Error("non-orientable surfaces need at least one crosscap");

    AdmissibilityVerdict v;
    if (d.orientable) {
        v.euler_characteristic = 2 - 2 * d.genus_or_crosscaps;
        if (v.euler_characteristic != 0) v.reasons.push_back("chi_nonzero");
        v.admissible = v.reasons.empty();
        return v;
    }
    int m = d.genus_or_crosscaps;
    v.euler_characteristic = 2 - m;
    if (m % 2 == 1) v.reasons.push_back("chi_odd");
    if (m == 2) v.reasons.push_back("klein_bottle");
    if (m % 2 == 0 && m >= 4 && apply_mod4_filter) {
        int chi_mod4 = ((v.euler_characteristic % 4) + 4) % 4;
        if (chi_mod4 != 0) v.reasons.push_back("mod4_filter");
    }
    v.admissible = v.reasons.empty();
    v.candidate = v.admissible;  // non-torus verdicts stay candidates
    return v;
}

}  // namespace lhskit
