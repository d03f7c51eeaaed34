#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "lhskit/lhs.hpp"

namespace lhskit {

// ---------------------------------------------------------------------------
// The suspension Liouville domain (M x [-eps, eps]_s, lambda = eta + s beta).
// ---------------------------------------------------------------------------

struct SuspensionDomain {
    LHStructure base;
    double epsilon = 0.0;
    Chart chart4;                 // base coordinates plus s
    int s_index = 0;
    DifferentialForm lambda;      // on chart4
    DifferentialForm dlambda;

    VectorXd lambda_at(const Point& p4) const {
        return covector(eval_form(lambda, chart4, p4));
    }
    MatrixXd dlambda_at(const Point& p4) const {
        return form_matrix(eval_form(dlambda, chart4, p4));
    }
};

namespace detail {

inline std::vector<Point> suspension_grid(const SuspensionDomain& D, const GridSpec& spec) {
    if (D.base.quotient)
        return make_grid(D.chart4, spec, D.base.quotient->fiber_index,
                         D.base.quotient->scale);
    return make_grid(D.chart4, spec);
}

}  // namespace detail

// Assemble lambda = eta + s beta on the product chart and verify d(lambda) is
// nondegenerate over the grid. Degeneracy is detected both by a relative
// singular-value floor and by a sign change of the Pfaffian between samples
// (the determinant passes through zero inside the domain in that case).
inline SuspensionDomain build_suspension(const LHStructure& S, double epsilon,
                                         const GridSpec& grid,
                                         double nondeg_rel = 1e-8) {
    if (!(epsilon > 0.0)) throw Error("suspension needs epsilon > 0");
    SuspensionDomain D;
    D.base = S;
    D.epsilon = epsilon;
    D.chart4 = S.chart.extended("s", -epsilon, epsilon);
    D.s_index = S.chart.dim();
    const int d4 = D.chart4.dim();

    ExpressionTree s_var = ExpressionTree::variable(D.s_index, d4);
    std::vector<ExpressionTree> lam(static_cast<std::size_t>(d4),
                                    ExpressionTree::constant(0.0, d4));
    for (int i = 0; i < S.chart.dim(); ++i)
        lam[static_cast<std::size_t>(i)] =
            S.eta.coeffs[static_cast<std::size_t>(i)].lifted(d4) +
            s_var * S.beta.coeffs[static_cast<std::size_t>(i)].lifted(d4);
    D.lambda = DifferentialForm(d4, 1, std::move(lam));
    D.dlambda = exterior_derivative(D.lambda);

    auto pts = detail::suspension_grid(D, grid);
    std::vector<double> pf(pts.size()), gap(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) {
        MatrixXd M = D.dlambda_at(pts[i]);
        pf[i] = pfaffian4(M);
        auto sv = singular_values(M);
        gap[i] = sv(sv.size() - 1) / sv(0);
    });
    int sign_ref = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (gap[i] < nondeg_rel)
            throw NotSymplectic(pts[i], pf[i] * pf[i]);
        int sgn = pf[i] > 0.0 ? 1 : -1;
        if (sign_ref == 0) sign_ref = sgn;
        if (sgn != sign_ref) throw NotSymplectic(pts[i], pf[i] * pf[i]);
    }
    return D;
}

// Liouville field of the suspension: iota_Z d(lambda) = lambda, solved
// pointwise from the 4x4 skew system.
inline VectorXd ambient_liouville_at(const SuspensionDomain& D, const Point& p4) {
    MatrixXd M = D.dlambda_at(p4);
    VectorXd lam = D.lambda_at(p4);
    return solve_pointwise(MatrixXd(M.transpose()), lam);
}

// ---------------------------------------------------------------------------
// Normal-form cross-check: the s-slope of the partial_s component of the
// ambient Liouville field at s = 0 must equal F = 1 + dbeta(C, zeta).
// ---------------------------------------------------------------------------

struct NormalFormCheck {
    Point base_point;
    double F_formula = 0.0;
    double F_measured = 0.0;
    double tangential_residual = 0.0;   // |beta(tangential s-slope)|
    double restriction_residual = 0.0;  // |zeta_lambda|_{s=0} - zeta_eta|
};

struct ClassificationResult {
    std::vector<NormalFormCheck> checks;
    double worst_rel_error = 0.0;       // |F_measured - F_formula| / max(1,|F_formula|)
    double worst_restriction = 0.0;
    double worst_tangential = 0.0;
    double F_min = 0.0, F_max = 0.0;    // formula values over the samples
    bool repelling_formula = false;     // F > 0 everywhere (formula)
    bool repelling_measured = false;    // F > 0 everywhere (measured)
};

inline ClassificationResult classification_check(const SuspensionDomain& D,
                                                 const GridSpec& grid) {
    const LHStructure& S = D.base;
    auto pts = S.grid_points(grid);
    const int d = S.chart.dim();
    const double h = D.epsilon / 100.0;

    std::vector<NormalFormCheck> checks(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) {
        PointSample s = sample_structure(S, pts[i]);
        VectorXd zeta = liouville_at(S, s);
        VectorXd C = characteristic_at(S, s);
        NormalFormCheck chk;
        chk.base_point = s.p;
        chk.F_formula = 1.0 + C.dot(s.dbeta_m * zeta);

        auto at_s = [&](double sval) {
            Point p4 = s.p;
            p4.push_back(sval);
            return ambient_liouville_at(D, p4);
        };
        VectorXd z0 = at_s(0.0);
        chk.restriction_residual = (z0.head(d) - zeta).norm() + std::abs(z0(d));

        auto slope = [&](double hh) {
            VectorXd zp = at_s(hh), zm = at_s(-hh);
            return VectorXd((zp - zm) / (2.0 * hh));
        };
        VectorXd s1 = slope(h), s2 = slope(h / 2.0);
        VectorXd richardson = (4.0 * s2 - s1) / 3.0;
        chk.F_measured = richardson(d);
        // tangential part of the s-slope; the normal form pins its beta-pairing to 0
        chk.tangential_residual = std::abs(s.beta_v.dot(richardson.head(d)));
        checks[i] = chk;
    });

    ClassificationResult res;
    res.checks = std::move(checks);
    res.repelling_formula = true;
    res.repelling_measured = true;
    bool first = true;
    for (const auto& c : res.checks) {
        double rel = std::abs(c.F_measured - c.F_formula) / std::max(1.0, std::abs(c.F_formula));
        res.worst_rel_error = std::max(res.worst_rel_error, rel);
        res.worst_restriction = std::max(res.worst_restriction, c.restriction_residual);
        res.worst_tangential = std::max(res.worst_tangential, c.tangential_residual);
        res.F_min = first ? c.F_formula : std::min(res.F_min, c.F_formula);
        res.F_max = first ? c.F_formula : std::max(res.F_max, c.F_formula);
        first = false;
        if (!(c.F_formula > 0.0)) res.repelling_formula = false;
        if (!(c.F_measured > 0.0)) res.repelling_measured = false;
    }
    return res;
}

// Boundary contact forms eta + eps beta and eta - eps beta on M.
inline std::pair<DifferentialForm, DifferentialForm>
boundary_contact_forms(const SuspensionDomain& D) {
    const LHStructure& S = D.base;
    const int d = S.chart.dim();
    std::vector<ExpressionTree> plus(static_cast<std::size_t>(d)),
        minus(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
        const auto& e = S.eta.coeffs[static_cast<std::size_t>(i)];
        const auto& b = S.beta.coeffs[static_cast<std::size_t>(i)];
        plus[static_cast<std::size_t>(i)] = e + D.epsilon * b;
        minus[static_cast<std::size_t>(i)] = e - D.epsilon * b;
    }
    return {DifferentialForm(d, 1, std::move(plus)), DifferentialForm(d, 1, std::move(minus))};
}

// eps = "auto": halve from the start value until the symplectic scan passes.
inline SuspensionDomain build_suspension_auto(const LHStructure& S, const GridSpec& grid,
                                              double eps_start = 0.1, int max_halvings = 10) {
    double eps = eps_start;
    for (int attempt = 0; attempt <= max_halvings; ++attempt) {
        try {
            return build_suspension(S, eps, grid);
        } catch (const NotSymplectic&) {
            eps *= 0.5;
        }
    }
    throw NotSymplectic({}, 0.0);
}

}  // namespace lhskit
