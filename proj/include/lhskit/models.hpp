#pragma once

#include <cmath>

#include "lhskit/lhs.hpp"

namespace lhskit {

// ---------------------------------------------------------------------------
// Torus-bundle structure from a hyperbolic A in SL2(Z):
//   eta = t v.dtheta,  beta = t^{-1} w.dtheta
// on T^2 x R_{>0}, with deck map (theta, t) -> ((A^T)^{-1} theta, e^nu t).
// ---------------------------------------------------------------------------

struct TorusBundle {
    LHStructure structure;
    Eigen::Matrix2i A;
    double nu = 0.0;
    Eigen::Vector2d v, w, v_star, w_star;
};

inline TorusBundle torus_bundle(const Eigen::Matrix2i& A) {
    long det = static_cast<long>(A(0, 0)) * A(1, 1) - static_cast<long>(A(0, 1)) * A(1, 0);
    long tr = A(0, 0) + A(1, 1);
    if (det != 1) throw NotHyperbolic("matrix is not in SL2(Z)");
    if (std::abs(tr) <= 2) throw NotHyperbolic("matrix is not hyperbolic (|trace| <= 2)");
    if (tr < 0)
        throw NotHyperbolic("negative-trace hyperbolic matrices have no positive "
                            "expanding eigenvalue; pass A^2 instead");
    if (A(0, 1) == 0)
        throw NotHyperbolic("degenerate eigenvector normalization");  // impossible for hyperbolic SL2(Z)

    TorusBundle tb;
    tb.A = A;
    double trd = static_cast<double>(tr);
    double lam = (trd + std::sqrt(trd * trd - 4.0)) / 2.0;  // e^nu > 1
    double lam_inv = 1.0 / lam;
    tb.nu = std::log(lam);
    // eigenvectors scaled so the first component is 1
    tb.v = Eigen::Vector2d(1.0, (lam - A(0, 0)) / A(0, 1));
    tb.w = Eigen::Vector2d(1.0, (lam_inv - A(0, 0)) / A(0, 1));
    // dual vectors: w*.w = 1, w*.v = 0, v*.v = 1, v*.w = 0
    double denom = tb.v(1) - tb.w(1);
    tb.w_star = Eigen::Vector2d(tb.v(1), -tb.v(0)) / denom;
    tb.v_star = Eigen::Vector2d(tb.w(1), -tb.w(0)) / -denom;

    Chart chart({"th1", "th2", "t"}, {true, true, false}, {{{0.0, 1.0}}, {{0.0, 1.0}}, {{1.0, lam}}});
    const int d = 3;
    ExpressionTree t = ExpressionTree::variable(2, d);
    std::vector<ExpressionTree> eta_c = {tb.v(0) * t, tb.v(1) * t,
                                         ExpressionTree::constant(0.0, d)};
    std::vector<ExpressionTree> beta_c = {ExpressionTree::constant(tb.w(0), d) / t,
                                          ExpressionTree::constant(tb.w(1), d) / t,
                                          ExpressionTree::constant(0.0, d)};
    DeckMap deck;
    // (A^T)^{-1} is integral since det A = 1
    Eigen::Matrix2i At;
    At << A(0, 0), A(1, 0), A(0, 1), A(1, 1);
    Eigen::Matrix2i AtInv;
    AtInv << At(1, 1), -At(0, 1), -At(1, 0), At(0, 0);
    deck.angle_map = AtInv;
    deck.scale = lam;
    deck.fiber_index = 2;
    deck.angle_index = {0, 1};

    tb.structure = LHStructure(chart, DifferentialForm(d, 1, std::move(eta_c)),
                               DifferentialForm(d, 1, std::move(beta_c)), 2, deck);
    return tb;
}

// Closed-form Liouville field t d/dt of the torus bundle, for flow tests.
inline VectorField torus_bundle_liouville_closed_form() {
    const int d = 3;
    return VectorField(d, {ExpressionTree::constant(0.0, d), ExpressionTree::constant(0.0, d),
                           ExpressionTree::variable(2, d)});
}

// ---------------------------------------------------------------------------
// McDuff / unit-cotangent model over the hyperbolic upper half plane.
// Chart (x, y, th) with th of period 1 (angle 2 pi th):
//   alpha = (cos dx + sin dy)/y,   Theta = 2 pi dth + dx/y
// Frame: R (cogeodesic), the angular field, and h in ker alpha ^ ker Theta
// normalized by d(alpha)(angular, h) = 1. The candidate formulas are accepted
// only because the structure-relation audit passes; their provenance plays no
// role.
// ---------------------------------------------------------------------------

struct McDuffModel {
    Chart chart;
    DifferentialForm alpha_g, Theta_g;
    VectorField R_g, dtheta, h;
    LHStructure structure;  // eta = alpha - Theta, beta = alpha
};

struct McDuffRelationReport {
    struct Entry {
        std::string id;
        double worst = 0.0;
        Point worst_point;
    };
    std::vector<Entry> entries;
    double worst = 0.0;
    bool pass(double tol) const { return worst <= tol; }
};

inline McDuffModel mcduff_model_unaudited() {
    McDuffModel m;
    m.chart = Chart({"x", "y", "th"}, {false, false, true},
                    {{{-1.0, 1.0}}, {{0.5, 2.0}}, {{0.0, 1.0}}});
    const int d = 3;
    const double two_pi = 6.283185307179586476925287;
    ExpressionTree y = ExpressionTree::variable(1, d);
    ExpressionTree th = ExpressionTree::variable(2, d);
    ExpressionTree c = cos(two_pi * th);
    ExpressionTree s = sin(two_pi * th);
    ExpressionTree zero = ExpressionTree::constant(0.0, d);

    m.alpha_g = DifferentialForm(d, 1, {c / y, s / y, zero});
    m.Theta_g = DifferentialForm(
        d, 1, {ExpressionTree::constant(1.0, d) / y, zero, ExpressionTree::constant(two_pi, d)});

    m.R_g = VectorField(d, {y * c, y * s, -(c / two_pi)});
    m.dtheta = VectorField(d, {zero, zero, ExpressionTree::constant(1.0 / two_pi, d)});
    m.h = VectorField(d, {-(y * s), y * c, s / two_pi});

    DifferentialForm eta = m.alpha_g - m.Theta_g;
    m.structure = LHStructure(m.chart, eta, m.alpha_g, 2);
    return m;
}

inline McDuffRelationReport mcduff_relations(const McDuffModel& m, const GridSpec& grid) {
    auto pts = make_grid(m.chart, grid);
    DifferentialForm dalpha = exterior_derivative(m.alpha_g);
    DifferentialForm dTheta = exterior_derivative(m.Theta_g);

    McDuffRelationReport rep;
    const char* ids[8] = {"alpha(angular)=0", "Theta(R)=0",        "alpha(R)=1",
                          "Theta(angular)=1", "iota_R dalpha=0",   "iota_angular dTheta=0",
                          "dalpha(angular,h)=1", "dTheta(h,R)=-1"};
    std::vector<std::array<double, 8>> worst(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) {
        const Point& p = pts[i];
        VectorXd av = covector(eval_form(m.alpha_g, m.chart, p));
        VectorXd Tv = covector(eval_form(m.Theta_g, m.chart, p));
        MatrixXd dA = form_matrix(eval_form(dalpha, m.chart, p));
        MatrixXd dT = form_matrix(eval_form(dTheta, m.chart, p));
        VectorXd R = m.R_g.eval(m.chart, p);
        VectorXd ang = m.dtheta.eval(m.chart, p);
        VectorXd hv = m.h.eval(m.chart, p);
        worst[i] = {std::abs(av.dot(ang)),
                    std::abs(Tv.dot(R)),
                    std::abs(av.dot(R) - 1.0),
                    std::abs(Tv.dot(ang) - 1.0),
                    (dA.transpose() * R).norm(),
                    (dT.transpose() * ang).norm(),
                    std::abs(ang.dot(dA * hv) - 1.0),
                    std::abs(hv.dot(dT * R) + 1.0)};
    });
    for (int r = 0; r < 8; ++r) {
        McDuffRelationReport::Entry e;
        e.id = ids[r];
        WorstCase wc;
        for (std::size_t i = 0; i < pts.size(); ++i)
            wc.take_max(worst[i][static_cast<std::size_t>(r)], pts[i]);
        e.worst = wc.value;
        e.worst_point = wc.point;
        rep.worst = std::max(rep.worst, e.worst);
        rep.entries.push_back(std::move(e));
    }
    return rep;
}

inline McDuffModel mcduff_model(double audit_tol = 1e-9) {
    McDuffModel m = mcduff_model_unaudited();
    McDuffRelationReport rep = mcduff_relations(m, GridSpec::uniform(6, 64, 11));
    if (!rep.pass(audit_tol)) {
        for (const auto& e : rep.entries)
            if (e.worst > audit_tol) throw RelationViolation(e.id, e.worst_point, e.worst);
    }
    return m;
}

// ---------------------------------------------------------------------------
// Reeb field of a contact one-form: iota_R d(alpha) = 0, alpha(R) = 1.
// ---------------------------------------------------------------------------

struct ReebField {
    Chart chart;
    DifferentialForm alpha, dalpha;
    double contact_floor = 1e-10;

    ReebField(Chart c, DifferentialForm a)
        : chart(std::move(c)), alpha(std::move(a)), dalpha(exterior_derivative(alpha)) {}

    VectorXd eval(const Point& p) const {
        const int d = chart.dim();
        VectorXd av = covector(eval_form(alpha, chart, p));
        MatrixXd dm = form_matrix(eval_form(dalpha, chart, p));
        // contact check: alpha ^ (dalpha)^{(d-1)/2} against the coefficient scale
        std::vector<double> ac(av.data(), av.data() + d);
        FormValue a_v(d, 1, std::move(ac));
        const auto& idx2 = multi_indices(d, 2);
        std::vector<double> dc(idx2.size());
        for (std::size_t r = 0; r < idx2.size(); ++r) dc[r] = dm(idx2[r][0], idx2[r][1]);
        FormValue da_v(d, 2, std::move(dc));
        double vol = wedge(a_v, wedge_power(da_v, (d - 1) / 2)).coeffs.front();
        double scale = std::pow(std::max(av.norm(), 1e-30), 1.0) *
                       std::pow(std::max(dm.norm(), 1e-30), (d - 1) / 2.0);
        if (std::abs(vol) < contact_floor * std::max(scale, 1e-30)) throw NotContact(p);
        MatrixXd A(d + 1, d);
        A.topRows(d) = dm.transpose();
        A.row(d) = av.transpose();
        VectorXd b = VectorXd::Zero(d + 1);
        b(d) = 1.0;
        return solve_pointwise(A, b);
    }
};

inline ReebField reeb_field(const Chart& chart, const DifferentialForm& alpha) {
    return ReebField(chart, alpha);
}

// ---------------------------------------------------------------------------
// Contactisation of an exact symplectic base (X, lambda):
//   eta = pullback of lambda, beta = dz on X x R_z.  Open structure.
// ---------------------------------------------------------------------------

inline LHStructure contactisation(const Chart& base_chart, const DifferentialForm& base_lambda,
                                  const GridSpec& base_grid = GridSpec::uniform(8, 32, 5),
                                  double nondeg_rel = 1e-8) {
    const int bd = base_chart.dim();
    if (bd % 2 != 0) throw Error("contactisation base must be even dimensional");
    if (base_lambda.degree != 1 || base_lambda.dim != bd)
        throw Error("contactisation base form must be a one-form on the base chart");
    DifferentialForm dlam = exterior_derivative(base_lambda);
    for (const Point& p : make_grid(base_chart, base_grid)) {
        MatrixXd M = form_matrix(eval_form(dlam, base_chart, p));
        auto sv = singular_values(M);
        if (!(sv(0) > 0.0) || sv(sv.size() - 1) / sv(0) < nondeg_rel)
            throw NotSymplecticBase("d(base form) degenerates on the base chart");
    }
    Chart chart = base_chart.extended("z", -1.0, 1.0);
    const int d = chart.dim();
    std::vector<ExpressionTree> eta_c(static_cast<std::size_t>(d),
                                      ExpressionTree::constant(0.0, d));
    for (int i = 0; i < bd; ++i)
        eta_c[static_cast<std::size_t>(i)] = base_lambda.coeffs[static_cast<std::size_t>(i)].lifted(d);
    std::vector<ExpressionTree> beta_c(static_cast<std::size_t>(d),
                                       ExpressionTree::constant(0.0, d));
    beta_c[static_cast<std::size_t>(d - 1)] = ExpressionTree::constant(1.0, d);
    return LHStructure(chart, DifferentialForm(d, 1, std::move(eta_c)),
                       DifferentialForm(d, 1, std::move(beta_c)), (bd + 2) / 2);
}

// The standard open example with base lambda = p dq on R^2.
inline LHStructure contactisation_pdq() {
    Chart base({"q", "p"}, {false, false}, {{{-1.0, 1.0}}, {{-1.0, 1.0}}});
    ExpressionTree p = ExpressionTree::variable(1, 2);
    DifferentialForm lam(2, 1, {p, ExpressionTree::constant(0.0, 2)});
    return contactisation(base, lam);
}

}  // namespace lhskit
