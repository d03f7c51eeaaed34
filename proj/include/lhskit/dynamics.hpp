#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <vector>

#include "lhskit/models.hpp"
#include "lhskit/suspension.hpp"

namespace lhskit {

// ---------------------------------------------------------------------------
// Flow fields: velocity + Jacobian callbacks over a chart.
// ---------------------------------------------------------------------------

struct FlowField {
    int dim = 0;
    std::function<VectorXd(const Point&)> velocity;
    std::function<MatrixXd(const Point&)> jacobian;
};

inline FlowField flow_of(const VectorField& X, const Chart& chart) {
    FlowField f;
    f.dim = X.dim;
    f.velocity = [X, chart](const Point& p) { return X.eval(chart, p); };
    f.jacobian = [X, chart](const Point& p) { return X.jacobian(chart, p); };
    return f;
}

inline FlowField flow_of(const SolvedField& F) {
    FlowField f;
    f.dim = F.dim();
    f.velocity = [F](const Point& p) { return F.eval(p); };
    f.jacobian = [F](const Point& p) { return F.jacobian(p); };
    return f;
}

// ---------------------------------------------------------------------------
// Trajectories of the flow, with optional variational (linearized) matrices
// and deck wrapping on a fundamental interval.
// ---------------------------------------------------------------------------

struct Trajectory {
    std::vector<double> times;
    std::vector<Point> states;       // reduced into the fundamental chart
    std::vector<int> wraps;          // cumulative deck traversals
    std::vector<MatrixXd> jacobians; // empty unless requested

    const Point& back_state() const { return states.back(); }
};

struct IntegrateOptions {
    double blowup_norm = 1e12;
    double max_local_error = 1e-4;  // relative step-doubling estimate, checked periodically
    int error_check_stride = 64;
};

namespace detail {

inline void rk4_step(const FlowField& f, const Chart& chart, Point& x, MatrixXd* J,
                     double h) {
    const int d = f.dim;
    auto add = [&](const Point& p, const VectorXd& v, double c) {
        Point q = p;
        for (int i = 0; i < d; ++i) q[static_cast<std::size_t>(i)] += c * v(i);
        return q;
    };
    VectorXd k1 = f.velocity(x);
    Point x2 = add(x, k1, h / 2);
    VectorXd k2 = f.velocity(x2);
    Point x3 = add(x, k2, h / 2);
    VectorXd k3 = f.velocity(x3);
    Point x4 = add(x, k3, h);
    VectorXd k4 = f.velocity(x4);
    if (J) {
        MatrixXd K1 = f.jacobian(x) * (*J);
        MatrixXd K2 = f.jacobian(x2) * (*J + (h / 2) * K1);
        MatrixXd K3 = f.jacobian(x3) * (*J + (h / 2) * K2);
        MatrixXd K4 = f.jacobian(x4) * (*J + h * K3);
        *J += (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
    }
    VectorXd dx = (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    for (int i = 0; i < d; ++i) x[static_cast<std::size_t>(i)] += dx(i);
    (void)chart;
}

inline void apply_wrapping(const Chart& chart, const DeckMap* deck, Point& x, MatrixXd* J,
                           int& wraps) {
    x = chart.reduce(x);
    if (!deck) return;
    double t0 = chart.bounds(deck->fiber_index)[0];
    double hi = t0 * deck->scale;
    double& t = x[static_cast<std::size_t>(deck->fiber_index)];
    while (t >= hi) {
        x = chart.reduce(deck->apply(x, -1));
        if (J) *J = deck->linear_matrix(chart.dim(), -1) * (*J);
        ++wraps;
        // x may alias t through the reference; refresh
        return apply_wrapping(chart, deck, x, J, wraps);
    }
    while (t < t0) {
        x = chart.reduce(deck->apply(x, +1));
        if (J) *J = deck->linear_matrix(chart.dim(), +1) * (*J);
        --wraps;
        return apply_wrapping(chart, deck, x, J, wraps);
    }
}

}  // namespace detail

inline Trajectory integrate(const FlowField& field, const Chart& chart, const Point& x0,
                            double tau, double step, bool with_variational,
                            const DeckMap* deck = nullptr, const IntegrateOptions& opt = {}) {
    if (!(step > 0.0)) throw Error("integrator needs a positive step");
    if (tau < 0.0) throw Error("integrator runs forward in time");
    const int d = field.dim;
    Trajectory tr;
    Point x = chart.reduce(x0);
    int wraps = 0;
    detail::apply_wrapping(chart, deck, x, nullptr, wraps);
    // the wrapped start state is the reference deck branch
    wraps = 0;
    MatrixXd J = MatrixXd::Identity(d, d);
    tr.times.push_back(0.0);
    tr.states.push_back(x);
    tr.wraps.push_back(0);
    if (with_variational) tr.jacobians.push_back(J);

    double t = 0.0;
    long step_index = 0;
    while (t < tau - 1e-15 * std::max(1.0, tau)) {
        double h = std::min(step, tau - t);
        if (opt.error_check_stride > 0 && step_index % opt.error_check_stride == 0) {
            Point xf = x, xh = x;
            detail::rk4_step(field, chart, xf, nullptr, h);
            detail::rk4_step(field, chart, xh, nullptr, h / 2);
            detail::rk4_step(field, chart, xh, nullptr, h / 2);
            double est = 0.0, scale = 1.0;
            for (int i = 0; i < d; ++i) {
                est = std::max(est, std::abs(xf[static_cast<std::size_t>(i)] -
                                             xh[static_cast<std::size_t>(i)]) / 15.0);
                scale = std::max(scale, std::abs(x[static_cast<std::size_t>(i)]));
            }
            if (est > opt.max_local_error * scale)
                throw StepTooLarge("local error estimate " + std::to_string(est) +
                                   " exceeds limit; reduce the step");
        }
        detail::rk4_step(field, chart, x, with_variational ? &J : nullptr, h);
        t += h;
        ++step_index;
        double norm = 0.0;
        for (double c : x) norm += c * c;
        if (std::sqrt(norm) > opt.blowup_norm) throw BlowUp("trajectory norm exceeds 1e12");
        detail::apply_wrapping(chart, deck, x, with_variational ? &J : nullptr, wraps);
        tr.times.push_back(t);
        tr.states.push_back(x);
        tr.wraps.push_back(wraps);
        if (with_variational) tr.jacobians.push_back(J);
    }
    return tr;
}

// ---------------------------------------------------------------------------
// Exact expansion law of the Liouville flow:
//   (phi^tau)^* eta = e^tau eta,   (phi^tau)^* d(eta) = e^tau d(eta).
// Both pullbacks are computed through the transported variational matrix, so
// this doubles as an integrator oracle.
// ---------------------------------------------------------------------------

struct ExpansionReport {
    double tau = 0.0;
    double step = 0.0;
    double residual_eta = 0.0;
    double residual_deta = 0.0;
    int wraps = 0;
};

inline ExpansionReport expansion_check(const LHStructure& S, const Point& x0, double tau,
                                       double step = 1e-3) {
    FlowField f = flow_of(liouville_field(S));
    const DeckMap* deck = S.quotient ? &*S.quotient : nullptr;
    Trajectory tr = integrate(f, S.chart, x0, tau, step, true, deck);
    const Point& x1 = tr.states.back();
    const MatrixXd& J = tr.jacobians.back();

    VectorXd eta0 = covector(eval_form(S.eta, S.chart, x0));
    VectorXd eta1 = covector(eval_form(S.eta, S.chart, x1));
    VectorXd pulled = J.transpose() * eta1;
    VectorXd target = std::exp(tau) * eta0;
    ExpansionReport rep;
    rep.tau = tau;
    rep.step = step;
    rep.wraps = tr.wraps.back();
    rep.residual_eta = (pulled - target).norm() / target.norm();

    MatrixXd d0 = form_matrix(eval_form(S.deta, S.chart, x0));
    MatrixXd d1 = form_matrix(eval_form(S.deta, S.chart, x1));
    MatrixXd pulled2 = J.transpose() * d1 * J;
    MatrixXd target2 = std::exp(tau) * d0;
    rep.residual_deta = (pulled2 - target2).norm() / target2.norm();
    return rep;
}

// ---------------------------------------------------------------------------
// Integer 2x2 helpers: matrix powers and Smith normal form over Z, used to
// enumerate the periodic points of a hyperbolic torus map exactly.
// ---------------------------------------------------------------------------

using IMat2 = std::array<std::array<long long, 2>, 2>;

inline IMat2 imat_identity() { return {{{1, 0}, {0, 1}}}; }

inline IMat2 imat_mul(const IMat2& a, const IMat2& b) {
    IMat2 r{};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
    return r;
}

inline IMat2 imat_pow(const IMat2& a, int k) {
    IMat2 r = imat_identity();
    for (int i = 0; i < k; ++i) r = imat_mul(r, a);
    return r;
}

inline long long imat_det(const IMat2& a) { return a[0][0] * a[1][1] - a[0][1] * a[1][0]; }
inline long long imat_trace(const IMat2& a) { return a[0][0] + a[1][1]; }

// U * M * V = diag(d1, d2) with U, V unimodular and d1 | d2, d1, d2 >= 0.
struct Snf2 {
    long long d1 = 0, d2 = 0;
    IMat2 U = imat_identity(), V = imat_identity();
};

inline Snf2 smith_normal_form(IMat2 M) {
    Snf2 out;
    IMat2& U = out.U;
    IMat2& V = out.V;
    auto row_op = [&](int dst, int src, long long q) {  // row dst -= q * row src
        for (int j = 0; j < 2; ++j) M[dst][j] -= q * M[src][j];
        for (int j = 0; j < 2; ++j) U[dst][j] -= q * U[src][j];
    };
    auto col_op = [&](int dst, int src, long long q) {
        for (int i = 0; i < 2; ++i) M[i][dst] -= q * M[i][src];
        for (int i = 0; i < 2; ++i) V[i][dst] -= q * V[i][src];
    };
    auto row_swap = [&] {
        std::swap(M[0], M[1]);
        std::swap(U[0], U[1]);
    };
    auto col_swap = [&] {
        for (int i = 0; i < 2; ++i) std::swap(M[i][0], M[i][1]);
        for (int i = 0; i < 2; ++i) std::swap(V[i][0], V[i][1]);
    };

    for (int guard = 0; guard < 256; ++guard) {
        // move a nonzero pivot of least magnitude to (0,0)
        int bi = -1, bj = -1;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                if (M[i][j] != 0 &&
                    (bi < 0 || std::abs(M[i][j]) < std::abs(M[bi][bj]))) {
                    bi = i;
                    bj = j;
                }
        if (bi < 0) break;  // zero matrix
        if (bi == 1) row_swap();
        if (bj == 1) col_swap();
        if (M[1][0] % M[0][0] != 0 || M[0][1] % M[0][0] != 0) {
            row_op(1, 0, M[1][0] / M[0][0]);
            col_op(1, 0, M[0][1] / M[0][0]);
            continue;
        }
        row_op(1, 0, M[1][0] / M[0][0]);
        col_op(1, 0, M[0][1] / M[0][0]);
        if (M[1][1] % M[0][0] != 0) {
            // fold the remaining entry back into the pivot's gcd orbit
            row_op(0, 1, -1);
            continue;
        }
        break;
    }
    // sign normalization
    if (M[0][0] < 0) {
        for (int j = 0; j < 2; ++j) {
            M[0][j] = -M[0][j];
            U[0][j] = -U[0][j];
        }
    }
    if (M[1][1] < 0) {
        for (int j = 0; j < 2; ++j) {
            M[1][j] = -M[1][j];
            U[1][j] = -U[1][j];
        }
    }
    out.d1 = M[0][0];
    out.d2 = M[1][1];
    return out;
}

// ---------------------------------------------------------------------------
// Orbit census of the suspension flow of a hyperbolic A in SL2(Z).
//
// Period-k points of the return map on {t = 1} are the solutions of
// (B^k - I) theta = 0 mod 1 with B = A^T; exactly |det(A^k - I)| =
// |tr(A^k) - 2| of them. Each enumerated rational point is refined by Newton
// iteration on the return map of the integrated flow.
// ---------------------------------------------------------------------------

struct PeriodicOrbit {
    Point section_point;  // (th1, th2, t0) on the section
    int k = 0;            // deck traversals
    double period = 0.0;  // k * nu
    double residual = 0.0;
    std::array<long long, 4> rational{0, 1, 0, 1};  // (p1/q1, p2/q2)
};

struct CensusEntry {
    int k = 0;
    long long algebraic_count = 0;
    std::vector<PeriodicOrbit> orbits;
    bool counts_match = false;
};

struct CensusResult {
    std::vector<CensusEntry> entries;
    double nu = 0.0;
};

struct CensusOptions {
    double flow_step = 5e-3;
    double newton_tol = 1e-10;
    int newton_max_iter = 25;
    double dedupe_tol = 1e-6;
};

namespace detail {

inline long long gcd_ll(long long a, long long b) {
    a = std::abs(a);
    b = std::abs(b);
    while (b) {
        long long r = a % b;
        a = b;
        b = r;
    }
    return a;
}

}  // namespace detail

inline CensusResult orbit_census(const Eigen::Matrix2i& A, int k_max,
                                 const CensusOptions& opt = {}) {
    long long det = static_cast<long long>(A(0, 0)) * A(1, 1) -
                    static_cast<long long>(A(0, 1)) * A(1, 0);
    long long tr = A(0, 0) + A(1, 1);
    if (det != 1) throw NotHyperbolic("census matrix is not in SL2(Z)");
    if (std::abs(tr) <= 2) throw NotHyperbolic("census matrix is not hyperbolic (|trace| <= 2)");
    if (k_max < 1 || k_max > 12) throw Error("census supports 1 <= k_max <= 12");

    TorusBundle tb = torus_bundle(A);  // also the flow used for refinement
    FlowField flow = flow_of(liouville_field(tb.structure));
    const DeckMap deck = *tb.structure.quotient;
    const Chart& chart = tb.structure.chart;
    const double t_section = chart.bounds(deck.fiber_index)[0];

    IMat2 B{{{A(0, 0), A(1, 0)}, {A(0, 1), A(1, 1)}}};  // A^T, the return map

    CensusResult result;
    result.nu = tb.nu;
    for (int k = 1; k <= k_max; ++k) {
        CensusEntry entry;
        entry.k = k;
        IMat2 Bk = imat_pow(B, k);
        IMat2 BkI = Bk;
        BkI[0][0] -= 1;
        BkI[1][1] -= 1;
        entry.algebraic_count = std::llabs(imat_det(BkI));

        Snf2 snf = smith_normal_form(BkI);
        if (snf.d1 * snf.d2 != entry.algebraic_count)
            throw Error("Smith normal form is inconsistent with the determinant");

        // Return map through the integrated flow. The k deck traversals are
        // applied after integrating on the cover: flow time k*nu ends exactly
        // on the seam, where per-step wrapping would be a coin toss.
        auto return_map = [&](double th1, double th2) {
            Point p0 = {th1, th2, t_section};
            Trajectory tr2 = integrate(flow, chart, p0, k * tb.nu, opt.flow_step, false, nullptr);
            return chart.reduce(deck.apply(tr2.states.back(), -k));
        };

        IMat2 Jint = BkI;  // Newton matrix (B^k - I), exact
        long long Jdet = imat_det(Jint);
        std::vector<PeriodicOrbit> orbits;
        for (long long i = 0; i < snf.d1; ++i) {
            for (long long j = 0; j < snf.d2; ++j) {
                // theta = V (i/d1, j/d2) mod 1, exact rationals
                long long q = snf.d1 * snf.d2;
                long long p1 = snf.V[0][0] * i * snf.d2 + snf.V[0][1] * j * snf.d1;
                long long p2 = snf.V[1][0] * i * snf.d2 + snf.V[1][1] * j * snf.d1;
                auto norm_frac = [&](long long p) {
                    long long pm = ((p % q) + q) % q;
                    return pm;
                };
                p1 = norm_frac(p1);
                p2 = norm_frac(p2);

                PeriodicOrbit orb;
                orb.k = k;
                orb.period = k * tb.nu;
                long long g1 = std::max<long long>(detail::gcd_ll(p1, q), 1);
                long long g2 = std::max<long long>(detail::gcd_ll(p2, q), 1);
                orb.rational = {p1 / g1, q / g1, p2 / g2, q / g2};

                double th1 = static_cast<double>(p1) / static_cast<double>(q);
                double th2 = static_cast<double>(p2) / static_cast<double>(q);
                // Newton on the wrapped fixed-point residual of the return map
                double residual = 0.0;
                for (int it = 0;; ++it) {
                    Point img = return_map(th1, th2);
                    double r1 = img[0] - th1, r2 = img[1] - th2;
                    r1 -= std::floor(r1 + 0.5);  // branch of least magnitude
                    r2 -= std::floor(r2 + 0.5);
                    residual = std::max(std::abs(r1), std::abs(r2));
                    if (residual <= opt.newton_tol) break;
                    if (it >= opt.newton_max_iter)
                        throw NewtonDivergence("Newton did not reach tolerance",
                                               {th1, th2, t_section});
                    // delta = -(B^k - I)^{-1} r
                    double d1 = -(Jint[1][1] * r1 - Jint[0][1] * r2) / static_cast<double>(Jdet);
                    double d2 = -(-Jint[1][0] * r1 + Jint[0][0] * r2) / static_cast<double>(Jdet);
                    th1 += d1;
                    th2 += d2;
                    th1 -= std::floor(th1);
                    th2 -= std::floor(th2);
                }
                orb.section_point = {th1, th2, t_section};
                orb.residual = residual;
                orbits.push_back(std::move(orb));
            }
        }
        // deterministic order + dedupe (seeds are distinct mod 1 by construction)
        std::sort(orbits.begin(), orbits.end(), [](const PeriodicOrbit& a, const PeriodicOrbit& b) {
            if (a.section_point[0] != b.section_point[0])
                return a.section_point[0] < b.section_point[0];
            return a.section_point[1] < b.section_point[1];
        });
        std::vector<PeriodicOrbit> unique;
        for (auto& o : orbits) {
            bool dup = false;
            for (const auto& u : unique) {
                double a = std::abs(o.section_point[0] - u.section_point[0]);
                double b = std::abs(o.section_point[1] - u.section_point[1]);
                a = std::min(a, 1.0 - a);
                b = std::min(b, 1.0 - b);
                if (a < opt.dedupe_tol && b < opt.dedupe_tol) {
                    dup = true;
                    break;
                }
            }
            if (!dup) unique.push_back(std::move(o));
        }
        entry.orbits = std::move(unique);
        entry.counts_match =
            static_cast<long long>(entry.orbits.size()) == entry.algebraic_count;
        result.entries.push_back(std::move(entry));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Exact Lagrangian cylinders over periodic orbits: sample the map
// (orbit time, s) -> (gamma(u), s) and verify that lambda = eta + s beta kills
// both tangent directions, and that the boundary curves are Legendrian for
// eta -+ eps beta. Tangents come from the sampled curve itself (fourth-order
// differences with deck alignment), not from the field, so a curve that is
// not a flow line fails the check.
// ---------------------------------------------------------------------------

struct SampledLoop {
    std::vector<Point> states;  // n_u samples over one closed period, reduced
    std::vector<int> wraps;     // cumulative deck traversals at each sample
    int total_wraps = 0;        // deck traversals of the full loop
    double u_span = 0.0;        // parameter length of the loop
};

struct LagrangianCylinder {
    PeriodicOrbit orbit;
    double epsilon = 0.0;
    int n_u = 0, n_s = 0;
    double max_lambda_tangent = 0.0;   // |lambda(flow tangent)| over all samples
    double max_lambda_normal = 0.0;    // |lambda(d/ds)|
    double max_boundary_residual = 0.0;
    Point worst_point;
};

namespace detail {

// Curve tangent at sample i by the 4th-order central stencil, with neighbors
// expressed in the deck branch and periodic branch of sample i.
inline Point loop_tangent(const Chart& chart, const DeckMap* deck, const SampledLoop& loop,
                          std::size_t i) {
    const int d = chart.dim();
    const std::size_t n = loop.states.size();
    const double h = loop.u_span / static_cast<double>(n);
    auto aligned = [&](long off) {
        long j = static_cast<long>(i) + off;
        int wrap_shift = 0;
        while (j < 0) {
            j += static_cast<long>(n);
            wrap_shift -= loop.total_wraps;
        }
        while (j >= static_cast<long>(n)) {
            j -= static_cast<long>(n);
            wrap_shift += loop.total_wraps;
        }
        Point p = loop.states[static_cast<std::size_t>(j)];
        int rel = loop.wraps[static_cast<std::size_t>(j)] + wrap_shift -
                  loop.wraps[i];
        if (deck && rel != 0) p = deck->apply(p, rel);
        // unwrap periodic coordinates relative to the center sample
        const Point& c = loop.states[i];
        for (int q = 0; q < d; ++q)
            if (chart.periodic(q)) {
                double diff = p[static_cast<std::size_t>(q)] - c[static_cast<std::size_t>(q)];
                diff -= std::floor(diff + 0.5);
                p[static_cast<std::size_t>(q)] = c[static_cast<std::size_t>(q)] + diff;
            }
        return p;
    };
    Point p1 = aligned(1), p2 = aligned(2), m1 = aligned(-1), m2 = aligned(-2);
    Point tangent(static_cast<std::size_t>(d));
    for (int q = 0; q < d; ++q) {
        std::size_t qq = static_cast<std::size_t>(q);
        tangent[qq] = (-p2[qq] + 8.0 * p1[qq] - 8.0 * m1[qq] + m2[qq]) / (12.0 * h);
    }
    return tangent;
}

}  // namespace detail

struct CylinderOptions {
    int n_u = 64;
    int n_s = 16;
    double flow_step = 5e-3;
    double tol = 1e-8;
};

// Verification core shared by build_cylinder and by tests that feed in
// synthetic (non-orbit) loops.
inline LagrangianCylinder verify_cylinder(const SuspensionDomain& D, const SampledLoop& loop,
                                          const PeriodicOrbit& orbit, double eps,
                                          const CylinderOptions& opt = {}) {
    const LHStructure& S = D.base;
    const DeckMap* deck = S.quotient ? &*S.quotient : nullptr;
    const int d = S.chart.dim();
    LagrangianCylinder cyl;
    cyl.orbit = orbit;
    cyl.epsilon = eps;
    cyl.n_u = static_cast<int>(loop.states.size());
    cyl.n_s = opt.n_s;

    for (std::size_t i = 0; i < loop.states.size(); ++i) {
        Point tangent = detail::loop_tangent(S.chart, deck, loop, i);
        const Point& base_pt = loop.states[i];
        VectorXd tan(d);
        for (int q = 0; q < d; ++q) tan(q) = tangent[static_cast<std::size_t>(q)];

        VectorXd eta_v = covector(eval_form(S.eta, S.chart, base_pt));
        VectorXd beta_v = covector(eval_form(S.beta, S.chart, base_pt));
        for (int sj = 0; sj < opt.n_s; ++sj) {
            double s = opt.n_s == 1 ? 0.0
                                    : -eps + 2.0 * eps * sj / (opt.n_s - 1);
            double lam_tan = std::abs(eta_v.dot(tan) + s * beta_v.dot(tan));
            // lambda(d/ds) vanishes identically in this gauge; evaluate anyway
            Point p4 = base_pt;
            p4.push_back(s);
            double lam_s = std::abs(D.lambda_at(p4)(d));
            if (lam_tan > cyl.max_lambda_tangent) {
                cyl.max_lambda_tangent = lam_tan;
                cyl.worst_point = p4;
            }
            cyl.max_lambda_normal = std::max(cyl.max_lambda_normal, lam_s);
        }
        double bp = std::abs(eta_v.dot(tan) + eps * beta_v.dot(tan));
        double bm = std::abs(eta_v.dot(tan) - eps * beta_v.dot(tan));
        cyl.max_boundary_residual = std::max({cyl.max_boundary_residual, bp, bm});
    }
    if (cyl.max_lambda_tangent > opt.tol || cyl.max_lambda_normal > opt.tol)
        throw ExactnessViolation(cyl.worst_point,
                                 std::max(cyl.max_lambda_tangent, cyl.max_lambda_normal));
    return cyl;
}

inline SampledLoop sample_orbit_loop(const LHStructure& S, const PeriodicOrbit& orbit,
                                     int n_u, double flow_step) {
    FlowField flow = flow_of(liouville_field(S));
    const DeckMap* deck = S.quotient ? &*S.quotient : nullptr;
    SampledLoop loop;
    loop.u_span = orbit.period;
    loop.total_wraps = orbit.k;
    Point x = orbit.section_point;
    int wraps = 0;
    double u_step = orbit.period / n_u;
    for (int i = 0; i < n_u; ++i) {
        loop.states.push_back(x);
        loop.wraps.push_back(wraps);
        Trajectory seg = integrate(flow, S.chart, x, u_step, flow_step, false, deck);
        x = seg.states.back();
        wraps += seg.wraps.back();
    }
    return loop;
}

inline LagrangianCylinder build_cylinder(const SuspensionDomain& D, const PeriodicOrbit& orbit,
                                         double eps, const CylinderOptions& opt = {}) {
    if (eps < 0.0 || eps > D.epsilon)
        throw Error("cylinder needs 0 <= eps <= suspension epsilon");
    SampledLoop loop = sample_orbit_loop(D.base, orbit, opt.n_u, opt.flow_step);
    return verify_cylinder(D, loop, orbit, eps, opt);
}

}  // namespace lhskit
