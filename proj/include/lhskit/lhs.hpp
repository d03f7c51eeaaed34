#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "lhskit/forms.hpp"
#include "lhskit/grid.hpp"
#include "lhskit/parallel.hpp"

namespace lhskit {

// ---------------------------------------------------------------------------
// Deck map of a mapping-torus quotient: theta -> L theta (mod 1) on the
// periodic coordinates, t -> scale * t on the fiber.
// ---------------------------------------------------------------------------

struct DeckMap {
    Eigen::Matrix2i angle_map;       // unimodular action on the two angles
    double scale = 1.0;              // e^nu > 1
    int fiber_index = 2;             // chart index of t
    std::array<int, 2> angle_index{0, 1};

    void validate() const {
        int det = angle_map(0, 0) * angle_map(1, 1) - angle_map(0, 1) * angle_map(1, 0);
        if (det != 1 && det != -1) throw Error("deck map linear part must be unimodular");
        if (!(scale > 1.0)) throw Error("deck map scale must exceed 1");
    }

    double nu() const { return std::log(scale); }

    Eigen::Matrix2i angle_map_inverse() const {
        int det = angle_map(0, 0) * angle_map(1, 1) - angle_map(0, 1) * angle_map(1, 0);
        Eigen::Matrix2i inv;
        inv << angle_map(1, 1), -angle_map(0, 1), -angle_map(1, 0), angle_map(0, 0);
        return det == 1 ? inv : Eigen::Matrix2i(-inv);
    }

    // power = +1 applies the deck map, -1 its inverse
    Point apply(const Point& p, int power = 1) const {
        Point q = p;
        Eigen::Matrix2i L = power >= 0 ? angle_map : angle_map_inverse();
        int reps = std::abs(power);
        for (int r = 0; r < reps; ++r) {
            double a = q[static_cast<std::size_t>(angle_index[0])];
            double b = q[static_cast<std::size_t>(angle_index[1])];
            q[static_cast<std::size_t>(angle_index[0])] = L(0, 0) * a + L(0, 1) * b;
            q[static_cast<std::size_t>(angle_index[1])] = L(1, 0) * a + L(1, 1) * b;
            q[static_cast<std::size_t>(fiber_index)] *= (power >= 0 ? scale : 1.0 / scale);
        }
        return q;
    }

    // Jacobian of apply(., power) on a dim-dimensional chart
    MatrixXd linear_matrix(int dim, int power = 1) const {
        MatrixXd J = MatrixXd::Identity(dim, dim);
        Eigen::Matrix2i L = power >= 0 ? angle_map : angle_map_inverse();
        Eigen::Matrix2d Ld = L.cast<double>();
        Eigen::Matrix2d acc = Eigen::Matrix2d::Identity();
        for (int r = 0; r < std::abs(power); ++r) acc = Ld * acc;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) J(angle_index[i], angle_index[j]) = acc(i, j);
        J(fiber_index, fiber_index) = std::pow(power >= 0 ? scale : 1.0 / scale,
                                               std::abs(power));
        return J;
    }
};

// ---------------------------------------------------------------------------
// LHStructure: chart + (eta, beta) with dim = 2n-1. The exterior derivatives
// are materialized once; everything downstream is pointwise and immutable.
// ---------------------------------------------------------------------------

struct LHStructure {
    Chart chart;
    DifferentialForm eta, beta;
    DifferentialForm deta, dbeta;
    int n = 2;
    std::optional<DeckMap> quotient;

    LHStructure() = default;
    LHStructure(Chart c, DifferentialForm eta_in, DifferentialForm beta_in, int n_in,
                std::optional<DeckMap> deck = std::nullopt)
        : chart(std::move(c)), eta(std::move(eta_in)), beta(std::move(beta_in)), n(n_in),
          quotient(std::move(deck)) {
        if (n < 2) throw Error("Liouville-Hamiltonian structure needs n >= 2");
        if (chart.dim() != 2 * n - 1)
            throw Error("chart dimension must equal 2n-1");
        if (eta.degree != 1 || beta.degree != 1 || eta.dim != chart.dim() ||
            beta.dim != chart.dim())
            throw Error("eta and beta must be one-forms on the chart");
        if (quotient) quotient->validate();
        deta = exterior_derivative(eta);
        dbeta = exterior_derivative(beta);
    }

    std::vector<Point> grid_points(const GridSpec& spec) const {
        if (quotient)
            return make_grid(chart, spec, quotient->fiber_index, quotient->scale);
        return make_grid(chart, spec);
    }
};

// Pointwise values of everything the canonical solves need.
struct PointSample {
    Point p;
    VectorXd eta_v, beta_v;
    MatrixXd deta_m, dbeta_m;
};

inline PointSample sample_structure(const LHStructure& S, const Point& p) {
    PointSample s;
    s.p = S.chart.reduce(p);
    s.eta_v = covector(eval_form(S.eta, S.chart, s.p));
    s.beta_v = covector(eval_form(S.beta, S.chart, s.p));
    s.deta_m = form_matrix(eval_form(S.deta, S.chart, s.p));
    s.dbeta_m = form_matrix(eval_form(S.dbeta, S.chart, s.p));
    return s;
}

namespace detail {

// System matrix for both canonical fields: rows are (iota_X deta)_j = eta_j
// (i.e. deta^T X = eta) stacked with beta(X).
inline MatrixXd canonical_matrix(const PointSample& s) {
    int d = static_cast<int>(s.eta_v.size());
    MatrixXd A(d + 1, d);
    A.topRows(d) = s.deta_m.transpose();
    A.row(d) = s.beta_v.transpose();
    return A;
}

}  // namespace detail

// Liouville field zeta: iota_zeta deta = eta, beta(zeta) = 0.
inline VectorXd liouville_at(const LHStructure& S, const PointSample& s) {
    int d = S.chart.dim();
    VectorXd b(d + 1);
    b.head(d) = s.eta_v;
    b(d) = 0.0;
    return solve_pointwise(detail::canonical_matrix(s), b);
}

inline VectorXd liouville_at(const LHStructure& S, const Point& p) {
    return liouville_at(S, sample_structure(S, p));
}

// Characteristic field C: iota_C deta = 0, beta(C) = 1.
inline VectorXd characteristic_at(const LHStructure& S, const PointSample& s) {
    int d = S.chart.dim();
    VectorXd b = VectorXd::Zero(d + 1);
    b(d) = 1.0;
    return solve_pointwise(detail::canonical_matrix(s), b);
}

inline VectorXd characteristic_at(const LHStructure& S, const Point& p) {
    return characteristic_at(S, sample_structure(S, p));
}

// dbeta(C, zeta) -- the quantity controlling the deformation type.
inline double deformation_value_at(const LHStructure& S, const PointSample& s) {
    VectorXd zeta = liouville_at(S, s);
    VectorXd C = characteristic_at(S, s);
    return C.dot(s.dbeta_m * zeta);
}

// ---------------------------------------------------------------------------
// Canonical field evaluator with exact Jacobians via implicit differentiation
// of the pointwise solve: A dX = db - dA X.
// ---------------------------------------------------------------------------

class SolvedField {
public:
    enum class Kind { Liouville, Characteristic };

    SolvedField(const LHStructure& S, Kind kind) : S_(&S), kind_(kind) {}

    int dim() const { return S_->chart.dim(); }

    VectorXd eval(const Point& p) const {
        PointSample s = sample_structure(*S_, p);
        return kind_ == Kind::Liouville ? liouville_at(*S_, s) : characteristic_at(*S_, s);
    }

    MatrixXd jacobian(const Point& p) const {
        int d = dim();
        Point q = S_->chart.reduce(p);
        // jets of every coefficient entering the system
        std::vector<Jet1> eta_j(static_cast<std::size_t>(d)), beta_j(static_cast<std::size_t>(d));
        for (int i = 0; i < d; ++i) {
            eta_j[static_cast<std::size_t>(i)] = S_->eta.coeffs[static_cast<std::size_t>(i)].eval_jet(q);
            beta_j[static_cast<std::size_t>(i)] = S_->beta.coeffs[static_cast<std::size_t>(i)].eval_jet(q);
        }
        const auto& idx2 = multi_indices(d, 2);
        std::vector<Jet1> deta_j(idx2.size());
        for (std::size_t r = 0; r < idx2.size(); ++r)
            deta_j[r] = S_->deta.coeffs[r].eval_jet(q);

        auto deta_matrix = [&](int k) {  // k = -1: values, else partial wrt coord k
            MatrixXd M = MatrixXd::Zero(d, d);
            for (std::size_t r = 0; r < idx2.size(); ++r) {
                double v = k < 0 ? deta_j[r].value : deta_j[r].partials[static_cast<std::size_t>(k)];
                M(idx2[r][0], idx2[r][1]) = v;
                M(idx2[r][1], idx2[r][0]) = -v;
            }
            return M;
        };
        auto one_form = [&](const std::vector<Jet1>& jets, int k) {
            VectorXd v(d);
            for (int i = 0; i < d; ++i)
                v(i) = k < 0 ? jets[static_cast<std::size_t>(i)].value
                             : jets[static_cast<std::size_t>(i)].partials[static_cast<std::size_t>(k)];
            return v;
        };

        MatrixXd A(d + 1, d);
        A.topRows(d) = deta_matrix(-1).transpose();
        A.row(d) = one_form(beta_j, -1).transpose();
        VectorXd b = VectorXd::Zero(d + 1);
        if (kind_ == Kind::Liouville)
            b.head(d) = one_form(eta_j, -1);
        else
            b(d) = 1.0;
        VectorXd x = solve_pointwise(A, b);

        MatrixXd J(d, d);
        for (int k = 0; k < d; ++k) {
            MatrixXd dA(d + 1, d);
            dA.topRows(d) = deta_matrix(k).transpose();
            dA.row(d) = one_form(beta_j, k).transpose();
            VectorXd db = VectorXd::Zero(d + 1);
            if (kind_ == Kind::Liouville) db.head(d) = one_form(eta_j, k);
            VectorXd rhs = db - dA * x;
            J.col(k) = solve_pointwise(A, rhs);
        }
        return J;
    }

private:
    const LHStructure* S_;
    Kind kind_;
};

inline SolvedField liouville_field(const LHStructure& S) {
    return SolvedField(S, SolvedField::Kind::Liouville);
}
inline SolvedField characteristic_field(const LHStructure& S) {
    return SolvedField(S, SolvedField::Kind::Characteristic);
}

// ---------------------------------------------------------------------------
// Axiom verification
// ---------------------------------------------------------------------------

struct WorstCase {
    double value = 0.0;
    Point point;

    // keep the larger (for residual-style maxima)
    void take_max(double v, const Point& p) {
        if (point.empty() || v > value) {
            value = v;
            point = p;
        }
    }
    void take_min(double v, const Point& p) {
        if (point.empty() || v < value) {
            value = v;
            point = p;
        }
    }
};

struct AxiomsResult {
    bool pass = false;
    bool rank_ok = false;
    WorstCase rank_gap;        // min sigma_{2n-2}/sigma_1 over samples (want >> 0)
    WorstCase corank_leak;     // max sigma_{2n-1}/sigma_1 (want ~ 0)
    WorstCase eta_kernel;      // max |eta(C_hat)| / (1+|eta|)   (axiom 2)
    WorstCase beta_margin;     // min |beta(C_hat)| / |beta|     (axiom 3)
    WorstCase deck_eta;        // max deck-invariance residual of eta
    WorstCase deck_beta;
    std::size_t sample_count = 0;
};

struct AxiomOptions {
    double rank_rel_threshold = 1e-8;   // singular-value gap deciding rank
    double beta_floor = 1e-6;           // transversality floor for |beta(C_hat)|
};

inline AxiomsResult check_axioms(const LHStructure& S, const GridSpec& grid, double tol,
                                 const AxiomOptions& opt = {}) {
    auto pts = S.grid_points(grid);
    const int d = S.chart.dim();
    const int want_rank = 2 * S.n - 2;

    struct Row {
        double rank_gap, corank_leak, eta_res, beta_res, deck_eta, deck_beta;
    };
    std::vector<Row> rows(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) {
        PointSample s = sample_structure(S, pts[i]);
        auto sv = singular_values(s.deta_m);
        double smax = sv(0);
        if (!(smax > 0.0)) throw SingularSystem("d(eta) vanishes at a sample", 0.0);
        Row r{};
        r.rank_gap = sv(want_rank - 1) / smax;
        r.corank_leak = want_rank < d ? sv(want_rank) / smax : 0.0;
        VectorXd Chat = kernel_vector(s.deta_m, opt.rank_rel_threshold);
        r.eta_res = std::abs(s.eta_v.dot(Chat)) / (1.0 + s.eta_v.norm());
        r.beta_res = std::abs(s.beta_v.dot(Chat)) / std::max(s.beta_v.norm(), 1e-30);
        r.deck_eta = 0.0;
        r.deck_beta = 0.0;
        if (S.quotient) {
            Point image = S.chart.reduce(S.quotient->apply(s.p));
            MatrixXd L = S.quotient->linear_matrix(d);
            FormValue eta_im = eval_form(S.eta, S.chart, image);
            FormValue beta_im = eval_form(S.beta, S.chart, image);
            VectorXd pe = covector(pullback_along_linear(L, eta_im));
            VectorXd pb = covector(pullback_along_linear(L, beta_im));
            r.deck_eta = (pe - s.eta_v).norm() / (1.0 + s.eta_v.norm());
            r.deck_beta = (pb - s.beta_v).norm() / (1.0 + s.beta_v.norm());
        }
        rows[i] = r;
    });

    AxiomsResult res;
    res.sample_count = pts.size();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        res.rank_gap.take_min(rows[i].rank_gap, pts[i]);
        res.corank_leak.take_max(rows[i].corank_leak, pts[i]);
        res.eta_kernel.take_max(rows[i].eta_res, pts[i]);
        res.beta_margin.take_min(rows[i].beta_res, pts[i]);
        res.deck_eta.take_max(rows[i].deck_eta, pts[i]);
        res.deck_beta.take_max(rows[i].deck_beta, pts[i]);
    }
    res.rank_ok = res.rank_gap.value > opt.rank_rel_threshold &&
                  res.corank_leak.value < opt.rank_rel_threshold;
    res.pass = res.rank_ok && res.eta_kernel.value <= tol &&
               res.beta_margin.value >= opt.beta_floor &&
               res.deck_eta.value <= tol && res.deck_beta.value <= tol;
    return res;
}

// ---------------------------------------------------------------------------
// Linear contact-deformation type, decided through both equivalent criteria:
//   (2) the volume-form positivity of beta^(deta)^(n-1) + (n-1) eta^dbeta^(deta)^(n-2)
//   (3) dbeta(C, zeta) > -1
// The verdict records both margins and whether the sign patterns agree
// pointwise; the strong form additionally requires dbeta(C, zeta) > 0.
// ---------------------------------------------------------------------------

struct DeformationVerdict {
    bool is_linear_type = false;
    bool is_strong_type = false;
    bool agreement = false;
    double margin_cond2 = 0.0;  // min volume ratio over samples
    double margin_cond3 = 0.0;  // min of dbeta(C,zeta)+1
    double value_min = 0.0, value_max = 0.0;  // range of dbeta(C,zeta)
    Point worst_point_cond2, worst_point_cond3;
    long disagreements = 0;
    std::size_t sample_count = 0;
};

// Volume ratio of condition (2) against the orientation form beta^(deta)^(n-1).
inline double cond2_ratio_at(const LHStructure& S, const PointSample& s) {
    FormValue eta_v(S.chart.dim(), 1,
                    std::vector<double>(s.eta_v.data(), s.eta_v.data() + s.eta_v.size()));
    FormValue beta_v(S.chart.dim(), 1,
                     std::vector<double>(s.beta_v.data(), s.beta_v.data() + s.beta_v.size()));
    const auto& idx2 = multi_indices(S.chart.dim(), 2);
    std::vector<double> dc(idx2.size()), bc(idx2.size());
    for (std::size_t r = 0; r < idx2.size(); ++r) {
        dc[r] = s.deta_m(idx2[r][0], idx2[r][1]);
        bc[r] = s.dbeta_m(idx2[r][0], idx2[r][1]);
    }
    FormValue deta_v(S.chart.dim(), 2, std::move(dc));
    FormValue dbeta_v(S.chart.dim(), 2, std::move(bc));

    FormValue orient = wedge(beta_v, wedge_power(deta_v, S.n - 1));
    double den = orient.coeffs.front();
    if (std::abs(den) < 1e-300)
        throw ZeroVolume("orientation form beta ^ (d eta)^(n-1) vanishes at a sample");
    FormValue second = wedge(wedge(eta_v, dbeta_v), wedge_power(deta_v, S.n - 2));
    double num = den + (S.n - 1) * second.coeffs.front();
    return num / den;
}

inline DeformationVerdict deformation_type(const LHStructure& S, const GridSpec& grid) {
    auto pts = S.grid_points(grid);
    std::vector<double> ratio(pts.size()), value(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) {
        PointSample s = sample_structure(S, pts[i]);
        ratio[i] = cond2_ratio_at(S, s);
        value[i] = deformation_value_at(S, s);
    });
    DeformationVerdict v;
    v.sample_count = pts.size();
    WorstCase m2, m3, vrange_min, vrange_max;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        m2.take_min(ratio[i], pts[i]);
        m3.take_min(value[i] + 1.0, pts[i]);
        vrange_min.take_min(value[i], pts[i]);
        vrange_max.take_max(value[i], pts[i]);
        if ((ratio[i] > 0.0) != (value[i] > -1.0)) ++v.disagreements;
    }
    v.margin_cond2 = m2.value;
    v.margin_cond3 = m3.value;
    v.worst_point_cond2 = m2.point;
    v.worst_point_cond3 = m3.point;
    v.value_min = vrange_min.value;
    v.value_max = vrange_max.value;
    v.is_linear_type = v.margin_cond2 > 0.0 && v.margin_cond3 > 0.0;
    v.is_strong_type = vrange_min.value > 0.0;
    v.agreement = v.disagreements == 0;
    return v;
}

// ---------------------------------------------------------------------------
// Bi-contact sign scan of (eta + t beta) ^ (d(eta + t beta))^(n-1) against the
// orientation form.
// ---------------------------------------------------------------------------

struct ContactSignReport {
    double t = 0.0;
    long n_plus = 0, n_minus = 0, n_zero = 0;
    int uniform_sign = 0;           // +1 / -1 when every nonzero sample agrees, else 0
    double max_abs_ratio = 0.0;     // for the t = 0 degeneracy check
    double min_abs_ratio = 0.0;
    std::size_t sample_count = 0;
};

inline ContactSignReport contact_sign(const LHStructure& S, double t, const GridSpec& grid,
                                      double zero_tol = 1e-12) {
    auto pts = S.grid_points(grid);
    std::vector<double> ratios(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) {
        PointSample s = sample_structure(S, pts[i]);
        int d = S.chart.dim();
        std::vector<double> one(static_cast<std::size_t>(d)), dtwo;
        for (int c = 0; c < d; ++c)
            one[static_cast<std::size_t>(c)] = s.eta_v(c) + t * s.beta_v(c);
        FormValue form1(d, 1, std::move(one));
        const auto& idx2 = multi_indices(d, 2);
        dtwo.resize(idx2.size());
        for (std::size_t r = 0; r < idx2.size(); ++r)
            dtwo[r] = s.deta_m(idx2[r][0], idx2[r][1]) + t * s.dbeta_m(idx2[r][0], idx2[r][1]);
        FormValue form2(d, 2, std::move(dtwo));

        std::vector<double> bc(idx2.size());
        for (std::size_t r = 0; r < idx2.size(); ++r) bc[r] = s.deta_m(idx2[r][0], idx2[r][1]);
        FormValue deta_v(d, 2, std::move(bc));
        std::vector<double> bv(s.beta_v.data(), s.beta_v.data() + d);
        FormValue beta_v(d, 1, std::move(bv));

        double den = wedge(beta_v, wedge_power(deta_v, S.n - 1)).coeffs.front();
        if (std::abs(den) < 1e-300)
            throw ZeroVolume("orientation form vanishes at a sample (axiom failure)");
        double num = wedge(form1, wedge_power(form2, S.n - 1)).coeffs.front();
        ratios[i] = num / den;
    });
    ContactSignReport rep;
    rep.t = t;
    rep.sample_count = pts.size();
    rep.min_abs_ratio = std::numeric_limits<double>::infinity();
    for (double r : ratios) {
        rep.max_abs_ratio = std::max(rep.max_abs_ratio, std::abs(r));
        rep.min_abs_ratio = std::min(rep.min_abs_ratio, std::abs(r));
        if (std::abs(r) <= zero_tol)
            ++rep.n_zero;
        else if (r > 0.0)
            ++rep.n_plus;
        else
            ++rep.n_minus;
    }
    if (rep.n_plus > 0 && rep.n_minus == 0 && rep.n_zero == 0) rep.uniform_sign = 1;
    if (rep.n_minus > 0 && rep.n_plus == 0 && rep.n_zero == 0) rep.uniform_sign = -1;
    return rep;
}

// ---------------------------------------------------------------------------
// Normal change of beta: beta' = sign * e^g beta + iota_Xi d(eta).
//
// The operation re-verifies axiom (3) for beta' and evaluates, through two
// independent computation routes, the change-of-normal identity
//   d(beta')(sign e^{-g} C, zeta) = d(beta)(C, zeta) - dg(zeta)
//                                   + sign e^{-g} (d iota_Xi d eta)(C, zeta),
// recording the worst deviation.
// ---------------------------------------------------------------------------

struct NormalChangeReport {
    double identity_worst = 0.0;
    Point identity_worst_point;
    double beta_margin = 0.0;
    std::size_t sample_count = 0;
};

inline LHStructure normal_change(const LHStructure& S, const ExpressionTree& g,
                                 const VectorField& Xi, int sign, const GridSpec& grid,
                                 NormalChangeReport* report = nullptr,
                                 const AxiomOptions& opt = {}) {
    if (sign != 1 && sign != -1) throw Error("normal change sign must be +1 or -1");
    const int d = S.chart.dim();
    ExpressionTree sg = ExpressionTree::constant(static_cast<double>(sign), g.arity());
    ExpressionTree eg = exp(g);

    DifferentialForm xi_deta = interior_product(Xi, S.deta);
    std::vector<ExpressionTree> bp(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i)
        bp[static_cast<std::size_t>(i)] =
            sg * eg * S.beta.coeffs[static_cast<std::size_t>(i)] + xi_deta.coeffs[static_cast<std::size_t>(i)];
    DifferentialForm beta_prime(d, 1, std::move(bp));

    LHStructure out(S.chart, S.eta, beta_prime, S.n, S.quotient);

    auto pts = S.grid_points(grid);
    DifferentialForm d_xi_deta = exterior_derivative(xi_deta);
    std::vector<double> identity_err(pts.size()), beta_res(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) {
        PointSample s = sample_structure(S, pts[i]);
        VectorXd zeta = liouville_at(S, s);
        VectorXd C = characteristic_at(S, s);
        double gj = g.eval(S.chart.reduce(pts[i]));
        Jet1 gjet = g.eval_jet(S.chart.reduce(pts[i]));
        double dg_zeta = 0.0;
        for (int k = 0; k < d; ++k) dg_zeta += gjet.partials[static_cast<std::size_t>(k)] * zeta(k);

        MatrixXd dbp = form_matrix(eval_form(out.dbeta, S.chart, pts[i]));
        VectorXd Cp = sign * std::exp(-gj) * C;
        double lhs = Cp.dot(dbp * zeta);

        MatrixXd dxi = form_matrix(eval_form(d_xi_deta, S.chart, pts[i]));
        double rhs = C.dot(s.dbeta_m * zeta) - dg_zeta +
                     sign * std::exp(-gj) * C.dot(dxi * zeta);
        identity_err[i] = std::abs(lhs - rhs);

        // axiom (3) margin for the new beta
        VectorXd Chat = kernel_vector(s.deta_m, opt.rank_rel_threshold);
        VectorXd bpv = covector(eval_form(out.beta, S.chart, pts[i]));
        beta_res[i] = std::abs(bpv.dot(Chat)) / std::max(bpv.norm(), 1e-30);
    });

    WorstCase worst_id, worst_margin;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        worst_id.take_max(identity_err[i], pts[i]);
        worst_margin.take_min(beta_res[i], pts[i]);
    }
    if (worst_margin.value < opt.beta_floor)
        throw AxiomViolation("normal change degenerates beta on ker d(eta) (margin " +
                             std::to_string(worst_margin.value) + ")");
    if (report) {
        report->identity_worst = worst_id.value;
        report->identity_worst_point = worst_id.point;
        report->beta_margin = worst_margin.value;
        report->sample_count = pts.size();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Closed-manifold scan: the flow derivative of the volume beta ^ (deta)^(n-1)
// must integrate to zero, and dbeta(C, zeta) = n-1 must hold somewhere.
// ---------------------------------------------------------------------------

struct StabHamReport {
    double integrand_sup = 0.0;
    Point sup_point;
    double integral = 0.0;
    double c_min = 0.0, c_max = 0.0;  // range of dbeta(C,zeta) - (n-1)
    std::size_t node_count = 0;
};

inline StabHamReport stabham_scan(const LHStructure& S, const GridSpec& grid) {
    if (!S.quotient)
        throw QuotientMissing("integral scan needs a closed quotient (deck map)");
    if (S.n < 2) throw Error("integral scan needs n >= 2");
    const DeckMap& deck = *S.quotient;
    const int d = S.chart.dim();
    const double nu = deck.nu();
    const double t0 = S.chart.bounds(deck.fiber_index)[0];

    // Tensor quadrature: full-period trapezoid on the angles, trapezoid in
    // u = log(t/t0) over [0, nu]; spectrally accurate in the periodic
    // directions.
    int n_angle = grid.samples_for(deck.angle_index[0], d);
    int n_u = grid.samples_for(deck.fiber_index, d);
    std::vector<Point> nodes;
    std::vector<double> weights;
    for (int a0 = 0; a0 < n_angle; ++a0)
        for (int a1 = 0; a1 < n_angle; ++a1)
            for (int ui = 0; ui <= n_u; ++ui) {
                double u = nu * ui / n_u;
                Point p(static_cast<std::size_t>(d));
                p[static_cast<std::size_t>(deck.angle_index[0])] = static_cast<double>(a0) / n_angle;
                p[static_cast<std::size_t>(deck.angle_index[1])] = static_cast<double>(a1) / n_angle;
                double t = t0 * std::exp(u);
                p[static_cast<std::size_t>(deck.fiber_index)] = t;
                double w = (1.0 / n_angle) * (1.0 / n_angle) * (nu / n_u);
                if (ui == 0 || ui == n_u) w *= 0.5;
                nodes.push_back(std::move(p));
                weights.push_back(w * t);  // dt = t du
            }

    std::vector<double> f(nodes.size()), c(nodes.size());
    parallel_for(nodes.size(), [&](std::size_t i) {
        PointSample s = sample_structure(S, nodes[i]);
        VectorXd zeta = liouville_at(S, s);
        VectorXd C = characteristic_at(S, s);
        // (iota_zeta dbeta + (n-1) beta) ^ (deta)^(n-1), top coefficient
        VectorXd lead = s.dbeta_m.transpose() * zeta + (S.n - 1) * s.beta_v;
        std::vector<double> lead_c(lead.data(), lead.data() + d);
        FormValue lead_f(d, 1, std::move(lead_c));
        const auto& idx2 = multi_indices(d, 2);
        std::vector<double> dc(idx2.size());
        for (std::size_t r = 0; r < idx2.size(); ++r) dc[r] = s.deta_m(idx2[r][0], idx2[r][1]);
        FormValue deta_v(d, 2, std::move(dc));
        f[i] = wedge(lead_f, wedge_power(deta_v, S.n - 1)).coeffs.front();
        c[i] = C.dot(s.dbeta_m * zeta) - (S.n - 1);
    });

    StabHamReport rep;
    rep.node_count = nodes.size();
    WorstCase sup, cmin, cmax;
    double integral = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        sup.take_max(std::abs(f[i]), nodes[i]);
        cmin.take_min(c[i], nodes[i]);
        cmax.take_max(c[i], nodes[i]);
        integral += weights[i] * f[i];
    }
    rep.integrand_sup = sup.value;
    rep.sup_point = sup.point;
    rep.integral = integral;
    rep.c_min = cmin.value;
    rep.c_max = cmax.value;
    return rep;
}

}  // namespace lhskit
