#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lhskit/forms.hpp"
#include "lhskit/models.hpp"
#include "lhskit/rng.hpp"

using namespace lhskit;

namespace {

Chart torus_chart() {
    return Chart({"th1", "th2", "t"}, {true, true, false}, {{{0., 1.}}, {{0., 1.}}, {{1., 2.618}}});
}

ExpressionTree rand_coeff(SplitMix64& rng, int arity) {
    // smooth in-domain coefficients: polynomials in t mixed with trig in angles
    ExpressionTree th1 = ExpressionTree::variable(0, arity);
    ExpressionTree th2 = ExpressionTree::variable(1, arity);
    ExpressionTree t = ExpressionTree::variable(2, arity);
    ExpressionTree a = ExpressionTree::constant(rng.next_in(-1.0, 1.0), arity);
    ExpressionTree b = ExpressionTree::constant(rng.next_in(-1.0, 1.0), arity);
    ExpressionTree c = ExpressionTree::constant(rng.next_in(-1.0, 1.0), arity);
    const double two_pi = 6.283185307179586476925287;
    return a * sin(two_pi * th1) + b * cos(two_pi * th2) * t + c * t * t;
}

Point rand_point(SplitMix64& rng, const Chart& chart) {
    Point p(static_cast<std::size_t>(chart.dim()));
    for (int i = 0; i < chart.dim(); ++i)
        p[static_cast<std::size_t>(i)] = chart.periodic(i)
                                             ? rng.next_double()
                                             : rng.next_in(chart.bounds(i)[0], chart.bounds(i)[1]);
    return p;
}

}  // namespace

TEST_CASE("exterior derivative of linear coefficient forms") {
    Chart c = torus_chart();
    const int d = 3;
    ExpressionTree t = ExpressionTree::variable(2, d);
    ExpressionTree zero = ExpressionTree::constant(0.0, d);

    SECTION("d(t dth1) = dt ^ dth1") {
        DifferentialForm f(d, 1, {t, zero, zero});
        DifferentialForm df = exterior_derivative(f);
        // increasing index order: (th1,th2), (th1,t), (th2,t)
        Point p = {0.2, 0.9, 1.7};
        FormValue v = eval_form(df, c, p);
        CHECK(v.coeffs[0] == 0.0);
        CHECK(v.coeffs[1] == -1.0);  // dt ^ dth1 = -dth1 ^ dt
        CHECK(v.coeffs[2] == 0.0);
    }

    SECTION("d of the torus-bundle beta matches the hand computation") {
        // beta = t^{-1} w . dtheta, so d(beta) = -t^{-2} dt ^ (w . dtheta):
        // coefficient of dth_i ^ dt is +w_i t^{-2}
        Eigen::Matrix2i A;
        A << 2, 1, 1, 1;
        TorusBundle tb = torus_bundle(A);
        Point p = {0.31, 0.77, 1.9};
        FormValue v = eval_form(tb.structure.dbeta, tb.structure.chart, p);
        double t2 = 1.9 * 1.9;
        CHECK_THAT(v.coeffs[0], Catch::Matchers::WithinAbs(0.0, 1e-15));
        CHECK_THAT(v.coeffs[1], Catch::Matchers::WithinAbs(tb.w(0) / t2, 1e-14));
        CHECK_THAT(v.coeffs[2], Catch::Matchers::WithinAbs(tb.w(1) / t2, 1e-14));
    }
}

TEST_CASE("d(d f) vanishes to machine precision on random forms") {
    Chart c = torus_chart();
    SplitMix64 rng(31415);
    for (int iter = 0; iter < 50; ++iter) {
        // degree 0
        DifferentialForm f0(3, 0, {rand_coeff(rng, 3)});
        DifferentialForm ddf0 = exterior_derivative(exterior_derivative(f0));
        // degree 1
        DifferentialForm f1(3, 1, {rand_coeff(rng, 3), rand_coeff(rng, 3), rand_coeff(rng, 3)});
        DifferentialForm ddf1 = exterior_derivative(exterior_derivative(f1));
        for (int rep = 0; rep < 5; ++rep) {
            Point p = rand_point(rng, c);
            for (const auto& coeff : eval_form(ddf0, c, p).coeffs)
                CHECK_THAT(coeff, Catch::Matchers::WithinAbs(0.0, 1e-12));
            for (const auto& coeff : eval_form(ddf1, c, p).coeffs)
                CHECK_THAT(coeff, Catch::Matchers::WithinAbs(0.0, 1e-12));
        }
    }
}

TEST_CASE("wedge is graded-commutative and kills repeated one-forms") {
    Chart c = torus_chart();
    SplitMix64 rng(99887);
    for (int iter = 0; iter < 40; ++iter) {
        DifferentialForm a(3, 1, {rand_coeff(rng, 3), rand_coeff(rng, 3), rand_coeff(rng, 3)});
        DifferentialForm b(3, 1, {rand_coeff(rng, 3), rand_coeff(rng, 3), rand_coeff(rng, 3)});
        Point p = rand_point(rng, c);
        FormValue ab = eval_form(wedge(a, b), c, p);
        FormValue ba = eval_form(wedge(b, a), c, p);
        for (std::size_t i = 0; i < ab.coeffs.size(); ++i)
            CHECK_THAT(ab.coeffs[i], Catch::Matchers::WithinAbs(-ba.coeffs[i], 1e-12));
        FormValue aa = eval_form(wedge(a, a), c, p);
        for (const auto& coeff : aa.coeffs)
            CHECK_THAT(coeff, Catch::Matchers::WithinAbs(0.0, 1e-12));
    }
}

TEST_CASE("torus-bundle wedge identities") {
    Eigen::Matrix2i A;
    A << 2, 1, 1, 1;
    TorusBundle tb = torus_bundle(A);
    const LHStructure& S = tb.structure;
    Point p = {0.0, 0.0, 1.0};

    SECTION("beta ^ d(eta) is the (w x v) t^{-1} volume multiple") {
        FormValue v = eval_form(wedge(S.beta, S.deta), S.chart, p);
        // hand computation: coefficient of dth1^dth2^dt equals (w2 v1 - w1 v2)/t
        double expected = (tb.w(1) * tb.v(0) - tb.w(0) * tb.v(1)) / p[2];
        REQUIRE(v.coeffs.size() == 1);
        CHECK_THAT(v.coeffs[0], Catch::Matchers::WithinAbs(expected, 1e-12));
        CHECK(std::abs(v.coeffs[0]) > 1.0);  // nonzero multiple
    }

    SECTION("eta ^ d(eta) = 0 everywhere (ker eta contains ker d eta)") {
        SplitMix64 rng(5);
        DifferentialForm form = wedge(S.eta, S.deta);
        for (int rep = 0; rep < 25; ++rep) {
            Point q = rand_point(rng, S.chart);
            for (const auto& coeff : eval_form(form, S.chart, q).coeffs)
                CHECK_THAT(coeff, Catch::Matchers::WithinAbs(0.0, 1e-12));
        }
    }
}

TEST_CASE("Leibniz rule holds pointwise") {
    Chart c = torus_chart();
    SplitMix64 rng(777);
    for (int iter = 0; iter < 30; ++iter) {
        DifferentialForm a(3, 1, {rand_coeff(rng, 3), rand_coeff(rng, 3), rand_coeff(rng, 3)});
        DifferentialForm b(3, 1, {rand_coeff(rng, 3), rand_coeff(rng, 3), rand_coeff(rng, 3)});
        DifferentialForm lhs = exterior_derivative(wedge(a, b));
        DifferentialForm rhs = wedge(exterior_derivative(a), b) - wedge(a, exterior_derivative(b));
        Point p = rand_point(rng, c);
        FormValue lv = eval_form(lhs, c, p);
        FormValue rv = eval_form(rhs, c, p);
        for (std::size_t i = 0; i < lv.coeffs.size(); ++i)
            CHECK_THAT(lv.coeffs[i], Catch::Matchers::WithinAbs(rv.coeffs[i], 1e-10));
    }
}

TEST_CASE("interior product identities") {
    Eigen::Matrix2i A;
    A << 2, 1, 1, 1;
    TorusBundle tb = torus_bundle(A);
    const LHStructure& S = tb.structure;
    const int d = 3;
    VectorField t_dt(d, {ExpressionTree::constant(0.0, d), ExpressionTree::constant(0.0, d),
                         ExpressionTree::variable(2, d)});

    SECTION("iota_{t dt} d(eta) recovers eta") {
        // d(eta) = dt ^ (v . dtheta); contracting with t d/dt gives t v . dtheta = eta
        DifferentialForm contracted = interior_product(t_dt, S.deta);
        SplitMix64 rng(11);
        for (int rep = 0; rep < 20; ++rep) {
            Point p = rand_point(rng, S.chart);
            FormValue got = eval_form(contracted, S.chart, p);
            FormValue want = eval_form(S.eta, S.chart, p);
            for (std::size_t i = 0; i < got.coeffs.size(); ++i)
                CHECK_THAT(got.coeffs[i], Catch::Matchers::WithinAbs(want.coeffs[i], 1e-12));
        }
    }

    SECTION("iota_{t dt} d(beta) = -beta") {
        DifferentialForm contracted = interior_product(t_dt, S.dbeta);
        SplitMix64 rng(12);
        for (int rep = 0; rep < 20; ++rep) {
            Point p = rand_point(rng, S.chart);
            FormValue got = eval_form(contracted, S.chart, p);
            FormValue want = eval_form(S.beta, S.chart, p);
            for (std::size_t i = 0; i < got.coeffs.size(); ++i)
                CHECK_THAT(got.coeffs[i], Catch::Matchers::WithinAbs(-want.coeffs[i], 1e-12));
        }
    }

    SECTION("zero field contracts to zero; iota twice vanishes") {
        VectorField zero = VectorField::zero(d, d);
        DifferentialForm z = interior_product(zero, S.deta);
        Point p = {0.1, 0.2, 1.5};
        for (const auto& coeff : eval_form(z, S.chart, p).coeffs) CHECK(coeff == 0.0);
        DifferentialForm twice = interior_product(t_dt, interior_product(t_dt, S.deta));
        for (const auto& coeff : eval_form(twice, S.chart, p).coeffs)
            CHECK_THAT(coeff, Catch::Matchers::WithinAbs(0.0, 1e-13));
    }

    SECTION("degree errors") {
        DifferentialForm f0(d, 0, {ExpressionTree::constant(1.0, d)});
        CHECK_THROWS_AS(interior_product(t_dt, f0), DegreeError);
        DifferentialForm top = wedge(S.eta, wedge(S.beta, S.deta));
        CHECK(top.degree == 3);
        CHECK_THROWS_AS(exterior_derivative(top), DegreeError);
    }
}

TEST_CASE("pointwise linear solves") {
    SECTION("identity system") {
        MatrixXd I = MatrixXd::Identity(3, 3);
        VectorXd e1 = VectorXd::Zero(3);
        e1(0) = 1.0;
        VectorXd x = solve_pointwise(I, e1);
        CHECK((x - e1).norm() == 0.0);
    }
    SECTION("rank-deficient system with rhs outside the image") {
        Eigen::Matrix2i A;
        A << 2, 1, 1, 1;
        TorusBundle tb = torus_bundle(A);
        PointSample s = sample_structure(tb.structure, {0.3, 0.4, 1.2});
        // d(eta) has corank one; a generic rhs is outside its image
        VectorXd bad = VectorXd::Ones(3);
        CHECK_THROWS_AS(solve_pointwise(s.deta_m, bad), SingularSystem);
    }
    SECTION("ill conditioned") {
        MatrixXd M = MatrixXd::Identity(2, 2);
        M(1, 1) = 1e-10;
        VectorXd b = VectorXd::Ones(2);
        CHECK_THROWS_AS(solve_pointwise(M, b), IllConditioned);
    }
}

TEST_CASE("pullback along linear maps") {
    Eigen::Matrix2i A;
    A << 2, 1, 1, 1;
    TorusBundle tb = torus_bundle(A);
    const LHStructure& S = tb.structure;
    const DeckMap& deck = *S.quotient;

    SECTION("identity map") {
        Point p = {0.23, 0.71, 1.4};
        FormValue v = eval_form(S.eta, S.chart, p);
        FormValue pulled = pullback_along_linear(MatrixXd::Identity(3, 3), v);
        for (std::size_t i = 0; i < v.coeffs.size(); ++i)
            CHECK(pulled.coeffs[i] == v.coeffs[i]);
    }

    SECTION("deck map preserves eta and beta at 100 random points") {
        SplitMix64 rng(2718);
        MatrixXd L = deck.linear_matrix(3);
        for (int rep = 0; rep < 100; ++rep) {
            Point p = rand_point(rng, S.chart);
            Point image = S.chart.reduce(deck.apply(p));
            for (const DifferentialForm* f : {&S.eta, &S.beta}) {
                FormValue at_image = eval_form(*f, S.chart, image);
                FormValue pulled = pullback_along_linear(L, at_image);
                FormValue here = eval_form(*f, S.chart, p);
                for (std::size_t i = 0; i < here.coeffs.size(); ++i)
                    CHECK_THAT(pulled.coeffs[i],
                               Catch::Matchers::WithinAbs(here.coeffs[i], 1e-10));
            }
        }
    }

    SECTION("linear scaling doubles dth1") {
        FormValue dth1(3, 1, {1.0, 0.0, 0.0});
        MatrixXd M = MatrixXd::Identity(3, 3);
        M(0, 0) = 2.0;
        FormValue pulled = pullback_along_linear(M, dth1);
        CHECK(pulled.coeffs[0] == 2.0);
        CHECK(pulled.coeffs[1] == 0.0);
    }

    SECTION("functoriality under composition") {
        SplitMix64 rng(55);
        for (int rep = 0; rep < 20; ++rep) {
            MatrixXd M1 = MatrixXd::Identity(3, 3), M2 = MatrixXd::Identity(3, 3);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) {
                    M1(i, j) += 0.3 * rng.next_in(-1, 1);
                    M2(i, j) += 0.3 * rng.next_in(-1, 1);
                }
            std::vector<double> coeffs(3);
            for (auto& cc : coeffs) cc = rng.next_in(-2, 2);
            FormValue twoform(3, 2, std::move(coeffs));
            FormValue once = pullback_along_linear(M1, pullback_along_linear(M2, twoform));
            FormValue composed = pullback_along_linear(MatrixXd(M2 * M1), twoform);
            for (std::size_t i = 0; i < once.coeffs.size(); ++i)
                CHECK_THAT(once.coeffs[i],
                           Catch::Matchers::WithinAbs(composed.coeffs[i], 1e-12));
        }
    }

    SECTION("singular map rejected") {
        FormValue v(3, 1, {1.0, 0.0, 0.0});
        CHECK_THROWS_AS(pullback_along_linear(MatrixXd::Zero(3, 3), v), SingularMap);
    }
}
