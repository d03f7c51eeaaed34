#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lhskit/dynamics.hpp"

using namespace lhskit;

namespace {

TorusBundle fib_bundle() {
    Eigen::Matrix2i A;
    A << 2, 1, 1, 1;
    return torus_bundle(A);
}

const double kTwoPi = 6.283185307179586476925287;

// test-local 2x2 integer helpers, independent of the library's census path
struct TestMat {
    long long a, b, c, d;
};
TestMat tmul(const TestMat& x, const TestMat& y) {
    return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c,
            x.c * y.b + x.d * y.d};
}
TestMat tpow(TestMat m, int k) {
    TestMat r{1, 0, 0, 1};
    for (int i = 0; i < k; ++i) r = tmul(r, m);
    return r;
}

}  // namespace

TEST_CASE("integrator basics") {
    TorusBundle tb = fib_bundle();
    const LHStructure& S = tb.structure;
    FlowField f = flow_of(torus_bundle_liouville_closed_form(), S.chart);

    SECTION("tau = 0 returns the start state with identity jacobian") {
        Trajectory tr = integrate(f, S.chart, {0.1, 0.2, 1.5}, 0.0, 1e-2, true);
        REQUIRE(tr.states.size() == 1);
        CHECK(tr.states[0] == Point{0.1, 0.2, 1.5});
        CHECK((tr.jacobians[0] - MatrixXd::Identity(3, 3)).norm() == 0.0);
    }

    SECTION("constant angular field advances th1 exactly, mod 1") {
        const int d = 3;
        VectorField X(d, {ExpressionTree::constant(1.0, d), ExpressionTree::constant(0.0, d),
                          ExpressionTree::constant(0.0, d)});
        Trajectory tr =
            integrate(flow_of(X, S.chart), S.chart, {0.9, 0.0, 1.0}, 0.25, 1e-2, false);
        CHECK_THAT(tr.back_state()[0], Catch::Matchers::WithinAbs(0.15, 1e-12));
        CHECK(tr.back_state()[1] == 0.0);
    }

    SECTION("deck wrap applies the transposed matrix to the angles") {
        Point x0 = {0.3, 0.8, 1.0};
        // 1.25 deck periods: exactly one wrap, ending inside the interval
        Trajectory tr = integrate(f, S.chart, x0, 1.25 * tb.nu, 1e-3, false, &*S.quotient);
        CHECK(tr.wraps.back() == 1);
        // A^T (0.3, 0.8) = (1.4, 1.1) = (0.4, 0.1) mod 1
        CHECK_THAT(tr.back_state()[0], Catch::Matchers::WithinAbs(0.4, 1e-9));
        CHECK_THAT(tr.back_state()[1], Catch::Matchers::WithinAbs(0.1, 1e-9));
        CHECK_THAT(tr.back_state()[2],
                   Catch::Matchers::WithinAbs(std::exp(0.25 * tb.nu), 1e-9));
    }

    SECTION("deck equivariance: wrapping commutes with the flow") {
        Point x0 = {0.37, 0.12, 1.4};
        Point y0 = S.quotient->apply(x0);  // same point of the quotient
        Trajectory ta = integrate(f, S.chart, x0, 0.7, 1e-3, false, &*S.quotient);
        Trajectory tb2 = integrate(f, S.chart, y0, 0.7, 1e-3, false, &*S.quotient);
        Point diff = S.chart.wrapped_difference(ta.back_state(), tb2.back_state());
        double norm = 0.0;
        for (double c : diff) norm = std::max(norm, std::abs(c));
        CHECK(norm <= 1e-10);
    }

    SECTION("blow-up and step-size guards") {
        CHECK_THROWS_AS(integrate(f, S.chart, {0.0, 0.0, 1.0}, 40.0, 1e-2, false), BlowUp);
        CHECK_THROWS_AS(integrate(f, S.chart, {0.0, 0.0, 1.0}, 2.0, 0.9, false), StepTooLarge);
    }

    SECTION("endpoint error ratio under step halving is ~16") {
        // closed-form flow t -> e^tau t is the oracle
        auto endpoint_err = [&](double h) {
            Trajectory tr = integrate(f, S.chart, {0.0, 0.0, 1.0}, 1.0, h, false);
            return std::abs(tr.back_state()[2] - std::exp(1.0));
        };
        double ratio = endpoint_err(0.25) / endpoint_err(0.125);
        CHECK(ratio >= 12.0);
        CHECK(ratio <= 20.0);
    }

    SECTION("variational jacobian matches the closed-form flow derivative") {
        // for t d/dt the time-tau flow scales t by e^tau and fixes the angles
        Trajectory tr = integrate(f, S.chart, {0.2, 0.5, 1.1}, 0.8, 1e-3, true);
        MatrixXd want = MatrixXd::Identity(3, 3);
        want(2, 2) = std::exp(0.8);
        CHECK((tr.jacobians.back() - want).norm() <= 1e-9);
    }
}

TEST_CASE("exact expansion law") {
    TorusBundle tb = fib_bundle();
    const LHStructure& S = tb.structure;

    SECTION("torus bundle, tau = 1, step 1e-3") {
        ExpansionReport rep = expansion_check(S, {0.0, 0.0, 1.0}, 1.0, 1e-3);
        CHECK(rep.residual_eta <= 1e-6);
        CHECK(rep.residual_deta <= 1e-6);
        CHECK(rep.wraps >= 1);  // e^1 exceeds e^nu = 2.618^(ln) ... one wrap
    }

    SECTION("tau = 0 has zero residual") {
        ExpansionReport rep = expansion_check(S, {0.3, 0.4, 1.5}, 0.0, 1e-3);
        CHECK(rep.residual_eta <= 1e-12);
        CHECK(rep.residual_deta <= 1e-12);
    }

    SECTION("mcduff, tau = 0.5 from (0, 1, 0)") {
        McDuffModel m = mcduff_model();
        ExpansionReport rep = expansion_check(m.structure, {0.0, 1.0, 0.0}, 0.5, 1e-3);
        CHECK(rep.residual_eta <= 1e-5);
        CHECK(rep.residual_deta <= 1e-5);
    }

    SECTION("residual scales as O(step^4)") {
        double r1 = expansion_check(S, {0.1, 0.9, 1.2}, 1.0, 0.2).residual_eta;
        double r2 = expansion_check(S, {0.1, 0.9, 1.2}, 1.0, 0.1).residual_eta;
        double ratio = r1 / r2;
        CHECK(ratio >= 12.0);
        CHECK(ratio <= 20.0);
    }
}

TEST_CASE("Cartan formula against the finite-difference flow pullback") {
    // L_zeta eta computed as iota_zeta d(eta) + d(eta(zeta)) at tree level,
    // compared with the centered derivative of (phi^t)^* eta.
    TorusBundle tb = fib_bundle();
    const LHStructure& S = tb.structure;
    VectorField zeta = torus_bundle_liouville_closed_form();

    DifferentialForm lie = interior_product(zeta, S.deta);
    {
        // + d(eta(zeta)): assemble the 0-form eta(zeta) and differentiate
        ExpressionTree pairing = ExpressionTree::constant(0.0, 3);
        for (int i = 0; i < 3; ++i)
            pairing = pairing + S.eta.coeffs[static_cast<std::size_t>(i)] *
                                    zeta.components[static_cast<std::size_t>(i)];
        lie = lie + exterior_derivative(DifferentialForm(3, 0, {pairing}));
    }

    FlowField f = flow_of(zeta, S.chart);
    VectorField minus_zeta(3, {-zeta.components[0], -zeta.components[1], -zeta.components[2]});
    FlowField fneg = flow_of(minus_zeta, S.chart);

    const double h = 1e-3;
    SplitMix64 rng(62);
    for (int rep = 0; rep < 10; ++rep) {
        Point p = {rng.next_double(), rng.next_double(), rng.next_in(1.1, 2.4)};
        auto pullback_at = [&](const FlowField& field) {
            Trajectory tr = integrate(field, S.chart, p, h, 1e-4, true);
            VectorXd eta1 = covector(eval_form(S.eta, S.chart, tr.back_state()));
            return VectorXd(tr.jacobians.back().transpose() * eta1);
        };
        VectorXd fd = (pullback_at(f) - pullback_at(fneg)) / (2.0 * h);
        VectorXd sym = covector(eval_form(lie, S.chart, p));
        CHECK((fd - sym).norm() <= 1e-5 * (1.0 + sym.norm()));
    }
}

TEST_CASE("Smith normal form enumerates torus fixed points") {
    SplitMix64 rng(12345);
    for (int iter = 0; iter < 60; ++iter) {
        IMat2 M{{{static_cast<long long>(rng.next_u64() % 9) - 4,
                  static_cast<long long>(rng.next_u64() % 9) - 4},
                 {static_cast<long long>(rng.next_u64() % 9) - 4,
                  static_cast<long long>(rng.next_u64() % 9) - 4}}};
        if (imat_det(M) == 0) continue;
        Snf2 snf = smith_normal_form(M);
        CHECK(snf.d1 * snf.d2 == std::llabs(imat_det(M)));
        CHECK(snf.d1 >= 1);
        CHECK(snf.d2 % snf.d1 == 0);
        CHECK(std::llabs(imat_det(snf.U)) == 1);
        CHECK(std::llabs(imat_det(snf.V)) == 1);
        // U M V = diag(d1, d2)
        IMat2 prod = imat_mul(imat_mul(snf.U, M), snf.V);
        CHECK(prod[0][0] == snf.d1);
        CHECK(prod[1][1] == snf.d2);
        CHECK(prod[0][1] == 0);
        CHECK(prod[1][0] == 0);
    }
}

TEST_CASE("orbit census") {
    Eigen::Matrix2i A;
    A << 2, 1, 1, 1;

    SECTION("counts match |tr(A^k) - 2| = 1, 5, 16, 45 and a brute-force enumeration") {
        CensusResult census = orbit_census(A, 4);
        const long long frozen[4] = {1, 5, 16, 45};
        REQUIRE(census.entries.size() == 4);
        for (int k = 1; k <= 4; ++k) {
            const CensusEntry& e = census.entries[static_cast<std::size_t>(k - 1)];
            CHECK(e.algebraic_count == frozen[k - 1]);
            CHECK(e.counts_match);
            // independent oracle: brute-force solutions of (A^k - I) x = 0 mod N
            TestMat Ak = tpow({2, 1, 1, 1}, k);
            TestMat Mk{Ak.a - 1, Ak.b, Ak.c, Ak.d - 1};
            long long N = std::llabs(Mk.a * Mk.d - Mk.b * Mk.c);
            long long count = 0;
            for (long long i = 0; i < N; ++i)
                for (long long j = 0; j < N; ++j)
                    if ((Mk.a * i + Mk.b * j) % N == 0 && (Mk.c * i + Mk.d * j) % N == 0)
                        ++count;
            CHECK(count == e.algebraic_count);
            for (const auto& orb : e.orbits) {
                CHECK(orb.residual <= 1e-10);
                CHECK(orb.period == Catch::Approx(k * census.nu));
            }
        }
    }

    SECTION("census points and enumerated rationals are in bijection") {
        CensusResult census = orbit_census(A, 4);
        for (const auto& entry : census.entries) {
            for (const auto& orb : entry.orbits) {
                double th1 = static_cast<double>(orb.rational[0]) / orb.rational[1];
                double th2 = static_cast<double>(orb.rational[2]) / orb.rational[3];
                double d1 = std::abs(orb.section_point[0] - th1);
                double d2 = std::abs(orb.section_point[1] - th2);
                d1 = std::min(d1, 1.0 - d1);
                d2 = std::min(d2, 1.0 - d2);
                CHECK(d1 <= 1e-6);
                CHECK(d2 <= 1e-6);
            }
        }
    }

    SECTION("the origin is always a fixed point") {
        CensusResult census = orbit_census(A, 1);
        REQUIRE(census.entries[0].orbits.size() == 1);
        CHECK(census.entries[0].orbits[0].section_point[0] == 0.0);
        CHECK(census.entries[0].orbits[0].section_point[1] == 0.0);
    }

    SECTION("parabolic matrices are rejected") {
        Eigen::Matrix2i P;
        P << 1, 1, 0, 1;
        CHECK_THROWS_AS(orbit_census(P, 2), NotHyperbolic);
    }
}

TEST_CASE("Lagrangian cylinders over periodic orbits") {
    Eigen::Matrix2i A;
    A << 2, 1, 1, 1;
    TorusBundle tb = fib_bundle();
    SuspensionDomain D = build_suspension(tb.structure, 0.1, GridSpec::uniform(6, 50, 3));
    CensusResult census = orbit_census(A, 2);
    const PeriodicOrbit& orbit1 = census.entries[0].orbits[0];

    SECTION("k = 1 orbit over the origin, eps = 0.05") {
        LagrangianCylinder cyl = build_cylinder(D, orbit1, 0.05);
        CHECK(cyl.max_lambda_tangent <= 1e-9);
        CHECK(cyl.max_lambda_normal <= 1e-12);
        CHECK(cyl.max_boundary_residual <= 1e-8);
        CHECK(cyl.n_u == 64);
        CHECK(cyl.n_s == 16);
    }

    SECTION("a genuine period-2 orbit also carries a cylinder") {
        REQUIRE(census.entries[1].orbits.size() == 5);
        // pick an orbit that is not the origin
        const PeriodicOrbit* orb = nullptr;
        for (const auto& o : census.entries[1].orbits)
            if (std::abs(o.section_point[0]) + std::abs(o.section_point[1]) > 0.1) orb = &o;
        REQUIRE(orb != nullptr);
        LagrangianCylinder cyl = build_cylinder(D, *orb, 0.05);
        CHECK(cyl.max_lambda_tangent <= 1e-9);
        CHECK(cyl.max_boundary_residual <= 1e-8);
    }

    SECTION("eps = 0 degenerates to the orbit itself") {
        CylinderOptions opt;
        opt.n_s = 1;
        LagrangianCylinder cyl = build_cylinder(D, orbit1, 0.0, opt);
        CHECK(cyl.max_lambda_tangent <= 1e-9);
    }

    SECTION("a perturbed non-orbit loop violates exactness at first order") {
        SampledLoop loop = sample_orbit_loop(D.base, orbit1, 64, 5e-3);
        const double delta = 1e-3;
        for (std::size_t i = 0; i < loop.states.size(); ++i)
            loop.states[i][0] += delta * std::sin(kTwoPi * static_cast<double>(i) /
                                                  static_cast<double>(loop.states.size()));
        bool threw = false;
        double value = 0.0;
        try {
            verify_cylinder(D, loop, orbit1, 0.05);
        } catch (const ExactnessViolation& e) {
            threw = true;
            value = e.value;
        }
        CHECK(threw);
        // first order in the perturbation size: well above tolerance, well
        // below O(1)
        CHECK(value > 1e-4);
        CHECK(value < 1.0);
    }
}
