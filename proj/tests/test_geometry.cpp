#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oblique/geometry.hpp"

using namespace oblique;

TEST_CASE("graph membership uses g = psi - y^d") {
    auto dom = flat_domain2(1.0);
    CHECK(dom.g(Vec<2>{0.3, 0.4}) == Catch::Approx(0.6));
    CHECK(dom.inside(Vec<2>{0.3, 0.4}));
    CHECK_FALSE(dom.inside(Vec<2>{0.3, 1.5}));
    CHECK(dom.g(Vec<2>{0.0, 1.0}) == 0.0);
}

TEST_CASE("lipschitz_constant on pinned graphs") {
    SECTION("flat graph has constant zero") {
        auto dom = flat_domain2(0.7);
        CHECK(lipschitz_constant<2>(dom, 101) == 0.0);
    }
    SECTION("0.05|s| recovers the slope to rounding") {
        auto psi = [](const Vec<1>& s) { return 0.05 * std::abs(s[0]); };
        double lip = lipschitz_constant(psi, -1.0, 1.0, 201);  // step 0.01
        CHECK(lip == Catch::Approx(0.05).margin(1e-12));
    }
    SECTION("0.1 sin(4s) lands just under the true 0.4") {
        auto psi = [](const Vec<1>& s) { return 0.1 * std::sin(4.0 * s[0]); };
        double lip = lipschitz_constant(psi, -1.0, 1.0, 2001);  // step 1e-3
        CHECK(lip >= 0.399);
        CHECK(lip <= 0.4);
    }
    SECTION("monotone under nested refinement") {
        auto psi = [](const Vec<1>& s) { return 0.1 * std::sin(4.0 * s[0]); };
        double prev = 0.0;
        for (int n : {11, 21, 41, 81, 161}) {
            double cur = lipschitz_constant(psi, -1.0, 1.0, n);
            CHECK(cur >= prev);
            prev = cur;
        }
    }
    SECTION("two tangential dimensions") {
        auto dom = sine_domain3(0.05, 2.0, 3.0, 0.0);
        double lip = lipschitz_constant<3>(dom, 160);
        CHECK(lip <= dom.eps0 + 1e-9);
        CHECK(lip >= 0.09);
    }
    SECTION("degenerate sampling rejected") {
        auto psi = [](const Vec<1>&) { return 0.0; };
        CHECK_THROWS_AS(lipschitz_constant(psi, -1.0, 1.0, 1), std::invalid_argument);
    }
}

TEST_CASE("outward_normal matches hand values") {
    SECTION("flat graph") {
        auto dom = flat_domain2(0.0);
        Vec<2> n = outward_normal<2>(dom, Vec<1>{0.4});
        CHECK(n[0] == 0.0);
        CHECK(n[1] == -1.0);
    }
    SECTION("half slope") {
        auto dom = tilted_domain2(0.5, 0.0);
        Vec<2> n = outward_normal<2>(dom, Vec<1>{-2.0});
        double r5 = std::sqrt(1.25);
        CHECK(n[0] == Catch::Approx(0.5 / r5).epsilon(1e-12));
        CHECK(n[1] == Catch::Approx(-1.0 / r5).epsilon(1e-12));
        CHECK(norm<2>(n) == Catch::Approx(1.0).epsilon(1e-14));
    }
    SECTION("sine graph at the origin") {
        auto dom = sine_domain2(0.1, 1.0, 0.0);
        Vec<2> n = outward_normal<2>(dom, Vec<1>{0.0});
        double r = std::sqrt(1.01);
        CHECK(n[0] == Catch::Approx(0.1 / r).epsilon(1e-12));
        CHECK(n[1] == Catch::Approx(-1.0 / r).epsilon(1e-12));
    }
    SECTION("kink refuses a pointwise normal") {
        auto dom = sawtooth_domain2(0.1, 0.5, 1.0);
        CHECK_THROWS_AS(outward_normal<2>(dom, Vec<1>{0.0}), non_differentiable_error);
        CHECK_NOTHROW(outward_normal<2>(dom, Vec<1>{0.1}));
    }
}

TEST_CASE("check_obliqueness min ratio and pass flag") {
    auto dom = flat_domain2(0.0, 0.5);
    std::vector<Vec<1>> samples;
    for (int i = 0; i <= 8; ++i) samples.push_back(Vec<1>{-0.5 + i * 0.125});

    SECTION("diagonal field clears delta = 1/2") {
        ObliqueField<2> f;
        f.b = [](const Vec<2>&) { return Vec<2>{1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0)}; };
        auto rep = check_obliqueness<2>(dom, f, samples);
        CHECK(rep.min_ratio == Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
        CHECK(rep.pass);
    }
    SECTION("tangential field fails") {
        ObliqueField<2> f;
        f.b = [](const Vec<2>&) { return Vec<2>{1.0, 0.0}; };
        auto rep = check_obliqueness<2>(dom, f, samples);
        CHECK(rep.min_ratio == Catch::Approx(0.0).margin(1e-14));
        CHECK_FALSE(rep.pass);
    }
    SECTION("vanishing field is rejected") {
        ObliqueField<2> f;
        f.b = [](const Vec<2>&) { return Vec<2>{0.0, 0.0}; };
        CHECK_THROWS_AS(check_obliqueness<2>(dom, f, samples), degenerate_field_error);
    }
    SECTION("kink samples are skipped, not fatal") {
        auto saw = sawtooth_domain2(0.1, 0.5, 1.0, 0.0, 0.5);
        ObliqueField<2> f;
        f.b = [](const Vec<2>&) { return Vec<2>{0.0, -1.0}; };
        std::vector<Vec<1>> s2{Vec<1>{0.0}, Vec<1>{0.1}};  // first one is a kink
        auto rep = check_obliqueness<2>(saw, f, s2);
        CHECK(rep.pass);
        CHECK(rep.min_ratio == Catch::Approx(1.0 / std::sqrt(1.01)).epsilon(1e-12));
    }
}

TEST_CASE("oblique_frame rotates the chart onto the field direction") {
    SECTION("vertical field is the identity chart") {
        auto dom = flat_domain2(0.0, 0.5);
        Frame<2> fr;
        auto out = oblique_frame<2>(dom, Vec<2>{0.0, 0.0}, Vec<2>{0.0, -1.0}, &fr);
        CHECK(std::abs(out.psi(Vec<1>{-0.3})) < 1e-10);
        CHECK(std::abs(out.psi(Vec<1>{0.1})) < 1e-10);
        CHECK(std::abs(out.dpsi(Vec<1>{0.2})[0]) < 1e-9);
        CHECK(out.eps0 < 1e-8);
        Vec<2> round = fr.to_local(fr.to_global(Vec<2>{0.3, -0.2}));
        CHECK(round[0] == Catch::Approx(0.3).margin(1e-14));
        CHECK(round[1] == Catch::Approx(-0.2).margin(1e-14));
    }
    SECTION("tilted field turns a flat graph into the matching line") {
        const double phi = 0.3;
        auto dom = flat_domain2(0.0, 0.5);
        Frame<2> fr;
        auto out = oblique_frame<2>(dom, Vec<2>{0.0, 0.0}, Vec<2>{std::sin(phi), std::cos(phi)}, &fr);
        CHECK(out.psi(Vec<1>{0.2}) == Catch::Approx(0.2 * std::tan(phi)).margin(1e-9));
        CHECK(out.dpsi(Vec<1>{0.37})[0] == Catch::Approx(std::tan(phi)).margin(1e-9));
        CHECK(out.eps0 == Catch::Approx(std::tan(phi)).margin(1e-6));

        // Root residual: the recovered graph point must sit on the old graph
        // to the advertised 1e-12*R0.
        double s = -0.41;
        Vec<2> x = fr.to_global(Vec<2>{s, out.psi(Vec<1>{s})});
        CHECK(std::abs(x[1] - 0.0) < 1e-12 * dom.R0);
    }
    SECTION("applying the frame twice is idempotent") {
        const double phi = 0.3;
        auto dom = flat_domain2(0.0, 0.5);
        auto once = oblique_frame<2>(dom, Vec<2>{0.0, 0.0}, Vec<2>{std::sin(phi), std::cos(phi)});
        auto twice = oblique_frame<2>(once, Vec<2>{0.0, 0.0}, Vec<2>{0.0, 1.0});
        for (double s : {-0.2, 0.05, 0.2})
            CHECK(twice.psi(Vec<1>{s}) == Catch::Approx(once.psi(Vec<1>{s})).margin(1e-9));
    }
    SECTION("gradient oscillation stays under 3*eps0 for a sine graph") {
        auto dom = sine_domain2(0.05, 2.0, 0.0, 0.5);
        REQUIRE(dom.eps0 == Catch::Approx(0.1));
        auto out = oblique_frame<2>(dom, Vec<2>{0.0, 0.0}, Vec<2>{0.1, -1.0});
        CHECK(std::abs(out.psi(Vec<1>{0.0})) < 1e-10);
        CHECK(out.eps0 < 3.0 * dom.eps0);
    }
    SECTION("off-graph anchor and degenerate field are rejected") {
        auto dom = flat_domain2(0.0, 0.5);
        CHECK_THROWS_AS(oblique_frame<2>(dom, Vec<2>{0.0, 0.5}, Vec<2>{0.0, -1.0}),
                        std::invalid_argument);
        CHECK_THROWS_AS(oblique_frame<2>(dom, Vec<2>{0.0, 0.0}, Vec<2>{0.0, 0.0}),
                        degenerate_field_error);
    }
}

TEST_CASE("cyl_neighborhood shifts the chart and checks the height band") {
    SECTION("flat chart sits mid-band") {
        auto dom = flat_domain2(0.0, 0.5);
        auto nb = cyl_neighborhood<2>(dom, 0.2);
        CHECK(nb.dom.psi(Vec<1>{0.0}) == Catch::Approx(1.2));
        CHECK(nb.in_omega(Vec<2>{0.0, 0.5}));
        CHECK_FALSE(nb.in_omega(Vec<2>{0.0, 1.3}));
        CHECK_FALSE(nb.in_omega(Vec<2>{0.25, 0.5}));
        CHECK(nb.in_q(Vec<2>{0.1, 2.3}));
        CHECK_FALSE(nb.in_q(Vec<2>{0.1, 2.5}));
    }
    SECTION("radius precondition") {
        auto dom = flat_domain2(0.0, 0.5);
        CHECK_THROWS_AS(cyl_neighborhood<2>(dom, 0.5), std::invalid_argument);
    }
    SECTION("steep chart breaches the 5R/delta ceiling") {
        GraphDomain<2> dom;
        dom.delta = 0.5;
        dom.R0 = 1.0;
        dom.psi = [&](const Vec<1>& s) { return (2.0 / 0.5) * std::abs(s[0]); };
        dom.dpsi = [&](const Vec<1>& s) { return Vec<1>{s[0] < 0 ? -4.0 : 4.0}; };
        CHECK_THROWS_AS(cyl_neighborhood<2>(dom, 0.25), geometry_error);
    }
}
