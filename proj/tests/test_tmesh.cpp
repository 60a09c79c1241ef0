#include "asts/drivers.hpp"
#include "asts/tmesh.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <random>
#include <set>
#include <stdexcept>

using namespace asts;

namespace {

Dyadic total_area(const TMesh& m) {
    Dyadic a(0);
    for (int id : m.leaves()) {
        const auto& r = m.node(id).rect;
        // width * height as a dyadic: both are powers of two times small integers
        Dyadic w = r.width(), h = r.height();
        a += Dyadic::from_parts(w.numerator() * h.numerator(), w.exponent() + h.exponent());
    }
    return a;
}

bool interiors_disjoint(const TMesh& m) {
    const auto leaves = m.leaves();
    for (std::size_t i = 0; i < leaves.size(); ++i)
        for (std::size_t j = i + 1; j < leaves.size(); ++j)
            if (m.node(leaves[i]).rect.intersects_open(m.node(leaves[j]).rect)) return false;
    return true;
}

std::vector<TMesh> random_corpus(int count) {
    std::vector<TMesh> out;
    const DegreePair degrees[] = {{2, 2}, {3, 3}, {4, 4}, {2, 3}, {3, 2}};
    for (int s = 0; s < count; ++s) {
        const auto p = degrees[s % 5];
        out.push_back(random_admissible_mesh(p, {p[0] + 4, p[1] + 5}, 40, 1000 + s));
    }
    return out;
}

}  // namespace

TEST_CASE("initial mesh tiles the index domain with unit cells") {
    TMesh a({2, 2}, {7, 7});
    CHECK(a.num_elements() == 81);
    CHECK(a.max_generation() == 0);
    TMesh b({3, 3}, {8, 8});
    CHECK(b.num_elements() == 121);
    CHECK(total_area(b) == Dyadic(121));
    CHECK(check_admissible(b).admissible);
    CHECK(generation_gap_audit(b) == 0);
    CHECK_THROWS_AS(TMesh({3, 3}, {3, 8}), std::invalid_argument);
}

TEST_CASE("bisection direction follows generation parity") {
    TMesh m({3, 3}, {8, 8});
    auto kids = m.bisect_element({3, 3, 4, 4});
    REQUIRE(kids.size() == 2);
    CHECK(m.node(kids[0]).rect == IndexRect{3, 3, Dyadic::from_parts(7, 1), 4});
    CHECK(m.node(kids[1]).rect == IndexRect{Dyadic::from_parts(7, 1), 3, 4, 4});
    CHECK(m.node(kids[0]).generation == 1);
    auto grand = m.bisect_node(kids[0]);
    REQUIRE(grand.size() == 2);
    CHECK(m.node(grand[0]).rect.height() == Dyadic::from_parts(1, 1));
    CHECK(m.node(grand[0]).rect.width() == Dyadic::from_parts(1, 1));
    CHECK(m.node(grand[0]).generation == 2);
    CHECK(m.num_elements() == 123);
    CHECK_THROWS_AS(m.bisect_element({3, 3, 4, 4}), std::invalid_argument);
}

TEST_CASE("frame cells keep their rectangle and gain a generation") {
    TMesh m({2, 2}, {7, 7});
    auto kids = m.bisect_element({0, 3, 1, 4});
    REQUIRE(kids.size() == 1);
    CHECK(m.node(kids[0]).rect == IndexRect{0, 3, 1, 4});
    CHECK(m.node(kids[0]).generation == 1);
    CHECK(m.num_elements() == 81);
    // the next bisection is horizontal and the y range is not degenerate
    auto next = m.bisect_node(kids[0]);
    CHECK(next.size() == 2);
}

TEST_CASE("neighbourhood extents") {
    auto D = neighborhood_extent({3, 3}, 0);
    CHECK(D.dx == Dyadic::from_parts(3, 1));
    CHECK(D.dy == Dyadic::from_parts(5, 1));
    for (int g = 0; g < 8; ++g) {
        auto a = neighborhood_extent({2, 2}, g), b = neighborhood_extent({2, 2}, g + 2);
        CHECK(b.dx == a.dx.half());
        CHECK(b.dy == a.dy.half());
    }
}

TEST_CASE("neighbourhood agrees with a brute-force distance scan") {
    TMesh m({3, 3}, {14, 14});
    const auto nb = m.neighborhood(IndexRect{7, 7, 8, 8});
    CHECK(nb.size() == 15);
    std::set<IndexRect> got(nb.begin(), nb.end());
    CHECK(got.count(IndexRect{7, 7, 8, 8}) == 1);
    for (std::int64_t i = 6; i <= 8; ++i)
        for (std::int64_t j = 5; j <= 9; ++j) CHECK(got.count(IndexRect{i, j, i + 1, j + 1}) == 1);

    for (const auto& mesh : random_corpus(10)) {
        for (int id : mesh.leaves()) {
            const auto D = neighborhood_extent(mesh.degree(), mesh.node(id).generation);
            const auto t = mesh.translated_center(mesh.node(id).rect);
            std::set<int> brute;
            for (int c : mesh.leaves()) {
                auto [dx, dy] = componentwise_dist(t, mesh.translated_center(mesh.node(c).rect));
                if (dx <= D.dx && dy <= D.dy) brute.insert(c);
            }
            auto nb2 = mesh.neighborhood(id);
            CHECK(std::set<int>(nb2.begin(), nb2.end()) == brute);
        }
    }
}

TEST_CASE("admissible refinement of a uniform mesh bisects only the target") {
    TMesh m({3, 3}, {8, 8});
    m.refine_admissible({5, 5, 6, 6});
    CHECK(m.history().size() == 1);
}

TEST_CASE("closure refines coarser neighbours first") {
    TMesh m({2, 2}, {8, 8});
    m.refine_admissible({4, 4, 5, 5});
    for (int k = 0; k < 5; ++k) {
        int id = m.locate({Dyadic::from_parts(4 * 64 + 1, 8), Dyadic::from_parts(4 * 64 + 1, 8)});
        m.refine_admissible_node(id);
    }
    CHECK(m.history().size() > 6);
    CHECK(check_admissible(m).admissible);
    CHECK(generation_gap_audit(m) <= 1);
}

TEST_CASE("bisecting twice without closure is detected") {
    TMesh m({3, 3}, {8, 8});
    auto kids = m.bisect_element({5, 5, 6, 6});
    m.bisect_node(kids[0]);
    auto kids2 = m.bisect_node(m.locate({Dyadic::from_parts(21, 2), Dyadic::from_parts(21, 2)}));
    m.bisect_node(kids2[0]);
    const auto rep = check_admissible(m);
    CHECK_FALSE(rep.admissible);
    REQUIRE_FALSE(rep.violations.empty());
    const auto& v = rep.violations.front();
    CHECK(v.element_generation > v.neighbor_generation);
    CHECK(v.step >= 1);
}

TEST_CASE("random admissible meshes: tiling, size law, audits") {
    for (const auto& m : random_corpus(20)) {
        CHECK(check_admissible(m).admissible);
        CHECK(generation_gap_audit(m) <= 1);
        CHECK(interiors_disjoint(m));
        auto [m1, m2] = m.extents();
        CHECK(total_area(m) == Dyadic(m1 * m2));
        for (int id : m.leaves()) {
            const auto& nd = m.node(id);
            const auto& r = nd.rect;
            const int g = nd.generation;
            if (!m.knot_line(0).degenerate(r.x0, r.x1))
                CHECK(r.width() == Dyadic(1).times_pow2(-((g + 1) / 2)));
            if (!m.knot_line(1).degenerate(r.y0, r.y1)) CHECK(r.height() == Dyadic(1).times_pow2(-(g / 2)));
        }
    }
}

TEST_CASE("JSON round trip and replay reproduce the mesh") {
    for (const auto& m : random_corpus(5)) {
        const auto back = TMesh::from_json(m.to_json());
        CHECK(back.serialize() == m.serialize());
        CHECK(replay_prefix(m, m.history().size()).serialize() == m.serialize());
        const auto half = replay_prefix(m, m.history().size() / 2);
        CHECK(half.history().size() == m.history().size() / 2);
        CHECK(check_admissible(half).admissible);
    }
    CHECK(random_admissible_mesh({2, 2}, {9, 9}, 30, 7).serialize() ==
          random_admissible_mesh({2, 2}, {9, 9}, 30, 7).serialize());
}

TEST_CASE("skeleton lines record every new edge") {
    TMesh m({2, 2}, {8, 8});
    m.bisect_element({3, 3, 4, 4});
    const Dyadic mid = Dyadic::from_parts(7, 1);
    CHECK(m.on_vertical_skeleton(mid, Dyadic::from_parts(13, 2)));
    CHECK_FALSE(m.on_vertical_skeleton(mid, Dyadic::from_parts(9, 1)));
    CHECK(m.on_horizontal_skeleton(Dyadic::from_parts(7, 2), 3));
}

TEST_CASE("interval sets merge and cover") {
    IntervalSet s;
    s.insert(0, 1);
    s.insert(2, 3);
    s.insert(1, 2);
    CHECK(s.intervals().size() == 1);
    CHECK(s.covers(Dyadic::from_parts(1, 1), Dyadic::from_parts(5, 1)));
    CHECK_FALSE(s.contains(4));
    s.insert(5, 6);
    CHECK_FALSE(s.covers(2, 6));
    CHECK(s.find(Dyadic::from_parts(11, 1))->first == Dyadic(5));
}
