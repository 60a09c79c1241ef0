#include "asts/drivers.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace asts {

CornerRefinement::CornerRefinement(DegreePair p, int elements)
    : mesh_(p, {elements + p[0], elements + p[1]}), side_(elements) {
    if (p[0] != p[1]) throw std::invalid_argument("corner refinement needs equal degrees");
}

bool CornerRefinement::collect(Dyadic side, std::vector<int>& targets) const {
    const auto p = mesh_.degree();
    const Dyadic X = Dyadic(p[0]) + side, Y = Dyadic(p[1]) + side;
    targets.clear();
    for (int id : mesh_.leaves()) {
        const auto& nd = mesh_.node(id);
        if (nd.generation == generation_ && nd.rect.x1 <= X && nd.rect.y1 <= Y) targets.push_back(id);
    }
    if (targets.empty()) return false;
    for (int id : targets)
        for (int nb : mesh_.neighborhood(id))
            if (mesh_.node(nb).generation < generation_) return false;
    return true;
}

void CornerRefinement::step() {
    // candidate sides decrease by the longer element side of this generation
    const Dyadic decrement = Dyadic::from_parts(1, generation_ / 2);
    std::vector<int> targets;
    Dyadic s = side_ - decrement;
    while (Dyadic(0) < s && !collect(s, targets)) s -= decrement;
    if (!(Dyadic(0) < s)) {
        fallback_ = true;
        const auto p = mesh_.degree();
        int id = mesh_.locate({Dyadic(p[0]) + Dyadic::from_parts(1, 62), Dyadic(p[1]) + Dyadic::from_parts(1, 62)});
        mesh_.refine_admissible_node(id);
        ++generation_;
        return;
    }
    const bool vertical = generation_ % 2 == 0;
    std::sort(targets.begin(), targets.end(), [&](int a, int b) {
        const auto& ra = mesh_.node(a).rect;
        const auto& rb = mesh_.node(b).rect;
        Dyadic fa = vertical ? ra.x0 + ra.x1 : ra.y0 + ra.y1, fb = vertical ? rb.x0 + rb.x1 : rb.y0 + rb.y1;
        if (fa != fb) return fa < fb;
        return vertical ? ra.y0 < rb.y0 : ra.x0 < rb.x0;
    });
    for (int id : targets) mesh_.bisect_node(id);
    side_ = s;
    ++generation_;
}

AlternativeRefinement::AlternativeRefinement(DegreePair p, int elements, Dyadic first_side)
    : mesh_(p, {elements + p[0], elements + p[1]}), side_(first_side) {
    if (!(Dyadic(0) < first_side) || Dyadic(elements) < first_side)
        throw std::invalid_argument("alternative refinement: square side out of range");
}

void AlternativeRefinement::extend_line(Direction dir, Dyadic at, Dyadic a, Dyadic b, int label) {
    for (;;) {
        IndexRect q = dir == Direction::x ? IndexRect{at, a, at, b} : IndexRect{a, at, b, at};
        int target = -1;
        for (int id : mesh_.leaves_in(q)) {
            const auto& r = mesh_.node(id).rect;
            bool hit = dir == Direction::x ? (r.x0 < at && at < r.x1 && r.y0 < b && a < r.y1)
                                           : (r.y0 < at && at < r.y1 && r.x0 < b && a < r.x1);
            if (hit) {
                target = id;
                break;
            }
        }
        if (target < 0) return;
        mesh_.split_node(target, dir, label);
    }
}

void AlternativeRefinement::step() {
    const int k = ++step_;
    const auto p = mesh_.degree();
    const Dyadic h = Dyadic::from_parts(1, k - 1), half = h.half();
    const Dyadic X = Dyadic(p[0]) + side_, Y = Dyadic(p[1]) + side_;
    std::vector<IndexRect> cells;
    for (int id : mesh_.leaves()) {
        const auto& r = mesh_.node(id).rect;
        if (r.x1 <= X && r.y1 <= Y) cells.push_back(r);
    }
    std::sort(cells.begin(), cells.end());
    for (const auto& r : cells)
        for (int c : mesh_.split_element(r, Direction::x, k)) mesh_.split_element(mesh_.node(c).rect, Direction::y, k);
    const int reach = p[0] / 2;
    for (Dyadic a = Dyadic(p[0]) + half; a < X; a += h) extend_line(Direction::x, a, Y, Y + h.times_int(reach), k);
    for (Dyadic a = Dyadic(p[1]) + half; a < Y; a += h) extend_line(Direction::y, a, X, X + h.times_int(reach), k);
    side_ -= half;
}

int default_elements(int degree) {
    switch (degree) {
        case 2: return 7;
        case 3: return 8;
        case 4: return 10;
        default: return 8;
    }
}

TMesh corner_mesh(DegreePair p, int elements, int level) {
    CornerRefinement drv(p, elements);
    while (drv.level() < level) drv.step();
    return drv.mesh();
}

TMesh alternative_mesh(DegreePair p, int elements, int level) {
    AlternativeRefinement drv(p, elements);
    while (drv.level() < level) drv.step();
    return drv.mesh();
}

TMesh random_admissible_mesh(DegreePair p, std::array<int, 2> n, int refinements, std::uint64_t seed) {
    TMesh mesh(p, n);
    std::mt19937_64 rng(seed);
    for (int i = 0; i < refinements; ++i) {
        std::vector<int> active;
        for (int id : mesh.leaves()) {
            const auto& r = mesh.node(id).rect;
            if (!mesh.knot_line(0).degenerate(r.x0, r.x1) && !mesh.knot_line(1).degenerate(r.y0, r.y1))
                active.push_back(id);
        }
        std::uniform_int_distribution<std::size_t> pick(0, active.size() - 1);
        mesh.refine_admissible_node(active[pick(rng)]);
    }
    return mesh;
}

}  // namespace asts
