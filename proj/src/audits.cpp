#include "asts/audits.hpp"

#include <algorithm>

namespace asts {

namespace {

// Bezier elements whose box lies inside b.
std::vector<int> elements_inside(const SupportGrid& grid, const std::vector<BezierElement>& elems, const Box& b) {
    std::vector<int> out;
    for (int e : grid.candidates(b))
        if (b.contains(elems[e].box, 1e-14)) out.push_back(e);
    return out;
}

SupportGrid element_grid(const std::vector<BezierElement>& elems) {
    SupportGrid g(64);
    for (int e = 0; e < static_cast<int>(elems.size()); ++e) g.insert(e, elems[e].box);
    return g;
}

}  // namespace

std::vector<Dyadic> admitted_lengths(int generation, int direction) {
    const int l = generation;
    auto len = [](int e) { return Dyadic::from_parts(1, e); };
    auto big = [](int e) { return Dyadic(2).times_pow2(-e); };  // 2^{-e+1}
    if (direction == 0) {
        if (l % 2 == 0) return {len(l / 2)};
        return {len((l + 1) / 2), len((l - 1) / 2)};
    }
    if (l % 2 == 0) return {len(l / 2), big(l / 2)};
    return {len((l - 1) / 2)};
}

TiledFloorAudit audit_tiled_floor(const TSplineSpace& space) {
    TiledFloorAudit a;
    const auto& mesh = space.mesh();
    const auto& elems = space.bezier();
    SupportGrid grid = element_grid(elems);
    for (const auto& f : space.basis()) {
        ++a.functions;
        auto ax = admitted_lengths(f.generation, 0), ay = admitted_lengths(f.generation, 1);
        for (std::size_t i = 0; i + 1 < f.hv.size(); ++i) {
            if (mesh.knot_line(0).degenerate(f.hv[i], f.hv[i + 1])) continue;
            Dyadic lx = f.hv[i + 1] - f.hv[i];
            for (std::size_t j = 0; j + 1 < f.vv.size(); ++j) {
                if (mesh.knot_line(1).degenerate(f.vv[j], f.vv[j + 1])) continue;
                Dyadic ly = f.vv[j + 1] - f.vv[j];
                ++a.cells;
                bool okx = std::find(ax.begin(), ax.end(), lx) != ax.end();
                bool oky = std::find(ay.begin(), ay.end(), ly) != ay.end();
                if (!okx || !oky) {
                    ++a.length_violations;
                    if (a.messages.size() < 10)
                        a.messages.push_back("anchor (" + f.anchor.point.x.str() + "," + f.anchor.point.y.str() +
                                             ") generation " + std::to_string(f.generation) + " cell " + lx.str() +
                                             " x " + ly.str());
                }
                Box cell{f.kx[i], f.kx[i + 1], f.ky[j], f.ky[j + 1]};
                a.max_bezier_per_cell = std::max(a.max_bezier_per_cell,
                                                 static_cast<int>(elements_inside(grid, elems, cell).size()));
            }
        }
    }
    return a;
}

int omega_bound(DegreePair p) {
    auto c = [](int q) { return (q + 1) / 2; };
    return std::max((2 * p[0] + 1) * (2 * c(p[1]) + 1), (2 * p[1] + 1) * (2 * c(p[0]) + 1));
}

int omega_tilde_bound(DegreePair p) {
    auto c = [](int q) { return (q + 1) / 2; };
    return std::max((4 * p[0] + 1) * (4 * c(p[1]) + 2 * (p[1] / 2) + 1),
                    (4 * p[1] + 1) * (4 * c(p[0]) + 2 * (p[0] / 2) + 1));
}

OverlapAudit audit_overlaps(const TSplineSpace& space) {
    OverlapAudit out;
    out.bound_omega = omega_bound(space.degree());
    out.bound_omega_tilde = omega_tilde_bound(space.degree());
    const auto& elems = space.bezier();
    SupportGrid grid = element_grid(elems);
    const std::size_t ne = elems.size();
    // per element: count and the last step that touched it, per generation
    std::vector<int> count(ne, 0), count_t(ne, 0), seen(ne, -1), seen_t(ne, -1);
    int current = -1;
    SpaceTracker tr(space.mesh(), true);
    while (!tr.done()) {
        StepDelta d = tr.advance();
        if (d.added.empty()) continue;
        if (d.generation != current) {
            current = d.generation;
            std::fill(count.begin(), count.end(), 0);
            std::fill(count_t.begin(), count_t.end(), 0);
        }
        const int k = static_cast<int>(d.step);
        std::vector<Box> ext;
        for (const auto& f : d.added) {
            for (int e : elements_inside(grid, elems, f.support())) {
                if (seen[e] == k) continue;
                seen[e] = k;
                out.max_omega = std::max(out.max_omega, ++count[e]);
            }
            for (const auto* g : tr.overlapping(f.support())) ext.push_back(g->support());
        }
        for (const auto& b : ext) {
            for (int e : elements_inside(grid, elems, b)) {
                if (seen_t[e] == k) continue;
                seen_t[e] = k;
                out.max_omega_tilde = std::max(out.max_omega_tilde, ++count_t[e]);
            }
        }
    }
    return out;
}

bool as_tests_agree(const TSplineSpace& space) {
    return space.check_dual_compatibility().compatible == space.extended().crossing_free();
}

}  // namespace asts
