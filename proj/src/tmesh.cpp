#include "asts/tmesh.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <stdexcept>

namespace asts {

void IntervalSet::insert(Dyadic a, Dyadic b) {
    auto it = std::lower_bound(iv_.begin(), iv_.end(), a,
                               [](const std::pair<Dyadic, Dyadic>& v, Dyadic t) { return v.second < t; });
    auto last = it;
    Dyadic lo = a, hi = b;
    while (last != iv_.end() && last->first <= b) {
        lo = min(lo, last->first);
        hi = max(hi, last->second);
        ++last;
    }
    it = iv_.erase(it, last);
    iv_.insert(it, {lo, hi});
}

bool IntervalSet::contains(Dyadic t) const {
    auto it = std::lower_bound(iv_.begin(), iv_.end(), t,
                               [](const std::pair<Dyadic, Dyadic>& v, Dyadic s) { return v.second < s; });
    return it != iv_.end() && it->first <= t;
}

bool IntervalSet::covers(Dyadic a, Dyadic b) const {
    auto it = std::lower_bound(iv_.begin(), iv_.end(), a,
                               [](const std::pair<Dyadic, Dyadic>& v, Dyadic s) { return v.second < s; });
    return it != iv_.end() && it->first <= a && b <= it->second;
}

std::optional<std::pair<Dyadic, Dyadic>> IntervalSet::find(Dyadic t) const {
    auto it = std::lower_bound(iv_.begin(), iv_.end(), t,
                               [](const std::pair<Dyadic, Dyadic>& v, Dyadic s) { return v.second < s; });
    if (it != iv_.end() && it->first <= t) return *it;
    return std::nullopt;
}

NeighborhoodSpec neighborhood_extent(DegreePair p, int g) {
    if (g % 2 == 0) {
        int e = g / 2 + 1;
        return {Dyadic(2 * (p[0] / 2) + 1).times_pow2(-e), Dyadic(2 * ((p[1] + 1) / 2) + 1).times_pow2(-e)};
    }
    int e = (g + 1) / 2;
    return {Dyadic(2 * ((p[0] + 1) / 2) + 1).times_pow2(-e - 1), Dyadic(2 * (p[1] / 2) + 1).times_pow2(-e)};
}

double KnotLine::xi(Dyadic k) const {
    Dyadic t = clamp(k - Dyadic(degree), Dyadic(0), Dyadic(elements()));
    return t.to_double() / elements();
}

TMesh::TMesh(DegreePair p, std::array<int, 2> n) : p_(p), n_(n) {
    for (int d = 0; d < 2; ++d) {
        if (p[d] < 1) throw std::invalid_argument("degree must be positive");
        if (n[d] < p[d] + 1) throw std::invalid_argument("n must be at least p + 1 for an open knot vector");
        lines_[d].degree = p[d];
        lines_[d].functions = n[d];
    }
    auto [m1, m2] = extents();
    nodes_.reserve(static_cast<std::size_t>(m1) * m2 * 4);
    for (int i = 0; i < m1; ++i) {
        for (int j = 0; j < m2; ++j) {
            Node nd;
            nd.rect = {Dyadic(i), Dyadic(j), Dyadic(i + 1), Dyadic(j + 1)};
            nodes_.push_back(nd);
        }
    }
    num_leaves_ = nodes_.size();
    for (int i = 0; i <= m1; ++i) vsk_[Dyadic(i)].insert(Dyadic(0), Dyadic(m2));
    for (int j = 0; j <= m2; ++j) hsk_[Dyadic(j)].insert(Dyadic(0), Dyadic(m1));
}

std::vector<int> TMesh::leaves() const {
    std::vector<int> out;
    out.reserve(num_leaves_);
    for (int i = 0; i < static_cast<int>(nodes_.size()); ++i)
        if (nodes_[i].leaf()) out.push_back(i);
    return out;
}

int TMesh::max_generation() const {
    int g = 0;
    for (const auto& nd : nodes_)
        if (nd.leaf()) g = std::max(g, nd.generation);
    return g;
}

int TMesh::locate(IndexVec2 pt) const {
    auto [m1, m2] = extents();
    std::int64_t i = std::clamp<std::int64_t>(pt.x.floor(), 0, m1 - 1);
    std::int64_t j = std::clamp<std::int64_t>(pt.y.floor(), 0, m2 - 1);
    int id = root_id(i, j);
    while (!nodes_[id].leaf()) {
        const Node& nd = nodes_[id];
        if (nd.split == 'z') {
            id = nd.child[0];
        } else if (nd.split == 'x') {
            id = pt.x < midpoint(nd.rect.x0, nd.rect.x1) ? nd.child[0] : nd.child[1];
        } else {
            id = pt.y < midpoint(nd.rect.y0, nd.rect.y1) ? nd.child[0] : nd.child[1];
        }
    }
    return id;
}

int TMesh::find_leaf(const IndexRect& r) const {
    auto [m1, m2] = extents();
    if (r.x0 < Dyadic(0) || r.y0 < Dyadic(0) || Dyadic(m1) < r.x1 || Dyadic(m2) < r.y1) return -1;
    int id = locate(r.center());
    return nodes_[id].rect == r ? id : -1;
}

std::vector<int> TMesh::leaves_in(const IndexRect& q) const {
    auto [m1, m2] = extents();
    std::vector<int> out;
    std::int64_t i0 = std::max<std::int64_t>(0, q.x0.ceil() - 1), i1 = std::min<std::int64_t>(m1 - 1, q.x1.floor());
    std::int64_t j0 = std::max<std::int64_t>(0, q.y0.ceil() - 1), j1 = std::min<std::int64_t>(m2 - 1, q.y1.floor());
    std::vector<int> stack;
    for (std::int64_t i = i0; i <= i1; ++i) {
        for (std::int64_t j = j0; j <= j1; ++j) {
            stack.push_back(root_id(i, j));
            while (!stack.empty()) {
                int id = stack.back();
                stack.pop_back();
                const Node& nd = nodes_[id];
                if (!nd.rect.intersects_closed(q)) continue;
                if (nd.leaf()) {
                    out.push_back(id);
                } else {
                    stack.push_back(nd.child[0]);
                    if (nd.child[1] >= 0) stack.push_back(nd.child[1]);
                }
            }
        }
    }
    return out;
}

void TMesh::add_segment(Direction dir, Dyadic fixed, Dyadic a, Dyadic b) {
    if (dir == Direction::x) vsk_[fixed].insert(a, b);
    else hsk_[fixed].insert(a, b);
}

bool TMesh::on_vertical_skeleton(Dyadic x, Dyadic y) const {
    auto it = vsk_.find(x);
    return it != vsk_.end() && it->second.contains(y);
}

bool TMesh::on_horizontal_skeleton(Dyadic x, Dyadic y) const {
    auto it = hsk_.find(y);
    return it != hsk_.end() && it->second.contains(x);
}

std::vector<int> TMesh::bisect_node(int id) {
    if (id < 0 || id >= static_cast<int>(nodes_.size()) || !nodes_[id].leaf())
        throw std::invalid_argument("bisect: element not in mesh");
    const int g = nodes_[id].generation;
    return split_node(id, (g % 2 == 0) ? Direction::x : Direction::y, g + 1);
}

std::vector<int> TMesh::split_node(int id, Direction dir, int generation) {
    if (id < 0 || id >= static_cast<int>(nodes_.size()) || !nodes_[id].leaf())
        throw std::invalid_argument("bisect: element not in mesh");
    const IndexRect r = nodes_[id].rect;
    const int d = dir == Direction::x ? 0 : 1;
    const bool degenerate = d == 0 ? lines_[0].degenerate(r.x0, r.x1) : lines_[1].degenerate(r.y0, r.y1);
    std::vector<int> kids;
    Node child;
    child.generation = generation;
    child.parent = id;
    if (degenerate) {
        child.rect = r;
        nodes_.push_back(child);
        int c = static_cast<int>(nodes_.size()) - 1;
        nodes_[id].child[0] = c;
        nodes_[id].split = 'z';
        kids.push_back(c);
    } else {
        IndexRect a = r, b = r;
        if (dir == Direction::x) {
            Dyadic mid = midpoint(r.x0, r.x1);
            a.x1 = mid;
            b.x0 = mid;
            add_segment(dir, mid, r.y0, r.y1);
        } else {
            Dyadic mid = midpoint(r.y0, r.y1);
            a.y1 = mid;
            b.y0 = mid;
            add_segment(dir, mid, r.x0, r.x1);
        }
        child.rect = a;
        nodes_.push_back(child);
        child.rect = b;
        nodes_.push_back(child);
        int c0 = static_cast<int>(nodes_.size()) - 2;
        nodes_[id].child[0] = c0;
        nodes_[id].child[1] = c0 + 1;
        nodes_[id].split = dir == Direction::x ? 'x' : 'y';
        kids = {c0, c0 + 1};
        ++num_leaves_;
    }
    history_.push_back({r, dir, generation});
    return kids;
}

std::vector<int> TMesh::split_element(const IndexRect& r, Direction dir, int generation) {
    int id = find_leaf(r);
    if (id < 0) throw std::invalid_argument("bisect: element " + r.str() + " not in mesh");
    return split_node(id, dir, generation);
}

std::vector<int> TMesh::bisect_element(const IndexRect& r) {
    int id = find_leaf(r);
    if (id < 0) throw std::invalid_argument("bisect: element " + r.str() + " not in mesh");
    return bisect_node(id);
}

IndexVec2 TMesh::translated_center(const IndexRect& r) const { return translate_point(r.center(), p_, n_); }

std::vector<int> TMesh::neighborhood(int id) const {
    const Node& nd = nodes_[id];
    const NeighborhoodSpec D = neighborhood_extent(p_, nd.generation);
    const IndexVec2 t = translated_center(nd.rect);
    auto [m1, m2] = extents();
    Dyadic ax = t.x - D.dx, bx = t.x + D.dx, ay = t.y - D.dy, by = t.y + D.dy;
    IndexRect q{ax <= Dyadic(p_[0]) ? Dyadic(0) : ax, ay <= Dyadic(p_[1]) ? Dyadic(0) : ay,
                bx >= Dyadic(n_[0]) ? Dyadic(m1) : bx, by >= Dyadic(n_[1]) ? Dyadic(m2) : by};
    std::vector<int> out;
    for (int c : leaves_in(q)) {
        auto [dx, dy] = componentwise_dist(t, translated_center(nodes_[c].rect));
        if (dx <= D.dx && dy <= D.dy) out.push_back(c);
    }
    std::sort(out.begin(), out.end(), [&](int a, int b) {
        const auto& ra = nodes_[a].rect;
        const auto& rb = nodes_[b].rect;
        if (ra.x0 != rb.x0) return ra.x0 < rb.x0;
        return ra.y0 < rb.y0;
    });
    return out;
}

std::vector<IndexRect> TMesh::neighborhood(const IndexRect& r) const {
    int id = find_leaf(r);
    if (id < 0) throw std::invalid_argument("neighborhood: element not in mesh");
    std::vector<IndexRect> out;
    for (int c : neighborhood(id)) out.push_back(nodes_[c].rect);
    return out;
}

bool TMesh::in_u_region(int id, IndexVec2 pt) const {
    const Node& nd = nodes_[id];
    const NeighborhoodSpec D = neighborhood_extent(p_, nd.generation);
    auto [dx, dy] = componentwise_dist(translate_point(pt, p_, n_), translated_center(nd.rect));
    return dx <= D.dx && dy <= D.dy;
}

void TMesh::refine_recursive(int id, int depth) {
    if (depth > 4 * (nodes_[id].generation + 4)) throw std::logic_error("refinement closure exceeded generation bound");
    while (nodes_[id].leaf()) {
        std::vector<int> coarse;
        for (int c : neighborhood(id))
            if (nodes_[c].generation < nodes_[id].generation) coarse.push_back(c);
        if (coarse.empty()) {
            bisect_node(id);
            return;
        }
        for (int c : coarse)
            if (nodes_[c].leaf()) refine_recursive(c, depth + 1);
    }
}

void TMesh::refine_admissible_node(int id) {
    std::size_t before = history_.size();
    refine_recursive(id, 0);
    auto by_gen = [](const Bisection& a, const Bisection& b) { return a.generation < b.generation; };
    auto mid = history_.begin() + static_cast<std::ptrdiff_t>(before);
    std::stable_sort(mid, history_.end(), by_gen);
    std::inplace_merge(history_.begin(), mid, history_.end(), by_gen);
}

void TMesh::refine_admissible(const IndexRect& r) {
    int id = find_leaf(r);
    if (id < 0) throw std::invalid_argument("refine: element " + r.str() + " not in mesh");
    refine_admissible_node(id);
}

void TMesh::sort_history() {
    std::stable_sort(history_.begin(), history_.end(),
                     [](const Bisection& a, const Bisection& b) { return a.generation < b.generation; });
}

nlohmann::json TMesh::to_json() const {
    nlohmann::json j;
    j["format"] = "asts.tmesh";
    j["version"] = 1;
    j["degree"] = {p_[0], p_[1]};
    j["n"] = {n_[0], n_[1]};
    auto m = extents();
    j["extents"] = {m[0], m[1]};
    auto& h = j["history"] = nlohmann::json::array();
    for (const auto& b : history_) {
        h.push_back({{"parent", {b.parent.x0.str(), b.parent.y0.str(), b.parent.x1.str(), b.parent.y1.str()}},
                     {"direction", b.direction == Direction::x ? "x" : "y"},
                     {"generation", b.generation}});
    }
    return j;
}

TMesh TMesh::from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "asts.tmesh" || j.value("version", 0) != 1)
        throw std::invalid_argument("unsupported mesh document");
    TMesh mesh({j["degree"][0].get<int>(), j["degree"][1].get<int>()}, {j["n"][0].get<int>(), j["n"][1].get<int>()});
    for (const auto& rec : j["history"]) {
        const auto& pr = rec["parent"];
        IndexRect r{Dyadic::parse(pr[0]), Dyadic::parse(pr[1]), Dyadic::parse(pr[2]), Dyadic::parse(pr[3])};
        mesh.split_element(r, rec["direction"] == "x" ? Direction::x : Direction::y, rec["generation"].get<int>());
    }
    return mesh;
}

std::string TMesh::serialize() const { return to_json().dump(1); }

TMesh replay_prefix(const TMesh& mesh, std::size_t k) {
    TMesh out(mesh.degree(), mesh.n());
    const auto& h = mesh.history();
    for (std::size_t s = 0; s < k && s < h.size(); ++s) out.apply(h[s]);
    return out;
}

AdmissibilityReport check_admissible(const TMesh& mesh) {
    AdmissibilityReport rep;
    TMesh work(mesh.degree(), mesh.n());
    const auto& h = mesh.history();
    for (std::size_t s = 0; s < h.size(); ++s) {
        int id = work.find_leaf(h[s].parent);
        if (id < 0) throw std::invalid_argument("history refers to a missing element " + h[s].parent.str());
        const int g = work.node(id).generation;
        for (int c : work.neighborhood(id)) {
            const int gc = work.node(c).generation;
            if (gc < g) {
                rep.admissible = false;
                rep.violations.push_back({s, h[s].parent, work.node(c).rect, g, gc});
            }
        }
        work.split_node(id, h[s].direction, h[s].generation);
    }
    return rep;
}

int generation_gap_audit(const TMesh& mesh) {
    int gap = 0;
    for (int id : mesh.leaves()) {
        const int g = mesh.node(id).generation;
        for (int c : mesh.neighborhood(id)) gap = std::max(gap, g - mesh.node(c).generation);
    }
    return gap;
}

}  // namespace asts
