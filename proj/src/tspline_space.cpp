#include "asts/tspline_space.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace asts {

namespace {

const Dyadic kBelow(-1);
const Dyadic kAbove(std::int64_t{1} << 40);

IndexRect active_region(const TMesh& mesh) {
    auto p = mesh.degree();
    auto m = mesh.extents();
    int c1 = (p[0] + 1) / 2, c2 = (p[1] + 1) / 2;
    return {Dyadic(c1), Dyadic(c2), Dyadic(m[0] - c1), Dyadic(m[1] - c2)};
}

// Vertices on a horizontal side [x0, x1] at height y (or vertical, swapped).
std::vector<Dyadic> side_vertices(const SkeletonLines& cross, Dyadic a, Dyadic b, Dyadic at) {
    std::vector<Dyadic> out{a};
    for (auto it = cross.upper_bound(a); it != cross.end() && it->first < b; ++it)
        if (it->second.contains(at)) out.push_back(it->first);
    out.push_back(b);
    return out;
}

std::vector<Dyadic> trace(const SkeletonLines& lines, Dyadic start, Dyadic at, int each, bool self) {
    std::vector<Dyadic> left, right;
    auto it = lines.lower_bound(start);
    auto l = it;
    while (static_cast<int>(left.size()) < each && l != lines.begin()) {
        --l;
        if (l->second.contains(at)) left.push_back(l->first);
    }
    auto r = it;
    if (r != lines.end() && r->first == start) {
        if (self && !r->second.contains(at)) throw std::logic_error("anchor is not on the skeleton");
        ++r;
    } else if (self) {
        throw std::logic_error("anchor is not on the skeleton");
    }
    while (static_cast<int>(right.size()) < each && r != lines.end()) {
        if (r->second.contains(at)) right.push_back(r->first);
        ++r;
    }
    if (static_cast<int>(left.size()) < each || static_cast<int>(right.size()) < each)
        throw std::logic_error("index vector ray left the index domain");
    std::vector<Dyadic> out(left.rbegin(), left.rend());
    if (self) out.push_back(start);
    out.insert(out.end(), right.begin(), right.end());
    return out;
}

Dyadic kth_hit(const SkeletonLines& lines, Dyadic start, Dyadic at, int k, bool forward) {
    if (k == 0) return start;
    int found = 0;
    Dyadic last = start;
    if (forward) {
        for (auto it = lines.upper_bound(start); it != lines.end(); ++it) {
            if (!it->second.contains(at)) continue;
            last = it->first;
            if (++found == k) break;
        }
    } else {
        auto it = lines.lower_bound(start);
        while (it != lines.begin()) {
            --it;
            if (!it->second.contains(at)) continue;
            last = it->first;
            if (++found == k) break;
        }
    }
    return last;
}

std::vector<double> knots_of(const TMesh& mesh, int d, const std::vector<Dyadic>& iv) {
    std::vector<double> k;
    k.reserve(iv.size());
    for (Dyadic v : iv) k.push_back(mesh.xi(d, v));
    return k;
}

double halton(int i, int base) {
    double f = 1.0, r = 0.0;
    while (i > 0) {
        f /= base;
        r += f * (i % base);
        i /= base;
    }
    return r;
}

}  // namespace

AnchorKind anchor_kind(DegreePair p) {
    bool o1 = p[0] % 2 == 1, o2 = p[1] % 2 == 1;
    if (o1 && o2) return AnchorKind::vertex;
    if (!o1 && !o2) return AnchorKind::element;
    if (!o1 && o2) return AnchorKind::h_edge;
    return AnchorKind::v_edge;
}

const char* to_string(AnchorKind k) {
    switch (k) {
        case AnchorKind::vertex: return "vertex";
        case AnchorKind::element: return "element";
        case AnchorKind::h_edge: return "h-edge";
        case AnchorKind::v_edge: return "v-edge";
    }
    return "?";
}

double TSplineFunction::eval(double u, double v) const {
    int p1 = static_cast<int>(kx.size()) - 2, p2 = static_cast<int>(ky.size()) - 2;
    double a = bspline::eval_local(kx, p1, u);
    if (a == 0.0) return 0.0;
    return a * bspline::eval_local(ky, p2, v);
}

double TSplineFunction::derivative(double u, double v, int ru, int rv) const {
    int p1 = static_cast<int>(kx.size()) - 2, p2 = static_cast<int>(ky.size()) - 2;
    return bspline::eval_derivative(kx, p1, u, ru) * bspline::eval_derivative(ky, p2, v, rv);
}

bool FunctionIdentityLess::operator()(const TSplineFunction& a, const TSplineFunction& b) const {
    if (a.hv != b.hv) return a.hv < b.hv;
    return a.vv < b.vv;
}

std::vector<Anchor> anchors_in(const TMesh& mesh, const IndexRect& region) {
    const AnchorKind kind = anchor_kind(mesh.degree());
    const IndexRect act = active_region(mesh);
    std::set<IndexVec2> seen;
    std::vector<Anchor> out;
    auto accept = [&](AnchorKind k, IndexVec2 pt, const IndexRect& ent) {
        if (!region.contains(ent) || !act.contains(ent)) return;
        if (seen.insert(pt).second) out.push_back({k, pt, ent});
    };
    for (int id : mesh.leaves_in(region)) {
        const IndexRect& r = mesh.node(id).rect;
        switch (kind) {
            case AnchorKind::vertex:
                for (IndexVec2 c : {IndexVec2{r.x0, r.y0}, IndexVec2{r.x1, r.y0}, IndexVec2{r.x0, r.y1}, IndexVec2{r.x1, r.y1}})
                    accept(kind, c, {c.x, c.y, c.x, c.y});
                break;
            case AnchorKind::element:
                accept(kind, r.center(), r);
                break;
            case AnchorKind::h_edge:
                for (Dyadic y : {r.y0, r.y1}) {
                    auto xs = side_vertices(mesh.vertical_lines(), r.x0, r.x1, y);
                    for (std::size_t i = 0; i + 1 < xs.size(); ++i)
                        accept(kind, {midpoint(xs[i], xs[i + 1]), y}, {xs[i], y, xs[i + 1], y});
                }
                break;
            case AnchorKind::v_edge:
                for (Dyadic x : {r.x0, r.x1}) {
                    auto ys = side_vertices(mesh.horizontal_lines(), r.y0, r.y1, x);
                    for (std::size_t i = 0; i + 1 < ys.size(); ++i)
                        accept(kind, {x, midpoint(ys[i], ys[i + 1])}, {x, ys[i], x, ys[i + 1]});
                }
                break;
        }
    }
    std::sort(out.begin(), out.end(), [](const Anchor& a, const Anchor& b) { return a.point < b.point; });
    return out;
}

std::vector<Anchor> anchors(const TMesh& mesh) {
    auto m = mesh.extents();
    return anchors_in(mesh, {Dyadic(0), Dyadic(0), Dyadic(m[0]), Dyadic(m[1])});
}

IndexVectors index_vectors(const TMesh& mesh, const Anchor& a) {
    auto p = mesh.degree();
    IndexVectors iv;
    iv.hv = trace(mesh.vertical_lines(), a.point.x, a.point.y, (p[0] + 2) / 2, p[0] % 2 == 1);
    iv.vv = trace(mesh.horizontal_lines(), a.point.y, a.point.x, (p[1] + 2) / 2, p[1] % 2 == 1);
    return iv;
}

TSplineFunction make_function(const TMesh& mesh, const Anchor& a, int generation) {
    TSplineFunction f;
    f.anchor = a;
    auto iv = index_vectors(mesh, a);
    f.hv = std::move(iv.hv);
    f.vv = std::move(iv.vv);
    f.kx = knots_of(mesh, 0, f.hv);
    f.ky = knots_of(mesh, 1, f.vv);
    f.generation = generation;
    return f;
}

// ---------------------------------------------------------------- SupportGrid

std::array<int, 4> SupportGrid::range(const Box& b) const {
    auto lo = [&](double t) { return std::clamp(static_cast<int>(std::floor(t * g_)), 0, g_ - 1); };
    auto hi = [&](double t, int l) { return std::clamp(static_cast<int>(std::ceil(t * g_)) - 1, l, g_ - 1); };
    int i0 = lo(b.u0), j0 = lo(b.v0);
    return {i0, hi(b.u1, i0), j0, hi(b.v1, j0)};
}

void SupportGrid::insert(int id, const Box& b) {
    auto r = range(b);
    for (int i = r[0]; i <= r[1]; ++i)
        for (int j = r[2]; j <= r[3]; ++j) buckets_[static_cast<std::size_t>(i) * g_ + j].push_back(id);
}

void SupportGrid::remove(int id, const Box& b) {
    auto r = range(b);
    for (int i = r[0]; i <= r[1]; ++i) {
        for (int j = r[2]; j <= r[3]; ++j) {
            auto& v = buckets_[static_cast<std::size_t>(i) * g_ + j];
            auto it = std::find(v.begin(), v.end(), id);
            if (it != v.end()) {
                *it = v.back();
                v.pop_back();
            }
        }
    }
}

std::vector<int> SupportGrid::candidates(const Box& b) const {
    auto r = range(b);
    ++tick_;
    std::vector<int> out;
    for (int i = r[0]; i <= r[1]; ++i) {
        for (int j = r[2]; j <= r[3]; ++j) {
            for (int id : buckets_[static_cast<std::size_t>(i) * g_ + j]) {
                if (id >= static_cast<int>(stamp_.size())) stamp_.resize(static_cast<std::size_t>(id) * 2 + 16, 0);
                if (stamp_[id] == tick_) continue;
                stamp_[id] = tick_;
                out.push_back(id);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------- SpaceTracker

SpaceTracker::SpaceTracker(const TMesh& target, bool overlap_index)
    : target_(&target), work_(target.degree(), target.n()), overlap_index_(overlap_index) {
    if (overlap_index_) grid_ = std::make_unique<SupportGrid>(64);
    for (const Anchor& a : anchors(work_)) {
        auto f = make_function(work_, a, 0);
        initial_.push_back(f);
        insert_function(std::move(f));
    }
}

int SpaceTracker::insert_function(TSplineFunction f) {
    int slot;
    if (!free_.empty()) {
        slot = free_.back();
        free_.pop_back();
        slots_[slot] = std::move(f);
    } else {
        slot = static_cast<int>(slots_.size());
        slots_.push_back(std::move(f));
    }
    const auto& pt = slots_[slot].anchor.point;
    by_yx_[{pt.y, pt.x}] = slot;
    by_xy_[{pt.x, pt.y}] = slot;
    if (grid_) grid_->insert(slot, slots_[slot].support());
    return slot;
}

void SpaceTracker::erase_function(int slot) {
    const auto& pt = slots_[slot].anchor.point;
    by_yx_.erase({pt.y, pt.x});
    by_xy_.erase({pt.x, pt.y});
    if (grid_) grid_->remove(slot, slots_[slot].support());
    free_.push_back(slot);
}

StepDelta SpaceTracker::advance() {
    if (done()) throw std::out_of_range("tracker already at the end of the history");
    const Bisection b = target_->history()[pos_++];
    StepDelta d;
    d.step = pos_;
    d.generation = b.generation;
    d.bisection = b;
    int id = work_.find_leaf(b.parent);
    if (id < 0) throw std::invalid_argument("history refers to a missing element " + b.parent.str());
    const IndexRect R = b.parent;
    auto before = anchors_in(work_, R);
    auto kids = work_.split_node(id, b.direction, b.generation);
    if (work_.node(id).split == 'z') return d;
    d.geometric = true;
    auto after = anchors_in(work_, R);
    const bool vertical = work_.node(id).split == 'x';
    const IndexRect& c0 = work_.node(kids[0]).rect;
    const Dyadic mid = vertical ? c0.x1 : c0.y1;
    d.new_edge = vertical ? IndexRect{mid, R.y0, mid, R.y1} : IndexRect{R.x0, mid, R.x1, mid};

    std::set<IndexVec2> bset, aset;
    for (const auto& a : before) bset.insert(a.point);
    for (const auto& a : after) aset.insert(a.point);

    // functions whose ray crosses the new edge inside their index span
    const auto p = work_.degree();
    std::vector<int> modified;
    std::vector<TSplineFunction> updated;
    const auto& rows = vertical ? by_yx_ : by_xy_;
    const Dyadic lo = vertical ? R.y0 : R.x0, hi = vertical ? R.y1 : R.x1;
    const Dyadic W(vertical ? p[0] + 2 : p[1] + 2);
    for (auto it = rows.lower_bound({lo, kBelow}); it != rows.end() && it->first.first <= hi;) {
        const Dyadic line = it->first.first;
        auto jt = rows.lower_bound({line, mid - W});
        auto stop = rows.upper_bound({line, mid + W});
        for (; jt != stop; ++jt) {
            int slot = jt->second;
            const auto& f = slots_[slot];
            if (!aset.count(f.anchor.point) && bset.count(f.anchor.point)) continue;  // removed
            const auto& vec = vertical ? f.hv : f.vv;
            if (!(vec.front() < mid && mid < vec.back())) continue;
            auto iv = index_vectors(work_, f.anchor);
            if ((vertical ? iv.hv : iv.vv) == vec) continue;
            TSplineFunction g = f;
            g.hv = std::move(iv.hv);
            g.vv = std::move(iv.vv);
            g.kx = knots_of(work_, 0, g.hv);
            g.ky = knots_of(work_, 1, g.vv);
            g.generation = b.generation;
            modified.push_back(slot);
            updated.push_back(std::move(g));
        }
        it = rows.upper_bound({line, kAbove});
    }

    for (const auto& a : before) {
        if (aset.count(a.point)) continue;
        int slot = by_yx_.at({a.point.y, a.point.x});
        d.removed.push_back(slots_[slot]);
        erase_function(slot);
    }
    for (std::size_t i = 0; i < modified.size(); ++i) {
        int slot = modified[i];
        d.removed.push_back(slots_[slot]);
        erase_function(slot);
        d.added.push_back(updated[i]);
        insert_function(std::move(updated[i]));
    }
    for (const auto& a : after) {
        if (bset.count(a.point)) continue;
        auto f = make_function(work_, a, b.generation);
        d.added.push_back(f);
        insert_function(std::move(f));
    }
    // identities that were removed and re-added are unchanged functions
    std::set<TSplineFunction, FunctionIdentityLess> rem(d.removed.begin(), d.removed.end());
    std::vector<TSplineFunction> kept_added;
    for (auto& f : d.added) {
        auto it = rem.find(f);
        if (it == rem.end()) {
            kept_added.push_back(std::move(f));
            continue;
        }
        int slot = by_yx_.at({f.anchor.point.y, f.anchor.point.x});
        slots_[slot].generation = it->generation;
        rem.erase(it);
    }
    d.added = std::move(kept_added);
    d.removed.assign(rem.begin(), rem.end());
    return d;
}

std::vector<TSplineFunction> SpaceTracker::functions() const {
    std::vector<TSplineFunction> out;
    out.reserve(by_xy_.size());
    for (const auto& [k, slot] : by_xy_) out.push_back(slots_[slot]);
    return out;
}

std::vector<const TSplineFunction*> SpaceTracker::overlapping(const Box& b) const {
    if (!grid_) throw std::logic_error("tracker built without overlap index");
    std::vector<const TSplineFunction*> out;
    for (int slot : grid_->candidates(b))
        if (slots_[slot].support().overlaps_open(b)) out.push_back(&slots_[slot]);
    return out;
}

// ---------------------------------------------------------------- extensions

ExtendedMesh extended_tmesh(const TMesh& mesh) {
    ExtendedMesh ext;
    const auto p = mesh.degree();
    const auto n = mesh.n();
    const auto m = mesh.extents();
    const auto& vsk = mesh.vertical_lines();
    const auto& hsk = mesh.horizontal_lines();
    std::set<IndexVec2> verts;
    for (int id : mesh.leaves()) {
        const auto& r = mesh.node(id).rect;
        verts.insert({r.x0, r.y0});
        verts.insert({r.x1, r.y0});
        verts.insert({r.x0, r.y1});
        verts.insert({r.x1, r.y1});
    }
    for (const auto& v : verts) {
        if (v.x == Dyadic(0) || v.y == Dyadic(0) || v.x == Dyadic(m[0]) || v.y == Dyadic(m[1])) continue;
        auto hi = hsk.at(v.y).find(v.x);
        auto vi = vsk.at(v.x).find(v.y);
        bool left = hi && hi->first < v.x, right = hi && v.x < hi->second;
        bool down = vi && vi->first < v.y, up = vi && v.y < vi->second;
        if (int(left) + int(right) + int(up) + int(down) != 3) continue;
        Extension e;
        e.junction = v;
        e.frame = !(Dyadic(p[0]) < v.x && v.x < Dyadic(n[0]) && Dyadic(p[1]) < v.y && v.y < Dyadic(n[1]));
        if (!left || !right) {
            int kl, kr;
            if (!right) {
                kl = p[0] / 2;
                kr = (p[0] + 1) / 2;
            } else {
                kl = (p[0] + 1) / 2;
                kr = p[0] / 2;
            }
            e.line = Direction::x;
            e.fixed = v.y;
            e.a = kth_hit(vsk, v.x, v.y, kl, false);
            e.b = kth_hit(vsk, v.x, v.y, kr, true);
        } else {
            int kd, ku;
            if (!up) {
                kd = p[1] / 2;
                ku = (p[1] + 1) / 2;
            } else {
                kd = (p[1] + 1) / 2;
                ku = p[1] / 2;
            }
            e.line = Direction::y;
            e.fixed = v.x;
            e.a = kth_hit(hsk, v.y, v.x, kd, false);
            e.b = kth_hit(hsk, v.y, v.x, ku, true);
        }
        ext.extensions.push_back(e);
    }
    std::vector<int> hs, vs;
    for (int i = 0; i < static_cast<int>(ext.extensions.size()); ++i)
        (ext.extensions[i].line == Direction::x ? hs : vs).push_back(i);
    std::sort(vs.begin(), vs.end(), [&](int a, int b) { return ext.extensions[a].fixed < ext.extensions[b].fixed; });
    for (int h : hs) {
        const auto& eh = ext.extensions[h];
        auto it = std::lower_bound(vs.begin(), vs.end(), eh.a,
                                   [&](int v, Dyadic t) { return ext.extensions[v].fixed < t; });
        for (; it != vs.end() && ext.extensions[*it].fixed <= eh.b; ++it) {
            const auto& ev = ext.extensions[*it];
            if (ev.a <= eh.fixed && eh.fixed <= ev.b) {
                if (eh.frame || ev.frame) ++ext.frame_crossings;
                else ext.crossings.emplace_back(h, *it);
            }
        }
    }
    return ext;
}

std::vector<BezierElement> bezier_mesh(const TMesh& mesh, const ExtendedMesh& ext) {
    std::map<int, std::pair<std::vector<Dyadic>, std::vector<Dyadic>>> cuts;  // leaf -> (x cuts, y cuts)
    std::size_t partial = 0;
    for (const auto& e : ext.extensions) {
        IndexRect q = e.line == Direction::x ? IndexRect{e.a, e.fixed, e.b, e.fixed} : IndexRect{e.fixed, e.a, e.fixed, e.b};
        for (int id : mesh.leaves_in(q)) {
            const auto& r = mesh.node(id).rect;
            if (e.line == Direction::x) {
                if (!(r.y0 < e.fixed && e.fixed < r.y1 && r.x0 < e.b && e.a < r.x1)) continue;
                if (!(e.a <= r.x0 && r.x1 <= e.b)) ++partial;
                cuts[id].second.push_back(e.fixed);
            } else {
                if (!(r.x0 < e.fixed && e.fixed < r.x1 && r.y0 < e.b && e.a < r.y1)) continue;
                if (!(e.a <= r.y0 && r.y1 <= e.b)) ++partial;
                cuts[id].first.push_back(e.fixed);
            }
        }
    }
    (void)partial;
    std::vector<BezierElement> out;
    const auto& lx = mesh.knot_line(0);
    const auto& ly = mesh.knot_line(1);
    for (int id : mesh.leaves()) {
        const auto& r = mesh.node(id).rect;
        std::vector<Dyadic> xs{r.x0}, ys{r.y0};
        if (auto it = cuts.find(id); it != cuts.end()) {
            auto cx = it->second.first, cy = it->second.second;
            std::sort(cx.begin(), cx.end());
            cx.erase(std::unique(cx.begin(), cx.end()), cx.end());
            std::sort(cy.begin(), cy.end());
            cy.erase(std::unique(cy.begin(), cy.end()), cy.end());
            xs.insert(xs.end(), cx.begin(), cx.end());
            ys.insert(ys.end(), cy.begin(), cy.end());
        }
        xs.push_back(r.x1);
        ys.push_back(r.y1);
        for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
            if (lx.degenerate(xs[i], xs[i + 1])) continue;
            for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
                if (ly.degenerate(ys[j], ys[j + 1])) continue;
                BezierElement be;
                be.cell = {xs[i], ys[j], xs[i + 1], ys[j + 1]};
                be.leaf = id;
                be.box = {lx.xi(xs[i]), lx.xi(xs[i + 1]), ly.xi(ys[j]), ly.xi(ys[j + 1])};
                out.push_back(be);
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const BezierElement& a, const BezierElement& b) { return a.cell < b.cell; });
    return out;
}

// ---------------------------------------------------------------- TSplineSpace

bool index_vectors_overlap(const std::vector<Dyadic>& a, const std::vector<Dyadic>& b) {
    std::vector<Dyadic> sa, sb;
    for (Dyadic v : a)
        if (b.front() <= v && v <= b.back()) sa.push_back(v);
    for (Dyadic v : b)
        if (a.front() <= v && v <= a.back()) sb.push_back(v);
    return sa == sb;
}

TSplineSpace TSplineSpace::build(const TMesh& mesh) {
    SpaceTracker tr(mesh);
    while (!tr.done()) tr.advance();
    return from_functions(mesh, tr.functions());
}

TSplineSpace TSplineSpace::from_functions(const TMesh& mesh, std::vector<TSplineFunction> basis) {
    TSplineSpace s;
    s.mesh_ = mesh;
    s.basis_ = std::move(basis);
    std::sort(s.basis_.begin(), s.basis_.end(),
              [](const TSplineFunction& a, const TSplineFunction& b) { return a.anchor.point < b.anchor.point; });
    s.finalize();
    return s;
}

void TSplineSpace::finalize() {
    const auto p = mesh_.degree();
    duals_.clear();
    traces_.clear();
    index_.clear();
    grid_ = SupportGrid(64);
    for (int i = 0; i < static_cast<int>(basis_.size()); ++i) {
        const auto& f = basis_[i];
        duals_.push_back({bspline::dual_functional(f.kx, p[0]), bspline::dual_functional(f.ky, p[1])});
        std::array<bool, 4> t{};
        t[kBottom] = bspline::eval_local(f.ky, p[1], 0.0) != 0.0;
        t[kTop] = bspline::eval_local(f.ky, p[1], 1.0) != 0.0;
        t[kLeft] = bspline::eval_local(f.kx, p[0], 0.0) != 0.0;
        t[kRight] = bspline::eval_local(f.kx, p[0], 1.0) != 0.0;
        traces_.push_back(t);
        grid_.insert(i, f.support());
        if (!index_.emplace(std::make_pair(f.hv, f.vv), i).second)
            throw std::logic_error("duplicate T-spline function");
    }
    ext_ = extended_tmesh(mesh_);
    bezier_ = bezier_mesh(mesh_, ext_);
    incidence_.assign(bezier_.size(), {});
    for (std::size_t e = 0; e < bezier_.size(); ++e) incidence_[e] = overlapping(bezier_[e].box);
    certified_ = check_dual_compatibility().compatible;
}

std::vector<int> TSplineSpace::overlapping(const Box& b) const {
    std::vector<int> out;
    for (int i : grid_.candidates(b))
        if (basis_[i].support().overlaps_open(b)) out.push_back(i);
    std::sort(out.begin(), out.end());
    return out;
}

double TSplineSpace::eval(double u, double v) const {
    double s = 0.0;
    const double eps = 1e-12;
    Box pt{u - eps, u + eps, v - eps, v + eps};
    for (int i : grid_.candidates(pt)) s += basis_[i].eval(u, v);
    return s;
}

DualCompatibilityReport TSplineSpace::check_dual_compatibility() const {
    DualCompatibilityReport rep;
    for (int i = 0; i < static_cast<int>(basis_.size()); ++i) {
        const auto& a = basis_[i];
        for (int j : overlapping(a.support())) {
            if (j <= i) continue;
            const auto& b = basis_[j];
            bool ok = (a.hv != b.hv && index_vectors_overlap(a.hv, b.hv)) ||
                      (a.vv != b.vv && index_vectors_overlap(a.vv, b.vv));
            if (!ok) {
                rep.compatible = false;
                rep.violations.emplace_back(i, j);
            }
        }
    }
    return rep;
}

TSplineSpace::SupportExtension TSplineSpace::supports(const Box& q) const {
    SupportExtension se;
    se.functions = overlapping(q);
    se.bounding = q;
    for (int i : se.functions) {
        Box s = basis_[i].support();
        se.bounding.u0 = std::min(se.bounding.u0, s.u0);
        se.bounding.u1 = std::max(se.bounding.u1, s.u1);
        se.bounding.v0 = std::min(se.bounding.v0, s.v0);
        se.bounding.v1 = std::max(se.bounding.v1, s.v1);
    }
    return se;
}

int TSplineSpace::find(const TSplineFunction& f) const {
    auto it = index_.find(std::make_pair(f.hv, f.vv));
    return it == index_.end() ? -1 : it->second;
}

// ---------------------------------------------------------------- level sets

LevelSets level_sets(const TMesh& mesh) {
    LevelSets ls;
    SpaceTracker tr(mesh);
    ls.phi0 = tr.initial_functions();
    ls.steps.reserve(tr.num_steps());
    while (!tr.done()) ls.steps.push_back(tr.advance());
    return ls;
}

std::vector<TSplineFunction> net_added(const LevelSets& ls, std::size_t first, std::size_t last) {
    std::set<TSplineFunction, FunctionIdentityLess> added, removed;
    for (std::size_t k = first; k <= last; ++k) {
        const auto& st = ls.steps.at(k - 1);
        for (const auto& f : st.removed)
            if (added.erase(f) == 0) removed.insert(f);
        for (const auto& f : st.added)
            if (removed.erase(f) == 0) added.insert(f);
    }
    std::vector<TSplineFunction> out(added.begin(), added.end());
    std::sort(out.begin(), out.end(),
              [](const TSplineFunction& a, const TSplineFunction& b) { return a.anchor.point < b.anchor.point; });
    return out;
}

// ---------------------------------------------------------------- duals

double dual_apply(const TSplineSpace& space, int target, const TSplineFunction& f) {
    const auto p = space.degree();
    double dx[16], dy[16];
    const auto& l1 = space.dual(target, 0);
    const auto& l2 = space.dual(target, 1);
    bspline::eval_derivatives(f.kx, p[0], l1.tau, p[0], dx);
    double a = 0.0;
    for (int r = 0; r <= p[0]; ++r) a += l1.weights[r] * dx[r];
    if (a == 0.0) return 0.0;
    bspline::eval_derivatives(f.ky, p[1], l2.tau, p[1], dy);
    double b = 0.0;
    for (int r = 0; r <= p[1]; ++r) b += l2.weights[r] * dy[r];
    return a * b;
}

Eigen::SparseMatrix<double> change_of_basis(const std::vector<TSplineFunction>& coarse, const TSplineSpace& target,
                                            double tol) {
    std::vector<Eigen::Triplet<double>> trip;
    for (int j = 0; j < static_cast<int>(coarse.size()); ++j) {
        const auto& f = coarse[j];
        const Box sup = f.support();
        int t = target.find(f);
        std::vector<std::pair<int, double>> col;
        if (t >= 0) {
            col.emplace_back(t, 1.0);
        } else {
            for (int a : target.overlapping(sup)) {
                double c = dual_apply(target, a, f);
                if (std::abs(c) > 1e-14) col.emplace_back(a, c);
            }
            double worst = 0.0;
            for (int s = 1; s <= 16; ++s) {
                double u = sup.u0 + (sup.u1 - sup.u0) * halton(s, 2);
                double v = sup.v0 + (sup.v1 - sup.v0) * halton(s, 3);
                double r = f.eval(u, v);
                for (auto [a, c] : col) r -= c * target.function(a).eval(u, v);
                worst = std::max(worst, std::abs(r));
            }
            if (worst > tol) throw std::runtime_error("function not in target span (residual " + std::to_string(worst) + ")");
        }
        for (auto [a, c] : col) trip.emplace_back(a, j, c);
    }
    Eigen::SparseMatrix<double> M(static_cast<int>(target.size()), static_cast<int>(coarse.size()));
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
}

std::vector<double> projector(const TSplineSpace& space, const BivariateDerivative& f) {
    if (!space.as_certified()) throw std::invalid_argument("projector requires a dual-compatible space");
    const auto p = space.degree();
    std::vector<double> out(space.size());
    for (int i = 0; i < static_cast<int>(space.size()); ++i) {
        const auto& l1 = space.dual(i, 0);
        const auto& l2 = space.dual(i, 1);
        double s = 0.0;
        for (int r1 = 0; r1 <= p[0]; ++r1)
            for (int r2 = 0; r2 <= p[1]; ++r2) s += l1.weights[r1] * l2.weights[r2] * f(l1.tau, l2.tau, r1, r2);
        out[i] = s;
    }
    return out;
}

// ---------------------------------------------------------------- embedding

bspline::KnotVector uniform_knots(const TMesh& mesh, int d, int level) {
    const auto& kl = mesh.knot_line(d);
    return bspline::KnotVector::open_uniform(kl.degree, kl.elements() << level);
}

namespace {

long fine_position(const KnotLine& kl, Dyadic k, int level) {
    const Dyadic p(kl.degree), n(kl.functions);
    if (k <= p) {
        if (!k.is_integer()) throw std::invalid_argument("frame index is not an integer");
        return static_cast<long>(k.floor());
    }
    if (k >= n) return kl.degree + (static_cast<long>(kl.elements()) << level) + static_cast<long>((k - n).floor());
    Dyadic t = (k - p).times_pow2(level);
    if (!t.is_integer()) throw std::invalid_argument("embedding level too small for index " + k.str());
    return kl.degree + static_cast<long>(t.floor());
}

std::pair<long, std::vector<double>> embed_1d(const TMesh& mesh, int d, const std::vector<Dyadic>& iv,
                                              const std::vector<double>& knots, int level) {
    const auto& kl = mesh.knot_line(d);
    auto fine = uniform_knots(mesh, d, level);
    std::vector<long> pos;
    for (Dyadic k : iv) pos.push_back(fine_position(kl, k, level));
    std::vector<double> ins;
    std::size_t next = 1;
    for (long q = pos.front() + 1; q < pos.back(); ++q) {
        if (next < pos.size() && pos[next] == q) {
            ++next;
            continue;
        }
        ins.push_back(fine.knots[q]);
    }
    return {pos.front(), bspline::refine_local(knots, kl.degree, ins)};
}

}  // namespace

FineEmbedding fine_embedding(const TMesh& mesh, const TSplineFunction& f, int level_x, int level_y) {
    FineEmbedding e;
    e.levels[0] = level_x;
    e.levels[1] = level_y;
    for (int d = 0; d < 2; ++d)
        e.sizes[d] = (mesh.knot_line(d).elements() << e.levels[d]) + mesh.knot_line(d).degree;
    auto [sx, cx] = embed_1d(mesh, 0, f.hv, f.kx, level_x);
    auto [sy, cy] = embed_1d(mesh, 1, f.vv, f.ky, level_y);
    for (std::size_t i = 0; i < cx.size(); ++i)
        for (std::size_t j = 0; j < cy.size(); ++j)
            if (cx[i] * cy[j] != 0.0)
                e.coefs.emplace_back((sx + static_cast<long>(i)) * e.sizes[1] + sy + static_cast<long>(j), cx[i] * cy[j]);
    return e;
}

FineEmbedding fine_embedding(const TMesh& mesh, const TSplineFunction& f, int level) {
    return fine_embedding(mesh, f, (level + 1) / 2, level / 2);
}

nlohmann::json space_to_json(const TSplineSpace& space) {
    nlohmann::json j;
    j["format"] = "asts.space";
    j["version"] = 1;
    j["degree"] = {space.degree()[0], space.degree()[1]};
    j["analysis_suitable"] = space.as_certified();
    j["bezier_elements"] = space.bezier().size();
    auto& arr = j["functions"] = nlohmann::json::array();
    for (const auto& f : space.basis()) {
        nlohmann::json fj;
        fj["anchor"] = {{"kind", to_string(f.anchor.kind)}, {"point", {f.anchor.point.x.str(), f.anchor.point.y.str()}}};
        auto strs = [](const std::vector<Dyadic>& v) {
            std::vector<std::string> s;
            for (auto d : v) s.push_back(d.str());
            return s;
        };
        fj["hv"] = strs(f.hv);
        fj["vv"] = strs(f.vv);
        fj["kx"] = f.kx;
        fj["ky"] = f.ky;
        fj["generation"] = f.generation;
        arr.push_back(fj);
    }
    return j;
}

}  // namespace asts
