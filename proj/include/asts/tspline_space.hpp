#pragma once

#include "asts/bspline.hpp"
#include "asts/tmesh.hpp"

#include <Eigen/SparseCore>
#include <nlohmann/json_fwd.hpp>

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace asts {

enum class AnchorKind { vertex, element, h_edge, v_edge };

AnchorKind anchor_kind(DegreePair p);
const char* to_string(AnchorKind k);

struct Anchor {
    AnchorKind kind = AnchorKind::vertex;
    IndexVec2 point;    // vertex, element centre or edge midpoint
    IndexRect entity;   // degenerate rectangle for vertices and edges
};

struct Box {
    double u0 = 0, u1 = 0, v0 = 0, v1 = 0;
    bool overlaps_open(const Box& b) const { return u0 < b.u1 && b.u0 < u1 && v0 < b.v1 && b.v0 < v1; }
    bool contains(const Box& b, double tol = 0.0) const {
        return u0 <= b.u0 + tol && b.u1 <= u1 + tol && v0 <= b.v0 + tol && b.v1 <= v1 + tol;
    }
    double area() const { return (u1 - u0) * (v1 - v0); }
};

struct TSplineFunction {
    Anchor anchor;
    std::vector<Dyadic> hv, vv;     // index vectors
    std::vector<double> kx, ky;     // local knot vectors
    int generation = 0;

    Box support() const { return {kx.front(), kx.back(), ky.front(), ky.back()}; }
    double eval(double u, double v) const;
    // partial derivative d^ru/du^ru d^rv/dv^rv
    double derivative(double u, double v, int ru, int rv) const;
    bool same_identity(const TSplineFunction& o) const { return hv == o.hv && vv == o.vv; }
};

struct FunctionIdentityLess {
    bool operator()(const TSplineFunction& a, const TSplineFunction& b) const;
};

// Anchors whose entity lies inside the closed region, inside the active region.
std::vector<Anchor> anchors(const TMesh& mesh);
std::vector<Anchor> anchors_in(const TMesh& mesh, const IndexRect& region);

struct IndexVectors {
    std::vector<Dyadic> hv, vv;
};

IndexVectors index_vectors(const TMesh& mesh, const Anchor& a);
TSplineFunction make_function(const TMesh& mesh, const Anchor& a, int generation);

// Uniform bucket grid over the unit square for support overlap queries.
class SupportGrid {
public:
    explicit SupportGrid(int cells = 64) : g_(cells), buckets_(static_cast<std::size_t>(cells) * cells) {}
    void insert(int id, const Box& b);
    void remove(int id, const Box& b);
    // ids whose registered box may overlap b (deduplicated, unsorted)
    std::vector<int> candidates(const Box& b) const;

private:
    std::array<int, 4> range(const Box& b) const;
    int g_;
    std::vector<std::vector<int>> buckets_;
    mutable std::vector<int> stamp_;
    mutable int tick_ = 0;
};

struct StepDelta {
    std::size_t step = 0;  // k: the delta turns T_{k-1} into T_k
    int generation = 0;    // l_k
    Bisection bisection;
    bool geometric = false;  // false for generation-only bisections
    IndexRect new_edge;      // degenerate rectangle of the added edge
    std::vector<TSplineFunction> added;    // Phi_k
    std::vector<TSplineFunction> removed;  // Psi_{k-1}
};

// Replays a mesh history one bisection at a time and maintains the T-spline
// functions incrementally.
class SpaceTracker {
public:
    explicit SpaceTracker(const TMesh& target, bool overlap_index = false);

    std::size_t num_steps() const { return target_->history().size(); }
    std::size_t position() const { return pos_; }
    bool done() const { return pos_ >= num_steps(); }
    const std::vector<TSplineFunction>& initial_functions() const { return initial_; }
    StepDelta advance();

    const TMesh& mesh() const { return work_; }
    std::size_t size() const { return by_yx_.size(); }
    std::vector<TSplineFunction> functions() const;  // sorted by anchor (x, y)
    // current functions whose support interior meets b; needs overlap_index
    std::vector<const TSplineFunction*> overlapping(const Box& b) const;

private:
    using Key = std::pair<Dyadic, Dyadic>;
    int insert_function(TSplineFunction f);
    void erase_function(int slot);

    const TMesh* target_;
    TMesh work_;
    std::size_t pos_ = 0;
    std::vector<TSplineFunction> initial_;
    std::vector<TSplineFunction> slots_;
    std::vector<int> free_;
    std::map<Key, int> by_yx_;  // (y, x) of anchor point
    std::map<Key, int> by_xy_;  // (x, y) of anchor point
    bool overlap_index_;
    std::unique_ptr<SupportGrid> grid_;
};

struct Extension {
    IndexVec2 junction;
    Direction line = Direction::x;  // x: horizontal segment, y: vertical segment
    Dyadic fixed, a, b;             // line coordinate and segment extent
    bool frame = false;
};

struct ExtendedMesh {
    std::vector<Extension> extensions;
    std::vector<std::pair<int, int>> crossings;  // (horizontal, vertical) indices, frame junctions excluded
    std::size_t frame_crossings = 0;
    std::size_t partial_cuts = 0;
    bool crossing_free() const { return crossings.empty(); }
};

ExtendedMesh extended_tmesh(const TMesh& mesh);

struct BezierElement {
    IndexRect cell;
    int leaf = -1;
    Box box;
};

std::vector<BezierElement> bezier_mesh(const TMesh& mesh, const ExtendedMesh& ext);

struct DualCompatibilityReport {
    bool compatible = true;
    std::vector<std::pair<int, int>> violations;
};

// Whether two index vectors are consecutive pieces of one global index line.
bool index_vectors_overlap(const std::vector<Dyadic>& a, const std::vector<Dyadic>& b);

enum Edge { kBottom = 0, kRight = 1, kTop = 2, kLeft = 3 };

class TSplineSpace {
public:
    static TSplineSpace build(const TMesh& mesh);
    static TSplineSpace from_functions(const TMesh& mesh, std::vector<TSplineFunction> basis);

    const TMesh& mesh() const { return mesh_; }
    DegreePair degree() const { return mesh_.degree(); }
    const std::vector<TSplineFunction>& basis() const { return basis_; }
    std::size_t size() const { return basis_.size(); }
    const TSplineFunction& function(int i) const { return basis_[i]; }
    const ExtendedMesh& extended() const { return ext_; }
    const std::vector<BezierElement>& bezier() const { return bezier_; }
    const std::vector<std::vector<int>>& incidence() const { return incidence_; }
    const bspline::DualFunctional& dual(int i, int d) const { return duals_[i][d]; }

    DualCompatibilityReport check_dual_compatibility() const;
    bool as_certified() const { return certified_; }

    // functions whose support interior meets the box
    std::vector<int> overlapping(const Box& b) const;
    double eval(double u, double v) const;  // sum of all basis functions (partition of unity check)
    // Function traces are nonzero on the given edge of the unit square
    bool touches(int i, Edge e) const { return traces_[i][e]; }
    bool on_boundary(int i) const { return traces_[i][0] || traces_[i][1] || traces_[i][2] || traces_[i][3]; }

    // Support extension of an element: union box and bounding rectangle.
    struct SupportExtension {
        std::vector<int> functions;
        Box bounding;
    };
    SupportExtension supports(const Box& q) const;

    int find(const TSplineFunction& f) const;  // index by identity, -1 if absent

private:
    void finalize();

    TMesh mesh_{{1, 1}, {2, 2}};
    std::vector<TSplineFunction> basis_;
    std::vector<std::array<bspline::DualFunctional, 2>> duals_;
    std::vector<std::array<bool, 4>> traces_;
    ExtendedMesh ext_;
    std::vector<BezierElement> bezier_;
    std::vector<std::vector<int>> incidence_;
    SupportGrid grid_{64};
    std::map<std::pair<std::vector<Dyadic>, std::vector<Dyadic>>, int> index_;
    bool certified_ = false;
};

struct LevelSets {
    std::vector<TSplineFunction> phi0;
    std::vector<StepDelta> steps;  // steps[k-1] holds Phi_k and Psi_{k-1}
};

LevelSets level_sets(const TMesh& mesh);

// Net functions added between the meshes before step `first` and after step `last`
// (1-based step numbers, inclusive).
std::vector<TSplineFunction> net_added(const LevelSets& ls, std::size_t first, std::size_t last);

// Dual-functional value lambda_A(F) for tensor-product F, per direction product.
double dual_apply(const TSplineSpace& space, int target, const TSplineFunction& f);

// Coefficients of each coarse function in the target basis (rows: target,
// cols: coarse). Throws if a sampled reconstruction residual exceeds tol.
Eigen::SparseMatrix<double> change_of_basis(const std::vector<TSplineFunction>& coarse, const TSplineSpace& target,
                                            double tol = 1e-10);

// lambda_A(f) for every basis function; f(u, v, ru, rv) returns partial derivatives.
using BivariateDerivative = std::function<double(double, double, int, int)>;
std::vector<double> projector(const TSplineSpace& space, const BivariateDerivative& f);

// Tensor B-spline expansion in the uniform basis with dyadic levels (lx, ly).
struct FineEmbedding {
    int levels[2] = {0, 0};
    int sizes[2] = {0, 0};
    std::vector<std::pair<long, double>> coefs;  // (ix * sizes[1] + iy, value)
};

FineEmbedding fine_embedding(const TMesh& mesh, const TSplineFunction& f, int level);
FineEmbedding fine_embedding(const TMesh& mesh, const TSplineFunction& f, int level_x, int level_y);
bspline::KnotVector uniform_knots(const TMesh& mesh, int d, int level);

nlohmann::json space_to_json(const TSplineSpace& space);

}  // namespace asts
