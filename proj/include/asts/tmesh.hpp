#pragma once

#include "asts/dyadic.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace asts {

enum class Direction { x, y };

struct Bisection {
    IndexRect parent;
    Direction direction = Direction::x;
    int generation = 1;  // generation of the children
};

// Closed intervals on one skeleton line, sorted and merged.
class IntervalSet {
public:
    void insert(Dyadic a, Dyadic b);
    bool contains(Dyadic t) const;
    // true if some interval contains [a, b]
    bool covers(Dyadic a, Dyadic b) const;
    // interval containing t, if any
    std::optional<std::pair<Dyadic, Dyadic>> find(Dyadic t) const;
    const std::vector<std::pair<Dyadic, Dyadic>>& intervals() const { return iv_; }

private:
    std::vector<std::pair<Dyadic, Dyadic>> iv_;
};

// Lines of one orientation keyed by their fixed coordinate.
using SkeletonLines = std::map<Dyadic, IntervalSet>;

struct NeighborhoodSpec {
    Dyadic dx, dy;
};

NeighborhoodSpec neighborhood_extent(DegreePair p, int generation);

// Global open knot data of one direction: index k maps to clamp(k - p, 0, N) / N.
struct KnotLine {
    int degree = 0;
    int functions = 0;  // n
    int elements() const { return functions - degree; }
    double h() const { return 1.0 / elements(); }
    double xi(Dyadic k) const;
    // true if [a,b] has zero parametric length
    bool degenerate(Dyadic a, Dyadic b) const { return b <= Dyadic(degree) || a >= Dyadic(functions); }
};

class TMesh {
public:
    struct Node {
        IndexRect rect;
        int generation = 0;
        int parent = -1;
        int child[2] = {-1, -1};
        char split = 0;  // 0 leaf, 'x', 'y', 'z' (generation bump without geometric split)
        bool leaf() const { return split == 0; }
    };

    TMesh(DegreePair p, std::array<int, 2> n);

    static TMesh initial_mesh(DegreePair p, std::array<int, 2> n) { return TMesh(p, n); }

    DegreePair degree() const { return p_; }
    std::array<int, 2> n() const { return n_; }
    std::array<int, 2> extents() const { return {n_[0] + p_[0], n_[1] + p_[1]}; }
    const KnotLine& knot_line(int d) const { return lines_[d]; }

    const std::vector<Node>& nodes() const { return nodes_; }
    const Node& node(int id) const { return nodes_[id]; }
    const std::vector<Bisection>& history() const { return history_; }
    std::vector<int> leaves() const;
    std::size_t num_elements() const { return num_leaves_; }
    int max_generation() const;

    // leaf id whose rectangle equals r, or -1
    int find_leaf(const IndexRect& r) const;
    // leaf containing an interior point (ties on split lines go to the upper child)
    int locate(IndexVec2 pt) const;
    // leaves whose closed rectangle meets the closed query rectangle
    std::vector<int> leaves_in(const IndexRect& q) const;

    // Bisect a leaf by the generation parity rule; returns the child ids.
    std::vector<int> bisect_node(int id);
    std::vector<int> bisect_element(const IndexRect& r);
    // Split in a given direction with an explicit child generation label (used by
    // drivers that do not follow the parity rule, and by history replay).
    std::vector<int> split_node(int id, Direction dir, int generation);
    std::vector<int> split_element(const IndexRect& r, Direction dir, int generation);
    // Replay one history record.
    std::vector<int> apply(const Bisection& b) { return split_element(b.parent, b.direction, b.generation); }

    std::vector<int> neighborhood(int id) const;
    std::vector<IndexRect> neighborhood(const IndexRect& r) const;

    // Bisect r after recursively bisecting coarser neighbours.
    void refine_admissible(const IndexRect& r);
    void refine_admissible_node(int id);

    // Stable re-sort of the history by generation.
    void sort_history();

    // U_p(tau) predicate: point within D_p(g(tau)) of tau after translation
    bool in_u_region(int id, IndexVec2 pt) const;

    const SkeletonLines& vertical_lines() const { return vsk_; }
    const SkeletonLines& horizontal_lines() const { return hsk_; }
    bool on_vertical_skeleton(Dyadic x, Dyadic y) const;
    bool on_horizontal_skeleton(Dyadic x, Dyadic y) const;

    double xi(int d, Dyadic k) const { return lines_[d].xi(k); }
    IndexVec2 translated_center(const IndexRect& r) const;

    nlohmann::json to_json() const;
    static TMesh from_json(const nlohmann::json& j);
    std::string serialize() const;

private:
    int root_id(std::int64_t i, std::int64_t j) const { return static_cast<int>(i * (n_[1] + p_[1]) + j); }
    void add_segment(Direction dir, Dyadic fixed, Dyadic a, Dyadic b);
    void refine_recursive(int id, int depth);

    DegreePair p_;
    std::array<int, 2> n_;
    std::array<KnotLine, 2> lines_;
    std::vector<Node> nodes_;
    std::vector<Bisection> history_;
    SkeletonLines vsk_, hsk_;
    std::size_t num_leaves_ = 0;
};

struct AdmissibilityViolation {
    std::size_t step = 0;
    IndexRect element;
    IndexRect neighbor;
    int element_generation = 0;
    int neighbor_generation = 0;
};

struct AdmissibilityReport {
    bool admissible = true;
    std::vector<AdmissibilityViolation> violations;
};

// Replays the history and checks every bisection against its neighbourhood.
AdmissibilityReport check_admissible(const TMesh& mesh);

// max over elements tau and tau' in G_p(tau) of g(tau) - g(tau')
int generation_gap_audit(const TMesh& mesh);

// Mesh after the first k bisections of the history.
TMesh replay_prefix(const TMesh& mesh, std::size_t k);

}  // namespace asts
