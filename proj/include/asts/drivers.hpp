#pragma once

#include "asts/tmesh.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace asts {

// Corner refinement of the square: each level bisects every element of the
// current generation inside the largest origin-anchored square [0, p + s]^2
// (frame strips included) for which the bisections are admissible.
class CornerRefinement {
public:
    CornerRefinement(DegreePair p, int elements);

    const TMesh& mesh() const { return mesh_; }
    TMesh& mesh() { return mesh_; }
    int level() const { return generation_ + 1; }  // level 1 is the initial mesh
    Dyadic side() const { return side_; }
    bool used_fallback() const { return fallback_; }

    // Advance by one generation.
    void step();

private:
    bool collect(Dyadic side, std::vector<int>& targets) const;

    TMesh mesh_;
    Dyadic side_;
    int generation_ = 0;
    bool fallback_ = false;
};

// Quad-split refinement towards the corner: elements of the current level in
// [0, p + s]^2 are split in four, then every new line is extended floor(p/2)
// coarse cells beyond the square. All bisections of one step share the label k.
class AlternativeRefinement {
public:
    AlternativeRefinement(DegreePair p, int elements, Dyadic first_side = Dyadic(6));

    const TMesh& mesh() const { return mesh_; }
    int level() const { return step_ + 1; }
    Dyadic side() const { return side_; }
    void step();

private:
    void extend_line(Direction dir, Dyadic at, Dyadic a, Dyadic b, int label);

    TMesh mesh_;
    Dyadic side_;
    int step_ = 0;
};

// Default initial elements per direction for the square experiments.
int default_elements(int degree);

TMesh corner_mesh(DegreePair p, int elements, int level);
TMesh alternative_mesh(DegreePair p, int elements, int level);

// Seeded sequence of refine_admissible calls on random active elements.
TMesh random_admissible_mesh(DegreePair p, std::array<int, 2> n, int refinements, std::uint64_t seed);

}  // namespace asts
