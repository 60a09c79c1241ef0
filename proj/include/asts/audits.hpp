#pragma once

#include "asts/tspline_space.hpp"

#include <string>
#include <vector>

namespace asts {

struct TiledFloorAudit {
    std::size_t functions = 0;
    std::size_t cells = 0;
    std::size_t length_violations = 0;  // cell lengths outside the admitted pair
    int max_bezier_per_cell = 0;
    std::vector<std::string> messages;
    bool ok() const { return length_violations == 0 && max_bezier_per_cell <= 2; }
};

// Admitted index-unit cell lengths for a function of the given generation.
std::vector<Dyadic> admitted_lengths(int generation, int direction);

TiledFloorAudit audit_tiled_floor(const TSplineSpace& space);

struct OverlapAudit {
    int max_omega = 0;        // max same-generation count of omega_k containing a Bezier element
    int max_omega_tilde = 0;  // same for the support extensions
    int bound_omega = 0;
    int bound_omega_tilde = 0;
    bool ok() const { return max_omega <= bound_omega && max_omega_tilde <= bound_omega_tilde; }
};

int omega_bound(DegreePair p);
int omega_tilde_bound(DegreePair p);

OverlapAudit audit_overlaps(const TSplineSpace& space);

// Dual compatibility and the extension-crossing test agree.
bool as_tests_agree(const TSplineSpace& space);

}  // namespace asts
