#pragma once

#include "asts/tmesh.hpp"
#include "asts/tspline_space.hpp"

#include <string>

namespace asts {

struct SvgOptions {
    double size = 640.0;       // drawing width and height of the parametric square
    double frame_gap = 6.0;    // separation between repeated boundary knot lines
    double margin = 16.0;
    double stroke = 1.0;
};

// Index-space drawing: parametric positions, repeated knots separated by frame_gap.
std::string tmesh_svg(const TMesh& mesh, const SvgOptions& opt = {});
// T-mesh plus T-junction extensions (dashed).
std::string extended_svg(const TMesh& mesh, const ExtendedMesh& ext, const SvgOptions& opt = {});
// Bezier elements in the parametric square.
std::string bezier_svg(const TSplineSpace& space, const SvgOptions& opt = {});

// Colour of edges created at a generation; generation 0 is black.
std::string generation_color(int generation);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace asts
