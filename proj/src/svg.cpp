#include "asts/svg.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace asts {

namespace {

class Canvas {
public:
    Canvas(const TMesh& mesh, const SvgOptions& opt) : mesh_(mesh), opt_(opt) {
        const auto p = mesh.degree();
        pad_ = opt.frame_gap * std::max(p[0], p[1]);
    }

    double x(Dyadic k) const { return opt_.margin + pad_ + coord(0, k); }
    // SVG y grows downwards
    double y(Dyadic k) const { return opt_.margin + pad_ + opt_.size - coord(1, k); }
    double px(double u) const { return opt_.margin + pad_ + opt_.size * u; }
    double py(double v) const { return opt_.margin + pad_ + opt_.size * (1.0 - v); }
    double total() const { return 2 * (opt_.margin + pad_) + opt_.size; }

    void line(double x0, double y0, double x1, double y1, const std::string& color, bool dashed = false) {
        char buf[256];
        std::snprintf(buf, sizeof buf,
                      "<line x1=\"%.3f\" y1=\"%.3f\" x2=\"%.3f\" y2=\"%.3f\" stroke=\"%s\" stroke-width=\"%.2f\"%s/>\n",
                      x0, y0, x1, y1, color.c_str(), opt_.stroke, dashed ? " stroke-dasharray=\"4,3\"" : "");
        body_ << buf;
    }

    std::string finish() const {
        std::ostringstream os;
        char head[256];
        std::snprintf(head, sizeof head,
                      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" viewBox=\"0 0 %.0f %.0f\">\n",
                      total(), total(), total(), total());
        os << head << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" << body_.str() << "</svg>\n";
        return os.str();
    }

    void skeleton() {
        const auto m = mesh_.extents();
        for (int i = 0; i <= m[0]; ++i) line(x(Dyadic(i)), y(Dyadic(0)), x(Dyadic(i)), y(Dyadic(m[1])), generation_color(0));
        for (int j = 0; j <= m[1]; ++j) line(x(Dyadic(0)), y(Dyadic(j)), x(Dyadic(m[0])), y(Dyadic(j)), generation_color(0));
        for (const auto& nd : mesh_.nodes()) {
            if (nd.split != 'x' && nd.split != 'y') continue;
            const auto& r = nd.rect;
            const int g = mesh_.node(nd.child[0]).generation;
            if (nd.split == 'x') {
                const Dyadic mid = midpoint(r.x0, r.x1);
                line(x(mid), y(r.y0), x(mid), y(r.y1), generation_color(g));
            } else {
                const Dyadic mid = midpoint(r.y0, r.y1);
                line(x(r.x0), y(mid), x(r.x1), y(mid), generation_color(g));
            }
        }
    }

private:
    double coord(int d, Dyadic k) const {
        const auto& kl = mesh_.knot_line(d);
        const double kd = k.to_double();
        const double lo = std::clamp(kd, 0.0, double(kl.degree)) - kl.degree;
        const double hi = std::clamp(kd, double(kl.functions), double(kl.functions + kl.degree)) - kl.functions;
        return opt_.size * kl.xi(k) + opt_.frame_gap * (lo + hi);
    }

    const TMesh& mesh_;
    SvgOptions opt_;
    double pad_ = 0;
    std::ostringstream body_;
};

}  // namespace

std::string generation_color(int generation) {
    static const char* palette[] = {"#000000", "#d62728", "#1f77b4", "#e377c2", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#17becf", "#8c564b", "#bcbd22", "#7f7f7f"};
    constexpr int n = sizeof palette / sizeof palette[0];
    if (generation <= 0) return palette[0];
    return palette[1 + (generation - 1) % (n - 1)];
}

std::string tmesh_svg(const TMesh& mesh, const SvgOptions& opt) {
    Canvas c(mesh, opt);
    c.skeleton();
    return c.finish();
}

std::string extended_svg(const TMesh& mesh, const ExtendedMesh& ext, const SvgOptions& opt) {
    Canvas c(mesh, opt);
    c.skeleton();
    for (const auto& e : ext.extensions) {
        if (e.line == Direction::x)
            c.line(c.x(e.a), c.y(e.fixed), c.x(e.b), c.y(e.fixed), "#808080", true);
        else
            c.line(c.x(e.fixed), c.y(e.a), c.x(e.fixed), c.y(e.b), "#808080", true);
    }
    return c.finish();
}

std::string bezier_svg(const TSplineSpace& space, const SvgOptions& opt) {
    SvgOptions o = opt;
    o.frame_gap = 0.0;
    Canvas c(space.mesh(), o);
    for (const auto& el : space.bezier()) {
        const auto& b = el.box;
        const std::string col = generation_color(space.mesh().node(el.leaf).generation);
        c.line(c.px(b.u0), c.py(b.v0), c.px(b.u1), c.py(b.v0), col);
        c.line(c.px(b.u1), c.py(b.v0), c.px(b.u1), c.py(b.v1), col);
        c.line(c.px(b.u1), c.py(b.v1), c.px(b.u0), c.py(b.v1), col);
        c.line(c.px(b.u0), c.py(b.v1), c.px(b.u0), c.py(b.v0), col);
    }
    return c.finish();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << content;
    if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace asts
