#include "asts/assembly.hpp"

#include "asts/parallel.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <stdexcept>

namespace asts {

QuadratureRule gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("quadrature needs at least one point");
    QuadratureRule q;
    q.points.resize(n);
    q.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0, p1 = x;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        q.points[i] = 0.5 * (1.0 - x);
        q.points[n - 1 - i] = 0.5 * (1.0 + x);
        q.weights[i] = q.weights[n - 1 - i] = 0.5 * w;
    }
    return q;
}

GeometryEval IdentityMap::eval(double u, double v) const {
    GeometryEval g;
    g.x = u;
    g.y = v;
    return g;
}

BezierPatchMap::BezierPatchMap(std::array<std::array<Point, 3>, 3> control, std::array<double, 4> linear,
                               std::string name)
    : control_(control), linear_(linear), name_(std::move(name)) {}

GeometryEval BezierPatchMap::eval(double u, double v) const {
    const double bu[3] = {(1 - u) * (1 - u), 2 * u * (1 - u), u * u};
    const double du[3] = {-2 * (1 - u), 2 - 4 * u, 2 * u};
    const double bv[3] = {(1 - v) * (1 - v), 2 * v * (1 - v), v * v};
    const double dv[3] = {-2 * (1 - v), 2 - 4 * v, 2 * v};
    double p[2] = {0, 0}, pu[2] = {0, 0}, pv[2] = {0, 0};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            for (int c = 0; c < 2; ++c) {
                p[c] += bu[i] * bv[j] * control_[i][j][c];
                pu[c] += du[i] * bv[j] * control_[i][j][c];
                pv[c] += bu[i] * dv[j] * control_[i][j][c];
            }
        }
    }
    GeometryEval g;
    const auto& L = linear_;
    g.x = L[0] * p[0] + L[1] * p[1];
    g.y = L[2] * p[0] + L[3] * p[1];
    g.jac[0][0] = L[0] * pu[0] + L[1] * pu[1];
    g.jac[0][1] = L[0] * pv[0] + L[1] * pv[1];
    g.jac[1][0] = L[2] * pu[0] + L[3] * pu[1];
    g.jac[1][1] = L[2] * pv[0] + L[3] * pv[1];
    return g;
}

nlohmann::json curved_l_data() {
    nlohmann::json j;
    j["format"] = "asts.curved_l";
    j["version"] = 1;
    // control[i][j] with i along u and j along v
    j["control"] = {{{0.0, 0.0}, {0.0, 0.5}, {0.0, 1.0}},
                    {{0.5, 0.0}, {0.5, 0.5}, {0.5, 1.0}},
                    {{1.0, 0.0}, {1.0, 0.5}, {1.25, 1.25}}};
    j["patches"] = {{{"name", "A"}, {"linear", {0, 1, 1, 0}}},
                    {{"name", "B"}, {"linear", {0, -1, 1, 0}}},
                    {{"name", "C"}, {"linear", {0, -1, -1, 0}}}};
    return j;
}

std::vector<std::shared_ptr<const GeometryMap>> curved_l_maps(const nlohmann::json& data) {
    std::array<std::array<BezierPatchMap::Point, 3>, 3> ctrl{};
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) ctrl[i][k] = {data["control"][i][k][0].get<double>(), data["control"][i][k][1].get<double>()};
    std::vector<std::shared_ptr<const GeometryMap>> out;
    for (const auto& pj : data["patches"]) {
        auto lin = pj["linear"].get<std::vector<double>>();
        if (lin.size() != 4) throw std::invalid_argument("curved L: linear map needs four entries");
        out.push_back(std::make_shared<BezierPatchMap>(ctrl, std::array<double, 4>{lin[0], lin[1], lin[2], lin[3]},
                                                       "curved-L-" + pj["name"].get<std::string>()));
    }
    return out;
}

std::vector<std::shared_ptr<const GeometryMap>> curved_l_maps() { return curved_l_maps(curved_l_data()); }

std::vector<Interface> curved_l_interfaces() { return {{0, kBottom, 1, kBottom}, {1, kLeft, 2, kLeft}}; }

// ---------------------------------------------------------------- Discretization

namespace {

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

const std::vector<double>& trace_knots(const TSplineFunction& f, Edge e) {
    return (e == kBottom || e == kTop) ? f.kx : f.ky;
}

}  // namespace

Discretization Discretization::single(const TSplineSpace& space, std::shared_ptr<const GeometryMap> geometry) {
    return multipatch({&space}, {std::move(geometry)}, {});
}

Discretization Discretization::multipatch(std::vector<const TSplineSpace*> spaces,
                                          std::vector<std::shared_ptr<const GeometryMap>> geometries,
                                          const std::vector<Interface>& interfaces) {
    if (spaces.size() != geometries.size()) throw std::invalid_argument("one geometry map per patch required");
    Discretization d;
    std::vector<int> offset;
    int total = 0;
    for (std::size_t i = 0; i < spaces.size(); ++i) {
        offset.push_back(total);
        total += static_cast<int>(spaces[i]->size());
        d.patches_.push_back({spaces[i], geometries[i], {}});
    }
    d.dirichlet_edges_.assign(spaces.size(), {true, true, true, true});
    d.interfaces_ = interfaces;
    UnionFind uf(total);
    for (const auto& itf : interfaces) {
        const auto& sa = *spaces.at(itf.patch_a);
        const auto& sb = *spaces.at(itf.patch_b);
        d.dirichlet_edges_[itf.patch_a][itf.edge_a] = false;
        d.dirichlet_edges_[itf.patch_b][itf.edge_b] = false;
        std::map<std::vector<double>, int> side_b;
        for (int j = 0; j < static_cast<int>(sb.size()); ++j)
            if (sb.touches(j, itf.edge_b)) side_b.emplace(trace_knots(sb.function(j), itf.edge_b), j);
        std::size_t matched = 0;
        for (int i = 0; i < static_cast<int>(sa.size()); ++i) {
            if (!sa.touches(i, itf.edge_a)) continue;
            auto it = side_b.find(trace_knots(sa.function(i), itf.edge_a));
            if (it == side_b.end()) throw std::invalid_argument("interface knot mismatch");
            uf.unite(offset[itf.patch_a] + i, offset[itf.patch_b] + it->second);
            ++matched;
        }
        if (matched != side_b.size()) throw std::invalid_argument("interface knot mismatch");
    }
    std::vector<int> id_of_root(total, -1);
    int next = 0;
    for (int k = 0; k < total; ++k) {
        int r = uf.find(k);
        if (id_of_root[r] < 0) id_of_root[r] = next++;
    }
    d.num_global_ = next;
    d.members_.assign(next, {});
    for (std::size_t pi = 0; pi < spaces.size(); ++pi) {
        auto& patch = d.patches_[pi];
        patch.global.resize(spaces[pi]->size());
        for (int i = 0; i < static_cast<int>(spaces[pi]->size()); ++i) {
            int g = id_of_root[uf.find(offset[pi] + i)];
            patch.global[i] = g;
            d.members_[g].emplace_back(static_cast<int>(pi), i);
        }
    }
    d.finish();
    return d;
}

void Discretization::finish() {
    dirichlet_.assign(num_global_, false);
    for (std::size_t pi = 0; pi < patches_.size(); ++pi) {
        const auto& sp = *patches_[pi].space;
        for (int i = 0; i < static_cast<int>(sp.size()); ++i)
            for (Edge e : {kBottom, kRight, kTop, kLeft})
                if (dirichlet_edges_[pi][e] && sp.touches(i, e)) dirichlet_[patches_[pi].global[i]] = true;
    }
    dof_of_global_.assign(num_global_, -1);
    global_of_dof_.clear();
    for (int g = 0; g < num_global_; ++g) {
        if (dirichlet_[g]) continue;
        dof_of_global_[g] = static_cast<int>(global_of_dof_.size());
        global_of_dof_.push_back(g);
    }
}

// ---------------------------------------------------------------- assembly

namespace {

struct ElementData {
    std::vector<int> functions;
    std::vector<double> weight;  // per quadrature point: w * |det J|
    std::vector<double> x, y;    // physical points
    // per point, per function: value and physical gradient
    std::vector<double> val, gx, gy;
};

void element_data(const TSplineSpace& space, const GeometryMap& geo, int e, const QuadratureRule& qu,
                  const QuadratureRule& qv, bool gradients, ElementData& out) {
    const auto& el = space.bezier()[e];
    const auto p = space.degree();
    out.functions = space.incidence()[e];
    const int nf = static_cast<int>(out.functions.size());
    const int nq = static_cast<int>(qu.points.size() * qv.points.size());
    out.weight.assign(nq, 0.0);
    out.x.assign(nq, 0.0);
    out.y.assign(nq, 0.0);
    out.val.assign(static_cast<std::size_t>(nq) * nf, 0.0);
    out.gx.assign(static_cast<std::size_t>(nq) * nf, 0.0);
    out.gy.assign(static_cast<std::size_t>(nq) * nf, 0.0);
    const double hu = el.box.u1 - el.box.u0, hv = el.box.v1 - el.box.v0;
    const int nu = static_cast<int>(qu.points.size()), nv = static_cast<int>(qv.points.size());
    // 1D factors per function per point
    std::vector<double> fu(static_cast<std::size_t>(nf) * nu * 2), fv(static_cast<std::size_t>(nf) * nv * 2);
    double d[2];
    for (int a = 0; a < nf; ++a) {
        const auto& f = space.function(out.functions[a]);
        for (int i = 0; i < nu; ++i) {
            bspline::eval_derivatives(f.kx, p[0], el.box.u0 + hu * qu.points[i], 1, d);
            fu[(a * nu + i) * 2] = d[0];
            fu[(a * nu + i) * 2 + 1] = d[1];
        }
        for (int j = 0; j < nv; ++j) {
            bspline::eval_derivatives(f.ky, p[1], el.box.v0 + hv * qv.points[j], 1, d);
            fv[(a * nv + j) * 2] = d[0];
            fv[(a * nv + j) * 2 + 1] = d[1];
        }
    }
    for (int i = 0; i < nu; ++i) {
        for (int j = 0; j < nv; ++j) {
            const int q = i * nv + j;
            GeometryEval g = geo.eval(el.box.u0 + hu * qu.points[i], el.box.v0 + hv * qv.points[j]);
            const double det = g.det();
            if (!(std::abs(det) > 1e-14)) throw std::runtime_error("singular geometry Jacobian at a quadrature point");
            out.weight[q] = qu.weights[i] * qv.weights[j] * hu * hv * std::abs(det);
            out.x[q] = g.x;
            out.y[q] = g.y;
            // J^{-T}
            const double it00 = g.jac[1][1] / det, it01 = -g.jac[1][0] / det;
            const double it10 = -g.jac[0][1] / det, it11 = g.jac[0][0] / det;
            for (int a = 0; a < nf; ++a) {
                const double bu = fu[(a * nu + i) * 2], dbu = fu[(a * nu + i) * 2 + 1];
                const double bv = fv[(a * nv + j) * 2], dbv = fv[(a * nv + j) * 2 + 1];
                const std::size_t k = static_cast<std::size_t>(q) * nf + a;
                out.val[k] = bu * bv;
                if (gradients) {
                    const double du = dbu * bv, dv = bu * dbv;
                    out.gx[k] = it00 * du + it01 * dv;
                    out.gy[k] = it10 * du + it11 * dv;
                }
            }
        }
    }
}

int quad_points(const TSplineSpace& s, int order, int d) { return order > 0 ? order : s.degree()[d] + 1; }

}  // namespace

AssembledSystem assemble(const Discretization& disc, const ScalarField& source, int quad_order) {
    AssembledSystem out;
    const int n = disc.num_global();
    out.b = Eigen::VectorXd::Zero(n);
    std::vector<Eigen::Triplet<double>> all;
    for (const auto& patch : disc.patches()) {
        const auto& space = *patch.space;
        const auto qu = gauss_legendre(quad_points(space, quad_order, 0));
        const auto qv = gauss_legendre(quad_points(space, quad_order, 1));
        const std::size_t ne = space.bezier().size();
        const int chunks = thread_count();
        std::vector<std::vector<Eigen::Triplet<double>>> trip(chunks);
        std::vector<std::vector<std::pair<int, double>>> loads(chunks);
        parallel_chunks(ne, chunks, [&](int c, std::size_t begin, std::size_t end) {
            ElementData ed;
            std::vector<double> K, F;
            for (std::size_t e = begin; e < end; ++e) {
                element_data(space, *patch.geometry, static_cast<int>(e), qu, qv, true, ed);
                const int nf = static_cast<int>(ed.functions.size());
                const int nq = static_cast<int>(ed.weight.size());
                K.assign(static_cast<std::size_t>(nf) * nf, 0.0);
                F.assign(nf, 0.0);
                for (int q = 0; q < nq; ++q) {
                    const double w = ed.weight[q];
                    const double fq = source ? source(ed.x[q], ed.y[q]) : 0.0;
                    const double* gx = &ed.gx[static_cast<std::size_t>(q) * nf];
                    const double* gy = &ed.gy[static_cast<std::size_t>(q) * nf];
                    const double* v = &ed.val[static_cast<std::size_t>(q) * nf];
                    for (int a = 0; a < nf; ++a) {
                        F[a] += w * fq * v[a];
                        for (int b = a; b < nf; ++b) K[a * nf + b] += w * (gx[a] * gx[b] + gy[a] * gy[b]);
                    }
                }
                for (int a = 0; a < nf; ++a) {
                    const int ga = patch.global[ed.functions[a]];
                    loads[c].emplace_back(ga, F[a]);
                    for (int b = 0; b < nf; ++b) {
                        const double kab = a <= b ? K[a * nf + b] : K[b * nf + a];
                        trip[c].emplace_back(ga, patch.global[ed.functions[b]], kab);
                    }
                }
            }
        });
        for (int c = 0; c < chunks; ++c) {
            all.insert(all.end(), trip[c].begin(), trip[c].end());
            for (auto [g, v] : loads[c]) out.b[g] += v;
        }
    }
    out.A.resize(n, n);
    out.A.setFromTriplets(all.begin(), all.end());
    out.A.makeCompressed();
    return out;
}

Eigen::SparseMatrix<double> assemble_stiffness(const Discretization& disc, int quad_order) {
    return assemble(disc, nullptr, quad_order).A;
}

Eigen::VectorXd assemble_rhs(const Discretization& disc, const ScalarField& source, int quad_order) {
    Eigen::VectorXd b = Eigen::VectorXd::Zero(disc.num_global());
    for (const auto& patch : disc.patches()) {
        const auto& space = *patch.space;
        const auto qu = gauss_legendre(quad_points(space, quad_order, 0));
        const auto qv = gauss_legendre(quad_points(space, quad_order, 1));
        ElementData ed;
        for (int e = 0; e < static_cast<int>(space.bezier().size()); ++e) {
            element_data(space, *patch.geometry, e, qu, qv, false, ed);
            const int nf = static_cast<int>(ed.functions.size());
            for (std::size_t q = 0; q < ed.weight.size(); ++q) {
                const double wf = ed.weight[q] * source(ed.x[q], ed.y[q]);
                for (int a = 0; a < nf; ++a) b[patch.global[ed.functions[a]]] += wf * ed.val[q * nf + a];
            }
        }
    }
    return b;
}

LinearSystem apply_dirichlet(const AssembledSystem& full, const Discretization& disc) {
    LinearSystem sys;
    sys.global_of_dof = disc.global_of_dof();
    const int n = disc.num_dofs();
    std::vector<Eigen::Triplet<double>> trip;
    for (int c = 0; c < full.A.outerSize(); ++c) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(full.A, c); it; ++it) {
            int r = disc.dof(static_cast<int>(it.row())), k = disc.dof(static_cast<int>(it.col()));
            if (r >= 0 && k >= 0) trip.emplace_back(r, k, it.value());
        }
    }
    sys.A.resize(n, n);
    sys.A.setFromTriplets(trip.begin(), trip.end());
    sys.A.makeCompressed();
    sys.b.resize(n);
    for (int i = 0; i < n; ++i) sys.b[i] = full.b[sys.global_of_dof[i]];
    return sys;
}

Eigen::VectorXd expand(const Discretization& disc, const Eigen::VectorXd& reduced) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(disc.num_global());
    for (int i = 0; i < disc.num_dofs(); ++i) g[disc.global_of_dof()[i]] = reduced[i];
    return g;
}

double l2_error(const Discretization& disc, const Eigen::VectorXd& global_coefs, const ScalarField& exact,
                int quad_order) {
    double err = 0.0;
    for (const auto& patch : disc.patches()) {
        const auto& space = *patch.space;
        const auto qu = gauss_legendre(quad_order > 0 ? quad_order : space.degree()[0] + 3);
        const auto qv = gauss_legendre(quad_order > 0 ? quad_order : space.degree()[1] + 3);
        ElementData ed;
        for (int e = 0; e < static_cast<int>(space.bezier().size()); ++e) {
            element_data(space, *patch.geometry, e, qu, qv, false, ed);
            const int nf = static_cast<int>(ed.functions.size());
            for (std::size_t q = 0; q < ed.weight.size(); ++q) {
                double uh = 0.0;
                for (int a = 0; a < nf; ++a) uh += global_coefs[patch.global[ed.functions[a]]] * ed.val[q * nf + a];
                const double diff = uh - exact(ed.x[q], ed.y[q]);
                err += ed.weight[q] * diff * diff;
            }
        }
    }
    return std::sqrt(err);
}

double evaluate(const Discretization& disc, const Eigen::VectorXd& global_coefs, int patch, double u, double v) {
    const auto& pt = disc.patches().at(patch);
    double s = 0.0;
    for (int i : pt.space->overlapping({u - 1e-12, u + 1e-12, v - 1e-12, v + 1e-12}))
        s += global_coefs[pt.global[i]] * pt.space->function(i).eval(u, v);
    return s;
}

void write_matrix_market(const Eigen::SparseMatrix<double>& A, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "%%MatrixMarket matrix coordinate real general\n";
    os << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
    os << std::setprecision(17);
    for (int c = 0; c < A.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(A, c); it; ++it)
            os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
}

void write_vector(const Eigen::VectorXd& v, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << std::setprecision(17);
    for (Eigen::Index i = 0; i < v.size(); ++i) os << v[i] << '\n';
}

}  // namespace asts
