#include "asts/experiment.hpp"

#include "asts/assembly.hpp"
#include "asts/drivers.hpp"
#include "asts/svg.hpp"
#include "asts/tspline_space.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#ifndef ASTS_DATA_DIR
#define ASTS_DATA_DIR "data"
#endif

namespace asts {

const char* to_string(GeometryKind g) { return g == GeometryKind::square ? "square" : "curved-L"; }
const char* to_string(RefinementKind r) { return r == RefinementKind::corner ? "corner" : "alternative"; }

int ExperimentConfig::initial_elements() const {
    if (elements > 0) return elements;
    if (refinement == RefinementKind::alternative) return 8;
    return default_elements(degree[0]);
}

// ---------------------------------------------------------------- config

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys{
        "name",       "degree",      "elements",    "levels",         "geometry",          "refinement",
        "decomposition", "smoother", "rhs",         "tol",            "max_iterations",    "lanczos",
        "dense_check_limit", "kappa_tolerance", "reference", "output_dir", "svg"};
    return keys;
}

namespace {

template <class T>
T get_as(const nlohmann::json& j, const std::string& key) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config: '" + key + "' has the wrong type");
    }
}

int positive_int(const nlohmann::json& j, const std::string& key, int lo, int hi) {
    if (!j.is_number_integer()) throw ConfigError("config: '" + key + "' must be an integer");
    const int v = j.get<int>();
    if (v < lo || v > hi)
        throw ConfigError("config: '" + key + "' must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    return v;
}

std::string one_of(const nlohmann::json& j, const std::string& key, std::initializer_list<const char*> allowed) {
    const auto s = get_as<std::string>(j, key);
    for (const char* a : allowed)
        if (s == a) return s;
    std::string msg = "config: '" + key + "' must be one of";
    for (const char* a : allowed) msg += std::string(" ") + a;
    throw ConfigError(msg);
}

}  // namespace

ExperimentConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config: document must be an object");
    const auto& keys = config_keys();
    for (const auto& [k, v] : j.items())
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw ConfigError("config: unknown key '" + k + "'");
    ExperimentConfig c;
    if (j.contains("name")) c.name = get_as<std::string>(j["name"], "name");
    if (c.name.empty() || c.name.find_first_of("/\\") != std::string::npos)
        throw ConfigError("config: 'name' must be a non-empty file stem");
    if (j.contains("degree")) {
        const auto& d = j["degree"];
        if (d.is_number_integer()) {
            c.degree = {positive_int(d, "degree", 1, 6), d.get<int>()};
        } else if (d.is_array() && d.size() == 2) {
            c.degree = {positive_int(d[0], "degree", 1, 6), positive_int(d[1], "degree", 1, 6)};
        } else {
            throw ConfigError("config: 'degree' must be an integer or a pair");
        }
    }
    if (j.contains("elements")) c.elements = positive_int(j["elements"], "elements", 1, 4096);
    if (j.contains("levels")) {
        const auto& l = j["levels"];
        if (l.is_number_integer()) {
            c.level_min = c.level_max = positive_int(l, "levels", 1, 30);
        } else if (l.is_array() && l.size() == 2) {
            c.level_min = positive_int(l[0], "levels", 1, 30);
            c.level_max = positive_int(l[1], "levels", 1, 30);
            if (c.level_max < c.level_min) throw ConfigError("config: 'levels' must be increasing");
        } else {
            throw ConfigError("config: 'levels' must be an integer or [first, last]");
        }
    }
    if (j.contains("geometry"))
        c.geometry = one_of(j["geometry"], "geometry", {"square", "curved-L"}) == "square" ? GeometryKind::square
                                                                                         : GeometryKind::curved_l;
    if (j.contains("refinement"))
        c.refinement = one_of(j["refinement"], "refinement", {"corner", "alternative"}) == "corner"
                           ? RefinementKind::corner
                           : RefinementKind::alternative;
    if (j.contains("decomposition"))
        c.decomposition = parse_decomposition(one_of(j["decomposition"], "decomposition", {"micro", "aligned", "macro"}));
    if (j.contains("smoother")) {
        const auto s = one_of(j["smoother"], "smoother", {"jacobi", "sgs", "both", "none"});
        if (s == "jacobi") c.smoothers = {SmootherKind::jacobi};
        if (s == "sgs") c.smoothers = {SmootherKind::sgs};
        if (s == "both") c.smoothers = {SmootherKind::jacobi, SmootherKind::sgs};
        if (s == "none") c.smoothers.clear();
    }
    if (j.contains("rhs"))
        c.rhs = one_of(j["rhs"], "rhs", {"constant", "corner-peak"}) == "constant" ? RhsKind::constant
                                                                                   : RhsKind::corner_peak;
    if (j.contains("tol")) {
        c.tol = get_as<double>(j["tol"], "tol");
        if (!(c.tol > 0 && c.tol < 1)) throw ConfigError("config: 'tol' must lie in (0, 1)");
    }
    if (j.contains("max_iterations")) c.max_iterations = positive_int(j["max_iterations"], "max_iterations", 1, 1000000);
    if (j.contains("lanczos")) {
        const auto& l = j["lanczos"];
        if (!l.is_object()) throw ConfigError("config: 'lanczos' must be an object");
        for (const auto& [k, v] : l.items()) {
            if (k == "rel_change") c.lanczos.rel_change = get_as<double>(v, "lanczos.rel_change");
            else if (k == "stable_steps") c.lanczos.stable_steps = positive_int(v, "lanczos.stable_steps", 1, 1000);
            else if (k == "max_iterations") c.lanczos.max_iterations = positive_int(v, "lanczos.max_iterations", 2, 100000);
            else if (k == "ritz_residual") c.lanczos.ritz_residual = get_as<double>(v, "lanczos.ritz_residual");
            else if (k == "seed") c.lanczos.seed = get_as<std::uint64_t>(v, "lanczos.seed");
            else throw ConfigError("config: unknown key 'lanczos." + k + "'");
        }
    }
    if (j.contains("dense_check_limit")) c.dense_check_limit = positive_int(j["dense_check_limit"], "dense_check_limit", 0, 5000);
    if (j.contains("kappa_tolerance")) {
        c.kappa_tolerance = get_as<double>(j["kappa_tolerance"], "kappa_tolerance");
        if (!(c.kappa_tolerance >= 0)) throw ConfigError("config: 'kappa_tolerance' must be non-negative");
    }
    if (j.contains("reference")) c.reference = get_as<std::string>(j["reference"], "reference");
    if (j.contains("output_dir")) c.output_dir = get_as<std::string>(j["output_dir"], "output_dir");
    if (j.contains("svg")) c.svg = get_as<bool>(j["svg"], "svg");
    if (c.geometry == GeometryKind::curved_l && c.degree[0] != c.degree[1])
        throw ConfigError("config: curved-L needs equal degrees");
    return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
    std::string smoother = "none";
    if (c.smoothers.size() == 2) smoother = "both";
    else if (c.smoothers.size() == 1) smoother = to_string(c.smoothers[0]);
    return {{"name", c.name},
            {"degree", {c.degree[0], c.degree[1]}},
            {"elements", c.initial_elements()},
            {"levels", {c.level_min, c.level_max}},
            {"geometry", to_string(c.geometry)},
            {"refinement", to_string(c.refinement)},
            {"decomposition", to_string(c.decomposition)},
            {"smoother", smoother},
            {"rhs", c.rhs == RhsKind::constant ? "constant" : "corner-peak"},
            {"tol", c.tol},
            {"max_iterations", c.max_iterations},
            {"lanczos",
             {{"rel_change", c.lanczos.rel_change},
              {"stable_steps", c.lanczos.stable_steps},
              {"ritz_residual", c.lanczos.ritz_residual},
              {"max_iterations", c.lanczos.max_iterations},
              {"seed", c.lanczos.seed}}},
            {"dense_check_limit", c.dense_check_limit},
            {"kappa_tolerance", c.kappa_tolerance},
            {"reference", c.reference},
            {"output_dir", c.output_dir},
            {"svg", c.svg}};
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------- running

std::string data_dir() {
    if (const char* env = std::getenv("ASTS_DATA_DIR")) return env;
    return ASTS_DATA_DIR;
}

std::string default_reference(const ExperimentConfig& c) {
    if (c.decomposition != DecompositionKind::macro || c.degree[0] != c.degree[1]) return {};
    std::string file;
    if (c.geometry == GeometryKind::square && c.refinement == RefinementKind::corner)
        file = "reference_square_corner.csv";
    else if (c.geometry == GeometryKind::curved_l && c.refinement == RefinementKind::corner)
        file = "reference_curved_l_corner.csv";
    else if (c.geometry == GeometryKind::square && c.refinement == RefinementKind::alternative)
        file = "reference_square_alternative.csv";
    if (file.empty()) return {};
    // the tables were produced with the default initial meshes only
    ExperimentConfig d = c;
    d.elements = 0;
    if (c.initial_elements() != d.initial_elements()) return {};
    return (std::filesystem::path(data_dir()) / file).string();
}

TMesh experiment_mesh(const ExperimentConfig& c, int level) {
    if (c.refinement == RefinementKind::corner) return corner_mesh(c.degree, c.initial_elements(), level);
    return alternative_mesh(c.degree, c.initial_elements(), level);
}

namespace {

ScalarField rhs_field(RhsKind k) {
    if (k == RhsKind::constant) return [](double, double) { return 1.0; };
    return [](double x, double y) { return 100.0 * std::exp(-50.0 * (x * x + y * y)); };
}

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

class Driver {
public:
    explicit Driver(const ExperimentConfig& c) {
        if (c.refinement == RefinementKind::corner)
            corner_.emplace(c.degree, c.initial_elements());
        else
            alt_.emplace(c.degree, c.initial_elements());
    }
    int level() const { return corner_ ? corner_->level() : alt_->level(); }
    void step() { corner_ ? corner_->step() : alt_->step(); }
    const TMesh& mesh() const { return corner_ ? corner_->mesh() : alt_->mesh(); }

private:
    std::optional<CornerRefinement> corner_;
    std::optional<AlternativeRefinement> alt_;
};

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const ProgressFn& progress) {
    using clock = std::chrono::steady_clock;
    ExperimentResult res;
    res.config = config;
    Driver driver = stage("mesh", [&] { return Driver(config); });
    const auto geoms = config.geometry == GeometryKind::square
                           ? std::vector<std::shared_ptr<const GeometryMap>>{std::make_shared<IdentityMap>()}
                           : curved_l_maps();
    for (int level = config.level_min; level <= config.level_max; ++level) {
        const auto t0 = clock::now();
        stage("mesh", [&] {
            while (driver.level() < level) driver.step();
            return 0;
        });
        const TMesh& mesh = driver.mesh();
        const TSplineSpace space = stage("space", [&] { return TSplineSpace::build(mesh); });
        stage("certify", [&] {
            if (!space.as_certified()) throw std::runtime_error("mesh is not dual compatible");
            if (!space.extended().crossing_free()) throw std::runtime_error("T-junction extensions cross");
            return 0;
        });
        const Discretization disc = stage("assembly", [&] {
            if (config.geometry == GeometryKind::square) return Discretization::single(space, geoms[0]);
            return Discretization::multipatch({&space, &space, &space}, geoms, curved_l_interfaces());
        });
        const LinearSystem sys = stage("assembly", [&] { return apply_dirichlet(assemble(disc, rhs_field(config.rhs)), disc); });
        const LevelSets ls = stage("decomposition", [&] { return level_sets(mesh); });
        std::vector<const LevelSets*> per_patch(disc.patches().size(), &ls);

        ResultRow row;
        row.level = level;
        row.dofs = disc.num_dofs();
        const auto np = stage("lanczos", [&] { return estimate_condition(sys.A, identity_preconditioner(), config.lanczos); });
        row.cond_np = np.kappa;
        row.lanczos_converged = np.converged;
        const bool dense = row.dofs <= config.dense_check_limit;
        if (dense) row.dense_np = stage("dense", [&] { return dense_condition(sys.A, identity_preconditioner()).kappa; });
        for (SmootherKind sk : config.smoothers) {
            const Decomposition dec =
                stage("decomposition", [&] { return Decomposition::build(disc, per_patch, sys.A, config.decomposition, sk); });
            const auto B = bpx_preconditioner(dec);
            const auto est = stage("lanczos", [&] { return estimate_condition(sys.A, B, config.lanczos); });
            Eigen::VectorXd x;
            const auto rep = stage("pcg", [&] { return pcg_solve(sys.A, sys.b, B, x, config.tol, config.max_iterations); });
            if (!rep.converged) throw StageError("pcg", "no convergence within max_iterations");
            row.subspaces = static_cast<int>(dec.subspaces().size());
            row.lanczos_converged = row.lanczos_converged && est.converged;
            std::optional<double> dk;
            if (dense) dk = stage("dense", [&] { return dense_condition(sys.A, B).kappa; });
            if (sk == SmootherKind::jacobi) {
                row.cond_jacobi = est.kappa;
                row.iters_jacobi = rep.iterations;
                row.dense_jacobi = dk;
            } else {
                row.cond_sgs = est.kappa;
                row.iters_sgs = rep.iterations;
                row.dense_sgs = dk;
            }
            if (level == config.level_max) {
                res.lines_per_generation.clear();
                for (const auto& s : dec.subspaces()) {
                    if (s.steps.first == 0) continue;
                    const auto g = static_cast<std::size_t>(s.steps.generation);
                    if (res.lines_per_generation.size() < g) res.lines_per_generation.resize(g, 0);
                    ++res.lines_per_generation[g - 1];
                }
            }
        }
        row.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
        res.rows.push_back(row);
        if (progress) progress(row);
        if (config.svg && !config.output_dir.empty()) {
            stage("output", [&] {
                std::filesystem::create_directories(config.output_dir);
                const auto stem = (std::filesystem::path(config.output_dir) / (config.name + "_L" + std::to_string(level))).string();
                write_text_file(stem + "_tmesh.svg", tmesh_svg(mesh));
                write_text_file(stem + "_extended.svg", extended_svg(mesh, space.extended()));
                write_text_file(stem + "_bezier.svg", bezier_svg(space));
                return 0;
            });
        }
    }
    const std::string ref = config.reference.empty() ? default_reference(config) : config.reference;
    if (!ref.empty()) {
        res.comparison = stage("compare", [&] {
            return compare(res.rows, read_table_csv(ref), config.degree[0], config.kappa_tolerance);
        });
    }
    if (!config.output_dir.empty()) stage("output", [&] {
        write_outputs(res);
        return 0;
    });
    return res;
}

// ---------------------------------------------------------------- CSV and JSON

std::string results_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    os << "level,dofs,cond_np,cond_jacobi,cond_sgs,iters_jacobi,iters_sgs\n";
    os << std::setprecision(6);
    for (const auto& r : rows) {
        os << r.level << ',' << r.dofs << ',' << r.cond_np << ',';
        if (r.cond_jacobi) os << *r.cond_jacobi;
        os << ',';
        if (r.cond_sgs) os << *r.cond_sgs;
        os << ',';
        if (r.iters_jacobi) os << *r.iters_jacobi;
        os << ',';
        if (r.iters_sgs) os << *r.iters_sgs;
        os << '\n';
    }
    return os.str();
}

nlohmann::json result_json(const ExperimentResult& r) {
    nlohmann::json rows = nlohmann::json::array();
    auto opt = [](const auto& o) { return o ? nlohmann::json(*o) : nlohmann::json(nullptr); };
    for (const auto& row : r.rows) {
        rows.push_back({{"level", row.level},
                        {"dofs", row.dofs},
                        {"cond_np", row.cond_np},
                        {"cond_jacobi", opt(row.cond_jacobi)},
                        {"cond_sgs", opt(row.cond_sgs)},
                        {"iters_jacobi", opt(row.iters_jacobi)},
                        {"iters_sgs", opt(row.iters_sgs)},
                        {"dense_np", opt(row.dense_np)},
                        {"dense_jacobi", opt(row.dense_jacobi)},
                        {"dense_sgs", opt(row.dense_sgs)},
                        {"subspaces", row.subspaces},
                        {"lanczos_converged", row.lanczos_converged},
                        {"wall_seconds", row.wall_seconds}});
    }
    nlohmann::json j{{"config", config_to_json(r.config)},
                     {"rows", rows},
                     {"lines_per_generation", r.lines_per_generation}};
    if (r.comparison) {
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& c : r.comparison->cells)
            cells.push_back({{"level", c.level},
                             {"column", c.column},
                             {"value", c.value},
                             {"reference", c.reference},
                             {"relative", c.relative},
                             {"pass", c.pass}});
        j["comparison"] = {{"pass", r.comparison->pass()}, {"cells", cells}};
    }
    return j;
}

void write_outputs(const ExperimentResult& r) {
    const auto& c = r.config;
    std::filesystem::create_directories(c.output_dir);
    const auto stem = (std::filesystem::path(c.output_dir) / c.name).string();
    write_text_file(stem + ".csv", results_csv(r.rows));
    write_text_file(stem + ".json", result_json(r).dump(2) + "\n");
    if (r.comparison) write_text_file(stem + "_deviation.txt", r.comparison->text());
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        cell.erase(0, cell.find_first_not_of(" \t\r"));
        cell.erase(cell.find_last_not_of(" \t\r") + 1);
        out.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::vector<std::map<std::string, std::string>> read_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::string line;
    std::vector<std::string> header;
    std::vector<std::map<std::string, std::string>> rows;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto cells = split_csv(line);
        if (header.empty()) {
            header = cells;
            continue;
        }
        if (cells.size() != header.size()) throw std::runtime_error(path + ": ragged row '" + line + "'");
        std::map<std::string, std::string> row;
        for (std::size_t i = 0; i < header.size(); ++i) row[header[i]] = cells[i];
        rows.push_back(std::move(row));
    }
    if (header.empty()) throw std::runtime_error(path + ": missing header");
    return rows;
}

std::optional<double> number(const std::map<std::string, std::string>& row, const std::string& key) {
    auto it = row.find(key);
    if (it == row.end() || it->second.empty()) return std::nullopt;
    return std::stod(it->second);
}

}  // namespace

std::vector<ReferenceRow> read_table_csv(const std::string& path) {
    std::vector<ReferenceRow> out;
    for (const auto& r : read_csv(path)) {
        ReferenceRow ref;
        auto lv = number(r, "level");
        if (!lv) throw std::runtime_error(path + ": rows need a level");
        ref.level = static_cast<int>(*lv);
        ref.degree = static_cast<int>(number(r, "degree").value_or(0));
        ref.dofs = number(r, "dofs");
        ref.cond_np = number(r, "cond_np");
        ref.cond_jacobi = number(r, "cond_jacobi");
        ref.cond_sgs = number(r, "cond_sgs");
        out.push_back(ref);
    }
    return out;
}

std::vector<ResultRow> read_results_csv(const std::string& path) {
    std::vector<ResultRow> out;
    for (const auto& r : read_csv(path)) {
        ResultRow row;
        row.level = static_cast<int>(number(r, "level").value_or(0));
        row.dofs = static_cast<int>(number(r, "dofs").value_or(0));
        row.cond_np = number(r, "cond_np").value_or(0);
        row.cond_jacobi = number(r, "cond_jacobi");
        row.cond_sgs = number(r, "cond_sgs");
        if (auto v = number(r, "iters_jacobi")) row.iters_jacobi = static_cast<int>(*v);
        if (auto v = number(r, "iters_sgs")) row.iters_sgs = static_cast<int>(*v);
        out.push_back(row);
    }
    return out;
}

bool ComparisonReport::pass() const {
    return std::all_of(cells.begin(), cells.end(), [](const Deviation& d) { return d.pass; });
}

std::string ComparisonReport::text() const {
    std::ostringstream os;
    os << "level  column       value        reference    rel.dev   status\n";
    for (const auto& c : cells) {
        os << std::setw(5) << c.level << "  " << std::left << std::setw(11) << c.column << std::right << std::setw(12)
           << std::setprecision(6) << c.value << std::setw(13) << c.reference << std::setw(9) << std::fixed
           << std::setprecision(3) << c.relative << std::defaultfloat << "   " << (c.pass ? "ok" : "FAIL") << '\n';
    }
    os << (pass() ? "all comparisons pass\n" : "some comparisons fail\n");
    os << "note: solver tolerance is a fixed 1e-6 relative preconditioned residual at every level\n";
    return os.str();
}

ComparisonReport compare(const std::vector<ResultRow>& rows, const std::vector<ReferenceRow>& reference, int degree,
                         double kappa_tolerance) {
    ComparisonReport rep;
    for (const auto& row : rows) {
        auto it = std::find_if(reference.begin(), reference.end(), [&](const ReferenceRow& r) {
            return r.level == row.level && (r.degree == 0 || r.degree == degree);
        });
        if (it == reference.end()) continue;
        auto cell = [&](const char* col, double value, const std::optional<double>& ref, bool exact) {
            if (!ref) return;
            Deviation d;
            d.level = row.level;
            d.column = col;
            d.value = value;
            d.reference = *ref;
            d.relative = *ref != 0 ? (value - *ref) / std::abs(*ref) : value;
            d.pass = exact ? value == *ref : std::abs(d.relative) <= kappa_tolerance;
            rep.cells.push_back(d);
        };
        cell("dofs", row.dofs, it->dofs, true);
        cell("cond_np", row.cond_np, it->cond_np, false);
        if (row.cond_jacobi) cell("cond_jacobi", *row.cond_jacobi, it->cond_jacobi, false);
        if (row.cond_sgs) cell("cond_sgs", *row.cond_sgs, it->cond_sgs, false);
    }
    return rep;
}

}  // namespace asts
