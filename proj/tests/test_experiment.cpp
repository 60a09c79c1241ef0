#include "asts/drivers.hpp"
#include "asts/experiment.hpp"
#include "asts/svg.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace asts;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch_dir(const std::string& name) {
    auto d = fs::temp_directory_path() / ("asts_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("configuration parsing and validation") {
    const auto c = config_from_json(nlohmann::json::parse(R"({"name": "t", "degree": 3, "levels": [2, 4],
        "smoother": "sgs", "decomposition": "aligned", "lanczos": {"max_iterations": 900, "ritz_residual": 0.005}})"));
    CHECK(c.degree == DegreePair{3, 3});
    CHECK(c.level_min == 2);
    CHECK(c.level_max == 4);
    CHECK(c.initial_elements() == 8);
    CHECK(c.smoothers == std::vector<SmootherKind>{SmootherKind::sgs});
    CHECK(c.decomposition == DecompositionKind::aligned);
    CHECK(c.lanczos.max_iterations == 900);
    CHECK(c.lanczos.ritz_residual == 0.005);

    const auto back = config_from_json(config_to_json(c));
    CHECK(config_to_json(back) == config_to_json(c));

    const char* bad[] = {R"({"degre": 2})",          R"({"degree": 0})",           R"({"levels": [5, 3]})",
                         R"({"smoother": "ilu"})",    R"({"tol": 2})",              R"({"lanczos": {"steps": 3}})",
                         R"({"name": "a/b"})",        R"({"geometry": "disc"})",    R"({"degree": "two"})",
                         R"({"degree": [2, 3], "geometry": "curved-L"})",           R"([1, 2])"};
    for (const char* b : bad) CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(b)), ConfigError);

    CHECK(config_from_json(nlohmann::json::parse(R"({"refinement": "alternative"})")).initial_elements() == 8);
    CHECK(config_from_json(nlohmann::json::parse(R"({"smoother": "none"})")).smoothers.empty());
}

TEST_CASE("schema lists exactly the accepted keys") {
    const auto schema = nlohmann::json::parse(slurp(fs::path(ASTS_TEST_DIR) / ".." / "schema" / "experiment_config.schema.json"));
    std::set<std::string> props;
    for (const auto& [k, v] : schema["properties"].items()) props.insert(k);
    const std::set<std::string> keys(config_keys().begin(), config_keys().end());
    CHECK(props == keys);
    CHECK(schema["additionalProperties"] == false);
}

TEST_CASE("shipped configurations load") {
    int n = 0;
    for (const auto& e : fs::directory_iterator(fs::path(ASTS_TEST_DIR) / ".." / "configs")) {
        if (e.path().extension() != ".json") continue;
        CHECK_NOTHROW(load_config(e.path().string()));
        ++n;
    }
    CHECK(n >= 6);
}

TEST_CASE("run without smoothers reports only the unpreconditioned column") {
    ExperimentConfig c;
    c.name = "nosmooth";
    c.level_min = 2;
    c.level_max = 3;
    c.smoothers.clear();
    const auto res = run_experiment(c);
    REQUIRE(res.rows.size() == 2);
    CHECK(res.rows[0].dofs == 85);
    CHECK(res.rows[1].dofs == 135);
    for (const auto& r : res.rows) {
        CHECK(r.cond_np > 1.0);
        CHECK_FALSE(r.cond_jacobi.has_value());
        CHECK_FALSE(r.cond_sgs.has_value());
    }
    const auto csv = results_csv(res.rows);
    CHECK(csv.rfind("level,dofs,cond_np,cond_jacobi,cond_sgs,iters_jacobi,iters_sgs\n", 0) == 0);
    CHECK(csv.find("\n2,85,") != std::string::npos);
}

TEST_CASE("alternative refinement run, comparison and written outputs") {
    ExperimentConfig c;
    c.name = "alt";
    c.degree = {3, 3};
    c.refinement = RefinementKind::alternative;
    c.level_min = 2;
    c.level_max = 3;
    c.smoothers = {SmootherKind::jacobi};
    c.output_dir = scratch_dir("alt").string();
    c.dense_check_limit = 700;
    const auto res = run_experiment(c);
    REQUIRE(res.rows.size() == 2);
    CHECK(res.rows[0].dofs == 213);
    CHECK(res.rows[1].dofs == 620);
    REQUIRE(res.comparison.has_value());
    int dof_cells = 0;
    for (const auto& cell : res.comparison->cells)
        if (cell.column == "dofs") {
            CHECK(cell.pass);
            ++dof_cells;
        }
    CHECK(dof_cells == 2);
    for (const auto& r : res.rows) {
        REQUIRE(r.dense_jacobi.has_value());
        CHECK(std::abs(*r.cond_jacobi - *r.dense_jacobi) / *r.dense_jacobi < 0.05);
    }
    write_outputs(res);
    const fs::path dir(c.output_dir);
    CHECK(fs::exists(dir / "alt.csv"));
    CHECK(fs::exists(dir / "alt.json"));
    CHECK(fs::exists(dir / "alt_deviation.txt"));
    const auto rows = read_results_csv((dir / "alt.csv").string());
    REQUIRE(rows.size() == 2);
    CHECK(rows[1].dofs == 620);
    CHECK(rows[0].cond_jacobi.has_value());
    CHECK_FALSE(rows[0].cond_sgs.has_value());
    const auto j = nlohmann::json::parse(slurp(dir / "alt.json"));
    CHECK(j["rows"].size() == 2);
    fs::remove_all(dir);
}

TEST_CASE("reference tables and comparison") {
    const auto ref = read_table_csv(data_dir() + "/reference_square_corner.csv");
    CHECK(ref.size() >= 21);
    std::vector<ResultRow> rows(1);
    rows[0].level = 4;
    rows[0].dofs = 216;
    rows[0].cond_np = 46.5;
    rows[0].cond_jacobi = 14.7 * 1.29;
    rows[0].cond_sgs = 5.3 * 0.6;
    const auto rep = compare(rows, ref, 2, 0.3);
    REQUIRE(rep.cells.size() == 4);
    CHECK_FALSE(rep.pass());
    for (const auto& cell : rep.cells) CHECK(cell.pass == (cell.column != "cond_sgs"));
    CHECK(rep.text().find("cond_sgs") != std::string::npos);
    rows[0].dofs = 217;
    CHECK_FALSE(compare(rows, ref, 2, 10.0).pass());
    CHECK(compare(rows, ref, 7, 0.3).cells.empty());

    ExperimentConfig c;
    CHECK(fs::path(default_reference(c)).filename() == "reference_square_corner.csv");
    c.geometry = GeometryKind::curved_l;
    CHECK(fs::path(default_reference(c)).filename() == "reference_curved_l_corner.csv");
    c.decomposition = DecompositionKind::aligned;
    CHECK(default_reference(c).empty());
}

TEST_CASE("SVG output is deterministic and matches the golden figure") {
    const auto t0 = tmesh_svg(TMesh({2, 2}, {9, 9}));
    CHECK(t0.find("<svg") == 0);
    CHECK(t0.find(generation_color(1)) == std::string::npos);
    const auto mesh = corner_mesh({2, 2}, 7, 5);
    const auto a = tmesh_svg(mesh);
    CHECK(a == tmesh_svg(corner_mesh({2, 2}, 7, 5)));
    CHECK(a == slurp(fs::path(ASTS_TEST_DIR) / "golden" / "tmesh_p2_corner_L5.svg"));
    const auto space = TSplineSpace::build(mesh);
    CHECK(bezier_svg(space) == bezier_svg(TSplineSpace::build(mesh)));
    CHECK(extended_svg(mesh, space.extended()).find("stroke-dasharray") != std::string::npos);
}

TEST_CASE("stage errors name the failing stage") {
    ExperimentConfig c;
    c.reference = "/nonexistent/table.csv";
    c.level_min = c.level_max = 2;
    c.smoothers.clear();
    try {
        run_experiment(c);
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(e.stage == "compare");
    }
}
