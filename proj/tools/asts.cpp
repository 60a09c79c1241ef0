#include "asts/drivers.hpp"
#include "asts/experiment.hpp"
#include "asts/kernels.hpp"
#include "asts/svg.hpp"
#include "asts/tspline_space.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

namespace {

int run_command(const std::string& config_path, const std::string& output_dir, bool quiet) {
    auto cfg = asts::load_config(config_path);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    if (!quiet)
        std::fprintf(stderr, "%s: degree (%d,%d), %s, %s refinement, %s decomposition, levels %d..%d, simd %s\n",
                     cfg.name.c_str(), cfg.degree[0], cfg.degree[1], asts::to_string(cfg.geometry),
                     asts::to_string(cfg.refinement), asts::to_string(cfg.decomposition), cfg.level_min, cfg.level_max,
                     asts::kernels::to_string(asts::kernels::active_isa()));
    auto progress = [&](const asts::ResultRow& r) {
        if (quiet) return;
        std::fprintf(stderr, "  level %2d  dofs %7d  np %10.1f", r.level, r.dofs, r.cond_np);
        if (r.cond_jacobi) std::fprintf(stderr, "  jac %8.2f (%d it)", *r.cond_jacobi, *r.iters_jacobi);
        if (r.cond_sgs) std::fprintf(stderr, "  sgs %8.2f (%d it)", *r.cond_sgs, *r.iters_sgs);
        std::fprintf(stderr, "  %.1fs\n", r.wall_seconds);
    };
    const auto res = asts::run_experiment(cfg, progress);
    std::cout << asts::results_csv(res.rows);
    if (!res.lines_per_generation.empty() && cfg.decomposition != asts::DecompositionKind::macro) {
        std::cerr << "subspaces per generation:";
        for (auto n : res.lines_per_generation) std::cerr << ' ' << n;
        std::cerr << '\n';
    }
    if (res.comparison) {
        std::cerr << res.comparison->text();
        return res.comparison->pass() ? 0 : 1;
    }
    return 0;
}

int mesh_command(int levels, int degree, int elements, const std::string& refinement, const std::string& dir,
                 const std::string& json_dir) {
    asts::ExperimentConfig cfg;
    cfg.degree = {degree, degree};
    cfg.elements = elements;
    cfg.refinement = refinement == "alternative" ? asts::RefinementKind::alternative : asts::RefinementKind::corner;
    for (int level = 1; level <= levels; ++level) {
        const auto mesh = asts::experiment_mesh(cfg, level);
        const auto space = asts::TSplineSpace::build(mesh);
        std::printf("level %d  elements %zu  functions %zu  bezier %zu  dual-compatible %s  crossing-free %s\n", level,
                    mesh.num_elements(), space.size(), space.bezier().size(), space.as_certified() ? "yes" : "no",
                    space.extended().crossing_free() ? "yes" : "no");
        const std::string stem = "p" + std::to_string(degree) + "_" + refinement + "_L" + std::to_string(level);
        if (!dir.empty()) {
            std::filesystem::create_directories(dir);
            const auto base = (std::filesystem::path(dir) / stem).string();
            asts::write_text_file(base + "_tmesh.svg", asts::tmesh_svg(mesh));
            asts::write_text_file(base + "_extended.svg", asts::extended_svg(mesh, space.extended()));
            asts::write_text_file(base + "_bezier.svg", asts::bezier_svg(space));
        }
        if (!json_dir.empty()) {
            std::filesystem::create_directories(json_dir);
            const auto base = (std::filesystem::path(json_dir) / stem).string();
            asts::write_text_file(base + "_mesh.json", mesh.to_json().dump() + "\n");
            asts::write_text_file(base + "_space.json", asts::space_to_json(space).dump() + "\n");
        }
    }
    return 0;
}

int compare_command(const std::string& results, const std::string& reference, int degree, double tol) {
    const auto rows = asts::read_results_csv(results);
    const auto ref = asts::read_table_csv(reference);
    const auto rep = asts::compare(rows, ref, degree, tol);
    std::cout << rep.text();
    if (rep.cells.empty()) {
        std::cerr << "no matching rows between the two tables\n";
        return 1;
    }
    return rep.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Analysis-suitable T-spline refinement and BPX preconditioning experiments"};
    app.require_subcommand(1);
    std::string simd = "auto";
    app.add_option("--simd", simd, "Kernel selection")->check(CLI::IsMember({"auto", "scalar", "avx2"}));

    auto* run = app.add_subcommand("run", "Run an experiment configuration");
    std::string config, out;
    bool quiet = false;
    run->add_option("--config", config, "Configuration JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--output-dir", out, "Override the output directory");
    run->add_flag("--quiet", quiet, "No progress output");

    auto* mesh = app.add_subcommand("mesh", "Build refined meshes and export figures");
    int levels = 4, degree = 2, elements = 0;
    std::string svg_dir, json_dir, refinement = "corner";
    mesh->add_option("--levels", levels, "Last level")->check(CLI::Range(1, 20));
    mesh->add_option("--degree", degree, "Degree in both directions")->check(CLI::Range(1, 6));
    mesh->add_option("--elements", elements, "Initial elements per direction (0: default)");
    mesh->add_option("--refinement", refinement, "Driver")->check(CLI::IsMember({"corner", "alternative"}));
    mesh->add_option("--export-svg", svg_dir, "Directory for SVG figures");
    mesh->add_option("--export-json", json_dir, "Directory for mesh and space dumps");

    auto* cmp = app.add_subcommand("compare", "Compare a results CSV with a reference table");
    std::string results, reference;
    int cmp_degree = 2;
    double tol = 0.30;
    cmp->add_option("--results", results, "Results CSV")->required()->check(CLI::ExistingFile);
    cmp->add_option("--reference", reference, "Reference CSV")->required()->check(CLI::ExistingFile);
    cmp->add_option("--degree", cmp_degree, "Degree rows to use when the reference has a degree column");
    cmp->add_option("--kappa-tolerance", tol, "Relative tolerance for condition numbers");

    CLI11_PARSE(app, argc, argv);
    if (simd == "scalar") asts::kernels::set_isa(asts::kernels::Isa::scalar);
    if (simd == "avx2") asts::kernels::set_isa(asts::kernels::Isa::avx2);
    try {
        if (*run) return run_command(config, out, quiet);
        if (*mesh) return mesh_command(levels, degree, elements, refinement, svg_dir, json_dir);
        if (*cmp) return compare_command(results, reference, cmp_degree, tol);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
