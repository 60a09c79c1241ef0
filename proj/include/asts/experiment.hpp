#pragma once

#include "asts/multilevel.hpp"
#include "asts/tmesh.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace asts {

enum class GeometryKind { square, curved_l };
enum class RefinementKind { corner, alternative };
enum class RhsKind { constant, corner_peak };

const char* to_string(GeometryKind g);
const char* to_string(RefinementKind r);

struct ExperimentConfig {
    std::string name = "experiment";
    DegreePair degree{2, 2};
    int elements = 0;  // 0: 7, 8, 10 for degree 2, 3, 4 (corner), 8 (alternative)
    int level_min = 2, level_max = 6;
    GeometryKind geometry = GeometryKind::square;
    RefinementKind refinement = RefinementKind::corner;
    DecompositionKind decomposition = DecompositionKind::macro;
    std::vector<SmootherKind> smoothers{SmootherKind::jacobi, SmootherKind::sgs};
    RhsKind rhs = RhsKind::constant;
    double tol = 1e-6;
    int max_iterations = 5000;
    LanczosOptions lanczos;
    int dense_check_limit = 0;  // dense oracle for systems up to this many dofs (0: off)
    double kappa_tolerance = 0.30;
    std::string reference;      // reference table CSV; empty: built-in choice
    std::string output_dir;     // empty: no files
    bool svg = false;

    int initial_elements() const;
};

// Throws ConfigError naming the offending key.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::string& path);
// Keys accepted at the top level of a configuration document.
const std::vector<std::string>& config_keys();

struct ResultRow {
    int level = 0;
    int dofs = 0;
    double cond_np = 0;
    std::optional<double> cond_jacobi, cond_sgs;
    std::optional<int> iters_jacobi, iters_sgs;
    std::optional<double> dense_np, dense_jacobi, dense_sgs;
    int subspaces = 0;
    bool lanczos_converged = true;
    double wall_seconds = 0;
};

struct Deviation {
    int level = 0;
    std::string column;
    double value = 0, reference = 0, relative = 0;
    bool pass = true;
};

struct ComparisonReport {
    std::vector<Deviation> cells;
    bool pass() const;
    std::string text() const;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<ResultRow> rows;
    std::vector<std::size_t> lines_per_generation;  // aligned subspaces added per generation
    std::optional<ComparisonReport> comparison;
};

// Stage-tagged failure of run_experiment.
struct StageError : std::runtime_error {
    StageError(const std::string& stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage(stage) {}
    std::string stage;
};

using ProgressFn = std::function<void(const ResultRow&)>;

ExperimentResult run_experiment(const ExperimentConfig& config, const ProgressFn& progress = {});

// CSV with header level,dofs,cond_np,cond_jacobi,cond_sgs,iters_jacobi,iters_sgs
std::string results_csv(const std::vector<ResultRow>& rows);
nlohmann::json result_json(const ExperimentResult& r);
void write_outputs(const ExperimentResult& r);

// Reference tables: columns level, dofs and any of cond_np, cond_jacobi, cond_sgs,
// optionally keyed by a degree column.
struct ReferenceRow {
    int degree = 0;
    int level = 0;
    std::optional<double> dofs, cond_np, cond_jacobi, cond_sgs;
};

std::vector<ReferenceRow> read_table_csv(const std::string& path);
std::vector<ResultRow> read_results_csv(const std::string& path);

// Dofs compared exactly, condition numbers within the relative tolerance.
ComparisonReport compare(const std::vector<ResultRow>& rows, const std::vector<ReferenceRow>& reference, int degree,
                         double kappa_tolerance);

// Directory with the shipped reference tables and configurations.
std::string data_dir();
// Reference table shipped for the configuration, or empty.
std::string default_reference(const ExperimentConfig& c);

// Mesh of the requested level from the configured driver.
TMesh experiment_mesh(const ExperimentConfig& c, int level);

}  // namespace asts
