// Command-line driver: basis, match, eval and bounds subcommands.

#include <sfmap/sfmap.hpp>

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace sfmap;

namespace {

constexpr int kValidationExit = 2;
constexpr int kBoundViolationExit = 3;

struct CommonFlags {
    PipelineConfig config;
    std::string chi = "poly";
    std::string guided = "auto";
    std::string radius = "adaptive";
    std::string cache_dir;
    bool timing = false;
    bool raw_area = false;
};

void add_common(CLI::App& cmd, CommonFlags& f)
{
    cmd.add_option("--samples", f.config.p_target, "Target number of samples per shape")->capture_default_str();
    cmd.add_option("--k-init", f.config.k_init, "First spectral size of the refinement")->capture_default_str();
    cmd.add_option("--k-final", f.config.k_final, "Last spectral size of the refinement")->capture_default_str();
    cmd.add_option("--self-weight-min", f.config.self_weight_min, "Minimal self-weight (0 disables adaptation)")
        ->capture_default_str();
    cmd.add_option("--chi", f.chi, "Radial profile")->check(CLI::IsMember({"poly", "bump"}))->capture_default_str();
    cmd.add_option("--seed", f.config.seed, "Sampling seed")->capture_default_str();
    cmd.add_option("--guided", f.guided, "Guided dense conversion")
        ->check(CLI::IsMember({"auto", "on", "off"}))
        ->capture_default_str();
    cmd.add_option("--guided-threshold", f.config.guided_threshold, "Vertex count above which auto turns guided on")
        ->capture_default_str();
    cmd.add_option("--radius", f.radius, "Radius scheme (both is accepted by bounds only)")
        ->check(CLI::IsMember({"adaptive", "fixed", "both"}))
        ->capture_default_str();
    cmd.add_option("--cache-dir", f.cache_dir, "Directory for cached bases and spectra");
    cmd.add_flag("--timing", f.timing, "Print the per-stage timing table");
    cmd.add_flag("--raw-area", f.raw_area, "Do not rescale meshes to unit area");
}

void finalize(CommonFlags& f)
{
    f.config.chi = f.chi == "bump" ? ChiKind::SmoothBump : ChiKind::Polynomial;
    f.config.guided = f.guided == "on" ? GuidedMode::On : f.guided == "off" ? GuidedMode::Off : GuidedMode::Auto;
    f.config.radius = f.radius == "fixed" ? RadiusMode::Fixed : RadiusMode::Adaptive;
    f.config.cache_dir = f.cache_dir;
    f.config.normalize_area = !f.raw_area;
    f.config.validate();
}

void write_vector(const fs::path& path, const Eigen::VectorXd& v)
{
    std::ofstream out(path, std::ios::trunc);
    out.precision(17);
    for (Eigen::Index i = 0; i < v.size(); ++i) out << v(i) << '\n';
}

std::vector<int> read_index_list(const fs::path& path)
{
    return load_map(path).assignment;
}

int run_basis(const std::string& mesh_path, const std::string& out_dir, CommonFlags& f)
{
    finalize(f);
    const auto shape = prepare_shape(mesh_path, f.config);
    std::cout << (shape.cached ? "cached" : "computed") << ' ' << shape.cache_key << '\n';
    std::cout << "vertices " << shape.mesh.vertex_count() << " samples " << shape.basis.size()
              << " min_self_weight " << shape.basis.min_self_weight() << '\n';
    fs::path dir = out_dir.empty() ? (f.config.cache_dir.empty() ? fs::path(".") : f.config.cache_dir) : fs::path(out_dir);
    fs::create_directories(dir);
    const auto stem = fs::path(mesh_path).stem().string();
    write_vector(dir / (stem + ".eigenvalues.txt"), shape.spectrum.eigenvalues);
    {
        std::ofstream samples(dir / (stem + ".samples.txt"), std::ios::trunc);
        samples.precision(17);
        for (int j = 0; j < shape.basis.size(); ++j)
            samples << shape.mesh.original_index()[shape.basis.samples.indices[j]] << ' '
                    << shape.basis.samples.radii[j] << '\n';
    }
    if (f.timing) {
        StageTimes t;
        t.preprocess = shape.preprocess_seconds;
        t.lbo = shape.lbo_seconds;
        write_timing(std::cout, t);
    }
    return 0;
}

int run_match(const std::string& source_path, const std::string& target_path, const std::string& init_path,
              const std::string& out_dir, CommonFlags& f)
{
    finalize(f);
    const auto source = prepare_shape(source_path, f.config);
    const auto target = prepare_shape(target_path, f.config);
    PointwiseMap init;
    if (init_path.empty()) {
        if (source.mesh.file_vertex_count() != target.mesh.file_vertex_count())
            throw InitMapError("no --init given and the meshes differ in vertex count");
        init = map_from_file_indices(PointwiseMap::identity(source.mesh.file_vertex_count()), source.mesh,
                                     target.mesh, false, "identity init");
    } else {
        try {
            init = map_from_file_indices(load_map(init_path), source.mesh, target.mesh, false, init_path);
        } catch (const Error& e) {
            throw InitMapError(e.what());
        }
    }
    const auto result = match_shapes(source, target, init, f.config);
    write_match_outputs(out_dir, result, source, target);
    std::cout << "source " << (source.cached ? "cached" : "computed") << ", target "
              << (target.cached ? "cached" : "computed") << ", conversion " << (result.guided ? "guided" : "full")
              << '\n';
    if (f.timing) write_timing(std::cout, result.times);
    return 0;
}

int run_eval(const std::string& source_path, const std::string& target_path, const std::string& map_path,
             const std::string& gt_path, const std::string& subset_path, const std::string& out_dir, CommonFlags& f)
{
    finalize(f);
    const auto mesh_n = load_for_pipeline(source_path, f.config);
    const auto mesh_m = load_for_pipeline(target_path, f.config);
    const auto map = map_from_file_indices(load_map(map_path), mesh_n, mesh_m, false, map_path);
    const auto gt = map_from_file_indices(load_map(gt_path), mesh_n, mesh_m, true, gt_path);
    std::optional<std::vector<int>> subset;
    if (!subset_path.empty()) {
        const auto compact = mesh_n.compact_index();
        subset.emplace();
        for (int v : read_index_list(subset_path)) {
            if (v < 0 || v >= mesh_n.file_vertex_count() || compact[v] < 0)
                throw IndexRangeError("subset vertex " + std::to_string(v) + " is not a source surface vertex");
            subset->push_back(compact[v]);
        }
    }
    const auto report = evaluate(map, gt, mesh_n, mesh_m, subset);
    const auto json = to_json(report, 1000.0);
    std::cout << json.dump(2) << '\n';
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream(fs::path(out_dir) / "report.json", std::ios::trunc) << json.dump(2) << '\n';
        std::ofstream curve(fs::path(out_dir) / "curve.txt", std::ios::trunc);
        write_curve(curve, report.curve);
    }
    return 0;
}

int run_bounds(const std::string& source_path, const std::string& target_path, const std::string& map_path,
               const std::string& out_path, bool skip_prop1, int guard, CommonFlags& f)
{
    const bool both = f.radius == "both";
    finalize(f);
    const auto mesh_n = load_for_pipeline(source_path, f.config);
    const auto mesh_m = load_for_pipeline(target_path, f.config);
    PointwiseMap map;
    if (map_path.empty()) {
        if (mesh_n.file_vertex_count() != mesh_m.file_vertex_count())
            throw InitMapError("no --map given and the meshes differ in vertex count");
        map = map_from_file_indices(PointwiseMap::identity(mesh_n.file_vertex_count()), mesh_n, mesh_m, false,
                                    "identity map");
    } else {
        map = map_from_file_indices(load_map(map_path), mesh_n, mesh_m, false, map_path);
    }

    BoundsOptions options;
    options.prop1 = !skip_prop1;
    options.exact.vertex_guard = guard;
    std::vector<RadiusMode> modes = both ? std::vector{RadiusMode::Adaptive, RadiusMode::Fixed}
                                         : std::vector{f.config.radius};
    std::ostringstream text;
    bool ok = true;
    for (auto mode : modes) {
        auto config = f.config;
        config.radius = mode;
        const auto run = run_bounds(mesh_n, mesh_m, map, config, options);
        write_bounds_run(text, run);
        ok = ok && run.report.all_satisfied();
    }
    std::cout << text.str();
    if (!out_path.empty()) std::ofstream(out_path, std::ios::trunc) << text.str();
    if (!ok) std::cerr << "bound violation\n";
    return ok ? 0 : kBoundViolationExit;
}

bool is_validation(const std::exception_ptr& ep)
{
    try {
        std::rethrow_exception(ep);
    } catch (const StageError& e) {
        try {
            e.rethrow_inner();
        } catch (...) {
            return is_validation(std::current_exception());
        }
    } catch (const ParseError&) {
        return true;
    } catch (const TopologyError&) {
        return true;
    } catch (const DegenerateTriangleError&) {
        return true;
    } catch (const SamplingError&) {
        return true;
    } catch (const ScheduleError&) {
        return true;
    } catch (const InitMapError&) {
        return true;
    } catch (const IndexRangeError&) {
        return true;
    } catch (const MissingGTError&) {
        return true;
    } catch (const DimensionError&) {
        return true;
    } catch (const HypothesisError&) {
        return true;
    } catch (const std::invalid_argument&) {
        return true;
    } catch (...) {
    }
    return false;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Scalable functional-map shape correspondence"};
    app.require_subcommand(1);

    CommonFlags basis_flags, match_flags, eval_flags, bounds_flags;
    std::string basis_mesh, basis_out;
    auto* basis = app.add_subcommand("basis", "Sample a mesh and compute its reduced eigenbasis");
    basis->add_option("mesh", basis_mesh, "Mesh file (.off, .obj, .ply)")->required()->check(CLI::ExistingFile);
    basis->add_option("--out", basis_out, "Directory for the eigenvalue and sample listings");
    add_common(*basis, basis_flags);

    std::string match_source, match_target, match_init, match_out = "match_out";
    auto* match = app.add_subcommand("match", "Refine a correspondence between two meshes");
    match->add_option("source", match_source, "Source mesh N")->required()->check(CLI::ExistingFile);
    match->add_option("target", match_target, "Target mesh M")->required()->check(CLI::ExistingFile);
    match->add_option("--init", match_init, "Initial map N -> M, one target index per line (identity if omitted)");
    match->add_option("--out", match_out, "Output directory")->capture_default_str();
    add_common(*match, match_flags);

    std::string eval_source, eval_target, eval_map, eval_gt, eval_subset, eval_out;
    auto* eval = app.add_subcommand("eval", "Accuracy, coverage and smoothness of a map");
    eval->add_option("source", eval_source, "Source mesh N")->required()->check(CLI::ExistingFile);
    eval->add_option("target", eval_target, "Target mesh M")->required()->check(CLI::ExistingFile);
    eval->add_option("--map", eval_map, "Map to evaluate")->required()->check(CLI::ExistingFile);
    eval->add_option("--gt", eval_gt, "Ground-truth map (-1 marks missing rows)")->required()->check(CLI::ExistingFile);
    eval->add_option("--subset", eval_subset, "Source vertices to evaluate, one per line")->check(CLI::ExistingFile);
    eval->add_option("--out", eval_out, "Directory for report.json and curve.txt");
    add_common(*eval, eval_flags);

    std::string bounds_source, bounds_target, bounds_map, bounds_out;
    bool skip_prop1 = false;
    int guard = ExactSolveOptions{}.vertex_guard;
    auto* bounds = app.add_subcommand("bounds", "Measure the approximation bounds on a pair");
    bounds->add_option("source", bounds_source, "Source mesh N")->required()->check(CLI::ExistingFile);
    bounds->add_option("target", bounds_target, "Target mesh M")->required()->check(CLI::ExistingFile);
    bounds->add_option("--map", bounds_map, "Dense map N -> M (identity if omitted)");
    bounds->add_option("--out", bounds_out, "Report file");
    bounds->add_flag("--skip-prop1", skip_prop1, "Skip the exact eigensolve and the prop1 check");
    bounds->add_option("--exact-guard", guard, "Largest mesh for the exact eigensolve")->capture_default_str();
    add_common(*bounds, bounds_flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kValidationExit;
    }

    try {
        if (basis->parsed()) {
            if (basis_flags.radius == "both") throw std::invalid_argument("--radius both is only valid for bounds");
            return run_basis(basis_mesh, basis_out, basis_flags);
        }
        if (match->parsed()) {
            if (match_flags.radius == "both") throw std::invalid_argument("--radius both is only valid for bounds");
            return run_match(match_source, match_target, match_init, match_out, match_flags);
        }
        if (eval->parsed())
            return run_eval(eval_source, eval_target, eval_map, eval_gt, eval_subset, eval_out, eval_flags);
        return run_bounds(bounds_source, bounds_target, bounds_map, bounds_out, skip_prop1, guard, bounds_flags);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return is_validation(std::current_exception()) ? kValidationExit : 1;
    }
}
