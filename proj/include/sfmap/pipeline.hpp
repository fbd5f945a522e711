#pragma once

#include "bounds.hpp"
#include "errors.hpp"
#include "fmap.hpp"
#include "geodesic.hpp"
#include "laplacian.hpp"
#include "local_basis.hpp"
#include "mesh.hpp"
#include "mesh_io.hpp"
#include "metrics.hpp"
#include "sampling.hpp"
#include "serialize.hpp"
#include "spectral.hpp"
#include "zoomout.hpp"

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfmap {

enum class RadiusMode { Adaptive, Fixed };
enum class GuidedMode { Auto, On, Off };

inline const char* to_string(RadiusMode m) { return m == RadiusMode::Adaptive ? "adaptive" : "fixed"; }

struct PipelineConfig {
    int p_target = 3000;
    int k_init = 20;
    int k_final = 100;
    double self_weight_min = 0.3;
    ChiKind chi = ChiKind::Polynomial;
    std::uint64_t seed = 0;
    GuidedMode guided = GuidedMode::Auto;
    int guided_threshold = 100000; // vertices of the source mesh
    std::filesystem::path cache_dir; // empty disables caching
    RadiusMode radius = RadiusMode::Adaptive;
    bool normalize_area = true;

    void validate() const
    {
        if (p_target < 1) throw std::invalid_argument("--samples must be positive");
        if (k_init < 1 || k_final < k_init)
            throw std::invalid_argument("need 1 <= --k-init <= --k-final");
        if (self_weight_min < 0.0 || self_weight_min >= 1.0)
            throw std::invalid_argument("--self-weight-min must lie in [0, 1)");
        if (guided_threshold < 0) throw std::invalid_argument("guided threshold must be non-negative");
    }

    /// Everything that influences the cached basis and spectrum.
    std::string basis_key() const
    {
        std::ostringstream s;
        s.precision(17);
        s << "v1 p=" << p_target << " eps=" << self_weight_min << " chi=" << to_string(chi) << " seed=" << seed
          << " radius=" << to_string(radius) << " K=" << k_final << " norm=" << normalize_area;
        return s.str();
    }

    ZoomOutSchedule schedule() const { return {k_init, k_final, 1}; }
};

/// Wall time per stage, in the column order Preprocess / LBO / ZoomOut / Conversion.
struct StageTimes {
    double preprocess = 0.0;
    double lbo = 0.0;
    double zoomout = 0.0;
    double conversion = 0.0;

    double total() const { return preprocess + lbo + zoomout + conversion; }
};

inline void write_timing(std::ostream& out, const StageTimes& t)
{
    const auto flags = out.flags();
    out << std::fixed << std::setprecision(3);
    out << "Preprocess\tLBO\tZoomOut\tConversion\tTotal\n";
    out << t.preprocess << '\t' << t.lbo << '\t' << t.zoomout << '\t' << t.conversion << '\t' << t.total() << '\n';
    out.flags(flags);
}

namespace detail {
class Stopwatch {
public:
    double lap()
    {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - start_).count();
        start_ = now;
        return s;
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline std::string read_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string hex(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

template <class F>
auto with_stage(const char* stage, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(stage, std::current_exception(), e.what());
    }
}
} // namespace detail

inline TriMesh load_for_pipeline(const std::filesystem::path& path, const PipelineConfig& config)
{
    auto mesh = load_mesh(path);
    return config.normalize_area ? normalize_area(mesh) : mesh;
}

struct BasisBuild {
    LocalBasis basis;
    GeodesicRecord record;
    long rounds = 0;
    int promoted = 0;
};

/// Local functions on given samples: one bounded Dijkstra per sample, coverage
/// completion, then adaptive or fixed radii.
inline BasisBuild build_basis_on(const TriMesh& mesh, SampleSet samples, const PipelineConfig& config)
{
    auto record = local_dijkstra(mesh, samples);
    std::tie(samples, record) = cover_unreached(mesh, std::move(samples), std::move(record));
    BasisBuild out;
    if (config.radius == RadiusMode::Fixed) {
        out.basis = fixed_radius_basis(mesh.vertex_count(), samples, record, ChiProfile{config.chi});
        out.record = std::move(record);
        return out;
    }
    AdaptOptions opts;
    opts.threshold = config.self_weight_min;
    opts.profile = ChiProfile{config.chi};
    auto adapted = adapt_radii(mesh, std::move(samples), std::move(record), opts);
    out.basis = std::move(adapted.basis);
    out.record = std::move(adapted.record);
    out.rounds = adapted.rounds;
    out.promoted = adapted.promoted;
    return out;
}

inline SampleSet sample_mesh(const TriMesh& mesh, const PipelineConfig& config)
{
    return poisson_disk_sample(mesh, std::min(config.p_target, mesh.vertex_count()), config.seed).samples;
}

inline BasisBuild build_basis(const TriMesh& mesh, const PipelineConfig& config)
{
    return build_basis_on(mesh, sample_mesh(mesh, config), config);
}

/// Everything the matcher needs about one shape.
struct ShapeData {
    TriMesh mesh;
    LaplacianPair laplacian;
    LocalBasis basis;
    ReducedSpectrum spectrum; // lifted left empty
    bool cached = false;
    std::string cache_key;
    double preprocess_seconds = 0.0;
    double lbo_seconds = 0.0;
};

/// Builds (or loads from the cache) the basis and reduced spectrum of a mesh file.
inline ShapeData prepare_shape(const std::filesystem::path& path, const PipelineConfig& config,
                               std::ostream& log = std::cerr)
{
    config.validate();
    detail::Stopwatch clock;
    ShapeData shape;
    const std::string bytes = detail::read_bytes(path);
    shape.mesh = detail::with_stage("Preprocess", [&] { return load_for_pipeline(path, config); });
    shape.laplacian = detail::with_stage("Preprocess", [&] { return assemble_laplacian(shape.mesh); });
    shape.cache_key = detail::hex(fnv1a(config.basis_key(), fnv1a(bytes)));

    std::filesystem::path basis_file, spectrum_file;
    if (!config.cache_dir.empty()) {
        std::filesystem::create_directories(config.cache_dir);
        basis_file = config.cache_dir / ("basis_" + shape.cache_key + ".bin");
        spectrum_file = config.cache_dir / ("spectrum_" + shape.cache_key + ".bin");
        if (std::filesystem::exists(basis_file) && std::filesystem::exists(spectrum_file)) {
            try {
                shape.basis = load_basis(basis_file);
                const auto stored = load_spectrum(spectrum_file);
                if (shape.basis.vertex_count() != shape.mesh.vertex_count()
                    || stored.vertex_count != shape.mesh.vertex_count()
                    || stored.coeffs.rows() != shape.basis.size())
                    throw CacheError("cache entry does not match " + path.string());
                shape.preprocess_seconds = clock.lap();
                auto [a_bar, w_bar] = reduce_operators(shape.laplacian, shape.basis);
                shape.spectrum.A_bar = std::move(a_bar);
                shape.spectrum.W_bar = std::move(w_bar);
                shape.spectrum.eigenvalues = stored.eigenvalues;
                shape.spectrum.coeffs = stored.coeffs;
                shape.lbo_seconds = clock.lap();
                shape.cached = true;
                return shape;
            } catch (const CacheError& e) {
                log << "warning: " << e.what() << "; recomputing\n";
            }
        }
    }

    shape.basis = detail::with_stage("Preprocess", [&] { return build_basis(shape.mesh, config).basis; });
    shape.preprocess_seconds = clock.lap();
    if (config.k_final > shape.basis.size())
        throw StageError("LBO", ScheduleError("k_final = " + std::to_string(config.k_final) + " exceeds the "
                                              + std::to_string(shape.basis.size()) + " samples of "
                                              + path.string()));
    shape.spectrum =
        detail::with_stage("LBO", [&] {
        auto [a_bar, w_bar] = reduce_operators(shape.laplacian, shape.basis);
        return solve_reduced(std::move(a_bar), std::move(w_bar), config.k_final);
    });
    shape.lbo_seconds = clock.lap();

    if (!config.cache_dir.empty()) {
        save_basis(basis_file, shape.basis);
        save_spectrum(spectrum_file, shape.spectrum, shape.mesh.vertex_count());
    }
    return shape;
}

/// Converts a map given in file vertex indices (one line per file vertex) to
/// compact indices. Negative entries are allowed only where `allow_missing`.
inline PointwiseMap map_from_file_indices(const PointwiseMap& file_map, const TriMesh& source, const TriMesh& target,
                                          bool allow_missing, const std::string& what)
{
    if (file_map.size() != source.file_vertex_count())
        throw IndexRangeError(what + " has " + std::to_string(file_map.size()) + " entries, expected "
                              + std::to_string(source.file_vertex_count()));
    const auto target_compact = target.compact_index();
    PointwiseMap out;
    out.assignment.resize(source.vertex_count());
    for (int v = 0; v < source.vertex_count(); ++v) {
        const int t = file_map[source.original_index()[v]];
        if (t < 0 && allow_missing) {
            out.assignment[v] = -1;
            continue;
        }
        if (t < 0 || t >= target.file_vertex_count() || target_compact[t] < 0)
            throw IndexRangeError(what + ": entry for vertex " + std::to_string(source.original_index()[v])
                                  + " -> " + std::to_string(t) + " is not a target surface vertex");
        out.assignment[v] = target_compact[t];
    }
    return out;
}

/// Inverse of map_from_file_indices; vertices dropped from the source get -1.
inline PointwiseMap map_to_file_indices(const PointwiseMap& map, const TriMesh& source, const TriMesh& target)
{
    PointwiseMap out;
    out.assignment.assign(source.file_vertex_count(), -1);
    for (int v = 0; v < map.size(); ++v) out.assignment[source.original_index()[v]] = target.original_index()[map[v]];
    return out;
}

struct MatchResult {
    PointwiseMap dense;      // compact indices
    PointwiseMap sample_map; // source sample -> target sample
    FunctionalMap fmap;
    StageTimes times;
    bool guided = false;
    bool source_cached = false, target_cached = false;
};

/// Scalable matching of prepared shapes from a dense initial map (compact indices).
inline MatchResult match_shapes(const ShapeData& source, const ShapeData& target, const PointwiseMap& init,
                                const PipelineConfig& config)
{
    MatchResult out;
    detail::Stopwatch clock;
    const auto sample_init = detail::with_stage("ZoomOut", [&] {
        if (init.size() != source.mesh.vertex_count())
            throw InitMapError("initial map covers " + std::to_string(init.size()) + " of "
                               + std::to_string(source.mesh.vertex_count()) + " source vertices");
        return restrict_to_samples(init, source.basis.samples, target.mesh, target.basis.samples);
    });
    auto refined = detail::with_stage(
        "ZoomOut", [&] { return scalable_zoomout(source.spectrum, target.spectrum, sample_init, config.schedule()); });
    out.times.zoomout = clock.lap();

    out.guided = config.guided == GuidedMode::On
                 || (config.guided == GuidedMode::Auto && source.mesh.vertex_count() > config.guided_threshold);
    out.dense = detail::with_stage("Conversion", [&] {
        const auto k = config.k_final;
        const Eigen::MatrixXd psi_n = lift(source.basis, source.spectrum.coeffs.leftCols(k));
        const Eigen::MatrixXd psi_m = lift(target.basis, target.spectrum.coeffs.leftCols(k));
        if (!out.guided) return dense_conversion(psi_n, psi_m, refined.fmap.C);
        const auto candidates = build_guided_candidates(source.basis, target.basis, refined.map);
        return dense_conversion(psi_n, psi_m, refined.fmap.C, &candidates);
    });
    out.times.conversion = clock.lap();
    out.times.preprocess = source.preprocess_seconds + target.preprocess_seconds;
    out.times.lbo = source.lbo_seconds + target.lbo_seconds;
    out.sample_map = std::move(refined.map);
    out.fmap = std::move(refined.fmap);
    out.source_cached = source.cached;
    out.target_cached = target.cached;
    return out;
}

/// Writes dense_map.txt, sample_map.txt, sample_table.txt, fmap.txt, fmap.bin
/// and timing.txt into `dir`. The dense map uses file vertex indices.
inline void write_match_outputs(const std::filesystem::path& dir, const MatchResult& r, const ShapeData& source,
                                const ShapeData& target)
{
    std::filesystem::create_directories(dir);
    save_map(dir / "dense_map.txt", map_to_file_indices(r.dense, source.mesh, target.mesh));
    save_map(dir / "sample_map.txt", r.sample_map);
    {
        std::ofstream table(dir / "sample_table.txt", std::ios::trunc);
        SampleSet s = source.basis.samples, t = target.basis.samples;
        for (auto& v : s.indices) v = source.mesh.original_index()[v];
        for (auto& v : t.indices) v = target.mesh.original_index()[v];
        write_sample_table(table, s, t);
    }
    {
        std::ofstream text(dir / "fmap.txt", std::ios::trunc);
        write_fmap_text(text, r.fmap.C);
    }
    save_fmap_binary(dir / "fmap.bin", r.fmap);
    std::ofstream timing(dir / "timing.txt", std::ios::trunc);
    write_timing(timing, r.times);
}

/// Samples on M placed at the images of N's samples (duplicates merged), so
/// that the dense map and the sample map agree on every source sample.
struct ConsistentSamples {
    SampleSet target;
    PointwiseMap sample_map;
};

inline ConsistentSamples consistent_target_samples(const PointwiseMap& map, const SampleSet& source,
                                                   const TriMesh& mesh_m)
{
    std::vector<int> images;
    for (int v : source.indices) images.push_back(map[v]);
    std::sort(images.begin(), images.end());
    images.erase(std::unique(images.begin(), images.end()), images.end());
    ConsistentSamples out;
    out.target.indices = images;
    out.target.initial_radius = initial_radius(mesh_m, static_cast<int>(images.size()));
    out.target.radii.assign(images.size(), out.target.initial_radius);
    for (int v : source.indices)
        out.sample_map.assignment.push_back(
            static_cast<int>(std::lower_bound(images.begin(), images.end(), map[v]) - images.begin()));
    return out;
}

struct BoundsRun {
    RadiusMode radius = RadiusMode::Adaptive;
    BoundReport report;
    double delta = 0.0; // ||C_bar - C_hat||_F
    int K = 0;
};

struct BoundsOptions {
    bool prop1 = true;
    int bt_trials = 20;
    ExactSolveOptions exact;
};

/// Measures every bound for one radius mode on a pair of (area-normalized) meshes
/// and a dense map N -> M in compact indices. A failing prop2 check is
/// re-run once with ten times as many B_T trial functions.
inline BoundsRun run_bounds(const TriMesh& mesh_n, const TriMesh& mesh_m, const PointwiseMap& map,
                            const PipelineConfig& config, const BoundsOptions& options = {})
{
    BoundsRun run;
    run.radius = config.radius;
    const auto lap_n = assemble_laplacian(mesh_n);
    const auto lap_m = assemble_laplacian(mesh_m);

    const auto built_n = build_basis(mesh_n, config);
    const auto consistent = consistent_target_samples(map, built_n.basis.samples, mesh_m);
    const auto built_m = build_basis_on(mesh_m, consistent.target, config);
    // cover_unreached only appends, so sample positions from the consistent set are kept.
    const PointwiseMap& sample_map = consistent.sample_map;

    const int K = std::min({config.k_final, built_n.basis.size(), built_m.basis.size()});
    run.K = K;
    const auto sp_n = reduced_spectrum(lap_n, built_n.basis, K);
    const auto sp_m = reduced_spectrum(lap_m, built_m.basis, K);

    auto& rep = run.report;
    rep.epsilon_eig = measure_epsilon_eig(sp_m, built_m.basis.samples, built_m.record, K).epsilon;
    rep.alpha = built_m.basis.min_self_weight();

    auto estimate = [&](int trials) {
        const auto est = estimate_BT(map, lap_n.mass, lap_m.mass,
                                     band_limited_trials(sp_m.lifted, trials, config.seed + 17));
        rep.B_T_raw = est.raw;
        rep.B_T_hat = est.inflated;
    };
    estimate(options.bt_trials);

    auto prop2 = check_prop2(map, sample_map, built_n.basis, built_m.basis, sp_m, lap_n.mass, rep.epsilon_eig,
                             rep.alpha, rep.B_T_hat, K);
    if (!prop2.satisfied) {
        estimate(10 * options.bt_trials);
        prop2 = check_prop2(map, sample_map, built_n.basis, built_m.basis, sp_m, lap_n.mass, rep.epsilon_eig,
                            rep.alpha, rep.B_T_hat, K);
        prop2.note = "re-estimated B_T with " + std::to_string(10 * options.bt_trials) + " trials";
    }
    rep.checks.push_back(prop2);

    const auto c_bar = reduced_fmap(sp_n.lifted, lap_n.mass, map, sp_m.lifted).C;
    const auto c_hat = restricted_fmap(sp_n.coeffs, sp_n.A_bar, sample_map, sp_m.coeffs).C;
    run.delta = estimation_delta(c_bar, c_hat);

    const int guard = options.exact.vertex_guard;
    if (options.prop1 && mesh_n.vertex_count() <= guard && mesh_m.vertex_count() <= guard) {
        const auto exact_n = solve_exact(lap_n, K, options.exact);
        const auto exact_m = solve_exact(lap_m, K, options.exact);
        const Eigen::MatrixXd psi_bar_n = align_signs(exact_n.vectors, sp_n.lifted, lap_n.mass);
        const Eigen::MatrixXd psi_bar_m = align_signs(exact_m.vectors, sp_m.lifted, lap_m.mass);
        rep.epsilon_sup = std::max(sup_norm_gap(exact_n.vectors, psi_bar_n, K), sup_norm_gap(exact_m.vectors, psi_bar_m, K));
        const auto C = exact_fmap(exact_n.vectors, lap_n.mass, map, exact_m.vectors).C;
        const auto C_bar = reduced_fmap(psi_bar_n, lap_n.mass, map, psi_bar_m).C;
        rep.checks.push_back(check_prop1(C, C_bar, rep.epsilon_sup, rep.B_T_hat, K));
    } else {
        BoundCheck skipped{"prop1", 0.0, 0.0, true, "skipped: exact eigensolve needs at most "
                                                          + std::to_string(guard) + " vertices per mesh"};
        if (!options.prop1) skipped.note = "skipped on request";
        rep.checks.push_back(skipped);
    }

    auto interpolation = [&](const char* name, const LocalBasis& basis, const Eigen::VectorXd& f) {
        const auto ic = check_interpolation_prop(basis, f);
        BoundCheck c{name, ic.max_error, ic.epsilon, ic.satisfied, {}};
        rep.checks.push_back(c);
    };
    interpolation("interpolation_source_x", built_n.basis, mesh_n.vertices().col(0));
    if (K > 1) interpolation("interpolation_target_psi2", built_m.basis, sp_m.lifted.col(1));

    const auto l3 = check_lemma3(built_n.basis, lap_n.mass, 100, config.seed + 29);
    rep.checks.push_back({"lemma3", l3.max_ratio, 1.0, l3.satisfied, {}});
    return run;
}

inline void write_bounds_run(std::ostream& out, const BoundsRun& run)
{
    out << "[" << to_string(run.radius) << "]\n";
    out << "K = " << run.K << '\n';
    out.precision(10);
    out << "delta = " << run.delta << '\n';
    write_report(out, run.report);
}

} // namespace sfmap
