#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>

using namespace sfmap;

namespace {

struct PairSetup {
    fixtures::IsometricPair pair;
    TriMesh N, M;
    LaplacianPair lap_n, lap_m;
    BasisBuild bn, bm;
    ReducedSpectrum sn, sm;
};

const PairSetup& bent_pair()
{
    static const PairSetup setup = [] {
        PairSetup s;
        s.pair = fixtures::bent_cylinder();
        s.N = normalize_area(s.pair.flat);
        s.M = normalize_area(s.pair.rolled);
        s.lap_n = assemble_laplacian(s.N);
        s.lap_m = assemble_laplacian(s.M);
        PipelineConfig config;
        config.p_target = 300;
        s.bn = build_basis(s.N, config);
        s.bm = build_basis(s.M, config);
        s.sn = reduced_spectrum(s.lap_n, s.bn.basis, 40);
        s.sm = reduced_spectrum(s.lap_m, s.bm.basis, 40);
        return s;
    }();
    return setup;
}

} // namespace

TEST(Schedule, SizesAndValidation)
{
    EXPECT_EQ((ZoomOutSchedule{3, 6, 1}.sizes()), (std::vector<int>{3, 4, 5, 6}));
    EXPECT_EQ((ZoomOutSchedule{3, 10, 4}.sizes()), (std::vector<int>{3, 7, 10}));
    EXPECT_EQ((ZoomOutSchedule{5, 5, 1}.sizes()), (std::vector<int>{5}));
    EXPECT_THROW(ZoomOutSchedule({0, 5, 1}).validate(10), ScheduleError);
    EXPECT_THROW(ZoomOutSchedule({6, 5, 1}).validate(10), ScheduleError);
    EXPECT_THROW(ZoomOutSchedule({2, 5, 0}).validate(10), ScheduleError);
    EXPECT_THROW(ZoomOutSchedule({2, 11, 1}).validate(10), ScheduleError);
    EXPECT_NO_THROW(ZoomOutSchedule({2, 10, 1}).validate(10));
}

TEST(PointwiseFromFmap, IdentityAndConstant)
{
    const Eigen::MatrixXd E = Eigen::MatrixXd::Random(50, 6);
    const auto id = pointwise_from_fmap(E, E, Eigen::MatrixXd::Identity(6, 6));
    EXPECT_EQ(id.assignment, PointwiseMap::identity(50).assignment);
    const auto one = pointwise_from_fmap(E.topRows(1), E, Eigen::MatrixXd::Identity(6, 6));
    EXPECT_TRUE(std::all_of(one.assignment.begin(), one.assignment.end(), [](int t) { return t == 0; }));
    EXPECT_THROW(pointwise_from_fmap(E, E, Eigen::MatrixXd::Identity(5, 6)), DimensionError);
}

TEST(PointwiseFromFmap, MatchesBruteForce)
{
    const auto& s = bent_pair();
    for (int k : {5, 20, 40}) {
        const Eigen::MatrixXd C = Eigen::MatrixXd::Identity(k, k) + 0.1 * Eigen::MatrixXd::Random(k, k);
        const auto fast = pointwise_from_fmap(s.sm.coeffs.leftCols(k), s.sn.coeffs.leftCols(k), C);
        const Eigen::MatrixXd queries = s.sn.coeffs.leftCols(k) * C;
        EXPECT_EQ(fast.assignment, fixtures::brute_nn(s.sm.coeffs.leftCols(k), queries));
    }
}

TEST(KdTree, TiesGoToLowestIndex)
{
    RowMatrix pts(4, 2);
    pts << 1, 0, -1, 0, 0, 1, 1, 0;
    const KdTree tree(pts);
    const double q[2] = {0, 0};
    EXPECT_EQ(tree.nearest(q).index, 0);
    const double r[2] = {1, 0};
    EXPECT_EQ(tree.nearest(r).index, 0);
    std::vector<int> cand = {3, 2};
    EXPECT_EQ(nearest_among(pts, r, cand).index, 3);
}

TEST(KdTree, SeededSearchMatchesBruteForce)
{
    std::mt19937 rng(4);
    std::uniform_int_distribution<int> coarse(-3, 3); // small integer grid forces many exact ties
    std::uniform_int_distribution<int> pick(0, 399);
    RowMatrix pts(400, 21), queries(300, 21);
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = coarse(rng);
    for (Eigen::Index i = 0; i < queries.size(); ++i) queries.data()[i] = coarse(rng) + 0.5 * (i % 2);
    std::vector<int> hints(300);
    for (auto& h : hints) h = pick(rng);
    const KdTree tree(pts);
    const auto oracle = fixtures::brute_nn(pts, queries);
    EXPECT_EQ(tree.nearest_all(queries), oracle);
    EXPECT_EQ(tree.nearest_all(queries, hints), oracle);
}

TEST(ScalableZoomOut, SelfMapIsFixedPoint)
{
    const auto& s = bent_pair();
    const auto id = PointwiseMap::identity(s.bn.basis.size());
    const auto r = scalable_zoomout(s.sn, s.sn, id, {5, 30, 1});
    EXPECT_EQ(r.map.assignment, id.assignment);
    EXPECT_EQ(r.fmap.kind, FmapKind::Restricted);
    EXPECT_LE((r.fmap.C - Eigen::MatrixXd::Identity(30, 30)).cwiseAbs().maxCoeff(), 1e-6);
    const auto again = scalable_zoomout(s.sn, s.sn, r.map, {5, 30, 1});
    EXPECT_EQ(again.map.assignment, r.map.assignment);
}

TEST(ScalableZoomOut, ImprovesCorruptedInit)
{
    const auto& s = bent_pair();
    const auto truth = consistent_target_samples(s.pair.gt, s.bn.basis.samples, s.M);
    // sample-level error: distance on M between the image sample and the true image
    auto sample_error = [&](const PointwiseMap& smap) {
        double e = 0.0;
        for (int j = 0; j < smap.size(); ++j) {
            const int y = s.bm.basis.samples.indices[smap[j]];
            const int g = s.pair.gt[s.bn.basis.samples.indices[j]];
            e += (s.pair.rolled_params.row(y) - s.pair.rolled_params.row(g)).norm();
        }
        return e / smap.size();
    };
    const auto init = restrict_to_samples(fixtures::corrupt(s.pair.gt, s.M.vertex_count(), 0.2, 3),
                                          s.bn.basis.samples, s.M, s.bm.basis.samples);
    ZoomOutAudit audit;
    const auto r = scalable_zoomout(s.sn, s.sm, init, {10, 40, 1}, &audit);
    EXPECT_LT(sample_error(r.map), sample_error(init));
    EXPECT_LE(audit.max_rows, std::max(s.bn.basis.size(), s.bm.basis.size()));
    EXPECT_EQ(audit.residuals.size(), 31u);
    EXPECT_EQ(audit.iteration_seconds.size(), 31u);
    (void)truth;
}

TEST(ScalableZoomOut, DeterministicAndScheduleChecked)
{
    const auto& s = bent_pair();
    const auto init = restrict_to_samples(fixtures::corrupt(s.pair.gt, s.M.vertex_count(), 0.2, 5),
                                          s.bn.basis.samples, s.M, s.bm.basis.samples);
    const auto a = scalable_zoomout(s.sn, s.sm, init, {10, 25, 1});
    const auto b = scalable_zoomout(s.sn, s.sm, init, {10, 25, 1});
    EXPECT_EQ(a.map.assignment, b.map.assignment);
    EXPECT_EQ(a.fmap.C, b.fmap.C);
    EXPECT_THROW(scalable_zoomout(s.sn, s.sm, init, {10, 41, 1}), ScheduleError);
    EXPECT_THROW(scalable_zoomout(s.sn, s.sm, PointwiseMap::identity(3), {10, 20, 1}), DimensionError);
}

TEST(StandardZoomOut, SelfMapFixedPointAndImprovement)
{
    const auto& s = bent_pair();
    const auto en = solve_exact(s.lap_n, 30), em = solve_exact(s.lap_m, 30);
    const auto id = PointwiseMap::identity(s.N.vertex_count());
    const auto self = standard_zoomout(en.vectors, s.lap_n.mass, en.vectors, id, {5, 30, 1});
    EXPECT_EQ(self.map.assignment, id.assignment);
    EXPECT_LE((self.fmap.C - Eigen::MatrixXd::Identity(30, 30)).cwiseAbs().maxCoeff(), 1e-8);

    const auto init = fixtures::corrupt(s.pair.gt, s.M.vertex_count(), 0.2, 3);
    ZoomOutAudit audit;
    const auto r = standard_zoomout(en.vectors, s.lap_n.mass, em.vectors, init, {10, 30, 1}, &audit);
    EXPECT_LT(fixtures::param_error(s.pair, r.map), 0.5 * fixtures::param_error(s.pair, init));
    // residuals are logged; they are not monotone in k because each step adds a dimension
    EXPECT_EQ(audit.residuals.size(), 21u);
    for (double v : audit.residuals) EXPECT_TRUE(std::isfinite(v));
}

TEST(GuidedCandidates, SingleTargetSample)
{
    const auto& s = bent_pair();
    SampleSet one;
    one.indices = {0};
    one.initial_radius = 100.0;
    one.radii = {100.0};
    const auto basis_m = fixed_radius_basis(s.M.vertex_count(), one, local_dijkstra(s.M, one));
    PointwiseMap to_zero;
    to_zero.assignment.assign(s.bn.basis.size(), 0);
    const auto cand = build_guided_candidates(s.bn.basis, basis_m, to_zero);
    for (int x : {0, 100, s.N.vertex_count() - 1}) EXPECT_EQ(cand.candidates(x), PointwiseMap::identity(s.M.vertex_count()).assignment);
}

TEST(GuidedCandidates, NonEmptyAndContainImages)
{
    const auto& s = bent_pair();
    const auto init = restrict_to_samples(s.pair.gt, s.bn.basis.samples, s.M, s.bm.basis.samples);
    const auto cand = build_guided_candidates(s.bn.basis, s.bm.basis, init);
    EXPECT_EQ(cand.query_count(), s.N.vertex_count());
    std::vector<double> sizes;
    for (int x = 0; x < cand.query_count(); ++x) {
        const auto c = cand.candidates(x);
        ASSERT_FALSE(c.empty());
        EXPECT_TRUE(std::is_sorted(c.begin(), c.end()));
        sizes.push_back(static_cast<double>(c.size()));
    }
    for (int j = 0; j < s.bn.basis.size(); ++j) {
        if (s.bn.basis.self_weights(j) < 0.3) continue;
        const auto c = cand.candidates(s.bn.basis.samples.indices[j]);
        EXPECT_TRUE(std::binary_search(c.begin(), c.end(), s.bm.basis.samples.indices[init[j]]));
    }
    // a single support ball holds about 9 n/p vertices, so unions of a few stay near 20 n/p
    std::nth_element(sizes.begin(), sizes.begin() + sizes.size() / 2, sizes.end());
    const double ratio = static_cast<double>(s.M.vertex_count()) / s.bm.basis.size();
    EXPECT_LE(sizes[sizes.size() / 2], 25.0 * ratio);
    EXPECT_LT(sizes[sizes.size() / 2], 0.2 * s.M.vertex_count());
}

TEST(DenseConversion, IdentityAndOracle)
{
    const auto& s = bent_pair();
    const auto id = dense_conversion(s.sn.lifted, s.sn.lifted, Eigen::MatrixXd::Identity(30, 30));
    EXPECT_EQ(id.assignment, PointwiseMap::identity(s.N.vertex_count()).assignment);

    const Eigen::MatrixXd C = Eigen::MatrixXd::Identity(20, 20) + 0.05 * Eigen::MatrixXd::Random(20, 20);
    const auto full = dense_conversion(s.sn.lifted, s.sm.lifted, C);
    EXPECT_EQ(full.assignment, fixtures::brute_nn(s.sm.lifted.leftCols(20), s.sn.lifted.leftCols(20) * C));
    EXPECT_THROW(dense_conversion(s.sn.lifted, s.sm.lifted, Eigen::MatrixXd::Identity(41, 41)), DimensionError);
}

TEST(DenseConversion, GuidedAgreesWithFull)
{
    const auto& s = bent_pair();
    const auto init = restrict_to_samples(fixtures::corrupt(s.pair.gt, s.M.vertex_count(), 0.2, 3),
                                          s.bn.basis.samples, s.M, s.bm.basis.samples);
    const auto r = scalable_zoomout(s.sn, s.sm, init, {10, 40, 1});
    const auto full = dense_conversion(s.sn.lifted, s.sm.lifted, r.fmap.C);
    const auto cand = build_guided_candidates(s.bn.basis, s.bm.basis, r.map);
    const auto guided = dense_conversion(s.sn.lifted, s.sm.lifted, r.fmap.C, &cand);
    int agree = 0;
    const double rho0 = s.bm.basis.samples.initial_radius;
    const auto gt_err = [&](int x, int y) {
        return (s.pair.rolled_params.row(y) - s.pair.rolled_params.row(s.pair.gt[x])).norm() / std::sqrt(s.pair.rolled.total_area());
    };
    for (int x = 0; x < full.size(); ++x) {
        if (full[x] == guided[x]) {
            ++agree;
            continue;
        }
        EXPECT_LE(gt_err(x, guided[x]) - gt_err(x, full[x]), 2.0 * rho0);
    }
    EXPECT_GE(agree, static_cast<int>(0.99 * full.size()));
    EXPECT_GT(distinct_images(full), s.bn.basis.size());
}

TEST(LocallyConstant, FollowsDominantSample)
{
    const auto& s = bent_pair();
    const auto smap = restrict_to_samples(s.pair.gt, s.bn.basis.samples, s.M, s.bm.basis.samples);
    const auto lc = locally_constant_extension(s.bn.basis, smap, s.bm.basis.samples);
    EXPECT_LE(distinct_images(lc), s.bn.basis.size());
    for (int j = 0; j < s.bn.basis.size(); ++j)
        if (s.bn.basis.self_weights(j) > 0.5)
            EXPECT_EQ(lc[s.bn.basis.samples.indices[j]], s.bm.basis.samples.indices[smap[j]]);
}

TEST(RestrictToSamples, NearestSampleAndErrors)
{
    const auto& s = bent_pair();
    const auto smap = restrict_to_samples(s.pair.gt, s.bn.basis.samples, s.M, s.bm.basis.samples);
    for (int j = 0; j < smap.size(); j += 17) {
        const Eigen::RowVector3d y = s.M.vertices().row(s.pair.gt[s.bn.basis.samples.indices[j]]);
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < s.bm.basis.size(); ++i)
            best = std::min(best, (s.M.vertices().row(s.bm.basis.samples.indices[i]) - y).squaredNorm());
        EXPECT_EQ((s.M.vertices().row(s.bm.basis.samples.indices[smap[j]]) - y).squaredNorm(), best);
    }
    PointwiseMap bad = s.pair.gt;
    bad.assignment[s.bn.basis.samples.indices[0]] = -1;
    EXPECT_THROW(restrict_to_samples(bad, s.bn.basis.samples, s.M, s.bm.basis.samples), InitMapError);
}
