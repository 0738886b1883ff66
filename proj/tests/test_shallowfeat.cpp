#include "covfer/error.hpp"
#include "covfer/meshgeom.hpp"
#include "covfer/shallowfeat.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

using namespace covfer;

namespace {

ErrorCode code_of(auto&& fn)
{
	try {
		fn();
	} catch (const Error& e) {
		return e.code();
	}
	FAIL("expected an error");
	return ErrorCode::IoFailure;
}

double min_pairwise(const TriMesh& mesh, const std::vector<std::uint32_t>& ids)
{
	double best = std::numeric_limits<double>::infinity();
	for (std::size_t i = 0; i < ids.size(); ++i)
		for (std::size_t j = i + 1; j < ids.size(); ++j)
			best = std::min(best, (mesh.vertices[ids[i]] - mesh.vertices[ids[j]]).norm());
	return best;
}

/// Sphere with an asymmetric bump field so no rotation maps it onto itself.
TriMesh lumpy_sphere()
{
	auto mesh = make_icosphere(4);
	for (auto& v : mesh.vertices)
		v *= 1.0 + 0.08 * std::sin(3 * v.x() + 1) * std::cos(2 * v.y()) + 0.05 * v.z() * v.x();
	return mesh;
}

const TriMesh& curved_sphere()
{
	static const TriMesh mesh = estimate_curvatures(make_icosphere(4));
	return mesh;
}

const TriMesh& curved_lumpy()
{
	static const TriMesh mesh = estimate_curvatures(lumpy_sphere());
	return mesh;
}

} // namespace

TEST_CASE("patch sampling on the icosphere")
{
	const auto mesh = make_icosphere(4);
	const auto patches = sample_patch_centers(mesh);
	REQUIRE(patches.size() == 40);
	std::vector<std::uint32_t> ids;
	for (const auto& p : patches) {
		ids.push_back(p.center_id);
		CHECK(p.radius == doctest::Approx(0.15).epsilon(1e-9));
		CHECK(p.point_ids.size() >= 12);
		for (auto id : p.point_ids)
			CHECK((mesh.vertices[id] - p.center).norm() <= p.radius);
	}
	CHECK(min_pairwise(mesh, ids) > 0.0);

	const auto anchor = crop_anchor(mesh);
	std::uint32_t nearest = 0;
	for (std::uint32_t i = 1; i < mesh.vertex_count(); ++i)
		if ((mesh.vertices[i] - anchor).norm() < (mesh.vertices[nearest] - anchor).norm())
			nearest = i;
	const auto single = sample_patch_centers(mesh, {1});
	REQUIRE(single.size() == 1);
	CHECK(single[0].center_id == nearest);
}

TEST_CASE("farthest-point sampling spreads at least as well as random sampling")
{
	const auto mesh = make_icosphere(4);
	const auto patches = sample_patch_centers(mesh);
	std::vector<std::uint32_t> fps;
	for (const auto& p : patches)
		fps.push_back(p.center_id);
	const double fps_gap = min_pairwise(mesh, fps);
	for (std::uint64_t seed = 0; seed < 100; ++seed) {
		std::mt19937_64 rng(seed);
		std::vector<std::uint32_t> all(mesh.vertex_count());
		std::iota(all.begin(), all.end(), 0u);
		std::shuffle(all.begin(), all.end(), rng);
		all.resize(40);
		CHECK(fps_gap >= min_pairwise(mesh, all));
	}
}

TEST_CASE("hand-computed three-point covariance")
{
	FeatureRows f(3, 6);
	f << 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 2, 0, 0, 0, 0, 2;
	const auto cov = feature_covariance(f);
	Matrix expected = Matrix::Zero(6, 6);
	expected(0, 0) = expected(5, 5) = expected(0, 5) = expected(5, 0) = 2.0 / 3.0;
	CHECK((cov - expected).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("constant features leave only the ridge")
{
	TriMesh mesh;
	mesh.vertices.assign(12, Vec3(0.5, -1.0, 2.0));
	mesh.k1.assign(12, 0.3);
	mesh.k2.assign(12, 0.1);
	Patch p{0, mesh.vertices[0], 1.0, {}};
	for (std::uint32_t i = 0; i < 12; ++i)
		p.point_ids.push_back(i);
	CHECK(feature_covariance(point_features(mesh, p.point_ids)).isZero(0.0));
	CHECK(patch_covariance(mesh, p).matrix() == 1e-12 * Matrix::Identity(6, 6));
}

TEST_CASE("point features")
{
	const auto& mesh = curved_lumpy();
	const auto f = point_features(mesh, {0, 17, 300});
	for (int r = 0; r < 3; ++r) {
		CHECK(std::abs(f(r, 5) - std::sqrt(f(r, 0) * f(r, 0) + f(r, 1) * f(r, 1) + f(r, 2) * f(r, 2))) <= 1e-9);
		const auto id = std::array<std::uint32_t, 3>{0, 17, 300}[r];
		CHECK(f(r, 4) == doctest::Approx((mesh.k1[id] + mesh.k2[id]) / 2));
		CHECK(f(r, 3) == doctest::Approx(std::sqrt((mesh.k1[id] * mesh.k1[id] + mesh.k2[id] * mesh.k2[id]) / 2)));
	}
}

TEST_CASE("shallow descriptors are 40 symmetric positive-definite matrices")
{
	for (const TriMesh* mesh : {&curved_sphere(), &curved_lumpy()}) {
		const auto descs = shallow_descriptors(*mesh);
		REQUIRE(descs.size() == 40);
		const auto patches = sample_patch_centers(*mesh);
		for (std::size_t i = 0; i < descs.size(); ++i) {
			const auto& m = descs[i].matrix();
			CHECK(descs[i].dim() == 6);
			CHECK(m.allFinite());
			CHECK(m == m.transpose());
			const double lambda = 1e-6 * (m.trace() - 6 * 1e-12) / (6 * (1 + 1e-6)) + 1e-12;
			CHECK(sym_eig(descs[i]).values.minCoeff() >= lambda - 1e-12);
			CHECK(m == patch_covariance(*mesh, patches[i]).matrix());
		}
		const auto again = shallow_descriptors(*mesh);
		for (std::size_t i = 0; i < descs.size(); ++i)
			CHECK(again[i].matrix() == descs[i].matrix());
	}
}

TEST_CASE("rigid motion keeps curvature variances")
{
	const auto& mesh = curved_lumpy();
	const auto before = shallow_descriptors(mesh);
	for (int quarter : {1, 2, 3}) {
		auto moved = lumpy_sphere();
		const Eigen::AngleAxisd rot(quarter * std::numbers::pi / 2, Vec3::UnitZ());
		for (auto& v : moved.vertices) {
			const Vec3 r = rot * v;
			// snap the sin/cos round-off of quarter turns
			v = Vec3(std::round(r.x() * 1e12) / 1e12, std::round(r.y() * 1e12) / 1e12, r.z()) + Vec3(0.3, -0.2, 0.5);
		}
		moved = estimate_curvatures(moved);
		const auto after = shallow_descriptors(moved);
		REQUIRE(after.size() == 40);
		for (std::size_t i = 0; i < 40; ++i) {
			CHECK(std::abs(after[i](3, 3) - before[i](3, 3)) <= 1e-4);
			CHECK(std::abs(after[i](4, 4) - before[i](4, 4)) <= 1e-4);
		}
	}
}

TEST_CASE("scaling the mesh scales the position block quadratically")
{
	const auto& mesh = curved_lumpy();
	auto big = mesh;
	for (auto& v : big.vertices)
		v *= 2.0;
	big = estimate_curvatures(big);
	const auto small_patches = sample_patch_centers(mesh);
	const auto big_patches = sample_patch_centers(big);
	const std::array<int, 4> idx{0, 1, 2, 5};
	for (std::size_t p = 0; p < 40; ++p) {
		REQUIRE(small_patches[p].point_ids == big_patches[p].point_ids);
		const auto a = feature_covariance(point_features(mesh, small_patches[p].point_ids));
		const auto b = feature_covariance(point_features(big, big_patches[p].point_ids));
		Matrix sa(4, 4), sb(4, 4);
		for (int i = 0; i < 4; ++i)
			for (int j = 0; j < 4; ++j) {
				sa(i, j) = a(idx[i], idx[j]);
				sb(i, j) = b(idx[i], idx[j]);
			}
		CHECK(oracle::rel_frobenius(sb, 4.0 * sa) <= 1e-9);
	}
}

TEST_CASE("shallow feature errors")
{
	TriMesh tiny = make_icosphere(0);
	CHECK(code_of([&] { sample_patch_centers(tiny); }) == ErrorCode::TooFewVertices);
	const auto coarse = estimate_curvatures(make_icosphere(2));
	CHECK(code_of([&] { shallow_descriptors(coarse); }) == ErrorCode::PatchTooSmall);
	CHECK(code_of([] { shallow_descriptors(make_icosphere(4)); }) == ErrorCode::CurvaturesMissing);
}
