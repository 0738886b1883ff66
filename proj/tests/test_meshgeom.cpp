#include "covfer/error.hpp"
#include "covfer/meshgeom.hpp"

#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <random>

using namespace covfer;

namespace {

double bbox_diagonal(const TriMesh& m)
{
	Vec3 lo = m.vertices[0], hi = m.vertices[0];
	for (const auto& v : m.vertices) {
		lo = lo.cwiseMin(v);
		hi = hi.cwiseMax(v);
	}
	return (hi - lo).norm();
}

TriMesh bumpy_sphere(int subdivisions)
{
	auto m = make_icosphere(subdivisions);
	for (auto& v : m.vertices) {
		const double bump = 0.15 * std::sin(3.0 * v.x() + 0.5) * std::cos(2.0 * v.y()) + 0.1 * v.z() * v.z();
		v *= 1.0 + bump;
	}
	return m;
}

TriMesh upper_hemisphere(int subdivisions)
{
	auto m = make_icosphere(subdivisions);
	std::erase_if(m.faces, [&](const Face& f) {
		return m.vertices[f[0]].z() < -1e-9 || m.vertices[f[1]].z() < -1e-9 || m.vertices[f[2]].z() < -1e-9;
	});
	remove_isolated_vertices(m);
	return m;
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng)
{
	std::normal_distribution<double> normal;
	Eigen::Quaterniond q(normal(rng), normal(rng), normal(rng), normal(rng));
	return q.normalized().toRotationMatrix();
}

} // namespace

TEST_CASE("fixtures are consistently oriented")
{
	auto sphere = make_icosphere(2);
	auto normals = area_weighted_normals(sphere);
	for (std::size_t i = 0; i < sphere.vertex_count(); ++i)
		CHECK(normals[i].dot(sphere.vertices[i]) > 0.9);
	auto grid = make_grid(5, 1.0);
	for (const auto& n : area_weighted_normals(grid))
		CHECK(n.z() == doctest::Approx(1.0));
	auto cyl = make_cylinder(2.0, 4.0, 32, 9);
	auto cn = area_weighted_normals(cyl);
	for (std::size_t i = 0; i < cyl.vertex_count(); ++i) {
		Vec3 radial(cyl.vertices[i].x(), 0.0, cyl.vertices[i].z());
		CHECK(cn[i].dot(radial.normalized()) > 0.99);
	}
}

TEST_CASE("preprocess identity configuration leaves a clean mesh untouched")
{
	auto grid = make_grid(12, 2.0);
	auto out = preprocess(grid, PreprocessParams::identity());
	CHECK(out.vertices == grid.vertices);
	CHECK(out.faces == grid.faces);
}

TEST_CASE("smoothing relieves a spike")
{
	auto grid = make_grid(21, 2.0);
	const double h = 10.0 * median_edge_length(grid);
	const std::size_t center = 10 * 21 + 10;
	grid.vertices[center].z() = h;

	auto params = PreprocessParams::identity();
	params.smoothing_iterations = 5;
	auto out = preprocess(grid, params);
	double worst = 0.0;
	for (const auto& v : out.vertices)
		worst = std::max(worst, std::abs(v.z()));
	CHECK(worst <= 0.1 * h);
}

TEST_CASE("smoothing never grows the bounding box")
{
	std::mt19937_64 rng(5);
	std::normal_distribution<double> noise(0.0, 0.05);
	for (int trial = 0; trial < 5; ++trial) {
		auto m = bumpy_sphere(2);
		for (auto& v : m.vertices)
			v += Vec3(noise(rng), noise(rng), noise(rng));
		const double before = bbox_diagonal(m);
		laplacian_smooth(m, 3, 1.0);
		CHECK(bbox_diagonal(m) <= before + 1e-12);
	}
}

TEST_CASE("crop sphere")
{
	auto grid = make_grid(11, 2.0);
	auto params = PreprocessParams::identity();
	params.crop = true;
	params.crop_center = Vec3(100.0, 0.0, 0.0);
	params.crop_radius = 1.0;
	try {
		preprocess(grid, params);
		FAIL("crop outside the mesh accepted");
	} catch (const Error& e) {
		CHECK(e.code() == ErrorCode::EmptyAfterCrop);
	}

	params.crop_center = Vec3(0.0, 0.0, 0.0);
	params.crop_radius = 0.5;
	auto cropped = preprocess(grid, params);
	CHECK(cropped.face_count() < grid.face_count());
	CHECK(cropped.face_count() > 0);
	for (const auto& f : cropped.faces) {
		bool inside = false;
		for (auto v : f)
			inside |= cropped.vertices[v].norm() <= 0.5;
		CHECK(inside);
	}
	// no isolated vertices survive
	std::vector<bool> used(cropped.vertex_count(), false);
	for (const auto& f : cropped.faces)
		for (auto v : f)
			used[v] = true;
	CHECK(std::all_of(used.begin(), used.end(), [](bool b) { return b; }));
}

TEST_CASE("default crop anchors on the highest vertices")
{
	auto m = make_icosphere(3);
	const Vec3 anchor = crop_anchor(m);
	CHECK(anchor.x() == doctest::Approx(0.0).epsilon(1e-9));
	CHECK(anchor.z() > 0.8);
	auto out = preprocess(m);
	CHECK(out.vertex_count() < m.vertex_count());
}

TEST_CASE("small holes are filled, the outer boundary is not")
{
	auto grid = make_grid(9, 2.0);
	const std::uint32_t hole_vertex = 4 * 9 + 4;
	std::erase_if(grid.faces, [&](const Face& f) {
		return f[0] == hole_vertex || f[1] == hole_vertex || f[2] == hole_vertex;
	});
	remove_isolated_vertices(grid);
	CHECK(boundary_loops(grid).size() == 2);
	const auto faces_before = grid.face_count();
	CHECK(fill_small_holes(grid, 12) == 1);
	CHECK(boundary_loops(grid).size() == 1);
	CHECK(grid.face_count() == faces_before + 4);
	for (const auto& n : area_weighted_normals(grid))
		CHECK(n.z() > 0.99);
}

TEST_CASE("median filter removes an isolated spike")
{
	auto grid = make_grid(7, 1.0);
	grid.vertices[3 * 7 + 3].z() = 5.0;
	median_filter_z(grid);
	for (const auto& v : grid.vertices)
		CHECK(v.z() == 0.0);
}

TEST_CASE("preprocess turns a mesh to face the viewer")
{
	auto grid = make_grid(6, 1.0);
	for (auto& f : grid.faces)
		std::swap(f[1], f[2]);
	auto params = PreprocessParams::identity();
	auto out = preprocess(grid, params);
	for (const auto& n : area_weighted_normals(out))
		CHECK(n.z() > 0.99);
}

TEST_CASE("sphere curvature")
{
	auto m = estimate_curvatures(make_icosphere(3));
	REQUIRE(m.has_curvatures());
	for (std::size_t v = 0; v < m.vertex_count(); ++v) {
		CHECK(m.mean_curvature(v) == doctest::Approx(1.0).epsilon(0.05));
		CHECK(m.curvedness(v) == doctest::Approx(1.0).epsilon(0.05));
		CHECK(m.k1[v] >= m.k2[v]);
	}
}

TEST_CASE("flat grid has zero curvature")
{
	auto m = estimate_curvatures(make_grid(15, 3.0));
	for (std::size_t v = 0; v < m.vertex_count(); ++v) {
		CHECK(std::abs(m.k1[v]) <= 1e-6);
		CHECK(std::abs(m.k2[v]) <= 1e-6);
	}
}

TEST_CASE("cylinder curvature")
{
	const double r = 2.0, length = 6.0;
	auto m = estimate_curvatures(make_cylinder(r, length, 64, 31));
	int interior = 0;
	for (std::size_t v = 0; v < m.vertex_count(); ++v) {
		if (std::abs(m.vertices[v].y()) > 0.5 * length - 1.0)
			continue;
		++interior;
		CHECK(m.k1[v] == doctest::Approx(1.0 / r).epsilon(0.05));
		CHECK(std::abs(m.k2[v]) <= 0.05 / r);
	}
	CHECK(interior > 0);
}

TEST_CASE("mean curvature and curvedness follow from k1 and k2")
{
	auto m = estimate_curvatures(bumpy_sphere(2));
	for (std::size_t v = 0; v < m.vertex_count(); ++v) {
		CHECK(m.mean_curvature(v) == doctest::Approx((m.k1[v] + m.k2[v]) / 2));
		CHECK(m.curvedness(v) == doctest::Approx(std::sqrt((m.k1[v] * m.k1[v] + m.k2[v] * m.k2[v]) / 2)));
		CHECK(m.normals[v].norm() == doctest::Approx(1.0).epsilon(1e-6));
	}
}

TEST_CASE("curvature is invariant under rigid motion")
{
	std::mt19937_64 rng(11);
	const auto base = bumpy_sphere(3);
	const auto ref = estimate_curvatures(base);
	for (int trial = 0; trial < 3; ++trial) {
		const Eigen::Matrix3d R = random_rotation(rng);
		const Vec3 t(0.3 * trial, -1.2, 2.5);
		TriMesh moved = base;
		for (auto& v : moved.vertices)
			v = R * v + t;
		const auto out = estimate_curvatures(moved);
		double worst = 0.0;
		for (std::size_t v = 0; v < ref.vertex_count(); ++v)
			worst = std::max({worst, std::abs(out.k1[v] - ref.k1[v]), std::abs(out.k2[v] - ref.k2[v])});
		CHECK(worst <= 1e-4);
	}
}

TEST_CASE("curvature scales inversely with the mesh")
{
	const auto base = bumpy_sphere(2);
	const auto ref = estimate_curvatures(base);
	for (double s : {0.1, 3.0, 250.0}) {
		TriMesh scaled = base;
		for (auto& v : scaled.vertices)
			v *= s;
		const auto out = estimate_curvatures(scaled);
		for (std::size_t v = 0; v < ref.vertex_count(); ++v) {
			CHECK(out.k1[v] * s == doctest::Approx(ref.k1[v]).epsilon(1e-4));
			CHECK(out.k2[v] * s == doctest::Approx(ref.k2[v]).epsilon(1e-4));
		}
	}
}

TEST_CASE("curvature needs enough neighbours")
{
	TriMesh tri;
	tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
	tri.faces = {{0, 1, 2}};
	try {
		estimate_curvatures(tri);
		FAIL("three-vertex mesh accepted");
	} catch (const Error& e) {
		CHECK(e.code() == ErrorCode::DegenerateNeighborhood);
	}
	TriMesh empty;
	empty.vertices = tri.vertices;
	try {
		estimate_curvatures(empty);
		FAIL("faceless mesh accepted");
	} catch (const Error& e) {
		CHECK(e.code() == ErrorCode::EmptyMesh);
	}
}

TEST_CASE("depth map of a constant plane")
{
	auto plane = make_grid(10, 4.0);
	for (auto& v : plane.vertices)
		v.z() = 5.0;
	auto img = render_depth_map(plane);
	CHECK(img.width == 224);
	CHECK(img.height == 224);
	const float first = img.pixels[0];
	for (std::size_t i = 0; i < img.pixels.size(); ++i) {
		REQUIRE(img.foreground[i]);
		CHECK(img.pixels[i] == first);
	}
}

TEST_CASE("depth map of a hemisphere peaks at the centre")
{
	auto img = render_depth_map(upper_hemisphere(4));
	int best = 0;
	for (int i = 1; i < img.width * img.height; ++i)
		if (img.pixels[i] > img.pixels[best])
			best = i;
	const int bx = best % img.width, by = best / img.width;
	CHECK(std::abs(bx - 111.5) <= 1.5);
	CHECK(std::abs(by - 111.5) <= 1.5);
	for (std::size_t i = 0; i < img.pixels.size(); ++i) {
		CHECK(img.pixels[i] >= 0.0f);
		CHECK(img.pixels[i] <= 1.0f);
		if (!img.foreground[i])
			CHECK(img.pixels[i] == 0.0f);
	}
	// radial symmetry: mirrored pixels agree closely
	double worst = 0.0;
	for (int y = 0; y < img.height; ++y)
		for (int x = 0; x < img.width; ++x)
			worst = std::max(worst, std::abs(double(img.at(x, y)) - img.at(img.width - 1 - x, y)));
	CHECK(worst < 0.05);
	CHECK(img.at(0, 0) == 0.0f);
}

TEST_CASE("rasterization is deterministic")
{
	auto m = estimate_curvatures(bumpy_sphere(3));
	auto a = render_depth_map(m);
	auto b = render_depth_map(m);
	CHECK(a.pixels == b.pixels);
	auto c = render_curvature_map(m);
	auto d = render_curvature_map(m);
	CHECK(c.pixels == d.pixels);
	auto t = to_tensor(c);
	CHECK(t.dims == std::vector<std::uint32_t>{1, 224, 224});
}

TEST_CASE("curvature maps")
{
	auto flat = estimate_curvatures(make_grid(12, 2.0));
	auto img = render_curvature_map(flat);
	for (std::size_t i = 0; i < img.pixels.size(); ++i)
		if (img.foreground[i])
			CHECK(img.pixels[i] == 0.5f);

	auto sphere = estimate_curvatures(make_icosphere(3));
	auto simg = render_curvature_map(sphere);
	float lo = 1.0f, hi = 0.0f;
	double sum = 0.0;
	int count = 0;
	for (std::size_t i = 0; i < simg.pixels.size(); ++i) {
		if (!simg.foreground[i])
			continue;
		lo = std::min(lo, simg.pixels[i]);
		hi = std::max(hi, simg.pixels[i]);
		sum += simg.pixels[i];
		++count;
	}
	REQUIRE(count > 0);
	CHECK((hi - lo) / (sum / count) <= 0.05);

	try {
		render_curvature_map(make_grid(4, 1.0));
		FAIL("curvature-less mesh rendered");
	} catch (const Error& e) {
		CHECK(e.code() == ErrorCode::CurvaturesMissing);
	}
	try {
		render_depth_map(TriMesh{});
		FAIL("empty mesh rendered");
	} catch (const Error& e) {
		CHECK(e.code() == ErrorCode::EmptyMesh);
	}
}

TEST_CASE("pgm export")
{
	auto img = render_depth_map(upper_hemisphere(2));
	auto path = std::filesystem::temp_directory_path() / "covfer_depth.pgm";
	write_pgm(img, path);
	CHECK(std::filesystem::file_size(path) == std::string("P5\n224 224\n255\n").size() + 224 * 224);
}
