#include "covfer/meshgeom.hpp"

#include "covfer/error.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

namespace covfer {

Vec3 crop_anchor(const TriMesh& mesh, double fraction)
{
	if (mesh.vertices.empty())
		fail(ErrorCode::EmptyMesh, "no vertices");
	std::vector<std::uint32_t> order(mesh.vertices.size());
	std::iota(order.begin(), order.end(), 0u);
	const auto take = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * order.size())));
	std::stable_sort(order.begin(), order.end(),
	                 [&](auto a, auto b) { return mesh.vertices[a].z() > mesh.vertices[b].z(); });
	Vec3 sum = Vec3::Zero();
	for (std::size_t i = 0; i < take; ++i)
		sum += mesh.vertices[order[i]];
	return sum / static_cast<double>(take);
}

std::vector<bool> boundary_vertices(const TriMesh& mesh)
{
	std::map<std::pair<std::uint32_t, std::uint32_t>, int> count;
	for (const auto& f : mesh.faces)
		for (int i = 0; i < 3; ++i)
			++count[{std::min(f[i], f[(i + 1) % 3]), std::max(f[i], f[(i + 1) % 3])}];
	std::vector<bool> boundary(mesh.vertices.size(), false);
	for (const auto& [edge, n] : count) {
		if (n == 1) {
			boundary[edge.first] = true;
			boundary[edge.second] = true;
		}
	}
	return boundary;
}

void laplacian_smooth(TriMesh& mesh, int iterations, double step)
{
	if (iterations <= 0)
		return;
	const auto nbrs = vertex_neighbors(mesh);
	const auto fixed = boundary_vertices(mesh);
	std::vector<Vec3> next(mesh.vertices.size());
	for (int it = 0; it < iterations; ++it) {
		for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
			next[v] = mesh.vertices[v];
			if (fixed[v] || nbrs[v].empty())
				continue;
			Vec3 avg = Vec3::Zero();
			for (auto n : nbrs[v])
				avg += mesh.vertices[n];
			avg /= static_cast<double>(nbrs[v].size());
			next[v] += step * (avg - mesh.vertices[v]);
		}
		mesh.vertices.swap(next);
	}
	mesh.clear_derived();
}

void remove_isolated_vertices(TriMesh& mesh)
{
	std::vector<std::int64_t> remap(mesh.vertices.size(), -1);
	for (const auto& f : mesh.faces)
		for (auto v : f)
			remap[v] = 0;
	std::vector<Vec3> kept;
	for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
		if (remap[v] < 0)
			continue;
		remap[v] = static_cast<std::int64_t>(kept.size());
		kept.push_back(mesh.vertices[v]);
	}
	if (kept.size() == mesh.vertices.size())
		return;
	for (auto& f : mesh.faces)
		for (auto& v : f)
			v = static_cast<std::uint32_t>(remap[v]);
	mesh.vertices = std::move(kept);
	mesh.clear_derived();
}

void crop_sphere(TriMesh& mesh, const Vec3& center, double radius)
{
	const double r2 = radius * radius;
	std::erase_if(mesh.faces, [&](const Face& f) {
		return std::none_of(f.begin(), f.end(),
		                    [&](auto v) { return (mesh.vertices[v] - center).squaredNorm() <= r2; });
	});
	remove_isolated_vertices(mesh);
}

std::vector<std::vector<std::uint32_t>> boundary_loops(const TriMesh& mesh)
{
	std::map<std::pair<std::uint32_t, std::uint32_t>, int> half_edges;
	for (const auto& f : mesh.faces)
		for (int i = 0; i < 3; ++i)
			++half_edges[{f[i], f[(i + 1) % 3]}];

	// A face half-edge a->b without a twin marks the hole-side edge b->a.
	std::multimap<std::uint32_t, std::uint32_t> next;
	for (const auto& [he, n] : half_edges)
		if (!half_edges.contains({he.second, he.first}))
			next.emplace(he.second, he.first);

	std::vector<std::vector<std::uint32_t>> loops;
	while (!next.empty()) {
		auto it = next.begin();
		const std::uint32_t start = it->first;
		std::vector<std::uint32_t> loop{start};
		std::uint32_t cur = it->second;
		next.erase(it);
		bool closed = false;
		while (loop.size() <= mesh.vertices.size()) {
			if (cur == start) {
				closed = true;
				break;
			}
			loop.push_back(cur);
			auto nx = next.find(cur);
			if (nx == next.end())
				break;
			cur = nx->second;
			next.erase(nx);
		}
		if (closed && loop.size() >= 3)
			loops.push_back(std::move(loop));
	}
	return loops;
}

int fill_small_holes(TriMesh& mesh, int max_edges)
{
	if (max_edges < 3)
		return 0;
	int filled = 0;
	for (const auto& loop : boundary_loops(mesh)) {
		if (static_cast<int>(loop.size()) > max_edges)
			continue;
		for (std::size_t i = 1; i + 1 < loop.size(); ++i)
			mesh.faces.push_back({loop[0], loop[i], loop[i + 1]});
		++filled;
	}
	if (filled > 0)
		mesh.clear_derived();
	return filled;
}

void median_filter_z(TriMesh& mesh)
{
	const auto nbrs = vertex_neighbors(mesh);
	std::vector<double> z(mesh.vertices.size());
	std::vector<double> window;
	for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
		window.assign(1, mesh.vertices[v].z());
		for (auto n : nbrs[v])
			window.push_back(mesh.vertices[n].z());
		std::sort(window.begin(), window.end());
		const std::size_t m = window.size() / 2;
		z[v] = window.size() % 2 ? window[m] : 0.5 * (window[m - 1] + window[m]);
	}
	for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
		mesh.vertices[v].z() = z[v];
	mesh.clear_derived();
}

bool orient_toward_viewer(TriMesh& mesh)
{
	double facing = 0.0, total = 0.0;
	for (const auto& f : mesh.faces) {
		const Vec3& a = mesh.vertices[f[0]];
		const Vec3 n = (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
		facing += n.z();
		total += n.norm();
	}
	// closed surfaces have no net facing and are left alone
	if (!(facing < -1e-3 * total))
		return false;
	for (auto& f : mesh.faces)
		std::swap(f[1], f[2]);
	mesh.clear_derived();
	return true;
}

TriMesh preprocess(const TriMesh& input, const PreprocessParams& params)
{
	TriMesh mesh = input;
	if (mesh.faces.empty())
		fail(ErrorCode::EmptyMesh, "mesh has no faces");
	laplacian_smooth(mesh, params.smoothing_iterations, params.smoothing_step);

	if (params.crop) {
		const Vec3 center = params.crop_center ? *params.crop_center : crop_anchor(mesh, params.crop_anchor_fraction);
		double radius = 0.0;
		if (params.crop_radius) {
			radius = *params.crop_radius;
		} else {
			for (const auto& v : mesh.vertices)
				radius = std::max(radius, (v - center).norm());
			radius *= params.crop_radius_factor;
		}
		crop_sphere(mesh, center, radius);
		if (mesh.faces.empty())
			fail(ErrorCode::EmptyAfterCrop, "crop removed all faces");
	}

	const auto before = mesh.faces.size();
	std::erase_if(mesh.faces, [&](const Face& f) { return !(triangle_area(mesh, f) > 0.0); });
	if (mesh.faces.size() != before)
		remove_isolated_vertices(mesh);
	if (mesh.faces.empty())
		fail(ErrorCode::EmptyMesh, "no non-degenerate faces");

	fill_small_holes(mesh, params.max_hole_edges);
	orient_toward_viewer(mesh);
	for (int i = 0; i < params.median_passes; ++i)
		median_filter_z(mesh);
	return mesh;
}

// ---------------------------------------------------------------------------
// Curvature

namespace {

/// Unit vector orthogonal to n, picked from the coordinate axis least aligned with it.
Vec3 tangent_for(const Vec3& n)
{
	Vec3 axis = Vec3::UnitX();
	if (std::abs(n.y()) < std::abs(n.x()) && std::abs(n.y()) <= std::abs(n.z()))
		axis = Vec3::UnitY();
	else if (std::abs(n.z()) < std::abs(n.x()) && std::abs(n.z()) < std::abs(n.y()))
		axis = Vec3::UnitZ();
	return (axis - axis.dot(n) * n).normalized();
}

std::vector<std::uint32_t> fit_neighborhood(const TriMesh& mesh, const std::vector<std::vector<std::uint32_t>>& nbrs,
                                            std::uint32_t v, double radius, std::vector<int>& mark, int stamp)
{
	std::vector<std::uint32_t> out;
	mark[v] = stamp;
	for (auto a : nbrs[v]) {
		if (mark[a] != stamp) {
			mark[a] = stamp;
			out.push_back(a);
		}
	}
	const std::size_t ring1 = out.size();
	for (std::size_t i = 0; i < ring1; ++i) {
		for (auto b : nbrs[out[i]]) {
			if (mark[b] != stamp) {
				mark[b] = stamp;
				out.push_back(b);
			}
		}
	}
	const double r2 = radius * radius;
	for (std::size_t i = 0; i < out.size(); ++i) {
		for (auto c : nbrs[out[i]]) {
			if (mark[c] != stamp && (mesh.vertices[c] - mesh.vertices[v]).squaredNorm() <= r2) {
				mark[c] = stamp;
				out.push_back(c);
			}
		}
	}
	std::sort(out.begin(), out.end());
	return out;
}

} // namespace

TriMesh estimate_curvatures(const TriMesh& input, double ring_radius)
{
	if (input.faces.empty())
		fail(ErrorCode::EmptyMesh, "mesh has no faces");
	TriMesh mesh = input;
	mesh.normals = area_weighted_normals(mesh);
	mesh.k1.assign(mesh.vertices.size(), 0.0);
	mesh.k2.assign(mesh.vertices.size(), 0.0);

	const auto nbrs = vertex_neighbors(mesh);
	std::vector<int> mark(mesh.vertices.size(), -1);

	for (std::uint32_t v = 0; v < mesh.vertices.size(); ++v) {
		const Vec3& n = mesh.normals[v];
		if (n.squaredNorm() < 0.5)
			fail(ErrorCode::DegenerateNeighborhood, "vertex " + std::to_string(v) + " has no normal");
		const Vec3 u = tangent_for(n);
		const Vec3 w = n.cross(u);

		const auto hood = fit_neighborhood(mesh, nbrs, v, ring_radius, mark, static_cast<int>(v));
		const auto count = static_cast<Eigen::Index>(hood.size());
		if (count < 5)
			fail(ErrorCode::DegenerateNeighborhood,
			     "vertex " + std::to_string(v) + " has " + std::to_string(count) + " neighbours");
		const bool cubic = count >= 9;

		// Fit in coordinates scaled by the neighbourhood size for conditioning.
		double scale = 0.0;
		for (auto q : hood)
			scale = std::max(scale, (mesh.vertices[q] - mesh.vertices[v]).norm());
		Eigen::MatrixXd design(count, cubic ? 9 : 5);
		Eigen::VectorXd rhs(count);
		for (Eigen::Index i = 0; i < count; ++i) {
			const Vec3 d = (mesh.vertices[hood[static_cast<std::size_t>(i)]] - mesh.vertices[v]) / scale;
			const double x = d.dot(u), y = d.dot(w);
			rhs[i] = d.dot(n);
			design(i, 0) = x;
			design(i, 1) = y;
			design(i, 2) = 0.5 * x * x;
			design(i, 3) = x * y;
			design(i, 4) = 0.5 * y * y;
			if (cubic) {
				design(i, 5) = x * x * x;
				design(i, 6) = x * x * y;
				design(i, 7) = x * y * y;
				design(i, 8) = y * y * y;
			}
		}
		const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(rhs);

		const double fx = coef[0], fy = coef[1];
		const double fxx = coef[2] / scale, fxy = coef[3] / scale, fyy = coef[4] / scale;
		const double E = 1.0 + fx * fx, F = fx * fy, G = 1.0 + fy * fy;
		const double W = std::sqrt(1.0 + fx * fx + fy * fy);
		const double L = fxx / W, M = fxy / W, N = fyy / W;
		const double det_i = E * G - F * F;
		// the surface bends away from an outward normal: negate so convex is positive
		const double mean = -(E * N + G * L - 2.0 * F * M) / (2.0 * det_i);
		const double gauss = (L * N - M * M) / det_i;
		const double disc = std::sqrt(std::max(0.0, mean * mean - gauss));
		mesh.k1[v] = mean + disc;
		mesh.k2[v] = mean - disc;
	}
	return mesh;
}

TriMesh estimate_curvatures(const TriMesh& mesh, const CurvatureParams& params)
{
	return estimate_curvatures(mesh, params.ring_radius_factor * median_edge_length(mesh));
}

// ---------------------------------------------------------------------------
// Rasterization

namespace {

struct Raster
{
	int size = 0;
	std::vector<double> depth;
	std::vector<double> value;
	std::vector<bool> covered;
};

/// Orthographic z-buffer over the square bounding the mesh's xy extent.
/// `attribute` is interpolated barycentrically when given.
Raster rasterize(const TriMesh& mesh, int size, const std::vector<double>* attribute)
{
	if (mesh.faces.empty() || mesh.vertices.empty())
		fail(ErrorCode::EmptyMesh, "nothing to render");
	double minx = std::numeric_limits<double>::infinity(), maxx = -minx, miny = minx, maxy = -minx;
	for (const auto& f : mesh.faces) {
		for (auto v : f) {
			minx = std::min(minx, mesh.vertices[v].x());
			maxx = std::max(maxx, mesh.vertices[v].x());
			miny = std::min(miny, mesh.vertices[v].y());
			maxy = std::max(maxy, mesh.vertices[v].y());
		}
	}
	const double side = std::max(maxx - minx, maxy - miny);
	if (!(side > 0.0))
		fail(ErrorCode::EmptyMesh, "mesh has no xy extent");
	const double cx = 0.5 * (minx + maxx), cy = 0.5 * (miny + maxy);
	const double pixel = side / size;
	const double left = cx - 0.5 * side, top = cy + 0.5 * side;

	Raster r;
	r.size = size;
	const auto npx = static_cast<std::size_t>(size) * size;
	r.depth.assign(npx, -std::numeric_limits<double>::infinity());
	r.value.assign(npx, 0.0);
	r.covered.assign(npx, false);

	for (const auto& f : mesh.faces) {
		// screen coordinates in pixel units; pixel (i, j) has its center at (i + 0.5, j + 0.5)
		double sx[3], sy[3], sz[3];
		for (int k = 0; k < 3; ++k) {
			const Vec3& p = mesh.vertices[f[k]];
			sx[k] = (p.x() - left) / pixel;
			sy[k] = (top - p.y()) / pixel;
			sz[k] = p.z();
		}
		const double area = (sx[1] - sx[0]) * (sy[2] - sy[0]) - (sx[2] - sx[0]) * (sy[1] - sy[0]);
		if (area == 0.0)
			continue;
		const int x0 = std::max(0, static_cast<int>(std::floor(std::min({sx[0], sx[1], sx[2]}) - 0.5)));
		const int x1 = std::min(size - 1, static_cast<int>(std::ceil(std::max({sx[0], sx[1], sx[2]}) - 0.5)));
		const int y0 = std::max(0, static_cast<int>(std::floor(std::min({sy[0], sy[1], sy[2]}) - 0.5)));
		const int y1 = std::min(size - 1, static_cast<int>(std::ceil(std::max({sy[0], sy[1], sy[2]}) - 0.5)));
		const double eps = 1e-9 * std::abs(area);
		for (int j = y0; j <= y1; ++j) {
			const double py = j + 0.5;
			for (int i = x0; i <= x1; ++i) {
				const double px = i + 0.5;
				double b[3];
				for (int k = 0; k < 3; ++k) {
					const int a1 = (k + 1) % 3, a2 = (k + 2) % 3;
					b[k] = ((sx[a2] - sx[a1]) * (py - sy[a1]) - (sy[a2] - sy[a1]) * (px - sx[a1])) / area;
				}
				if (b[0] < -eps || b[1] < -eps || b[2] < -eps)
					continue;
				// anchored form reproduces constant fields exactly
				const double z = sz[0] + b[1] * (sz[1] - sz[0]) + b[2] * (sz[2] - sz[0]);
				const auto idx = static_cast<std::size_t>(j) * size + i;
				if (z > r.depth[idx]) {
					r.depth[idx] = z;
					r.covered[idx] = true;
					if (attribute)
					{
						const auto& at = *attribute;
						r.value[idx] = at[f[0]] + b[1] * (at[f[1]] - at[f[0]]) + b[2] * (at[f[2]] - at[f[0]]);
					}
				}
			}
		}
	}
	return r;
}

} // namespace

MapImage render_depth_map(const TriMesh& mesh, int size)
{
	const Raster r = rasterize(mesh, size, nullptr);
	MapImage img;
	img.width = img.height = size;
	img.kind = MapKind::Depth;
	img.foreground = r.covered;
	img.pixels.assign(r.depth.size(), 0.0f);
	double lo = std::numeric_limits<double>::infinity(), hi = -lo;
	for (std::size_t i = 0; i < r.depth.size(); ++i) {
		if (r.covered[i]) {
			lo = std::min(lo, r.depth[i]);
			hi = std::max(hi, r.depth[i]);
		}
	}
	for (std::size_t i = 0; i < r.depth.size(); ++i) {
		if (!r.covered[i])
			continue;
		img.pixels[i] = hi > lo ? static_cast<float>((r.depth[i] - lo) / (hi - lo)) : 1.0f;
	}
	return img;
}

MapImage render_curvature_map(const TriMesh& mesh, int size)
{
	if (!mesh.has_curvatures())
		fail(ErrorCode::CurvaturesMissing, "estimate curvatures before rendering a curvature map");
	const Raster r = rasterize(mesh, size, &mesh.k1);
	MapImage img;
	img.width = img.height = size;
	img.kind = MapKind::PrincipalCurvature;
	img.foreground = r.covered;
	img.pixels.assign(r.value.size(), 0.0f);
	double peak = 0.0;
	for (std::size_t i = 0; i < r.value.size(); ++i)
		if (r.covered[i])
			peak = std::max(peak, std::abs(r.value[i]));
	for (std::size_t i = 0; i < r.value.size(); ++i) {
		if (!r.covered[i])
			continue;
		img.pixels[i] = peak > 0.0 ? static_cast<float>(0.5 + 0.5 * r.value[i] / peak) : 0.5f;
	}
	return img;
}

FeatureTensor to_tensor(const MapImage& image)
{
	return FeatureTensor({1u, static_cast<std::uint32_t>(image.height), static_cast<std::uint32_t>(image.width)},
	                     image.pixels);
}

void write_pgm(const MapImage& image, const std::filesystem::path& path)
{
	std::ofstream out(path, std::ios::binary);
	if (!out)
		fail(ErrorCode::IoFailure, "cannot open " + path.string());
	out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
	for (float p : image.pixels) {
		const double v = std::clamp(static_cast<double>(p), 0.0, 1.0);
		out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
	}
	if (!out)
		fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

} // namespace covfer
