#include "covfer/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace covfer {

double TriMesh::curvedness(std::size_t v) const
{
	return std::sqrt(0.5 * (k1[v] * k1[v] + k2[v] * k2[v]));
}

std::vector<std::array<std::uint32_t, 2>> unique_edges(const TriMesh& mesh)
{
	std::vector<std::array<std::uint32_t, 2>> edges;
	edges.reserve(mesh.faces.size() * 3);
	for (const auto& f : mesh.faces) {
		for (int i = 0; i < 3; ++i) {
			auto a = f[i], b = f[(i + 1) % 3];
			edges.push_back({std::min(a, b), std::max(a, b)});
		}
	}
	std::sort(edges.begin(), edges.end());
	edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
	return edges;
}

std::vector<std::vector<std::uint32_t>> vertex_neighbors(const TriMesh& mesh)
{
	std::vector<std::vector<std::uint32_t>> nbrs(mesh.vertices.size());
	for (const auto& e : unique_edges(mesh)) {
		nbrs[e[0]].push_back(e[1]);
		nbrs[e[1]].push_back(e[0]);
	}
	for (auto& n : nbrs)
		std::sort(n.begin(), n.end());
	return nbrs;
}

double median_edge_length(const TriMesh& mesh)
{
	auto edges = unique_edges(mesh);
	if (edges.empty())
		return 0.0;
	std::vector<double> lengths;
	lengths.reserve(edges.size());
	for (const auto& e : edges)
		lengths.push_back((mesh.vertices[e[0]] - mesh.vertices[e[1]]).norm());
	auto mid = lengths.begin() + static_cast<std::ptrdiff_t>(lengths.size() / 2);
	std::nth_element(lengths.begin(), mid, lengths.end());
	return *mid;
}

double triangle_area(const TriMesh& mesh, const Face& f)
{
	const Vec3& a = mesh.vertices[f[0]];
	return 0.5 * (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a).norm();
}

std::vector<Vec3> area_weighted_normals(const TriMesh& mesh)
{
	std::vector<Vec3> normals(mesh.vertices.size(), Vec3::Zero());
	for (const auto& f : mesh.faces) {
		const Vec3& a = mesh.vertices[f[0]];
		// cross product length is twice the area, so this is area weighting
		Vec3 n = (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
		for (auto v : f)
			normals[v] += n;
	}
	for (auto& n : normals) {
		double len = n.norm();
		if (len > 0.0)
			n /= len;
	}
	return normals;
}

TriMesh make_icosphere(int subdivisions, double radius)
{
	const double t = (1.0 + std::sqrt(5.0)) / 2.0;
	TriMesh mesh;
	mesh.vertices = {
	    {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
	    {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
	    {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
	};
	for (auto& v : mesh.vertices)
		v.normalize();
	mesh.faces = {
	    {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
	    {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
	    {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
	    {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
	};

	for (int s = 0; s < subdivisions; ++s) {
		std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
		auto mid = [&](std::uint32_t a, std::uint32_t b) {
			auto key = std::make_pair(std::min(a, b), std::max(a, b));
			auto it = midpoint.find(key);
			if (it != midpoint.end())
				return it->second;
			Vec3 m = (mesh.vertices[a] + mesh.vertices[b]).normalized();
			auto idx = static_cast<std::uint32_t>(mesh.vertices.size());
			mesh.vertices.push_back(m);
			midpoint.emplace(key, idx);
			return idx;
		};
		std::vector<Face> faces;
		faces.reserve(mesh.faces.size() * 4);
		for (const auto& f : mesh.faces) {
			auto ab = mid(f[0], f[1]);
			auto bc = mid(f[1], f[2]);
			auto ca = mid(f[2], f[0]);
			faces.push_back({f[0], ab, ca});
			faces.push_back({f[1], bc, ab});
			faces.push_back({f[2], ca, bc});
			faces.push_back({ab, bc, ca});
		}
		mesh.faces = std::move(faces);
	}
	for (auto& v : mesh.vertices)
		v *= radius;
	return mesh;
}

TriMesh make_grid(int n, double extent)
{
	TriMesh mesh;
	const double step = extent / (n - 1);
	for (int j = 0; j < n; ++j)
		for (int i = 0; i < n; ++i)
			mesh.vertices.emplace_back(-0.5 * extent + i * step, -0.5 * extent + j * step, 0.0);
	auto id = [n](int i, int j) { return static_cast<std::uint32_t>(j * n + i); };
	for (int j = 0; j + 1 < n; ++j) {
		for (int i = 0; i + 1 < n; ++i) {
			mesh.faces.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
			mesh.faces.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
		}
	}
	return mesh;
}

TriMesh make_cylinder(double radius, double length, int segments, int rings)
{
	TriMesh mesh;
	for (int r = 0; r < rings; ++r) {
		double y = -0.5 * length + length * r / (rings - 1);
		for (int s = 0; s < segments; ++s) {
			double phi = 2.0 * std::numbers::pi * s / segments;
			mesh.vertices.emplace_back(radius * std::sin(phi), y, radius * std::cos(phi));
		}
	}
	auto id = [segments](int s, int r) { return static_cast<std::uint32_t>(r * segments + (s % segments)); };
	for (int r = 0; r + 1 < rings; ++r) {
		for (int s = 0; s < segments; ++s) {
			mesh.faces.push_back({id(s, r), id(s + 1, r), id(s + 1, r + 1)});
			mesh.faces.push_back({id(s, r), id(s + 1, r + 1), id(s, r + 1)});
		}
	}
	return mesh;
}

} // namespace covfer
