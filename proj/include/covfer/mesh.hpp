#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace covfer {

using Vec3 = Eigen::Vector3d;
using Face = std::array<std::uint32_t, 3>;

/// Indexed triangle mesh. Normals and principal curvatures are optional
/// per-vertex fields; when present they hold one value per vertex.
struct TriMesh
{
	std::vector<Vec3> vertices;
	std::vector<Face> faces;

	std::vector<Vec3> normals;
	std::vector<double> k1; ///< larger principal curvature
	std::vector<double> k2; ///< smaller principal curvature

	std::size_t vertex_count() const { return vertices.size(); }
	std::size_t face_count() const { return faces.size(); }

	bool has_normals() const { return !vertices.empty() && normals.size() == vertices.size(); }
	bool has_curvatures() const
	{
		return !vertices.empty() && k1.size() == vertices.size() && k2.size() == vertices.size();
	}

	double mean_curvature(std::size_t v) const { return 0.5 * (k1[v] + k2[v]); }
	double curvedness(std::size_t v) const;

	/// Drops derived per-vertex fields; call after any change to the geometry.
	void clear_derived()
	{
		normals.clear();
		k1.clear();
		k2.clear();
	}
};

/// Unordered vertex pairs of every edge, each listed once with first < second.
std::vector<std::array<std::uint32_t, 2>> unique_edges(const TriMesh& mesh);

/// Per-vertex 1-ring adjacency, sorted ascending.
std::vector<std::vector<std::uint32_t>> vertex_neighbors(const TriMesh& mesh);

double median_edge_length(const TriMesh& mesh);

/// Area-weighted vertex normals following the face winding (counter-clockwise is front).
std::vector<Vec3> area_weighted_normals(const TriMesh& mesh);

double triangle_area(const TriMesh& mesh, const Face& f);

// Procedural fixtures used by tests, the synthetic generator and examples.

/// Unit icosphere; `subdivisions` = 3 gives 642 vertices. Outward (CCW) winding.
TriMesh make_icosphere(int subdivisions, double radius = 1.0);

/// Regular grid in the z = 0 plane with n x n vertices spanning [-extent/2, extent/2]^2,
/// facing +z.
TriMesh make_grid(int n, double extent);

/// Open cylinder around the y axis, outward winding.
TriMesh make_cylinder(double radius, double length, int segments, int rings);

} // namespace covfer
