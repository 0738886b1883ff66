#pragma once

#include "covfer/mesh.hpp"
#include "covfer/tensorio.hpp"

#include <filesystem>
#include <optional>
#include <vector>

namespace covfer {

struct PreprocessParams
{
	/// Uniform Laplacian iterations; boundary vertices stay fixed.
	int smoothing_iterations = 5;
	/// Step towards the neighbour average, in (0, 1].
	double smoothing_step = 1.0;
	bool crop = true;
	/// Share of highest-z vertices whose centroid anchors the crop sphere.
	double crop_anchor_fraction = 0.10;
	/// Crop radius relative to the farthest vertex from the anchor.
	double crop_radius_factor = 0.95;
	/// Explicit crop sphere, overriding the anchor rule.
	std::optional<Vec3> crop_center;
	std::optional<double> crop_radius;
	/// Boundary loops with at most this many edges are filled; 0 disables.
	int max_hole_edges = 12;
	/// Passes of the 1-ring median filter on z.
	int median_passes = 1;

	/// Configuration under which preprocess leaves a clean mesh untouched.
	static PreprocessParams identity()
	{
		PreprocessParams p;
		p.smoothing_iterations = 0;
		p.crop = false;
		p.median_passes = 0;
		return p;
	}
};

/// Centroid of the `fraction` of vertices with the largest z (nose-tip proxy).
Vec3 crop_anchor(const TriMesh& mesh, double fraction = 0.10);

/// Smoothing, sphere crop, degenerate-face removal, hole filling, orientation
/// toward +z and median filtering, in that order.
/// Throws EmptyAfterCrop if nothing survives the crop.
TriMesh preprocess(const TriMesh& mesh, const PreprocessParams& params = {});

void laplacian_smooth(TriMesh& mesh, int iterations, double step);
/// Drops faces with no vertex inside the sphere, then unreferenced vertices.
void crop_sphere(TriMesh& mesh, const Vec3& center, double radius);
/// Removes vertices no face references and reindexes faces.
void remove_isolated_vertices(TriMesh& mesh);
/// Fan-triangulates boundary loops of at most `max_edges` edges. Returns the
/// number of loops filled.
int fill_small_holes(TriMesh& mesh, int max_edges);
void median_filter_z(TriMesh& mesh);
/// Flips every face when the mesh as a whole faces away from +z. Returns
/// whether it flipped.
bool orient_toward_viewer(TriMesh& mesh);

/// Closed boundary loops as vertex cycles, following the reverse of the
/// adjacent faces' winding.
std::vector<std::vector<std::uint32_t>> boundary_loops(const TriMesh& mesh);

/// Vertices lying on a boundary edge.
std::vector<bool> boundary_vertices(const TriMesh& mesh);

struct CurvatureParams
{
	/// Neighbourhood radius as a multiple of the median edge length.
	double ring_radius_factor = 2.5;
};

/**
 * Principal curvatures by a local cubic height-field fit.
 *
 * Each vertex gets a tangent frame from its area-weighted normal. The
 * neighbourhood is the two-ring plus every vertex reachable through edges that
 * stays within `ring_radius` of the vertex. A cubic
 *   z = a x^2 + b xy + c y^2 + d x^3 + e x^2 y + f x y^2 + g y^3 + h x + i y
 * is fitted in least squares (a quadratic with linear terms when fewer than 9
 * neighbours are available). Curvatures are the eigenvalues of the Weingarten
 * map at the origin, with the sign chosen so a sphere seen from outside has
 * positive curvature. Throws DegenerateNeighborhood below 5 neighbours.
 */
TriMesh estimate_curvatures(const TriMesh& mesh, double ring_radius);
TriMesh estimate_curvatures(const TriMesh& mesh, const CurvatureParams& params = {});

enum class MapKind { Depth, PrincipalCurvature };

inline constexpr int map_size = 224;

struct MapImage
{
	int width = map_size;
	int height = map_size;
	MapKind kind = MapKind::Depth;
	std::vector<float> pixels; ///< row-major, row 0 at the top (largest y)
	std::vector<bool> foreground;

	float at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// Orthographic z-buffer depth map along +z, min-max scaled over the foreground.
MapImage render_depth_map(const TriMesh& mesh, int size = map_size);

/// Front-most surface k1 per pixel, mapped affinely by 0.5 + 0.5 k1 / max|k1|.
MapImage render_curvature_map(const TriMesh& mesh, int size = map_size);

/// FMAP tensor with dims [1, height, width].
FeatureTensor to_tensor(const MapImage& image);

/// 8-bit binary PGM for inspection.
void write_pgm(const MapImage& image, const std::filesystem::path& path);

} // namespace covfer
