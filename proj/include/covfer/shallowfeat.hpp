#pragma once

#include "covfer/mesh.hpp"
#include "covfer/spd.hpp"

#include <optional>
#include <vector>

namespace covfer {

struct Patch
{
	std::uint32_t center_id = 0;
	Vec3 center = Vec3::Zero();
	double radius = 0.0;
	std::vector<std::uint32_t> point_ids;
};

/// Per-point feature rows [x, y, z, C, M, D], D the distance from the origin.
using FeatureRows = Eigen::Matrix<double, Eigen::Dynamic, 6>;

struct PatchParams
{
	int count = 40;
	/// Patch radius as a fraction of the bounding-sphere radius.
	double radius_fraction = 0.15;
	/// Point whose nearest vertex seeds the sampling; defaults to crop_anchor().
	std::optional<Vec3> seed_point;
};

inline constexpr int min_patch_points = 12;
inline constexpr double shallow_ridge = 1e-6;

/// Largest distance from the bounding-box centre to a vertex.
double bounding_radius(const TriMesh& mesh);

/// Greedy farthest-point sampling by Euclidean distance starting at `first`.
/// Ties go to the lowest vertex index.
std::vector<std::uint32_t> farthest_point_sampling(const TriMesh& mesh, int count, std::uint32_t first);

/// `count` patches centred by farthest-point sampling, each holding every
/// vertex within radius_fraction * R of its centre.
/// Throws TooFewVertices when the mesh has fewer than `count` vertices.
std::vector<Patch> sample_patch_centers(const TriMesh& mesh, const PatchParams& params = {});

FeatureRows point_features(const TriMesh& mesh, const std::vector<std::uint32_t>& ids);

/// (1/n) sum (F_j - mu)(F_j - mu)^T, no ridge.
Matrix feature_covariance(const FeatureRows& features);

/// Ridged 6x6 covariance of a patch. Throws PatchTooSmall below 12 points.
SpdMatrix patch_covariance(const TriMesh& mesh, const Patch& patch);

/// One covariance per patch, in sampling order. The mesh must carry curvatures.
std::vector<SpdMatrix> shallow_descriptors(const TriMesh& mesh, const PatchParams& params = {});

} // namespace covfer
