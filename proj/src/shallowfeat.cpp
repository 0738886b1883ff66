#include "covfer/shallowfeat.hpp"

#include "covfer/covpool.hpp"
#include "covfer/error.hpp"
#include "covfer/meshgeom.hpp"

#include <algorithm>
#include <limits>

namespace covfer {

double bounding_radius(const TriMesh& mesh)
{
	if (mesh.vertices.empty())
		fail(ErrorCode::EmptyMesh, "mesh has no vertices");
	Vec3 lo = mesh.vertices.front(), hi = lo;
	for (const auto& v : mesh.vertices) {
		lo = lo.cwiseMin(v);
		hi = hi.cwiseMax(v);
	}
	const Vec3 centre = 0.5 * (lo + hi);
	double r = 0.0;
	for (const auto& v : mesh.vertices)
		r = std::max(r, (v - centre).norm());
	return r;
}

std::vector<std::uint32_t> farthest_point_sampling(const TriMesh& mesh, int count, std::uint32_t first)
{
	const std::size_t n = mesh.vertex_count();
	if (count < 1 || static_cast<std::size_t>(count) > n)
		fail(ErrorCode::TooFewVertices,
		     "cannot sample " + std::to_string(count) + " points from " + std::to_string(n) + " vertices");
	std::vector<std::uint32_t> picked{first};
	std::vector<double> dist(n, std::numeric_limits<double>::infinity());
	while (picked.size() < static_cast<std::size_t>(count)) {
		const Vec3& last = mesh.vertices[picked.back()];
		std::uint32_t best = 0;
		double best_d = -1.0;
		for (std::size_t i = 0; i < n; ++i) {
			dist[i] = std::min(dist[i], (mesh.vertices[i] - last).squaredNorm());
			if (dist[i] > best_d) {
				best_d = dist[i];
				best = static_cast<std::uint32_t>(i);
			}
		}
		picked.push_back(best);
	}
	return picked;
}

std::vector<Patch> sample_patch_centers(const TriMesh& mesh, const PatchParams& params)
{
	if (params.count < 1)
		fail(ErrorCode::InvalidConfig, "patch count must be positive");
	if (mesh.vertex_count() < static_cast<std::size_t>(params.count))
		fail(ErrorCode::TooFewVertices, "mesh has " + std::to_string(mesh.vertex_count()) + " vertices, fewer than " +
		                                    std::to_string(params.count) + " patches");
	const Vec3 seed = params.seed_point ? *params.seed_point : crop_anchor(mesh);
	std::uint32_t first = 0;
	double nearest = std::numeric_limits<double>::infinity();
	for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
		const double d = (mesh.vertices[i] - seed).squaredNorm();
		if (d < nearest) {
			nearest = d;
			first = static_cast<std::uint32_t>(i);
		}
	}

	const double radius = params.radius_fraction * bounding_radius(mesh);
	const double r2 = radius * radius;
	std::vector<Patch> patches;
	for (auto id : farthest_point_sampling(mesh, params.count, first)) {
		Patch p{id, mesh.vertices[id], radius, {}};
		for (std::size_t i = 0; i < mesh.vertex_count(); ++i)
			if ((mesh.vertices[i] - p.center).squaredNorm() <= r2)
				p.point_ids.push_back(static_cast<std::uint32_t>(i));
		patches.push_back(std::move(p));
	}
	return patches;
}

FeatureRows point_features(const TriMesh& mesh, const std::vector<std::uint32_t>& ids)
{
	if (!mesh.has_curvatures())
		fail(ErrorCode::CurvaturesMissing, "shallow features need per-vertex curvatures");
	FeatureRows f(static_cast<Eigen::Index>(ids.size()), 6);
	for (std::size_t r = 0; r < ids.size(); ++r) {
		const auto id = ids[r];
		const Vec3& p = mesh.vertices[id];
		f.row(static_cast<Eigen::Index>(r)) << p.x(), p.y(), p.z(), mesh.curvedness(id), mesh.mean_curvature(id),
		    p.norm();
	}
	return f;
}

Matrix feature_covariance(const FeatureRows& features)
{
	const auto n = features.rows();
	if (n < 1)
		fail(ErrorCode::PatchTooSmall, "empty patch");
	// shifting by the first row keeps constant features exactly zero
	Matrix centred = features.rowwise() - features.row(0);
	const Eigen::RowVectorXd mean = centred.colwise().sum() / static_cast<double>(n);
	centred.rowwise() -= mean;
	Matrix cov = Matrix::Zero(6, 6);
	cov.selfadjointView<Eigen::Upper>().rankUpdate(centred.transpose(), 1.0 / static_cast<double>(n));
	cov.triangularView<Eigen::StrictlyLower>() = cov.transpose();
	return cov;
}

SpdMatrix patch_covariance(const TriMesh& mesh, const Patch& patch)
{
	if (patch.point_ids.size() < static_cast<std::size_t>(min_patch_points))
		fail(ErrorCode::PatchTooSmall, "patch around vertex " + std::to_string(patch.center_id) + " has " +
		                                   std::to_string(patch.point_ids.size()) + " points, need " +
		                                   std::to_string(min_patch_points));
	return add_ridge(feature_covariance(point_features(mesh, patch.point_ids)), shallow_ridge);
}

std::vector<SpdMatrix> shallow_descriptors(const TriMesh& mesh, const PatchParams& params)
{
	if (!mesh.has_curvatures())
		fail(ErrorCode::CurvaturesMissing, "shallow descriptors need per-vertex curvatures");
	std::vector<SpdMatrix> out;
	for (const auto& patch : sample_patch_centers(mesh, params))
		out.push_back(patch_covariance(mesh, patch));
	return out;
}

} // namespace covfer
