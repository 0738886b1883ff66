#pragma once

#include "covfer/spd.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace covfer {

/// Upper triangle (diagonal included) row by row, off-diagonal entries scaled
/// by sqrt(2), so the Euclidean norm equals the Frobenius norm.
Vector flatten(const SymMatrix& m);
SymMatrix unflatten(const Vector& v);

inline constexpr Eigen::Index flat_length(Eigen::Index d) { return d * (d + 1) / 2; }

inline constexpr std::array<int, 7> codebook_sizes{16, 32, 64, 128, 256, 512, 1024};
bool is_codebook_size(int k);

enum class CodebookKind { Deep, Shallow };

struct KMeansOptions
{
	int max_iterations = 300;
	/// Independent k-means++ initialisations; the lowest final objective wins.
	int restarts = 10;
};

struct Codebook
{
	Matrix centroids; ///< k x length, one centroid per row
	CodebookKind kind = CodebookKind::Deep;
	std::string stream;
	std::uint64_t seed = 0;

	/// Objective after every assignment step of the winning run; front() is the
	/// k-means++ initialisation.
	std::vector<double> objective_trace;
	int iterations = 0;

	int size() const { return static_cast<int>(centroids.rows()); }
	Eigen::Index length() const { return centroids.cols(); }
	double objective() const { return objective_trace.back(); }
};

/// k-means++ seeding and Lloyd iterations until the assignment stops changing.
/// Throws TooFewDescriptors when fewer than k distinct descriptors exist and
/// InconsistentLength when descriptor lengths differ.
Codebook train_codebook(std::span<const Vector> descriptors, int k, std::uint64_t seed, const KMeansOptions& options = {});

/// Index of the nearest centroid, ties to the lowest index.
int nearest_centroid(const Codebook& codebook, const Vector& descriptor);

/// Sum of squared distances to the nearest centroid.
double kmeans_objective(const Codebook& codebook, std::span<const Vector> descriptors);

/// L1-normalised hard-assignment histogram.
Vector quantize(std::span<const Vector> descriptors, const Codebook& codebook);

struct StreamHistogram
{
	std::string stream;
	Vector bins;
};

/// Concatenates the histograms in `layout` order. Throws MissingStream if a
/// layout entry has no histogram or a histogram is not in the layout.
Vector fuse(std::span<const StreamHistogram> histograms, std::span<const std::string> layout);

/// Centroids as FMAP [k, length] plus a `<prefix>.txt` sidecar.
void save_codebook(const Codebook& codebook, const std::filesystem::path& prefix);
Codebook load_codebook(const std::filesystem::path& prefix);

} // namespace covfer
