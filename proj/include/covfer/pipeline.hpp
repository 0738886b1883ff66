#pragma once

#include "covfer/bof.hpp"
#include "covfer/classify.hpp"
#include "covfer/covpool.hpp"
#include "covfer/meshgeom.hpp"
#include "covfer/shallowfeat.hpp"
#include "covfer/spd.hpp"
#include "covfer/tensorio.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace covfer {

inline constexpr std::string_view shallow_stream = "shallow";

struct RunConfig
{
	/// Fused in this order. "shallow" is the mesh stream; every other name is a
	/// deep stream read from the manifest's tensor paths.
	std::vector<std::string> streams{"vgg.depth", "alexnet.depth", "shallow"};
	int codebook_size = 512;
	RegionSpec regions;
	/// Deep schedule; when empty, vgg.* streams use 512,250,100,50 and
	/// alexnet.* streams 256,150,100,50.
	std::vector<Eigen::Index> spd_dims;
	double spd_epsilon = 1e-4;
	std::uint64_t spd_seed = 1;
	std::uint64_t kmeans_seed = 7;
	int kmeans_restarts = 10;
	std::uint64_t fold_seed = 42;
	int fold_count = 10;
	double svm_c = 1.0;
	/// Pick C per fold from {0.1, 1, 10} by inner subject-disjoint folds.
	bool svm_grid = false;
	PreprocessParams preprocess;
	CurvatureParams curvature;
	PatchParams patches;

	void validate() const;
	/// Schedule used for `stream`; throws InvalidConfig if none applies.
	SpdChainConfig schedule_for(const std::string& stream) const;

	/// `key<TAB>value` file; unknown keys are rejected.
	static RunConfig read(const std::filesystem::path& path);
	void write(const std::filesystem::path& path) const;
};

bool is_deep_stream(const std::string& stream);

/// Channel count a stream's tensors must have, if the stream name fixes it.
std::optional<std::uint32_t> expected_channels(const std::string& stream);

/// Descriptors of one sample in one stream, flattened log-matrices.
using DescriptorSet = std::vector<Vector>;

/// Mesh -> preprocess -> centre -> curvatures.
TriMesh prepare_mesh(const TriMesh& raw, const RunConfig& config);

/// 40 shallow covariances of a raw mesh, after prepare_mesh.
std::vector<SpdMatrix> extract_shallow(const TriMesh& raw, const RunConfig& config);

/// Pooled region covariances of a tensor, checked against the stream's channel count.
std::vector<SpdMatrix> pool_stream(const FeatureTensor& tensor, const std::string& stream, const RunConfig& config);

/// spd_reduce for deep descriptors, logeig(reeig(.)) for 6x6 shallow ones, then flatten.
DescriptorSet reduce_descriptors(std::span<const SpdMatrix> matrices, const SpdChain& chain);

/// Every sample's descriptors for every configured stream.
struct FeatureSet
{
	std::vector<std::string> streams;
	std::vector<std::string> sample_ids;
	std::vector<std::string> subjects;
	std::vector<Expression> labels;
	/// [stream][sample]
	std::vector<std::vector<DescriptorSet>> descriptors;
};

/// Throws MissingStreamArtifacts when an entry lacks a configured stream.
FeatureSet extract_features(const DatasetManifest& manifest, const RunConfig& config);

/// Subjects shuffled with `seed` and dealt round-robin into `folds` groups.
/// Throws TooFewSubjects when there are fewer subjects than folds.
std::vector<std::vector<std::string>> subject_folds(std::vector<std::string> subjects, int folds, std::uint64_t seed);

struct FoldReport
{
	int fold = 0;
	std::vector<Expression> classes;
	/// rows = true class, cols = predicted, in class order
	std::vector<std::vector<int>> confusion;
	std::vector<std::string> test_subjects;

	int total() const;
	double accuracy() const;
	/// Per-class recall; NaN for a class absent from the test fold.
	std::vector<double> class_rates() const;
};

FoldReport make_fold_report(int fold, const std::vector<Expression>& classes, std::span<const Expression> truth,
                            std::span<const Expression> predicted);

struct CvResult
{
	std::vector<Expression> classes;
	std::vector<FoldReport> folds;

	/// Mean of the per-fold accuracies.
	double mean_accuracy() const;
	/// Confusion summed over folds.
	std::vector<std::vector<int>> pooled_confusion() const;
};

/// Subject-disjoint k-fold cross-validation; codebooks and the classifier are
/// trained on each fold's training subjects only.
CvResult run_cv(const FeatureSet& features, const RunConfig& config);
CvResult run_cv(const DatasetManifest& manifest, const RunConfig& config);

/// Per-stream codebooks plus the classifier over their fused histograms.
struct TrainedModel
{
	std::vector<Codebook> codebooks;
	LinearModel classifier;
};

/// Codebooks and classifier fitted on the listed samples only.
TrainedModel train_model(const FeatureSet& features, const RunConfig& config, std::span<const std::size_t> samples,
                         std::uint64_t svm_seed = 0);
/// Fused histogram of one sample under the model's codebooks.
Vector encode_sample(const TrainedModel& model, const FeatureSet& features, std::size_t sample);
Expression predict_sample(const TrainedModel& model, const FeatureSet& features, std::size_t sample);

/// `codebook.<stream>` and `classifier` file pairs under `dir`.
void save_trained(const TrainedModel& model, const std::filesystem::path& dir);
TrainedModel load_trained(const std::filesystem::path& dir);

struct SweepRow
{
	int codebook_size = 0;
	double mean_accuracy = 0.0;
};

/// One run_cv per size with everything else fixed.
std::vector<SweepRow> sweep_codebooks(const FeatureSet& features, const RunConfig& config, std::span<const int> sizes);
void write_sweep(std::span<const SweepRow> rows, const std::filesystem::path& path);

/// Human-readable report: per-expression rates, pooled confusion, accuracy.
void print_report(const CvResult& result, std::ostream& out);
/// Machine-readable summary; floating values printed with 17 significant digits.
void write_summary(const CvResult& result, const std::filesystem::path& path);
CvResult read_summary(const std::filesystem::path& path);

struct SyntheticOptions
{
	std::uint64_t seed = 42;
	int subjects = 30;
	int classes = 6;
	int mesh_subdivisions = 5;
	std::uint32_t channels = 32;
	std::uint32_t map_size = 14;
};

/// Stream name used for the generated tensors.
inline constexpr std::string_view synthetic_stream = "synthetic-deep";

/// Writes meshes/, tensors/ and manifest.tsv under `dir` and returns the manifest.
DatasetManifest generate_synthetic(const std::filesystem::path& dir, const SyntheticOptions& options = {});

/// Configuration matching the synthetic fixture.
RunConfig synthetic_config(const SyntheticOptions& options = {});

} // namespace covfer
