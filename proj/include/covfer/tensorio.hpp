#pragma once

#include "covfer/error.hpp"
#include "covfer/mesh.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace covfer {

/// Dense real tensor, row-major with the first extent outermost (channels, height, width
/// for feature maps).
struct FeatureTensor
{
	std::vector<std::uint32_t> dims;
	std::vector<float> data;

	FeatureTensor() = default;
	FeatureTensor(std::vector<std::uint32_t> dims_, std::vector<float> data_);
	/// Zero-filled tensor of the given shape.
	explicit FeatureTensor(std::vector<std::uint32_t> dims_);

	std::size_t element_count() const { return data.size(); }

	/// Index into a rank-3 tensor.
	float at(std::size_t c, std::size_t y, std::size_t x) const
	{
		return data[(c * dims[1] + y) * dims[2] + x];
	}
	float& at(std::size_t c, std::size_t y, std::size_t x)
	{
		return data[(c * dims[1] + y) * dims[2] + x];
	}

	bool operator==(const FeatureTensor&) const = default;
};

/// Throws DimMismatch or NonFiniteValue if the tensor invariants are violated.
void validate(const FeatureTensor& tensor);

FeatureTensor read_fmap(const std::filesystem::path& path);
void write_fmap(const FeatureTensor& tensor, const std::filesystem::path& path);

FeatureTensor decode_fmap(std::string_view bytes);
std::string encode_fmap(const FeatureTensor& tensor);

/// Reads Wavefront OBJ or ascii PLY, chosen by extension (.obj / .ply).
TriMesh read_mesh(const std::filesystem::path& path);
TriMesh parse_obj(std::istream& in);
TriMesh parse_ply(std::istream& in);
void write_obj(const TriMesh& mesh, const std::filesystem::path& path);

enum class Expression { HA, SA, DI, SU, FE, AN, NE };

inline constexpr std::array<Expression, 7> all_expressions = {
    Expression::HA, Expression::SA, Expression::DI, Expression::SU,
    Expression::FE, Expression::AN, Expression::NE};

std::string_view to_string(Expression e);
std::optional<Expression> parse_expression(std::string_view s);

struct ManifestEntry
{
	std::string sample_id;
	std::string subject_id;
	Expression label = Expression::NE;
	std::optional<std::filesystem::path> mesh_path;
	/// stream name -> tensor path, in file order
	std::vector<std::pair<std::string, std::filesystem::path>> tensor_paths;

	const std::filesystem::path* tensor_path(std::string_view stream) const;
};

struct DatasetManifest
{
	std::vector<ManifestEntry> entries;
	/// Relative artifact paths are resolved against this directory.
	std::filesystem::path base_dir;

	std::filesystem::path resolve(const std::filesystem::path& p) const;
};

struct ManifestLineError
{
	std::size_t line = 0;
	ErrorCode code;
	std::string message;
};

/// Lenient parse: every non-comment line yields an entry or a line error.
struct ManifestParse
{
	DatasetManifest manifest;
	std::vector<ManifestLineError> errors;
};

ManifestParse parse_manifest(std::istream& in);

/// Strict parse; throws the first line error.
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

} // namespace covfer
