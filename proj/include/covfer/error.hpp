#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace covfer {

enum class ErrorCode {
	// tensorio
	BadMagic,
	UnsupportedVersion,
	DimMismatch,
	NonFiniteValue,
	IoFailure,
	ParseError,
	NonTriangleFace,
	DanglingIndex,
	DuplicateSampleId,
	UnknownLabel,
	MissingField,
	// meshgeom
	EmptyAfterCrop,
	DegenerateNeighborhood,
	EmptyMesh,
	CurvaturesMissing,
	// shallowfeat
	TooFewVertices,
	PatchTooSmall,
	// covpool
	RegionOutOfBounds,
	RegionTooSmall,
	// spdnet
	NoConvergence,
	AsymmetricInput,
	ShapeMismatch,
	NonPositiveEigenvalue,
	BadShape,
	// bof
	TooFewDescriptors,
	InconsistentLength,
	EmptyInput,
	LengthMismatch,
	MissingStream,
	// classify
	SingleClass,
	DegenerateFeatures,
	// pipeline
	TooFewSubjects,
	MissingStreamArtifacts,
	InvalidConfig,
};

std::string_view to_string(ErrorCode code);

/// Coarse grouping used for process exit codes.
enum class ErrorFamily { Io = 3, Format = 4, Geometry = 5, Numeric = 6, Data = 7, Config = 8 };

ErrorFamily family_of(ErrorCode code);

class Error : public std::runtime_error
{
public:
	Error(ErrorCode code, const std::string& what);

	ErrorCode code() const noexcept { return code_; }

private:
	ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

} // namespace covfer
