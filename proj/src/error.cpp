#include "covfer/error.hpp"

namespace covfer {

std::string_view to_string(ErrorCode code)
{
	switch (code) {
	case ErrorCode::BadMagic: return "BadMagic";
	case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
	case ErrorCode::DimMismatch: return "DimMismatch";
	case ErrorCode::NonFiniteValue: return "NonFiniteValue";
	case ErrorCode::IoFailure: return "IoFailure";
	case ErrorCode::ParseError: return "ParseError";
	case ErrorCode::NonTriangleFace: return "NonTriangleFace";
	case ErrorCode::DanglingIndex: return "DanglingIndex";
	case ErrorCode::DuplicateSampleId: return "DuplicateSampleId";
	case ErrorCode::UnknownLabel: return "UnknownLabel";
	case ErrorCode::MissingField: return "MissingField";
	case ErrorCode::EmptyAfterCrop: return "EmptyAfterCrop";
	case ErrorCode::DegenerateNeighborhood: return "DegenerateNeighborhood";
	case ErrorCode::EmptyMesh: return "EmptyMesh";
	case ErrorCode::CurvaturesMissing: return "CurvaturesMissing";
	case ErrorCode::TooFewVertices: return "TooFewVertices";
	case ErrorCode::PatchTooSmall: return "PatchTooSmall";
	case ErrorCode::RegionOutOfBounds: return "RegionOutOfBounds";
	case ErrorCode::RegionTooSmall: return "RegionTooSmall";
	case ErrorCode::NoConvergence: return "NoConvergence";
	case ErrorCode::AsymmetricInput: return "AsymmetricInput";
	case ErrorCode::ShapeMismatch: return "ShapeMismatch";
	case ErrorCode::NonPositiveEigenvalue: return "NonPositiveEigenvalue";
	case ErrorCode::BadShape: return "BadShape";
	case ErrorCode::TooFewDescriptors: return "TooFewDescriptors";
	case ErrorCode::InconsistentLength: return "InconsistentLength";
	case ErrorCode::EmptyInput: return "EmptyInput";
	case ErrorCode::LengthMismatch: return "LengthMismatch";
	case ErrorCode::MissingStream: return "MissingStream";
	case ErrorCode::SingleClass: return "SingleClass";
	case ErrorCode::DegenerateFeatures: return "DegenerateFeatures";
	case ErrorCode::TooFewSubjects: return "TooFewSubjects";
	case ErrorCode::MissingStreamArtifacts: return "MissingStreamArtifacts";
	case ErrorCode::InvalidConfig: return "InvalidConfig";
	}
	return "Unknown";
}

ErrorFamily family_of(ErrorCode code)
{
	switch (code) {
	case ErrorCode::IoFailure:
		return ErrorFamily::Io;
	case ErrorCode::BadMagic:
	case ErrorCode::UnsupportedVersion:
	case ErrorCode::DimMismatch:
	case ErrorCode::NonFiniteValue:
	case ErrorCode::ParseError:
	case ErrorCode::NonTriangleFace:
	case ErrorCode::DanglingIndex:
	case ErrorCode::DuplicateSampleId:
	case ErrorCode::UnknownLabel:
	case ErrorCode::MissingField:
		return ErrorFamily::Format;
	case ErrorCode::EmptyAfterCrop:
	case ErrorCode::DegenerateNeighborhood:
	case ErrorCode::EmptyMesh:
	case ErrorCode::CurvaturesMissing:
	case ErrorCode::TooFewVertices:
	case ErrorCode::PatchTooSmall:
		return ErrorFamily::Geometry;
	case ErrorCode::RegionOutOfBounds:
	case ErrorCode::RegionTooSmall:
	case ErrorCode::NoConvergence:
	case ErrorCode::AsymmetricInput:
	case ErrorCode::ShapeMismatch:
	case ErrorCode::NonPositiveEigenvalue:
	case ErrorCode::BadShape:
		return ErrorFamily::Numeric;
	case ErrorCode::TooFewDescriptors:
	case ErrorCode::InconsistentLength:
	case ErrorCode::EmptyInput:
	case ErrorCode::LengthMismatch:
	case ErrorCode::MissingStream:
	case ErrorCode::SingleClass:
	case ErrorCode::DegenerateFeatures:
	case ErrorCode::TooFewSubjects:
	case ErrorCode::MissingStreamArtifacts:
		return ErrorFamily::Data;
	case ErrorCode::InvalidConfig:
		return ErrorFamily::Config;
	}
	return ErrorFamily::Data;
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code)
{
}

void fail(ErrorCode code, const std::string& what)
{
	throw Error(code, what);
}

} // namespace covfer
