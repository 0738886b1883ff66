#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace covfer {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/**
 * A real symmetric matrix whose symmetry has been checked on construction.
 *
 * Construction accepts inputs that are symmetric up to a relative Frobenius
 * error of `tolerance` and stores the exactly symmetric part (A + A^T) / 2.
 * Positive-definiteness is not part of the type; operations that require it
 * (logeig, affine_distance) check it and report NonPositiveEigenvalue.
 */
class SymMatrix
{
public:
	SymMatrix() = default;

	static SymMatrix from(const Matrix& m, double tolerance = 1e-10);
	static SymMatrix identity(Eigen::Index d);
	static SymMatrix zero(Eigen::Index d);
	static SymMatrix diagonal(const Vector& diag);

	Eigen::Index dim() const { return m_.rows(); }
	const Matrix& matrix() const { return m_; }
	double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

private:
	explicit SymMatrix(Matrix m) : m_(std::move(m)) {}

	Matrix m_;
};

/// Covariance-type matrices; same representation as SymMatrix.
using SpdMatrix = SymMatrix;

/// Eigenvalues in descending order, eigenvectors in matching columns. Each
/// eigenvector's largest-magnitude entry is non-negative.
struct EigenPair
{
	Vector values;
	Matrix vectors;
};

struct SymEigOptions
{
	/// Converged when max |off-diagonal| <= tolerance * ||A||_F.
	double tolerance = 1e-12;
	int max_sweeps = 100;
};

/// Cyclic Jacobi eigendecomposition. Deterministic: identical input bits give
/// identical output bits. Throws NoConvergence after `max_sweeps`.
EigenPair sym_eig(const SymMatrix& x, const SymEigOptions& options = {});

/// U f(Sigma) U^T for an existing decomposition.
SymMatrix reconstruct(const EigenPair& eig, const Vector& values);

/// One BiMap layer: a d_out x d_in matrix with orthonormal rows.
struct BiMapLayer
{
	Matrix weights;

	Eigen::Index out_dim() const { return weights.rows(); }
	Eigen::Index in_dim() const { return weights.cols(); }
};

/// W X W^T.
SymMatrix bimap(const SymMatrix& x, const BiMapLayer& layer);

/// U max(epsilon, Sigma) U^T. Returns the input unchanged when every eigenvalue
/// already clears the floor.
SymMatrix reeig(const SymMatrix& x, double epsilon);

/// U log(Sigma) U^T; requires all eigenvalues > 0.
SymMatrix logeig(const SymMatrix& x);

/// Affine-invariant geodesic distance ||log(A^-1/2 B A^-1/2)||_F.
double affine_distance(const SymMatrix& a, const SymMatrix& b);

/// Row-orthonormal d_out x d_in matrix from the QR factorization of a seeded
/// Gaussian matrix.
BiMapLayer init_stiefel(Eigen::Index d_out, Eigen::Index d_in, std::uint64_t seed);

struct SpdChainConfig
{
	/// Dimension schedule, strictly decreasing; a single entry means no BiMap stage.
	std::vector<Eigen::Index> dims;
	/// ReEig floor.
	double epsilon = 1e-4;

	void validate() const;
};

/// VGG-style schedule 512 -> 250 -> 100 -> 50.
SpdChainConfig vgg_schedule(double epsilon = 1e-4);
/// AlexNet-style schedule 256 -> 150 -> 100 -> 50.
SpdChainConfig alexnet_schedule(double epsilon = 1e-4);

/// A frozen chain of BiMap weights for one schedule.
struct SpdChain
{
	SpdChainConfig config;
	std::vector<BiMapLayer> layers;
	std::uint64_t seed = 0;

	/// Layer k is drawn with seed `seed + k`.
	static SpdChain init(const SpdChainConfig& config, std::uint64_t seed);
};

/// bimap -> reeig per stage, then logeig once. With a single-entry schedule the
/// result is logeig(reeig(x)).
SymMatrix spd_reduce(const SymMatrix& x, const SpdChainConfig& config, std::span<const BiMapLayer> layers);
SymMatrix spd_reduce(const SymMatrix& x, const SpdChain& chain);

struct FeatureTensor;

/// n symmetric d x d matrices as a [n, d, d] tensor (f32), and back.
FeatureTensor stack_matrices(std::span<const SymMatrix> matrices);
std::vector<SymMatrix> unstack_matrices(const FeatureTensor& tensor);

/// Weights as FMAP tensors `<prefix>.layer<k>.fmap` plus a `<prefix>.txt` sidecar.
void save_chain(const SpdChain& chain, const std::filesystem::path& prefix);
SpdChain load_chain(const std::filesystem::path& prefix);

} // namespace covfer
