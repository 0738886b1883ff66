#include "covfer/spd.hpp"

#include "covfer/error.hpp"
#include "covfer/keyvalue.hpp"
#include "covfer/tensorio.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace covfer {

SymMatrix SymMatrix::from(const Matrix& m, double tolerance)
{
	if (m.rows() != m.cols())
		fail(ErrorCode::AsymmetricInput, "matrix is " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
	if (!m.allFinite())
		fail(ErrorCode::NonFiniteValue, "matrix has non-finite entries");
	const double norm = m.norm();
	const double skew = (m - m.transpose()).norm();
	if (skew > tolerance * norm)
		fail(ErrorCode::AsymmetricInput, "relative asymmetry " + std::to_string(skew / norm));
	Matrix sym = m;
	for (Eigen::Index j = 0; j < m.cols(); ++j)
		for (Eigen::Index i = 0; i < j; ++i)
			sym(i, j) = sym(j, i) = 0.5 * (m(i, j) + m(j, i));
	return SymMatrix(std::move(sym));
}

SymMatrix SymMatrix::identity(Eigen::Index d)
{
	return SymMatrix(Matrix::Identity(d, d));
}

SymMatrix SymMatrix::zero(Eigen::Index d)
{
	return SymMatrix(Matrix::Zero(d, d));
}

SymMatrix SymMatrix::diagonal(const Vector& diag)
{
	return SymMatrix(Matrix(diag.asDiagonal()));
}

EigenPair sym_eig(const SymMatrix& x, const SymEigOptions& options)
{
	const Eigen::Index n = x.dim();
	Matrix a = x.matrix();
	Matrix v = Matrix::Identity(n, n);
	const double threshold = options.tolerance * a.norm();

	auto max_off = [&]() {
		double m = 0.0;
		for (Eigen::Index j = 1; j < n; ++j)
			for (Eigen::Index i = 0; i < j; ++i)
				m = std::max(m, std::abs(a(i, j)));
		return m;
	};

	struct Rotation
	{
		Eigen::Index p, q;
		double c, s;
	};

	// Round-robin ordering: each sweep is n-1 rounds of disjoint (p, q) pairs,
	// covering every pair once. Rotations within a round commute, so a round is
	// applied as one column pass and one row pass, both walking contiguous
	// column storage.
	const Eigen::Index players = n + (n & 1);
	std::vector<Eigen::Index> seat(static_cast<std::size_t>(players));
	std::iota(seat.begin(), seat.end(), Eigen::Index{0});
	std::vector<Rotation> round;
	round.reserve(static_cast<std::size_t>(players / 2));

	bool converged = max_off() <= threshold;
	for (int sweep = 0; sweep < options.max_sweeps && !converged; ++sweep) {
		for (Eigen::Index r = 0; r + 1 < players; ++r) {
			round.clear();
			for (Eigen::Index i = 0; i < players / 2; ++i) {
				Eigen::Index p = seat[static_cast<std::size_t>(i)];
				Eigen::Index q = seat[static_cast<std::size_t>(players - 1 - i)];
				if (p > q)
					std::swap(p, q);
				if (q >= n)
					continue;
				const double apq = a(p, q);
				// entries this small cannot affect convergence
				if (std::abs(apq) <= 1e-3 * threshold)
					continue;
				const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
				double t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
				if (theta < 0.0)
					t = -t;
				const double c = 1.0 / std::sqrt(t * t + 1.0);
				round.push_back({p, q, c, t * c});
			}
			std::rotate(seat.begin() + 1, seat.end() - 1, seat.end());

			for (const auto& rot : round) {
				double* cp = a.col(rot.p).data();
				double* cq = a.col(rot.q).data();
				for (Eigen::Index k = 0; k < n; ++k) {
					const double akp = cp[k];
					const double akq = cq[k];
					cp[k] = rot.c * akp - rot.s * akq;
					cq[k] = rot.s * akp + rot.c * akq;
				}
			}
			for (Eigen::Index j = 0; j < n; ++j) {
				double* col = a.col(j).data();
				for (const auto& rot : round) {
					const double apj = col[rot.p];
					const double aqj = col[rot.q];
					col[rot.p] = rot.c * apj - rot.s * aqj;
					col[rot.q] = rot.s * apj + rot.c * aqj;
				}
			}
			for (const auto& rot : round) {
				a(rot.p, rot.q) = 0.0;
				a(rot.q, rot.p) = 0.0;
				double* vp = v.col(rot.p).data();
				double* vq = v.col(rot.q).data();
				for (Eigen::Index k = 0; k < n; ++k) {
					const double vkp = vp[k];
					const double vkq = vq[k];
					vp[k] = rot.c * vkp - rot.s * vkq;
					vq[k] = rot.s * vkp + rot.c * vkq;
				}
			}
		}
		// the two passes round differently on either side of the diagonal
		Matrix at = a.transpose();
		a = 0.5 * (a + at);
		converged = max_off() <= threshold;
	}
	if (!converged)
		fail(ErrorCode::NoConvergence, "Jacobi did not converge in " + std::to_string(options.max_sweeps) + " sweeps");

	std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
	std::iota(order.begin(), order.end(), Eigen::Index{0});
	std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });

	EigenPair out;
	out.values.resize(n);
	out.vectors.resize(n, n);
	for (Eigen::Index k = 0; k < n; ++k) {
		const Eigen::Index src = order[static_cast<std::size_t>(k)];
		out.values[k] = a(src, src);
		Eigen::Index arg = 0;
		double best = -1.0;
		for (Eigen::Index i = 0; i < n; ++i) {
			if (std::abs(v(i, src)) > best) {
				best = std::abs(v(i, src));
				arg = i;
			}
		}
		const double sign = v(arg, src) < 0.0 ? -1.0 : 1.0;
		out.vectors.col(k) = sign * v.col(src);
	}
	return out;
}

SymMatrix reconstruct(const EigenPair& eig, const Vector& values)
{
	Matrix scaled = eig.vectors * values.asDiagonal();
	Matrix m = scaled * eig.vectors.transpose();
	return SymMatrix::from(m, 1e-6);
}

SymMatrix bimap(const SymMatrix& x, const BiMapLayer& layer)
{
	if (layer.in_dim() != x.dim() || layer.out_dim() > layer.in_dim())
		fail(ErrorCode::ShapeMismatch, "BiMap weights " + std::to_string(layer.out_dim()) + "x" +
		                                   std::to_string(layer.in_dim()) + " applied to " +
		                                   std::to_string(x.dim()) + "x" + std::to_string(x.dim()) + " input");
	Matrix wx = layer.weights * x.matrix();
	Matrix out = wx * layer.weights.transpose();
	return SymMatrix::from(out, 1e-8);
}

SymMatrix reeig(const SymMatrix& x, double epsilon)
{
	if (!(epsilon > 0.0))
		fail(ErrorCode::InvalidConfig, "ReEig floor must be positive");
	auto eig = sym_eig(x);
	if (eig.values.minCoeff() >= epsilon)
		return x;
	return reconstruct(eig, eig.values.cwiseMax(epsilon));
}

SymMatrix logeig(const SymMatrix& x)
{
	auto eig = sym_eig(x);
	const double lo = eig.values.minCoeff();
	if (!(lo > 0.0))
		fail(ErrorCode::NonPositiveEigenvalue, "smallest eigenvalue " + std::to_string(lo));
	return reconstruct(eig, eig.values.array().log().matrix());
}

double affine_distance(const SymMatrix& a, const SymMatrix& b)
{
	if (a.dim() != b.dim())
		fail(ErrorCode::DimMismatch, "affine distance between " + std::to_string(a.dim()) + " and " +
		                                 std::to_string(b.dim()) + " dimensional matrices");
	auto ea = sym_eig(a);
	if (!(ea.values.minCoeff() > 0.0))
		fail(ErrorCode::NonPositiveEigenvalue, "first argument is not positive definite");
	Matrix inv_sqrt = ea.vectors * ea.values.cwiseSqrt().cwiseInverse().asDiagonal() * ea.vectors.transpose();
	Matrix whitened = inv_sqrt * b.matrix() * inv_sqrt;
	auto ew = sym_eig(SymMatrix::from(whitened, 1e-6));
	if (!(ew.values.minCoeff() > 0.0))
		fail(ErrorCode::NonPositiveEigenvalue, "second argument is not positive definite");
	return std::sqrt(ew.values.array().log().square().sum());
}

BiMapLayer init_stiefel(Eigen::Index d_out, Eigen::Index d_in, std::uint64_t seed)
{
	if (d_out < 1 || d_out > d_in)
		fail(ErrorCode::BadShape, "Stiefel shape " + std::to_string(d_out) + "x" + std::to_string(d_in));
	std::mt19937_64 rng(seed);
	std::normal_distribution<double> normal;
	Matrix g(d_in, d_out);
	for (Eigen::Index j = 0; j < d_out; ++j)
		for (Eigen::Index i = 0; i < d_in; ++i)
			g(i, j) = normal(rng);
	Eigen::HouseholderQR<Matrix> qr(g);
	Matrix q = qr.householderQ() * Matrix::Identity(d_in, d_out);
	// fix column signs so that R has a positive diagonal: makes Q unique
	const Matrix& r = qr.matrixQR();
	for (Eigen::Index j = 0; j < d_out; ++j)
		if (r(j, j) < 0.0)
			q.col(j) = -q.col(j);
	return BiMapLayer{q.transpose()};
}

void SpdChainConfig::validate() const
{
	if (dims.empty())
		fail(ErrorCode::InvalidConfig, "empty SPD dimension schedule");
	for (std::size_t i = 0; i < dims.size(); ++i) {
		if (dims[i] < 1)
			fail(ErrorCode::InvalidConfig, "SPD dims must be positive");
		if (i > 0 && dims[i] >= dims[i - 1])
			fail(ErrorCode::InvalidConfig, "SPD dims must be strictly decreasing");
	}
	if (!(epsilon > 0.0))
		fail(ErrorCode::InvalidConfig, "SPD epsilon must be positive");
}

SpdChainConfig vgg_schedule(double epsilon)
{
	return {{512, 250, 100, 50}, epsilon};
}

SpdChainConfig alexnet_schedule(double epsilon)
{
	return {{256, 150, 100, 50}, epsilon};
}

SpdChain SpdChain::init(const SpdChainConfig& config, std::uint64_t seed)
{
	config.validate();
	SpdChain chain;
	chain.config = config;
	chain.seed = seed;
	for (std::size_t k = 1; k < config.dims.size(); ++k)
		chain.layers.push_back(init_stiefel(config.dims[k], config.dims[k - 1], seed + k - 1));
	return chain;
}

SymMatrix spd_reduce(const SymMatrix& x, const SpdChainConfig& config, std::span<const BiMapLayer> layers)
{
	config.validate();
	if (x.dim() != config.dims.front())
		fail(ErrorCode::ShapeMismatch, "input dim " + std::to_string(x.dim()) + " but schedule starts at " +
		                                   std::to_string(config.dims.front()));
	if (layers.size() + 1 != config.dims.size())
		fail(ErrorCode::ShapeMismatch, "schedule has " + std::to_string(config.dims.size() - 1) +
		                                   " stages but " + std::to_string(layers.size()) + " weight layers given");
	SymMatrix cur = x;
	for (std::size_t k = 0; k < layers.size(); ++k) {
		if (layers[k].out_dim() != config.dims[k + 1])
			fail(ErrorCode::ShapeMismatch, "layer " + std::to_string(k) + " output dim mismatch");
		cur = reeig(bimap(cur, layers[k]), config.epsilon);
	}
	if (layers.empty())
		cur = reeig(cur, config.epsilon);
	return logeig(cur);
}

SymMatrix spd_reduce(const SymMatrix& x, const SpdChain& chain)
{
	return spd_reduce(x, chain.config, chain.layers);
}

FeatureTensor stack_matrices(std::span<const SymMatrix> matrices)
{
	if (matrices.empty())
		fail(ErrorCode::EmptyInput, "no matrices to stack");
	const auto d = matrices.front().dim();
	FeatureTensor t({static_cast<std::uint32_t>(matrices.size()), static_cast<std::uint32_t>(d),
	                 static_cast<std::uint32_t>(d)});
	std::size_t k = 0;
	for (const auto& m : matrices) {
		if (m.dim() != d)
			fail(ErrorCode::DimMismatch, "matrices of different sizes cannot be stacked");
		for (Eigen::Index i = 0; i < d; ++i)
			for (Eigen::Index j = 0; j < d; ++j)
				t.data[k++] = static_cast<float>(m(i, j));
	}
	return t;
}

std::vector<SymMatrix> unstack_matrices(const FeatureTensor& tensor)
{
	if (tensor.dims.size() != 3 || tensor.dims[1] != tensor.dims[2])
		fail(ErrorCode::BadShape, "expected a [n, d, d] tensor");
	const Eigen::Index d = tensor.dims[1];
	std::vector<SymMatrix> out;
	out.reserve(tensor.dims[0]);
	std::size_t k = 0;
	for (std::uint32_t n = 0; n < tensor.dims[0]; ++n) {
		Matrix m(d, d);
		for (Eigen::Index i = 0; i < d; ++i)
			for (Eigen::Index j = 0; j < d; ++j)
				m(i, j) = tensor.data[k++];
		out.push_back(SymMatrix::from(m));
	}
	return out;
}

void save_chain(const SpdChain& chain, const std::filesystem::path& prefix)
{
	std::ostringstream side;
	side.precision(17);
	side << "dims\t";
	for (std::size_t i = 0; i < chain.config.dims.size(); ++i)
		side << (i ? "," : "") << chain.config.dims[i];
	side << "\nepsilon\t" << chain.config.epsilon << "\nseed\t" << chain.seed << "\nlayers\t" << chain.layers.size()
	     << '\n';
	for (std::size_t k = 0; k < chain.layers.size(); ++k) {
		const Matrix& w = chain.layers[k].weights;
		FeatureTensor t({static_cast<std::uint32_t>(w.rows()), static_cast<std::uint32_t>(w.cols())});
		for (Eigen::Index i = 0; i < w.rows(); ++i)
			for (Eigen::Index j = 0; j < w.cols(); ++j)
				t.data[static_cast<std::size_t>(i * w.cols() + j)] = static_cast<float>(w(i, j));
		write_fmap(t, with_suffix(prefix, ".layer" + std::to_string(k) + ".fmap"));
	}
	std::ofstream out(with_suffix(prefix, ".txt"));
	if (!out)
		fail(ErrorCode::IoFailure, "cannot write chain sidecar for " + prefix.string());
	out << side.str();
}

SpdChain load_chain(const std::filesystem::path& prefix)
{
	std::ifstream in(with_suffix(prefix, ".txt"));
	if (!in)
		fail(ErrorCode::IoFailure, "cannot read chain sidecar for " + prefix.string());
	SpdChain chain;
	std::size_t layer_count = 0;
	std::string key, value;
	while (in >> key >> value) {
		if (key == "dims") {
			std::istringstream ds(value);
			std::string d;
			while (std::getline(ds, d, ','))
				chain.config.dims.push_back(std::stol(d));
		} else if (key == "epsilon") {
			chain.config.epsilon = std::stod(value);
		} else if (key == "seed") {
			chain.seed = std::stoull(value);
		} else if (key == "layers") {
			layer_count = std::stoul(value);
		}
	}
	chain.config.validate();
	if (layer_count + 1 != chain.config.dims.size())
		fail(ErrorCode::ParseError, "chain sidecar layer count disagrees with schedule");
	// The f32 payload cannot carry exact orthonormality, so the double-precision
	// weights are regenerated from the seed and checked against the stored copy.
	SpdChain regenerated = SpdChain::init(chain.config, chain.seed);
	for (std::size_t k = 0; k < layer_count; ++k) {
		auto t = read_fmap(with_suffix(prefix, ".layer" + std::to_string(k) + ".fmap"));
		const Matrix& w = regenerated.layers[k].weights;
		if (t.dims.size() != 2 || t.dims[0] != w.rows() || t.dims[1] != w.cols())
			fail(ErrorCode::ShapeMismatch, "stored layer " + std::to_string(k) + " has wrong shape");
		for (Eigen::Index i = 0; i < w.rows(); ++i)
			for (Eigen::Index j = 0; j < w.cols(); ++j)
				if (std::abs(t.data[static_cast<std::size_t>(i * w.cols() + j)] - w(i, j)) > 1e-6)
					fail(ErrorCode::ParseError, "stored layer " + std::to_string(k) + " does not match seed " +
					                                std::to_string(chain.seed));
	}
	regenerated.seed = chain.seed;
	return regenerated;
}

} // namespace covfer
