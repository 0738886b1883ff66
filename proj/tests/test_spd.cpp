#include "covfer/error.hpp"
#include "covfer/spd.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <Eigen/LU>

#include <cmath>
#include <random>

using namespace covfer;

namespace {

ErrorCode code_of(auto&& fn)
{
	try {
		fn();
	} catch (const Error& e) {
		return e.code();
	}
	FAIL("expected an error");
	return ErrorCode::IoFailure;
}

SymMatrix random_spd(int d, std::mt19937_64& rng, double floor = 0.1)
{
	return SymMatrix::from(oracle::random_spd(d, rng, floor));
}

/// Rank-deficient PSD matrix (rank r).
SymMatrix random_psd(int d, int r, std::mt19937_64& rng)
{
	std::normal_distribution<double> normal;
	Matrix g(d, r);
	for (int i = 0; i < d * r; ++i)
		g.data()[i] = normal(rng);
	return SymMatrix::from(g * g.transpose(), 1e-12);
}

} // namespace

TEST_CASE("sym_eig of the identity")
{
	auto eig = sym_eig(SymMatrix::identity(5));
	for (int i = 0; i < 5; ++i)
		CHECK(eig.values[i] == 1.0);
	// a signed permutation matrix that the sign rule makes non-negative
	CHECK(eig.vectors.cwiseAbs().colwise().sum().isApprox(Eigen::RowVectorXd::Ones(5)));
	CHECK(eig.vectors.minCoeff() == 0.0);
	CHECK((eig.vectors.transpose() * eig.vectors).isIdentity(1e-15));
}

TEST_CASE("sym_eig of a diagonal matrix")
{
	Vector d(3);
	d << 3, 1, 2;
	auto eig = sym_eig(SymMatrix::diagonal(d));
	CHECK(eig.values[0] == 3.0);
	CHECK(eig.values[1] == 2.0);
	CHECK(eig.values[2] == 1.0);
	CHECK(eig.vectors.col(0).isApprox(Vector::Unit(3, 0)));
	CHECK(eig.vectors.col(1).isApprox(Vector::Unit(3, 2)));
	CHECK(eig.vectors.col(2).isApprox(Vector::Unit(3, 1)));
}

TEST_CASE("sym_eig matches the closed-form cubic on 3x3 inputs")
{
	std::mt19937_64 rng(3);
	for (int trial = 0; trial < 200; ++trial) {
		const Matrix a = oracle::random_spd(3, rng);
		const auto roots = oracle::sym3_cubic_roots(a);
		const auto eig = sym_eig(SymMatrix::from(a));
		for (int i = 0; i < 3; ++i)
			CHECK(std::abs(eig.values[i] - roots[i]) <= 1e-9);
	}
}

TEST_CASE("sym_eig reconstruction, orthogonality, ordering and sign rule")
{
	std::mt19937_64 rng(4);
	for (int d : {1, 2, 7, 40, 65}) {
		const auto x = random_spd(d, rng);
		const auto eig = sym_eig(x);
		const Matrix rec = eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose();
		CHECK(oracle::rel_frobenius(rec, x.matrix()) <= 1e-8);
		CHECK((eig.vectors.transpose() * eig.vectors - Matrix::Identity(d, d)).norm() <= 1e-9);
		for (int i = 1; i < d; ++i)
			CHECK(eig.values[i - 1] >= eig.values[i]);
		for (int j = 0; j < d; ++j) {
			Eigen::Index arg;
			eig.vectors.col(j).cwiseAbs().maxCoeff(&arg);
			CHECK(eig.vectors(arg, j) >= 0.0);
		}
	}
}

TEST_CASE("sym_eig handles indefinite and repeated spectra")
{
	std::mt19937_64 rng(5);
	const Matrix q = oracle::random_conditioned(6, rng, 1.0);
	Vector d(6);
	d << 2, 2, 2, -1, -1, 0;
	const Matrix a = q * d.asDiagonal() * q.transpose();
	const auto eig = sym_eig(SymMatrix::from(a, 1e-12));
	Vector expected(6);
	expected << 2, 2, 2, 0, -1, -1;
	CHECK((eig.values - expected).cwiseAbs().maxCoeff() <= 1e-12);
	const Matrix rec = eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose();
	CHECK(oracle::rel_frobenius(rec, a) <= 1e-12);
}

TEST_CASE("sym_eig is bitwise deterministic")
{
	std::mt19937_64 rng(6);
	const auto x = random_spd(30, rng);
	const auto a = sym_eig(x);
	const auto b = sym_eig(x);
	CHECK(a.values == b.values);
	CHECK(a.vectors == b.vectors);
}

TEST_CASE("sym_eig errors")
{
	Matrix asym(2, 2);
	asym << 1, 2, 3, 4;
	CHECK(code_of([&] { SymMatrix::from(asym); }) == ErrorCode::AsymmetricInput);
	CHECK(code_of([&] { SymMatrix::from(Matrix::Zero(2, 3)); }) == ErrorCode::AsymmetricInput);

	std::mt19937_64 rng(7);
	const auto x = random_spd(20, rng);
	CHECK(code_of([&] { sym_eig(x, {1e-12, 1}); }) == ErrorCode::NoConvergence);
}

TEST_CASE("bimap")
{
	std::mt19937_64 rng(8);
	const auto x = random_spd(8, rng);

	BiMapLayer take3{Matrix::Identity(3, 8)};
	CHECK(bimap(x, take3).matrix() == x.matrix().topLeftCorner(3, 3));

	const auto w = init_stiefel(5, 8, 1);
	CHECK(bimap(SymMatrix::identity(8), w).matrix().isIdentity(1e-12));

	for (int trial = 0; trial < 50; ++trial) {
		const auto xi = random_spd(12, rng, 0.01);
		const auto wi = init_stiefel(6, 12, 100 + trial);
		const double lo_in = sym_eig(xi).values.minCoeff();
		const double lo_out = sym_eig(bimap(xi, wi)).values.minCoeff();
		CHECK(lo_out >= lo_in - 1e-9);
		CHECK(lo_out > 0.0);
	}

	CHECK(code_of([&] { bimap(x, init_stiefel(3, 6, 0)); }) == ErrorCode::ShapeMismatch);
	BiMapLayer wide{Matrix::Zero(9, 8)};
	CHECK(code_of([&] { bimap(x, wide); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("reeig")
{
	// eigenvalues (5, 3)
	Matrix a(2, 2);
	a << 4, 1, 1, 4;
	const auto x = SymMatrix::from(a);
	CHECK(oracle::rel_frobenius(reeig(x, 1.0).matrix(), a) <= 1e-8);

	Vector d(2);
	d << 5, 1e-9;
	const auto floored = reeig(SymMatrix::diagonal(d), 1e-4);
	CHECK(floored(0, 0) == doctest::Approx(5.0).epsilon(1e-14));
	CHECK(floored(1, 1) == doctest::Approx(1e-4).epsilon(1e-10));
	CHECK(std::abs(floored(0, 1)) <= 1e-15);

	std::mt19937_64 rng(9);
	for (int trial = 0; trial < 30; ++trial) {
		const auto p = random_psd(10, 4, rng);
		const double eps = 1e-3;
		const auto once = reeig(p, eps);
		const auto twice = reeig(once, eps);
		CHECK(oracle::rel_frobenius(twice.matrix(), once.matrix()) <= 1e-8);
		CHECK(sym_eig(once).values.minCoeff() >= eps * (1 - 1e-9));
		// eigenvalues above the floor are kept
		const auto before = sym_eig(p).values;
		const auto after = sym_eig(once).values;
		for (int i = 0; i < 4; ++i)
			CHECK(after[i] == doctest::Approx(before[i]).epsilon(1e-9));
	}
	CHECK(code_of([&] { reeig(x, 0.0); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("logeig")
{
	CHECK(logeig(SymMatrix::identity(4)).matrix().isZero(0.0));

	Vector d(2);
	d << std::exp(1.0), std::exp(2.0);
	const auto l = logeig(SymMatrix::diagonal(d));
	CHECK(std::abs(l(0, 0) - 1.0) <= 1e-10);
	CHECK(std::abs(l(1, 1) - 2.0) <= 1e-10);
	CHECK(std::abs(l(0, 1)) <= 1e-10);

	std::mt19937_64 rng(10);
	for (int d2 : {3, 10, 30}) {
		const auto x = random_spd(d2, rng, 0.05);
		const Matrix back = oracle::expm(logeig(x).matrix());
		CHECK(oracle::rel_frobenius(back, x.matrix()) <= 1e-7);
	}

	Vector bad(2);
	bad << 1.0, -0.5;
	CHECK(code_of([&] { logeig(SymMatrix::diagonal(bad)); }) == ErrorCode::NonPositiveEigenvalue);
	CHECK(code_of([&] { logeig(SymMatrix::zero(3)); }) == ErrorCode::NonPositiveEigenvalue);
}

TEST_CASE("affine-invariant distance")
{
	std::mt19937_64 rng(12);
	for (int trial = 0; trial < 20; ++trial) {
		const auto a = random_spd(6, rng);
		const auto b = random_spd(6, rng);
		CHECK(affine_distance(a, a) <= 1e-9);
		CHECK(std::abs(affine_distance(a, b) - affine_distance(b, a)) <= 1e-8);
		const Matrix m = oracle::random_conditioned(6, rng, 10.0);
		const auto ma = SymMatrix::from(m * a.matrix() * m.transpose(), 1e-12);
		const auto mb = SymMatrix::from(m * b.matrix() * m.transpose(), 1e-12);
		CHECK(std::abs(affine_distance(a, b) - affine_distance(ma, mb)) <= 1e-6);
	}
	for (int d : {2, 6, 50}) {
		const auto e = SymMatrix::from(std::exp(1.0) * Matrix::Identity(d, d));
		CHECK(std::abs(affine_distance(SymMatrix::identity(d), e) - std::sqrt(double(d))) <= 1e-9);
	}
	CHECK(code_of([&] { affine_distance(SymMatrix::identity(2), SymMatrix::identity(3)); }) == ErrorCode::DimMismatch);
	CHECK(code_of([&] { affine_distance(SymMatrix::zero(2), SymMatrix::identity(2)); }) ==
	      ErrorCode::NonPositiveEigenvalue);
}

TEST_CASE("Stiefel initialisation")
{
	const auto sq = init_stiefel(7, 7, 3);
	CHECK(std::abs(std::abs(sq.weights.determinant()) - 1.0) <= 1e-9);
	for (auto [o, i] : {std::pair{1, 9}, std::pair{50, 100}, std::pair{250, 512}}) {
		const auto w = init_stiefel(o, i, 42);
		CHECK(w.out_dim() == o);
		CHECK(w.in_dim() == i);
		CHECK((w.weights * w.weights.transpose() - Matrix::Identity(o, o)).norm() <= 1e-9);
	}
	CHECK(init_stiefel(4, 10, 5).weights == init_stiefel(4, 10, 5).weights);
	for (std::uint64_t s = 0; s < 20; ++s)
		CHECK((init_stiefel(5, 12, s).weights - init_stiefel(5, 12, s + 1000).weights).norm() > 0.1);
	CHECK(code_of([] { init_stiefel(5, 4, 0); }) == ErrorCode::BadShape);
	CHECK(code_of([] { init_stiefel(0, 4, 0); }) == ErrorCode::BadShape);
}

TEST_CASE("spd_reduce")
{
	const auto vgg = SpdChain::init(vgg_schedule(), 1);
	REQUIRE(vgg.layers.size() == 3);
	const auto out = spd_reduce(SymMatrix::identity(512), vgg);
	CHECK(out.dim() == 50);
	CHECK(out.matrix().cwiseAbs().maxCoeff() <= 1e-10);

	std::mt19937_64 rng(13);
	const auto x6 = random_psd(6, 3, rng);
	const SpdChainConfig flat{{6}, 1e-4};
	const auto direct = logeig(reeig(x6, 1e-4));
	CHECK(spd_reduce(x6, flat, {}).matrix() == direct.matrix());

	const SpdChainConfig cfg{{40, 20, 8}, 1e-3};
	const auto chain = SpdChain::init(cfg, 77);
	for (int trial = 0; trial < 10; ++trial) {
		const auto x = SymMatrix::from(oracle::random_spd(40, rng, 0.0) + 1e-6 * Matrix::Identity(40, 40));
		const double top = sym_eig(x).values.maxCoeff();
		const auto l = sym_eig(spd_reduce(x, chain)).values;
		CHECK(l.maxCoeff() <= std::log(top) + 1e-9);
		CHECK(l.minCoeff() >= std::log(cfg.epsilon) - 1e-9);
	}

	CHECK(code_of([&] { spd_reduce(SymMatrix::identity(30), chain); }) == ErrorCode::ShapeMismatch);
	CHECK(code_of([&] { spd_reduce(SymMatrix::identity(40), cfg, {}); }) == ErrorCode::ShapeMismatch);
	CHECK(code_of([] { SpdChain::init({{10, 10}, 1e-4}, 0); }) == ErrorCode::InvalidConfig);
	CHECK(code_of([] { SpdChain::init({{10, 5}, 0.0}, 0); }) == ErrorCode::InvalidConfig);
}

TEST_CASE("AlexNet schedule conformance")
{
	const auto chain = SpdChain::init(alexnet_schedule(), 9);
	REQUIRE(chain.layers.size() == 3);
	CHECK(chain.layers[0].weights.rows() == 150);
	CHECK(chain.layers[0].weights.cols() == 256);
	CHECK(chain.layers[1].weights.rows() == 100);
	CHECK(chain.layers[2].weights.rows() == 50);
	std::mt19937_64 rng(14);
	const auto out = spd_reduce(random_spd(256, rng), chain);
	CHECK(out.dim() == 50);
}

TEST_CASE("chain save and load")
{
	const auto chain = SpdChain::init({{30, 12, 4}, 2e-4}, 1234);
	const auto prefix = std::filesystem::temp_directory_path() / "covfer_chain";
	save_chain(chain, prefix);
	const auto back = load_chain(prefix);
	CHECK(back.config.dims == chain.config.dims);
	CHECK(back.config.epsilon == chain.config.epsilon);
	CHECK(back.seed == 1234);
	REQUIRE(back.layers.size() == 2);
	CHECK(back.layers[0].weights == chain.layers[0].weights);
	CHECK(back.layers[1].weights == chain.layers[1].weights);
}
