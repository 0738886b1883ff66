#include "covfer/covpool.hpp"
#include "covfer/error.hpp"

#include "oracles.hpp"

#include <doctest.h>

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

/// Values are multiples of 1/256 in [-8, 8], so small integer shifts and
/// scalings are exact in f32.
FeatureTensor dyadic_tensor(std::uint32_t c, std::uint32_t h, std::uint32_t w, std::uint64_t seed)
{
	FeatureTensor t({c, h, w});
	std::mt19937_64 rng(seed);
	std::uniform_int_distribution<int> step(-2048, 2048);
	for (auto& v : t.data)
		v = static_cast<float>(step(rng)) / 256.0f;
	return t;
}

FeatureTensor gaussian_tensor(std::uint32_t c, std::uint32_t h, std::uint32_t w, std::uint64_t seed, float offset = 0)
{
	FeatureTensor t({c, h, w});
	std::mt19937_64 rng(seed);
	std::normal_distribution<float> normal;
	for (auto& v : t.data)
		v = offset + normal(rng);
	return t;
}

Region whole(const FeatureTensor& t)
{
	return {0, static_cast<int>(t.dims[1]), 0, static_cast<int>(t.dims[2])};
}

} // namespace

TEST_CASE("constant pixels give a zero covariance")
{
	FeatureTensor t({3, 4, 4});
	std::fill(t.data.begin(), t.data.end(), 2.5f);
	CHECK(region_covariance(t, whole(t)).isZero(0.0));
	const auto pooled = pool_covariance(t);
	CHECK(pooled.matrix().isApprox(1e-12 * Matrix::Identity(3, 3)));
}

TEST_CASE("two-pixel hand example")
{
	FeatureTensor t({2, 1, 2}, {0.0f, 2.0f, 0.0f, 0.0f});
	Matrix expected(2, 2);
	expected << 1, 0, 0, 0;
	CHECK(region_covariance(t, whole(t)) == expected);
}

TEST_CASE("VGG-sized global pooling is rank-bounded and ridged")
{
	const auto t = gaussian_tensor(512, 14, 14, 1);
	const auto pre = region_covariance(t, whole(t));
	const auto eig = sym_eig(SymMatrix::from(pre));
	int rank = 0;
	for (int i = 0; i < 512; ++i)
		rank += eig.values[i] > 1e-10 * eig.values[0];
	CHECK(rank <= 196);
	const auto pooled = pool_covariance(t);
	CHECK(pooled.dim() == 512);
	CHECK(sym_eig(pooled).values.minCoeff() > 0.0);
}

TEST_CASE("pooling matches the two-pass brute force")
{
	for (std::uint64_t seed = 0; seed < 6; ++seed) {
		// a large common offset exposes one-pass cancellation
		const auto t = gaussian_tensor(12, 9, 11, seed, seed % 2 ? 1000.0f : 0.0f);
		const Region r{1, 8, 2, 11};
		const auto ours = region_covariance(t, r);
		const auto ref = oracle::brute_force_covariance(t, r.y0, r.y1, r.x0, r.x1);
		CHECK(oracle::rel_frobenius(ours, ref) <= 1e-10);
		CHECK(ours == ours.transpose());
	}
}

TEST_CASE("translation invariance and quadratic scaling")
{
	const auto t = dyadic_tensor(8, 6, 7, 3);
	const auto base = region_covariance(t, whole(t));
	auto shifted = t;
	for (std::size_t i = 0; i < shifted.data.size(); ++i)
		shifted.data[i] += static_cast<float>(i / 42 * 3 + 5); // constant per channel
	CHECK(oracle::rel_frobenius(region_covariance(shifted, whole(t)), base) <= 1e-10);
	for (float s : {0.5f, 3.0f, 4.0f}) {
		auto scaled = t;
		for (auto& v : scaled.data)
			v *= s;
		CHECK(oracle::rel_frobenius(region_covariance(scaled, whole(t)), double(s) * s * base) <= 1e-10);
	}
}

TEST_CASE("region tiling")
{
	CHECK(tile_regions(RegionSpec{{1}}, 14, 14).size() == 1);

	const auto two = tile_regions(RegionSpec{}, 14, 14);
	REQUIRE(two.size() == 5);
	CHECK(two[0] == Region{0, 14, 0, 14});
	CHECK(two[1] == Region{0, 7, 0, 7});
	CHECK(two[2] == Region{0, 7, 7, 14});
	CHECK(two[3] == Region{7, 14, 0, 7});
	CHECK(two[4] == Region{7, 14, 7, 14});

	const auto four = tile_regions(RegionSpec::parse("1,2,4"), 14, 14);
	REQUIRE(four.size() == 21);
	int covered = 0;
	for (std::size_t i = 5; i < 21; ++i) {
		CHECK((four[i].height() == 3 || four[i].height() == 4));
		CHECK((four[i].width() == 3 || four[i].width() == 4));
		covered += four[i].pixel_count();
	}
	CHECK(covered == 196);

	const auto t = gaussian_tensor(4, 14, 14, 5);
	const auto pooled = pool_regions(t, RegionSpec{});
	REQUIRE(pooled.size() == 5);
	CHECK(pooled[0].matrix() == pool_covariance(t).matrix());
	CHECK(pooled[3].matrix() == pool_covariance(t, Region{7, 14, 0, 7}).matrix());
}

TEST_CASE("pooling errors")
{
	const auto t = gaussian_tensor(3, 5, 5, 6);
	CHECK(code_of([&] { pool_covariance(t, Region{0, 6, 0, 5}); }) == ErrorCode::RegionOutOfBounds);
	CHECK(code_of([&] { pool_covariance(t, Region{-1, 2, 0, 5}); }) == ErrorCode::RegionOutOfBounds);
	CHECK(code_of([&] { pool_covariance(t, Region{2, 3, 2, 3}); }) == ErrorCode::RegionTooSmall);
	CHECK(code_of([&] { tile_regions(RegionSpec::parse("1,4"), 7, 7); }) == ErrorCode::RegionTooSmall);
	CHECK(code_of([] { RegionSpec::parse("2,4"); }) == ErrorCode::InvalidConfig);
	CHECK(code_of([] { RegionSpec::parse("1,x"); }) == ErrorCode::InvalidConfig);
	CHECK(code_of([] { RegionSpec::parse("1,0"); }) == ErrorCode::InvalidConfig);
	CHECK(RegionSpec::parse("1,2,4").str() == "1,2,4");
}

TEST_CASE("pooled descriptors round-trip through a stacked tensor")
{
	const auto pooled = pool_regions(gaussian_tensor(6, 8, 8, 7));
	const auto stacked = stack_matrices(pooled);
	CHECK(stacked.dims == std::vector<std::uint32_t>{5, 6, 6});
	const auto back = unstack_matrices(stacked);
	REQUIRE(back.size() == 5);
	for (std::size_t i = 0; i < 5; ++i)
		CHECK(oracle::rel_frobenius(back[i].matrix(), pooled[i].matrix()) <= 1e-7);
}
