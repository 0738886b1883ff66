#pragma once

#include "covfer/spd.hpp"
#include "covfer/tensorio.hpp"

#include <string_view>
#include <vector>

namespace covfer {

/// Half-open pixel window [y0, y1) x [x0, x1).
struct Region
{
	int y0 = 0;
	int y1 = 0;
	int x0 = 0;
	int x1 = 0;

	int height() const { return y1 - y0; }
	int width() const { return x1 - x0; }
	int pixel_count() const { return height() * width(); }

	bool operator==(const Region&) const = default;
};

/// Grid levels g, each tiling the map into g x g balanced tiles. Level 1 is the
/// global window and must be present.
struct RegionSpec
{
	std::vector<int> levels{1, 2};

	void validate() const;
	/// Parses "1,2,4".
	static RegionSpec parse(std::string_view text);
	std::string str() const;
};

/// Tile boundaries floor(i * h / g). Global tile first, then row-major tiles
/// per level. Throws RegionTooSmall if any tile is narrower than 2 pixels.
std::vector<Region> tile_regions(const RegionSpec& spec, int height, int width);

/// Population covariance of the pixel vectors in `region`, two-pass, without
/// ridge. Only the upper triangle is accumulated; the result is mirrored.
Matrix region_covariance(const FeatureTensor& tensor, const Region& region);

/// Covariance plus ridge lambda I, lambda = 1e-4 trace / c + 1e-12.
SpdMatrix pool_covariance(const FeatureTensor& tensor, const Region& region);
SpdMatrix pool_covariance(const FeatureTensor& tensor);

std::vector<SpdMatrix> pool_regions(const FeatureTensor& tensor, const RegionSpec& spec = {});

/// lambda I added to `pre`, lambda = relative * trace(pre) / d + 1e-12.
SpdMatrix add_ridge(const Matrix& pre, double relative);

inline constexpr double deep_ridge = 1e-4;

} // namespace covfer
