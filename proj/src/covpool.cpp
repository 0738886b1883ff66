#include "covfer/covpool.hpp"

#include "covfer/error.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace covfer {

void RegionSpec::validate() const
{
	if (levels.empty() || std::find(levels.begin(), levels.end(), 1) == levels.end())
		fail(ErrorCode::InvalidConfig, "region spec must include the global level 1");
	for (int g : levels)
		if (g < 1)
			fail(ErrorCode::InvalidConfig, "region grid levels must be >= 1");
}

RegionSpec RegionSpec::parse(std::string_view text)
{
	RegionSpec spec;
	spec.levels.clear();
	while (!text.empty()) {
		const auto comma = text.find(',');
		const auto item = text.substr(0, comma);
		int g = 0;
		const auto [end, ec] = std::from_chars(item.data(), item.data() + item.size(), g);
		if (ec != std::errc{} || end != item.data() + item.size())
			fail(ErrorCode::InvalidConfig, "bad region level '" + std::string(item) + "'");
		spec.levels.push_back(g);
		if (comma == std::string_view::npos)
			break;
		text.remove_prefix(comma + 1);
	}
	spec.validate();
	return spec;
}

std::string RegionSpec::str() const
{
	std::ostringstream out;
	for (std::size_t i = 0; i < levels.size(); ++i)
		out << (i ? "," : "") << levels[i];
	return out.str();
}

std::vector<Region> tile_regions(const RegionSpec& spec, int height, int width)
{
	spec.validate();
	std::vector<Region> out;
	auto level = [&](int g) {
		for (int i = 0; i < g; ++i)
			for (int j = 0; j < g; ++j) {
				Region r{i * height / g, (i + 1) * height / g, j * width / g, (j + 1) * width / g};
				if (r.height() < 2 || r.width() < 2)
					fail(ErrorCode::RegionTooSmall, "grid level " + std::to_string(g) + " gives tiles under 2 pixels on a " +
					                                    std::to_string(height) + "x" + std::to_string(width) + " map");
				out.push_back(r);
			}
	};
	level(1);
	for (int g : spec.levels)
		if (g != 1)
			level(g);
	return out;
}

namespace {

void check_tensor(const FeatureTensor& t)
{
	if (t.dims.size() != 3)
		fail(ErrorCode::BadShape, "covariance pooling expects a [c, h, w] tensor");
}

} // namespace

Matrix region_covariance(const FeatureTensor& tensor, const Region& r)
{
	check_tensor(tensor);
	const int c = static_cast<int>(tensor.dims[0]);
	const int h = static_cast<int>(tensor.dims[1]);
	const int w = static_cast<int>(tensor.dims[2]);
	if (r.y0 < 0 || r.x0 < 0 || r.y1 > h || r.x1 > w || r.y0 > r.y1 || r.x0 > r.x1)
		fail(ErrorCode::RegionOutOfBounds, "region outside the " + std::to_string(h) + "x" + std::to_string(w) + " map");
	const int n = r.pixel_count();
	if (n < 2)
		fail(ErrorCode::RegionTooSmall, "a region needs at least 2 pixels");

	// observations as columns
	Matrix v(c, n);
	for (int k = 0; k < c; ++k) {
		int col = 0;
		for (int y = r.y0; y < r.y1; ++y)
			for (int x = r.x0; x < r.x1; ++x)
				v(k, col++) = tensor.at(k, y, x);
	}
	// shifting by the first observation keeps constant channels exactly zero
	const Vector first = v.col(0);
	v.colwise() -= first;
	const Vector mean = v.rowwise().sum() / n;
	v.colwise() -= mean;

	Matrix cov = Matrix::Zero(c, c);
	cov.selfadjointView<Eigen::Upper>().rankUpdate(v, 1.0 / n);
	cov.triangularView<Eigen::StrictlyLower>() = cov.transpose();
	return cov;
}

SpdMatrix add_ridge(const Matrix& pre, double relative)
{
	const double lambda = relative * pre.trace() / static_cast<double>(pre.rows()) + 1e-12;
	Matrix out = pre;
	out.diagonal().array() += lambda;
	return SpdMatrix::from(out);
}

SpdMatrix pool_covariance(const FeatureTensor& tensor, const Region& region)
{
	return add_ridge(region_covariance(tensor, region), deep_ridge);
}

SpdMatrix pool_covariance(const FeatureTensor& tensor)
{
	check_tensor(tensor);
	return pool_covariance(tensor, Region{0, static_cast<int>(tensor.dims[1]), 0, static_cast<int>(tensor.dims[2])});
}

std::vector<SpdMatrix> pool_regions(const FeatureTensor& tensor, const RegionSpec& spec)
{
	check_tensor(tensor);
	std::vector<SpdMatrix> out;
	for (const auto& r : tile_regions(spec, static_cast<int>(tensor.dims[1]), static_cast<int>(tensor.dims[2])))
		out.push_back(pool_covariance(tensor, r));
	return out;
}

} // namespace covfer
