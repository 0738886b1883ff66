#include "covfer/bof.hpp"

#include "covfer/error.hpp"
#include "covfer/keyvalue.hpp"
#include "covfer/tensorio.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace covfer {

Vector flatten(const SymMatrix& m)
{
	const auto d = m.dim();
	Vector v(flat_length(d));
	Eigen::Index k = 0;
	for (Eigen::Index i = 0; i < d; ++i) {
		v[k++] = m(i, i);
		for (Eigen::Index j = i + 1; j < d; ++j)
			v[k++] = std::numbers::sqrt2 * m(i, j);
	}
	return v;
}

SymMatrix unflatten(const Vector& v)
{
	const auto d = static_cast<Eigen::Index>(std::llround((std::sqrt(8.0 * v.size() + 1) - 1) / 2));
	if (flat_length(d) != v.size())
		fail(ErrorCode::LengthMismatch, "length " + std::to_string(v.size()) + " is not a triangle number");
	Matrix m(d, d);
	Eigen::Index k = 0;
	for (Eigen::Index i = 0; i < d; ++i) {
		m(i, i) = v[k++];
		for (Eigen::Index j = i + 1; j < d; ++j)
			m(i, j) = m(j, i) = v[k++] / std::numbers::sqrt2;
	}
	return SymMatrix::from(m);
}

bool is_codebook_size(int k)
{
	return std::find(codebook_sizes.begin(), codebook_sizes.end(), k) != codebook_sizes.end();
}

namespace {

/// Uniform double in [0, 1) from the top 53 bits; independent of the
/// standard library's distribution implementations.
double unit(std::mt19937_64& rng)
{
	return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename M>
int nearest_row(const M& centroids, const Vector& x, double* dist)
{
	int best = 0;
	double best_d = std::numeric_limits<double>::infinity();
	for (Eigen::Index j = 0; j < centroids.rows(); ++j) {
		const double d = (centroids.row(j).transpose() - x).squaredNorm();
		if (d < best_d) {
			best_d = d;
			best = static_cast<int>(j);
		}
	}
	if (dist)
		*dist = best_d;
	return best;
}

std::size_t distinct_count(std::span<const Vector> xs)
{
	std::vector<const Vector*> ptrs;
	for (const auto& x : xs)
		ptrs.push_back(&x);
	auto less = [](const Vector* a, const Vector* b) {
		return std::lexicographical_compare(a->data(), a->data() + a->size(), b->data(), b->data() + b->size());
	};
	std::sort(ptrs.begin(), ptrs.end(), less);
	std::size_t n = ptrs.empty() ? 0 : 1;
	for (std::size_t i = 1; i < ptrs.size(); ++i)
		n += *ptrs[i] != *ptrs[i - 1];
	return n;
}

Matrix kmeanspp(std::span<const Vector> xs, int k, std::mt19937_64& rng)
{
	const std::size_t n = xs.size();
	Matrix c(k, xs[0].size());
	std::size_t first = std::min(n - 1, static_cast<std::size_t>(unit(rng) * n));
	c.row(0) = xs[first].transpose();
	std::vector<double> d2(n);
	for (std::size_t i = 0; i < n; ++i)
		d2[i] = (xs[i] - xs[first]).squaredNorm();
	for (int j = 1; j < k; ++j) {
		double total = 0.0;
		for (double v : d2)
			total += v;
		const double target = unit(rng) * total;
		std::size_t pick = n;
		double cum = 0.0;
		for (std::size_t i = 0; i < n; ++i) {
			cum += d2[i];
			if (cum > target) {
				pick = i;
				break;
			}
		}
		if (pick == n) // round-off at the very end of the cumulative sum
			for (std::size_t i = n; i-- > 0;)
				if (d2[i] > 0.0) {
					pick = i;
					break;
				}
		c.row(j) = xs[pick].transpose();
		for (std::size_t i = 0; i < n; ++i)
			d2[i] = std::min(d2[i], (xs[i] - xs[pick]).squaredNorm());
	}
	return c;
}

struct LloydResult
{
	Matrix centroids;
	std::vector<double> trace;
	int iterations = 0;
};

LloydResult lloyd(std::span<const Vector> xs, const Matrix& initial, int max_iterations)
{
	// rows contiguous for the distance scans
	RowMatrix centroids = initial;
	const std::size_t n = xs.size();
	const int k = static_cast<int>(centroids.rows());
	std::vector<int> assign(n);
	std::vector<double> dist(n);
	auto assign_all = [&] {
		bool changed = false;
		double obj = 0.0;
		for (std::size_t i = 0; i < n; ++i) {
			const int a = nearest_row(centroids, xs[i], &dist[i]);
			changed |= a != assign[i];
			assign[i] = a;
			obj += dist[i];
		}
		return std::pair{changed, obj};
	};

	LloydResult r;
	std::fill(assign.begin(), assign.end(), -1);
	r.trace.push_back(assign_all().second);
	while (r.iterations < max_iterations) {
		++r.iterations;
		RowMatrix sum = RowMatrix::Zero(k, centroids.cols());
		std::vector<int> count(k, 0);
		for (std::size_t i = 0; i < n; ++i) {
			sum.row(assign[i]) += xs[i].transpose();
			++count[assign[i]];
		}
		for (int j = 0; j < k; ++j)
			if (count[j] > 0)
				centroids.row(j) = sum.row(j) / count[j];
		for (std::size_t i = 0; i < n; ++i)
			dist[i] = (centroids.row(assign[i]).transpose() - xs[i]).squaredNorm();
		for (int j = 0; j < k; ++j) {
			if (count[j] > 0)
				continue;
			const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
			centroids.row(j) = xs[far].transpose();
			--count[assign[far]];
			assign[far] = j;
			count[j] = 1;
			dist[far] = 0.0;
		}
		const auto [changed, obj] = assign_all();
		r.trace.push_back(obj);
		if (!changed)
			break;
	}
	r.centroids = centroids;
	return r;
}

} // namespace

Codebook train_codebook(std::span<const Vector> descriptors, int k, std::uint64_t seed, const KMeansOptions& options)
{
	if (k < 1)
		fail(ErrorCode::InvalidConfig, "codebook size must be positive");
	if (descriptors.empty())
		fail(ErrorCode::TooFewDescriptors, "no descriptors to cluster");
	const auto len = descriptors[0].size();
	for (const auto& d : descriptors)
		if (d.size() != len)
			fail(ErrorCode::InconsistentLength, "descriptor lengths differ (" + std::to_string(len) + " vs " +
			                                        std::to_string(d.size()) + ")");
	const auto distinct = distinct_count(descriptors);
	if (distinct < static_cast<std::size_t>(k))
		fail(ErrorCode::TooFewDescriptors, std::to_string(distinct) + " distinct descriptors cannot form " +
		                                       std::to_string(k) + " codewords");

	std::mt19937_64 rng(seed);
	LloydResult best;
	for (int r = 0; r < std::max(1, options.restarts); ++r) {
		auto run = lloyd(descriptors, kmeanspp(descriptors, k, rng), options.max_iterations);
		if (best.trace.empty() || run.trace.back() < best.trace.back())
			best = std::move(run);
	}
	Codebook cb;
	cb.centroids = std::move(best.centroids);
	cb.objective_trace = std::move(best.trace);
	cb.iterations = best.iterations;
	cb.seed = seed;
	return cb;
}

int nearest_centroid(const Codebook& codebook, const Vector& descriptor)
{
	if (descriptor.size() != codebook.length())
		fail(ErrorCode::LengthMismatch, "descriptor length " + std::to_string(descriptor.size()) +
		                                    " does not match codebook length " + std::to_string(codebook.length()));
	return nearest_row(codebook.centroids, descriptor, nullptr);
}

double kmeans_objective(const Codebook& codebook, std::span<const Vector> descriptors)
{
	double obj = 0.0;
	for (const auto& x : descriptors) {
		double d = 0.0;
		nearest_row(codebook.centroids, x, &d);
		obj += d;
	}
	return obj;
}

Vector quantize(std::span<const Vector> descriptors, const Codebook& codebook)
{
	if (descriptors.empty())
		fail(ErrorCode::EmptyInput, "cannot quantize an empty descriptor list");
	Vector h = Vector::Zero(codebook.size());
	for (const auto& d : descriptors)
		h[nearest_centroid(codebook, d)] += 1.0;
	return h / static_cast<double>(descriptors.size());
}

Vector fuse(std::span<const StreamHistogram> histograms, std::span<const std::string> layout)
{
	std::vector<const Vector*> blocks;
	Eigen::Index total = 0;
	for (const auto& name : layout) {
		const auto it =
		    std::find_if(histograms.begin(), histograms.end(), [&](const auto& h) { return h.stream == name; });
		if (it == histograms.end())
			fail(ErrorCode::MissingStream, "no histogram for stream '" + name + "'");
		blocks.push_back(&it->bins);
		total += it->bins.size();
	}
	for (const auto& h : histograms)
		if (std::find(layout.begin(), layout.end(), h.stream) == layout.end())
			fail(ErrorCode::MissingStream, "stream '" + h.stream + "' is not part of the fused layout");
	Vector out(total);
	Eigen::Index at = 0;
	for (const auto* b : blocks) {
		out.segment(at, b->size()) = *b;
		at += b->size();
	}
	return out;
}

void save_codebook(const Codebook& codebook, const std::filesystem::path& prefix)
{
	const auto k = static_cast<std::uint32_t>(codebook.size());
	const auto len = static_cast<std::uint32_t>(codebook.length());
	FeatureTensor t({k, len});
	for (std::uint32_t i = 0; i < k; ++i)
		for (std::uint32_t j = 0; j < len; ++j)
			t.data[std::size_t(i) * len + j] = static_cast<float>(codebook.centroids(i, j));
	write_fmap(t, with_suffix(prefix, ".fmap"));

	std::ostringstream obj;
	obj.precision(17);
	obj << (codebook.objective_trace.empty() ? 0.0 : codebook.objective());
	KeyValues kv;
	kv.set("kind", codebook.kind == CodebookKind::Deep ? "deep" : "shallow");
	kv.set("stream", codebook.stream);
	kv.set("seed", std::to_string(codebook.seed));
	kv.set("k", std::to_string(k));
	kv.set("length", std::to_string(len));
	kv.set("objective", obj.str());
	kv.write(with_suffix(prefix, ".txt"));
}

Codebook load_codebook(const std::filesystem::path& prefix)
{
	const auto kv = KeyValues::read(with_suffix(prefix, ".txt"));
	const auto t = read_fmap(with_suffix(prefix, ".fmap"));
	const auto k = std::stoul(kv.get("k"));
	const auto len = std::stoul(kv.get("length"));
	if (t.dims.size() != 2 || t.dims[0] != k || t.dims[1] != len)
		fail(ErrorCode::ShapeMismatch, "codebook tensor does not match its sidecar");
	Codebook cb;
	cb.centroids.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(len));
	for (std::size_t i = 0; i < k; ++i)
		for (std::size_t j = 0; j < len; ++j)
			cb.centroids(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = t.data[i * len + j];
	const auto& kind = kv.get("kind");
	if (kind != "deep" && kind != "shallow")
		fail(ErrorCode::ParseError, "unknown codebook kind '" + kind + "'");
	cb.kind = kind == "deep" ? CodebookKind::Deep : CodebookKind::Shallow;
	cb.stream = kv.get("stream");
	cb.seed = std::stoull(kv.get("seed"));
	cb.objective_trace.push_back(std::stod(kv.get("objective")));
	return cb;
}

} // namespace covfer
