#include "covfer/classify.hpp"

#include "covfer/error.hpp"
#include "covfer/keyvalue.hpp"
#include "covfer/tensorio.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace covfer {

namespace {

std::size_t draw_below(std::mt19937_64& rng, std::size_t n)
{
	return std::min(n - 1, static_cast<std::size_t>(static_cast<double>(rng() >> 11) * 0x1.0p-53 * n));
}

} // namespace

namespace {

/// Exact minimiser over t in [0, 1] of the convex piecewise-quadratic
/// P(t) = (1/2)|u + t d|^2 + C sum max(0, p_i - t q_i).
double segment_minimum(double ud, double dd, double C, const std::vector<double>& p, const std::vector<double>& q)
{
	if (dd <= 0.0)
		return 0.0;
	std::vector<double> knots{0.0, 1.0};
	for (std::size_t i = 0; i < p.size(); ++i)
		if (q[i] != 0.0) {
			const double t = p[i] / q[i];
			if (t > 0.0 && t < 1.0)
				knots.push_back(t);
		}
	std::sort(knots.begin(), knots.end());
	for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
		const double lo = knots[k], hi = knots[k + 1];
		if (hi <= lo)
			continue;
		const double mid = 0.5 * (lo + hi);
		double active = 0.0;
		for (std::size_t i = 0; i < p.size(); ++i)
			if (p[i] - mid * q[i] > 0.0)
				active += q[i];
		// P'(t) = ud + t dd - C active on this piece
		const double t = (C * active - ud) / dd;
		if (t <= lo)
			return lo;
		if (t < hi)
			return t;
	}
	return 1.0;
}

} // namespace

BinarySvm train_binary(std::span<const Vector* const> x, std::span<const int> y, const SvmOptions& options)
{
	if (!(options.C > 0.0))
		fail(ErrorCode::InvalidConfig, "SVM C must be positive");
	const std::size_t n = x.size();
	if (n == 0 || y.size() != n)
		fail(ErrorCode::EmptyInput, "binary SVM needs labelled samples");
	const Eigen::Index p = x[0]->size();
	const double C = options.C;

	std::vector<double> qii(n), alpha(n, 0.0);
	for (std::size_t i = 0; i < n; ++i)
		qii[i] = x[i]->squaredNorm() + 1.0;
	// dual-induced weights
	Vector w = Vector::Zero(p);
	double b = 0.0;
	// primal iterate, moved towards (w, b) only by exact line search so its
	// objective never increases
	Vector u = Vector::Zero(p);
	double ub = 0.0;
	std::vector<std::size_t> order(n);
	std::iota(order.begin(), order.end(), 0);
	std::mt19937_64 rng(options.seed);

	auto primal = [&](const Vector& v, double vb) {
		double hinge = 0.0;
		for (std::size_t i = 0; i < n; ++i)
			hinge += std::max(0.0, 1.0 - y[i] * (v.dot(*x[i]) + vb));
		return 0.5 * (v.squaredNorm() + vb * vb) + C * hinge;
	};
	double current = primal(u, ub);
	std::vector<double> pp(n), qq(n);

	BinarySvm out;
	out.objective_trace.push_back(current);
	double dobj = 0.0;
	while (out.epochs < options.max_epochs) {
		++out.epochs;
		for (std::size_t i = n; i > 1; --i)
			std::swap(order[i - 1], order[draw_below(rng, i)]);
		for (std::size_t i : order) {
			const double g = y[i] * (w.dot(*x[i]) + b) - 1.0;
			double pg = g;
			if (alpha[i] == 0.0)
				pg = std::min(g, 0.0);
			else if (alpha[i] == C)
				pg = std::max(g, 0.0);
			if (pg == 0.0)
				continue;
			const double next = std::clamp(alpha[i] - g / qii[i], 0.0, C);
			const double step = (next - alpha[i]) * y[i];
			alpha[i] = next;
			w += step * *x[i];
			b += step;
		}

		const Vector d = w - u;
		const double db = b - ub;
		for (std::size_t i = 0; i < n; ++i) {
			pp[i] = 1.0 - y[i] * (u.dot(*x[i]) + ub);
			qq[i] = y[i] * (d.dot(*x[i]) + db);
		}
		const double t = segment_minimum(u.dot(d) + ub * db, d.squaredNorm() + db * db, C, pp, qq);
		if (t > 0.0) {
			const Vector cand = u + t * d;
			const double cand_b = ub + t * db;
			const double value = primal(cand, cand_b);
			if (value < current) {
				u = cand;
				ub = cand_b;
				current = value;
				out.objective_trace.push_back(current);
			}
		}
		dobj = std::accumulate(alpha.begin(), alpha.end(), 0.0) - 0.5 * (w.squaredNorm() + b * b);
		if (current - dobj <= options.tolerance * std::abs(current))
			break;
	}
	out.dual_objective = dobj;
	out.w = std::move(u);
	out.b = ub;
	return out;
}

LinearModel train_svm(std::span<const Vector> x, std::span<const int> labels, const SvmOptions& options)
{
	if (x.size() != labels.size() || x.empty())
		fail(ErrorCode::EmptyInput, "training set is empty or mislabelled");
	const auto dim = x[0].size();
	for (const auto& v : x)
		if (v.size() != dim)
			fail(ErrorCode::LengthMismatch, "training vectors differ in length");
	const std::set<int> class_set(labels.begin(), labels.end());
	if (class_set.size() < 2)
		fail(ErrorCode::SingleClass, "training data holds a single class");
	if (std::all_of(x.begin(), x.end(), [&](const Vector& v) { return v == x[0]; }))
		fail(ErrorCode::DegenerateFeatures, "every training vector is identical");

	LinearModel model;
	model.classes.assign(class_set.begin(), class_set.end());
	model.C = options.C;
	const int k = static_cast<int>(model.classes.size());
	for (int i = 0; i < k; ++i)
		for (int j = i + 1; j < k; ++j) {
			std::vector<const Vector*> xs;
			std::vector<int> ys;
			for (std::size_t s = 0; s < x.size(); ++s) {
				if (labels[s] == model.classes[i] || labels[s] == model.classes[j]) {
					xs.push_back(&x[s]);
					ys.push_back(labels[s] == model.classes[i] ? 1 : -1);
				}
			}
			auto svm = train_binary(xs, ys, options);
			svm.positive = i;
			svm.negative = j;
			model.pairs.push_back(std::move(svm));
		}
	return model;
}

Decision decide(const LinearModel& model, const Vector& x)
{
	if (x.size() != model.dim())
		fail(ErrorCode::LengthMismatch, "vector length " + std::to_string(x.size()) + " does not match model length " +
		                                    std::to_string(model.dim()));
	const std::size_t k = model.classes.size();
	Decision d;
	d.votes.assign(k, 0);
	d.margins.assign(k, 0.0);
	for (const auto& svm : model.pairs) {
		const double f = svm.decision(x);
		if (f > 0.0)
			++d.votes[svm.positive];
		else if (f < 0.0)
			++d.votes[svm.negative];
		d.margins[svm.positive] += f;
		d.margins[svm.negative] -= f;
	}
	std::size_t best = 0;
	for (std::size_t c = 1; c < k; ++c)
		if (d.votes[c] > d.votes[best] || (d.votes[c] == d.votes[best] && d.margins[c] > d.margins[best]))
			best = c;
	d.label = model.classes[best];
	return d;
}

int predict(const LinearModel& model, const Vector& x)
{
	return decide(model, x).label;
}

double select_c(std::span<const Vector> x, std::span<const int> labels, std::span<const int> groups,
                std::span<const double> grid, int folds, const SvmOptions& options)
{
	if (grid.empty())
		fail(ErrorCode::InvalidConfig, "empty C grid");
	std::vector<int> ids(groups.begin(), groups.end());
	std::sort(ids.begin(), ids.end());
	ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
	folds = std::min<int>(folds, static_cast<int>(ids.size()));
	if (folds < 2)
		return grid.front();
	std::map<int, int> fold_of;
	for (std::size_t i = 0; i < ids.size(); ++i)
		fold_of[ids[i]] = static_cast<int>(i % folds);

	double best_c = grid.front();
	double best_acc = -1.0;
	for (double c : grid) {
		SvmOptions opt = options;
		opt.C = c;
		int correct = 0, total = 0;
		for (int f = 0; f < folds; ++f) {
			std::vector<Vector> tx;
			std::vector<int> ty;
			for (std::size_t s = 0; s < x.size(); ++s)
				if (fold_of[groups[s]] != f) {
					tx.push_back(x[s]);
					ty.push_back(labels[s]);
				}
			if (std::set<int>(ty.begin(), ty.end()).size() < 2)
				continue;
			const auto model = train_svm(tx, ty, opt);
			for (std::size_t s = 0; s < x.size(); ++s)
				if (fold_of[groups[s]] == f) {
					correct += predict(model, x[s]) == labels[s];
					++total;
				}
		}
		const double acc = total ? static_cast<double>(correct) / total : 0.0;
		if (acc > best_acc) {
			best_acc = acc;
			best_c = c;
		}
	}
	return best_c;
}

void save_model(const LinearModel& model, const std::filesystem::path& prefix)
{
	const auto dim = static_cast<std::uint32_t>(model.dim());
	FeatureTensor t({static_cast<std::uint32_t>(model.pairs.size()), dim + 1});
	std::size_t at = 0;
	for (const auto& svm : model.pairs) {
		for (std::uint32_t j = 0; j < dim; ++j)
			t.data[at++] = static_cast<float>(svm.w[j]);
		t.data[at++] = static_cast<float>(svm.b);
	}
	write_fmap(t, with_suffix(prefix, ".fmap"));

	std::ostringstream classes, layout, pairs, c;
	for (std::size_t i = 0; i < model.classes.size(); ++i)
		classes << (i ? "," : "") << model.classes[i];
	for (std::size_t i = 0; i < model.layout.size(); ++i)
		layout << (i ? "," : "") << model.layout[i];
	for (std::size_t i = 0; i < model.pairs.size(); ++i)
		pairs << (i ? "," : "") << model.pairs[i].positive << ':' << model.pairs[i].negative;
	c.precision(17);
	c << model.C;
	KeyValues kv;
	kv.set("classes", classes.str());
	kv.set("C", c.str());
	kv.set("layout", layout.str());
	kv.set("pairs", pairs.str());
	kv.set("dim", std::to_string(dim));
	kv.write(with_suffix(prefix, ".txt"));
}

LinearModel load_model(const std::filesystem::path& prefix)
{
	const auto kv = KeyValues::read(with_suffix(prefix, ".txt"));
	const auto t = read_fmap(with_suffix(prefix, ".fmap"));
	LinearModel model;
	for (const auto& c : split_list(kv.get("classes")))
		model.classes.push_back(std::stoi(c));
	model.C = std::stod(kv.get("C"));
	model.layout = split_list(kv.get("layout"));
	const auto dim = std::stoul(kv.get("dim"));
	const auto pair_list = split_list(kv.get("pairs"));
	if (t.dims.size() != 2 || t.dims[0] != pair_list.size() || t.dims[1] != dim + 1)
		fail(ErrorCode::ShapeMismatch, "model tensor does not match its sidecar");
	std::size_t at = 0;
	for (const auto& p : pair_list) {
		const auto colon = p.find(':');
		if (colon == std::string::npos)
			fail(ErrorCode::ParseError, "bad pair entry '" + p + "'");
		BinarySvm svm;
		svm.positive = std::stoi(p.substr(0, colon));
		svm.negative = std::stoi(p.substr(colon + 1));
		svm.w.resize(static_cast<Eigen::Index>(dim));
		for (std::size_t j = 0; j < dim; ++j)
			svm.w[static_cast<Eigen::Index>(j)] = t.data[at++];
		svm.b = t.data[at++];
		model.pairs.push_back(std::move(svm));
	}
	return model;
}

} // namespace covfer
