#pragma once

#include "covfer/spd.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace covfer {

struct SvmOptions
{
	double C = 1.0;
	/// Stop once (primal - dual) <= tolerance * primal.
	double tolerance = 1e-6;
	int max_epochs = 100000;
	/// Seeds the per-epoch coordinate order.
	std::uint64_t seed = 0;
};

/// Binary linear SVM separating classes[positive] (+1) from classes[negative] (-1).
struct BinarySvm
{
	int positive = 0;
	int negative = 1;
	Vector w;
	double b = 0.0;

	/// Primal objective (1/2)|w|^2 + (1/2)b^2 + C sum hinge, starting at zero
	/// weights, then after every accepted primal step.
	std::vector<double> objective_trace;
	/// Dual objective when training stopped.
	double dual_objective = 0.0;
	/// Dual coordinate sweeps run.
	int epochs = 0;

	double decision(const Vector& x) const { return w.dot(x) + b; }
};

/// One-vs-one linear SVM. Pairs are ordered (0,1), (0,2), ..., (1,2), ... over
/// the ascending class list.
struct LinearModel
{
	std::vector<int> classes;
	double C = 1.0;
	std::vector<BinarySvm> pairs;
	/// Stream order of the fused input vectors, checked by the pipeline.
	std::vector<std::string> layout;

	Eigen::Index dim() const { return pairs.empty() ? 0 : pairs.front().w.size(); }
};

/// Dual coordinate descent on the hinge loss with the bias as an extra
/// constant feature. The returned weights are a separate primal iterate that
/// moves towards the dual-induced weights by exact line search, and only when
/// that strictly lowers the primal objective. `y` holds +1 / -1.
BinarySvm train_binary(std::span<const Vector* const> x, std::span<const int> y, const SvmOptions& options);

/// Throws SingleClass with fewer than two labels and DegenerateFeatures when
/// every sample has the same vector.
LinearModel train_svm(std::span<const Vector> x, std::span<const int> labels, const SvmOptions& options = {});

struct Decision
{
	int label = 0;
	std::vector<int> votes;      ///< per class, in class order
	std::vector<double> margins; ///< summed signed margins per class
};

/// Majority vote over the pairs; ties go to the larger summed margin, then to
/// the earlier class.
Decision decide(const LinearModel& model, const Vector& x);
int predict(const LinearModel& model, const Vector& x);

/// C from `grid` with the best accuracy under group-disjoint inner folds;
/// ties go to the smaller C.
double select_c(std::span<const Vector> x, std::span<const int> labels, std::span<const int> groups,
                std::span<const double> grid, int folds, const SvmOptions& options = {});

/// Weights as FMAP [pairs, dim + 1] (bias last) plus a `<prefix>.txt` sidecar.
void save_model(const LinearModel& model, const std::filesystem::path& prefix);
LinearModel load_model(const std::filesystem::path& prefix);

} // namespace covfer
