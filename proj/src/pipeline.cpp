#include "covfer/pipeline.hpp"

#include "covfer/error.hpp"
#include "covfer/keyvalue.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <ostream>
#include <set>
#include <sstream>

namespace covfer {

namespace {

std::string fmt17(double v)
{
	char buf[40];
	std::snprintf(buf, sizeof buf, "%.17g", v);
	return buf;
}

std::string join(const std::vector<std::string>& items, char sep = ',')
{
	std::string out;
	for (std::size_t i = 0; i < items.size(); ++i) {
		if (i)
			out += sep;
		out += items[i];
	}
	return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text)
{
	T value{};
	const char* end = text.data() + text.size();
	const auto [ptr, ec] = std::from_chars(text.data(), end, value);
	if (ec != std::errc{} || ptr != end)
		fail(ErrorCode::InvalidConfig, "bad value '" + text + "' for " + key);
	return value;
}

bool parse_bool(const std::string& key, const std::string& text)
{
	if (text == "1" || text == "true" || text == "yes")
		return true;
	if (text == "0" || text == "false" || text == "no")
		return false;
	fail(ErrorCode::InvalidConfig, "bad boolean '" + text + "' for " + key);
}

std::vector<Eigen::Index> parse_dims(const std::string& key, const std::string& text)
{
	std::vector<Eigen::Index> dims;
	for (const auto& d : split_list(text))
		dims.push_back(parse_number<long>(key, d));
	return dims;
}

bool starts_with(const std::string& s, std::string_view prefix)
{
	return s.compare(0, prefix.size(), prefix) == 0;
}

} // namespace

bool is_deep_stream(const std::string& stream)
{
	return stream != shallow_stream;
}

std::optional<std::uint32_t> expected_channels(const std::string& stream)
{
	if (starts_with(stream, "vgg."))
		return 512;
	if (starts_with(stream, "alexnet."))
		return 256;
	return std::nullopt;
}

void RunConfig::validate() const
{
	if (streams.empty())
		fail(ErrorCode::InvalidConfig, "at least one stream is required");
	if (std::set<std::string>(streams.begin(), streams.end()).size() != streams.size())
		fail(ErrorCode::InvalidConfig, "streams must be distinct");
	if (fold_count < 2)
		fail(ErrorCode::InvalidConfig, "fold count must be at least 2");
	if (!is_codebook_size(codebook_size))
		fail(ErrorCode::InvalidConfig, "codebook size " + std::to_string(codebook_size) +
		                                   " is not one of 16, 32, 64, 128, 256, 512, 1024");
	regions.validate();
	if (!(spd_epsilon > 0.0))
		fail(ErrorCode::InvalidConfig, "SPD epsilon must be positive");
	if (!(svm_c > 0.0))
		fail(ErrorCode::InvalidConfig, "SVM C must be positive");
	if (kmeans_restarts < 1)
		fail(ErrorCode::InvalidConfig, "k-means restarts must be at least 1");
	for (const auto& s : streams)
		if (is_deep_stream(s))
			schedule_for(s).validate();
}

SpdChainConfig RunConfig::schedule_for(const std::string& stream) const
{
	if (!spd_dims.empty())
		return {spd_dims, spd_epsilon};
	if (starts_with(stream, "vgg."))
		return vgg_schedule(spd_epsilon);
	if (starts_with(stream, "alexnet."))
		return alexnet_schedule(spd_epsilon);
	fail(ErrorCode::InvalidConfig, "stream '" + stream + "' needs an explicit spd_dims schedule");
}

RunConfig RunConfig::read(const std::filesystem::path& path)
{
	const auto kv = KeyValues::read(path);
	RunConfig c;
	for (const auto& [key, value] : kv.items()) {
		if (key == "streams")
			c.streams = split_list(value);
		else if (key == "codebook_size")
			c.codebook_size = parse_number<int>(key, value);
		else if (key == "regions")
			c.regions = RegionSpec::parse(value);
		else if (key == "spd_dims")
			c.spd_dims = parse_dims(key, value);
		else if (key == "spd_epsilon")
			c.spd_epsilon = parse_number<double>(key, value);
		else if (key == "spd_seed")
			c.spd_seed = parse_number<std::uint64_t>(key, value);
		else if (key == "kmeans_seed")
			c.kmeans_seed = parse_number<std::uint64_t>(key, value);
		else if (key == "kmeans_restarts")
			c.kmeans_restarts = parse_number<int>(key, value);
		else if (key == "fold_seed")
			c.fold_seed = parse_number<std::uint64_t>(key, value);
		else if (key == "fold_count")
			c.fold_count = parse_number<int>(key, value);
		else if (key == "svm_c")
			c.svm_c = parse_number<double>(key, value);
		else if (key == "svm_grid")
			c.svm_grid = parse_bool(key, value);
		else if (key == "smoothing_iterations")
			c.preprocess.smoothing_iterations = parse_number<int>(key, value);
		else if (key == "crop")
			c.preprocess.crop = parse_bool(key, value);
		else if (key == "max_hole_edges")
			c.preprocess.max_hole_edges = parse_number<int>(key, value);
		else if (key == "median_passes")
			c.preprocess.median_passes = parse_number<int>(key, value);
		else if (key == "ring_radius_factor")
			c.curvature.ring_radius_factor = parse_number<double>(key, value);
		else if (key == "patch_count")
			c.patches.count = parse_number<int>(key, value);
		else if (key == "patch_radius_fraction")
			c.patches.radius_fraction = parse_number<double>(key, value);
		else
			fail(ErrorCode::InvalidConfig, path.string() + ": unknown key '" + key + "'");
	}
	c.validate();
	return c;
}

void RunConfig::write(const std::filesystem::path& path) const
{
	KeyValues kv;
	kv.set("streams", join(streams));
	kv.set("codebook_size", std::to_string(codebook_size));
	kv.set("regions", regions.str());
	std::vector<std::string> dims;
	for (auto d : spd_dims)
		dims.push_back(std::to_string(d));
	if (!dims.empty())
		kv.set("spd_dims", join(dims));
	kv.set("spd_epsilon", fmt17(spd_epsilon));
	kv.set("spd_seed", std::to_string(spd_seed));
	kv.set("kmeans_seed", std::to_string(kmeans_seed));
	kv.set("kmeans_restarts", std::to_string(kmeans_restarts));
	kv.set("fold_seed", std::to_string(fold_seed));
	kv.set("fold_count", std::to_string(fold_count));
	kv.set("svm_c", fmt17(svm_c));
	kv.set("svm_grid", svm_grid ? "1" : "0");
	kv.set("smoothing_iterations", std::to_string(preprocess.smoothing_iterations));
	kv.set("crop", preprocess.crop ? "1" : "0");
	kv.set("max_hole_edges", std::to_string(preprocess.max_hole_edges));
	kv.set("median_passes", std::to_string(preprocess.median_passes));
	kv.set("ring_radius_factor", fmt17(curvature.ring_radius_factor));
	kv.set("patch_count", std::to_string(patches.count));
	kv.set("patch_radius_fraction", fmt17(patches.radius_fraction));
	kv.write(path);
}

TriMesh prepare_mesh(const TriMesh& raw, const RunConfig& config)
{
	TriMesh mesh = preprocess(raw, config.preprocess);
	Vec3 lo = mesh.vertices.front(), hi = lo;
	for (const auto& v : mesh.vertices) {
		lo = lo.cwiseMin(v);
		hi = hi.cwiseMax(v);
	}
	const Vec3 centre = 0.5 * (lo + hi);
	for (auto& v : mesh.vertices)
		v -= centre;
	return estimate_curvatures(mesh, config.curvature);
}

std::vector<SpdMatrix> extract_shallow(const TriMesh& raw, const RunConfig& config)
{
	return shallow_descriptors(prepare_mesh(raw, config), config.patches);
}

std::vector<SpdMatrix> pool_stream(const FeatureTensor& tensor, const std::string& stream, const RunConfig& config)
{
	if (tensor.dims.size() != 3)
		fail(ErrorCode::ShapeMismatch, stream + ": expected a [c, h, w] tensor");
	if (const auto c = expected_channels(stream); c && tensor.dims[0] != *c)
		fail(ErrorCode::ShapeMismatch, stream + ": expected " + std::to_string(*c) + " channels, got " +
		                                   std::to_string(tensor.dims[0]));
	const auto schedule = config.schedule_for(stream);
	if (tensor.dims[0] != static_cast<std::uint32_t>(schedule.dims.front()))
		fail(ErrorCode::ShapeMismatch, stream + ": " + std::to_string(tensor.dims[0]) +
		                                   " channels do not match the schedule's input " +
		                                   std::to_string(schedule.dims.front()));
	return pool_regions(tensor, config.regions);
}

DescriptorSet reduce_descriptors(std::span<const SpdMatrix> matrices, const SpdChain& chain)
{
	DescriptorSet out;
	out.reserve(matrices.size());
	for (const auto& m : matrices)
		out.push_back(flatten(spd_reduce(m, chain)));
	return out;
}

FeatureSet extract_features(const DatasetManifest& manifest, const RunConfig& config)
{
	config.validate();
	if (manifest.entries.empty())
		fail(ErrorCode::EmptyInput, "manifest has no entries");
	FeatureSet fs;
	fs.streams = config.streams;
	for (const auto& e : manifest.entries) {
		fs.sample_ids.push_back(e.sample_id);
		fs.subjects.push_back(e.subject_id);
		fs.labels.push_back(e.label);
	}
	for (const auto& stream : config.streams) {
		std::vector<DescriptorSet> per_sample;
		if (is_deep_stream(stream)) {
			const auto chain = SpdChain::init(config.schedule_for(stream), config.spd_seed);
			for (const auto& e : manifest.entries) {
				const auto* path = e.tensor_path(stream);
				if (!path)
					fail(ErrorCode::MissingStreamArtifacts, e.sample_id + " has no '" + stream + "' tensor");
				const auto pooled = pool_stream(read_fmap(manifest.resolve(*path)), stream, config);
				per_sample.push_back(reduce_descriptors(pooled, chain));
			}
		} else {
			const auto chain = SpdChain::init({{6}, config.spd_epsilon}, config.spd_seed);
			for (const auto& e : manifest.entries) {
				if (!e.mesh_path)
					fail(ErrorCode::MissingStreamArtifacts, e.sample_id + " has no mesh");
				const auto shallow = extract_shallow(read_mesh(manifest.resolve(*e.mesh_path)), config);
				per_sample.push_back(reduce_descriptors(shallow, chain));
			}
		}
		fs.descriptors.push_back(std::move(per_sample));
	}
	return fs;
}

std::vector<std::vector<std::string>> subject_folds(std::vector<std::string> subjects, int folds, std::uint64_t seed)
{
	std::sort(subjects.begin(), subjects.end());
	subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
	if (folds < 2)
		fail(ErrorCode::InvalidConfig, "fold count must be at least 2");
	if (subjects.size() < static_cast<std::size_t>(folds))
		fail(ErrorCode::TooFewSubjects, std::to_string(subjects.size()) + " subjects cannot fill " +
		                                    std::to_string(folds) + " folds");
	std::mt19937_64 rng(seed);
	for (std::size_t i = subjects.size(); i > 1; --i) {
		const auto j = std::min(i - 1, static_cast<std::size_t>(static_cast<double>(rng() >> 11) * 0x1.0p-53 * i));
		std::swap(subjects[i - 1], subjects[j]);
	}
	std::vector<std::vector<std::string>> out(folds);
	for (std::size_t i = 0; i < subjects.size(); ++i)
		out[i % folds].push_back(subjects[i]);
	for (auto& f : out)
		std::sort(f.begin(), f.end());
	return out;
}

int FoldReport::total() const
{
	int n = 0;
	for (const auto& row : confusion)
		for (int v : row)
			n += v;
	return n;
}

double FoldReport::accuracy() const
{
	int diag = 0;
	for (std::size_t i = 0; i < confusion.size(); ++i)
		diag += confusion[i][i];
	const int n = total();
	return n ? static_cast<double>(diag) / n : 0.0;
}

std::vector<double> FoldReport::class_rates() const
{
	std::vector<double> rates;
	for (std::size_t i = 0; i < confusion.size(); ++i) {
		int row = 0;
		for (int v : confusion[i])
			row += v;
		rates.push_back(row ? static_cast<double>(confusion[i][i]) / row : std::nan(""));
	}
	return rates;
}

FoldReport make_fold_report(int fold, const std::vector<Expression>& classes, std::span<const Expression> truth,
                            std::span<const Expression> predicted)
{
	if (truth.size() != predicted.size())
		fail(ErrorCode::LengthMismatch, "truth and prediction counts differ");
	FoldReport r;
	r.fold = fold;
	r.classes = classes;
	r.confusion.assign(classes.size(), std::vector<int>(classes.size(), 0));
	auto index = [&](Expression e) {
		const auto it = std::find(classes.begin(), classes.end(), e);
		if (it == classes.end())
			fail(ErrorCode::UnknownLabel, std::string(to_string(e)) + " is not in the class list");
		return static_cast<std::size_t>(it - classes.begin());
	};
	for (std::size_t i = 0; i < truth.size(); ++i)
		++r.confusion[index(truth[i])][index(predicted[i])];
	return r;
}

double CvResult::mean_accuracy() const
{
	if (folds.empty())
		return 0.0;
	double s = 0.0;
	for (const auto& f : folds)
		s += f.accuracy();
	return s / static_cast<double>(folds.size());
}

std::vector<std::vector<int>> CvResult::pooled_confusion() const
{
	std::vector<std::vector<int>> m(classes.size(), std::vector<int>(classes.size(), 0));
	for (const auto& f : folds)
		for (std::size_t i = 0; i < classes.size(); ++i)
			for (std::size_t j = 0; j < classes.size(); ++j)
				m[i][j] += f.confusion[i][j];
	return m;
}

namespace {

void check_layout(const FeatureSet& features, const std::vector<std::string>& streams)
{
	if (features.streams != streams)
		fail(ErrorCode::MissingStream, "feature streams [" + join(features.streams) +
		                                   "] do not match the configured layout [" + join(streams) + "]");
}

std::map<std::string, int> subject_indices(const std::vector<std::string>& subjects)
{
	std::vector<std::string> unique = subjects;
	std::sort(unique.begin(), unique.end());
	unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
	std::map<std::string, int> index;
	for (std::size_t i = 0; i < unique.size(); ++i)
		index[unique[i]] = static_cast<int>(i);
	return index;
}

} // namespace

TrainedModel train_model(const FeatureSet& features, const RunConfig& config, std::span<const std::size_t> samples,
                         std::uint64_t svm_seed)
{
	config.validate();
	check_layout(features, config.streams);
	if (samples.empty())
		fail(ErrorCode::EmptyInput, "no training samples");

	TrainedModel model;
	for (std::size_t s = 0; s < config.streams.size(); ++s) {
		std::vector<Vector> pool;
		for (auto i : samples)
			for (const auto& d : features.descriptors[s][i])
				pool.push_back(d);
		auto cb = train_codebook(pool, config.codebook_size, config.kmeans_seed + s, {300, config.kmeans_restarts});
		cb.kind = is_deep_stream(config.streams[s]) ? CodebookKind::Deep : CodebookKind::Shallow;
		cb.stream = config.streams[s];
		model.codebooks.push_back(std::move(cb));
	}

	const auto subject_index = subject_indices(features.subjects);
	std::vector<Vector> x;
	std::vector<int> y, groups;
	for (auto i : samples) {
		x.push_back(encode_sample(model, features, i));
		y.push_back(static_cast<int>(features.labels[i]));
		groups.push_back(subject_index.at(features.subjects[i]));
	}
	SvmOptions svm;
	svm.C = config.svm_c;
	svm.seed = svm_seed;
	if (config.svm_grid) {
		const std::vector<double> grid{0.1, 1.0, 10.0};
		svm.C = select_c(x, y, groups, grid, 5, svm);
	}
	model.classifier = train_svm(x, y, svm);
	model.classifier.layout = config.streams;
	return model;
}

Vector encode_sample(const TrainedModel& model, const FeatureSet& features, std::size_t sample)
{
	std::vector<std::string> layout;
	for (const auto& cb : model.codebooks)
		layout.push_back(cb.stream);
	check_layout(features, layout);
	std::vector<StreamHistogram> hists;
	for (std::size_t s = 0; s < model.codebooks.size(); ++s)
		hists.push_back({layout[s], quantize(features.descriptors[s][sample], model.codebooks[s])});
	return fuse(hists, layout);
}

Expression predict_sample(const TrainedModel& model, const FeatureSet& features, std::size_t sample)
{
	return static_cast<Expression>(predict(model.classifier, encode_sample(model, features, sample)));
}

void save_trained(const TrainedModel& model, const std::filesystem::path& dir)
{
	std::error_code ec;
	std::filesystem::create_directories(dir, ec);
	if (ec)
		fail(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
	for (const auto& cb : model.codebooks)
		save_codebook(cb, dir / ("codebook." + cb.stream));
	save_model(model.classifier, dir / "classifier");
}

TrainedModel load_trained(const std::filesystem::path& dir)
{
	TrainedModel model;
	model.classifier = load_model(dir / "classifier");
	for (const auto& stream : model.classifier.layout)
		model.codebooks.push_back(load_codebook(dir / ("codebook." + stream)));
	return model;
}

CvResult run_cv(const FeatureSet& features, const RunConfig& config)
{
	config.validate();
	check_layout(features, config.streams);
	const std::size_t n = features.sample_ids.size();

	CvResult result;
	{
		std::set<Expression> present(features.labels.begin(), features.labels.end());
		result.classes.assign(present.begin(), present.end());
	}
	if (result.classes.size() < 2)
		fail(ErrorCode::SingleClass, "the manifest holds a single expression class");

	const auto folds = subject_folds(features.subjects, config.fold_count, config.fold_seed);
	for (int f = 0; f < config.fold_count; ++f) {
		const std::set<std::string> test_subjects(folds[f].begin(), folds[f].end());
		std::vector<std::size_t> train, test;
		for (std::size_t i = 0; i < n; ++i)
			(test_subjects.count(features.subjects[i]) ? test : train).push_back(i);
		for (auto i : train)
			if (test_subjects.count(features.subjects[i]))
				fail(ErrorCode::InvalidConfig, "subject leakage between train and test");

		const auto model = train_model(features, config, train, config.fold_seed + static_cast<std::uint64_t>(f));
		std::vector<Expression> truth, predicted;
		for (auto i : test) {
			truth.push_back(features.labels[i]);
			predicted.push_back(predict_sample(model, features, i));
		}
		auto report = make_fold_report(f, result.classes, truth, predicted);
		report.test_subjects = folds[f];
		result.folds.push_back(std::move(report));
	}
	return result;
}

CvResult run_cv(const DatasetManifest& manifest, const RunConfig& config)
{
	return run_cv(extract_features(manifest, config), config);
}

std::vector<SweepRow> sweep_codebooks(const FeatureSet& features, const RunConfig& config, std::span<const int> sizes)
{
	std::vector<SweepRow> rows;
	for (int k : sizes) {
		RunConfig c = config;
		c.codebook_size = k;
		rows.push_back({k, run_cv(features, c).mean_accuracy()});
	}
	return rows;
}

void write_sweep(std::span<const SweepRow> rows, const std::filesystem::path& path)
{
	std::ofstream out(path);
	out << "codebook_size\tmean_accuracy\n";
	for (const auto& r : rows)
		out << r.codebook_size << '\t' << fmt17(r.mean_accuracy) << '\n';
	if (!out)
		fail(ErrorCode::IoFailure, "cannot write " + path.string());
}

void print_report(const CvResult& result, std::ostream& out)
{
	const auto pooled = result.pooled_confusion();
	FoldReport all;
	all.classes = result.classes;
	all.confusion = pooled;
	const auto rates = all.class_rates();

	out << "folds: " << result.folds.size() << "\n";
	for (const auto& f : result.folds)
		out << "  fold " << f.fold << ": accuracy " << std::fixed << std::setprecision(4) << f.accuracy() << " ("
		    << f.total() << " samples, subjects " << join(f.test_subjects) << ")\n";
	out << "\nper-expression rate:\n";
	for (std::size_t i = 0; i < result.classes.size(); ++i)
		out << "  " << to_string(result.classes[i]) << "  " << std::setprecision(4) << rates[i] << "\n";
	out << "\nconfusion (rows = true, cols = predicted):\n     ";
	for (auto c : result.classes)
		out << std::setw(5) << to_string(c);
	out << "\n";
	for (std::size_t i = 0; i < result.classes.size(); ++i) {
		out << "  " << to_string(result.classes[i]) << " ";
		for (int v : pooled[i])
			out << std::setw(5) << v;
		out << "\n";
	}
	out << "\nmean accuracy: " << std::setprecision(4) << result.mean_accuracy() << "\n";
	out << std::defaultfloat;
}

void write_summary(const CvResult& result, const std::filesystem::path& path)
{
	KeyValues kv;
	std::vector<std::string> names;
	for (auto c : result.classes)
		names.emplace_back(to_string(c));
	kv.set("classes", join(names));
	kv.set("folds", std::to_string(result.folds.size()));
	for (const auto& f : result.folds) {
		const std::string p = "fold." + std::to_string(f.fold) + ".";
		std::vector<std::string> rows;
		for (const auto& row : f.confusion) {
			std::vector<std::string> cells;
			for (int v : row)
				cells.push_back(std::to_string(v));
			rows.push_back(join(cells));
		}
		kv.set(p + "subjects", join(f.test_subjects));
		kv.set(p + "confusion", join(rows, ';'));
		kv.set(p + "accuracy", fmt17(f.accuracy()));
		std::vector<std::string> rates;
		for (double r : f.class_rates())
			rates.push_back(fmt17(r));
		kv.set(p + "class_rates", join(rates));
	}
	kv.set("mean_accuracy", fmt17(result.mean_accuracy()));
	kv.write(path);
}

CvResult read_summary(const std::filesystem::path& path)
{
	const auto kv = KeyValues::read(path);
	CvResult r;
	for (const auto& name : split_list(kv.get("classes"))) {
		const auto e = parse_expression(name);
		if (!e)
			fail(ErrorCode::UnknownLabel, path.string() + ": unknown class '" + name + "'");
		r.classes.push_back(*e);
	}
	const int folds = parse_number<int>("folds", kv.get("folds"));
	for (int f = 0; f < folds; ++f) {
		const std::string p = "fold." + std::to_string(f) + ".";
		FoldReport fr;
		fr.fold = f;
		fr.classes = r.classes;
		fr.test_subjects = split_list(kv.get(p + "subjects"));
		for (const auto& row : split_list(kv.get(p + "confusion"), ';')) {
			std::vector<int> cells;
			for (const auto& c : split_list(row))
				cells.push_back(parse_number<int>(p + "confusion", c));
			if (cells.size() != r.classes.size())
				fail(ErrorCode::ParseError, path.string() + ": confusion row has the wrong width");
			fr.confusion.push_back(std::move(cells));
		}
		if (fr.confusion.size() != r.classes.size())
			fail(ErrorCode::ParseError, path.string() + ": confusion has the wrong height");
		r.folds.push_back(std::move(fr));
	}
	return r;
}

namespace {

std::mt19937_64 tagged_rng(std::uint64_t seed, std::uint32_t tag, std::uint32_t a, std::uint32_t b = 0)
{
	std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag, a, b};
	return std::mt19937_64(seq);
}

struct Bump
{
	Vec3 centre;
	double amplitude;
	double width;
};

std::vector<Bump> random_bumps(std::mt19937_64& rng, int count, double amplitude, double width)
{
	std::normal_distribution<double> normal;
	std::uniform_real_distribution<double> sign(-1.0, 1.0);
	std::vector<Bump> out;
	for (int i = 0; i < count; ++i) {
		// centres on the front half, where the viewer looks
		Vec3 c(normal(rng), normal(rng), std::abs(normal(rng)) + 0.6);
		const double s = sign(rng);
		out.push_back({c.normalized(), amplitude * (s < 0 ? -1.0 : 1.0) * (0.6 + 0.4 * std::abs(s)), width});
	}
	return out;
}

double bump_field(const std::vector<Bump>& bumps, const Vec3& unit)
{
	double r = 0.0;
	for (const auto& b : bumps)
		r += b.amplitude * std::exp(-(unit - b.centre).squaredNorm() / (2 * b.width * b.width));
	return r;
}

Matrix random_basis(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale)
{
	std::normal_distribution<double> normal(0.0, scale / std::sqrt(static_cast<double>(rows)));
	Matrix m(rows, cols);
	for (Eigen::Index i = 0; i < m.size(); ++i)
		m.data()[i] = normal(rng);
	return m;
}


std::string two_digits(int v)
{
	std::ostringstream s;
	s << std::setw(2) << std::setfill('0') << v;
	return s.str();
}

} // namespace

DatasetManifest generate_synthetic(const std::filesystem::path& dir, const SyntheticOptions& o)
{
	if (o.subjects < 1 || o.classes < 2 || o.classes > static_cast<int>(all_expressions.size()))
		fail(ErrorCode::InvalidConfig, "synthetic data needs >= 1 subject and 2..7 classes");
	std::error_code ec;
	std::filesystem::create_directories(dir / "meshes", ec);
	std::filesystem::create_directories(dir / "tensors", ec);
	if (ec)
		fail(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());

	const TriMesh base = make_icosphere(o.mesh_subdivisions);
	const auto c = static_cast<Eigen::Index>(o.channels);
	constexpr Eigen::Index class_rank = 4;
	constexpr Eigen::Index subject_rank = 2;

	std::vector<std::vector<Bump>> class_bumps;
	std::vector<Matrix> class_basis;
	for (int k = 0; k < o.classes; ++k) {
		auto rng = tagged_rng(o.seed, 1, static_cast<std::uint32_t>(k));
		class_bumps.push_back(random_bumps(rng, 3, 0.12, 0.35));
		class_basis.push_back(random_basis(rng, c, class_rank, 3.0));
	}

	DatasetManifest manifest;
	manifest.base_dir = dir;
	for (int s = 0; s < o.subjects; ++s) {
		auto srng = tagged_rng(o.seed, 2, static_cast<std::uint32_t>(s));
		const auto subject_bumps = random_bumps(srng, 2, 0.04, 0.5);
		const Matrix subject_basis = random_basis(srng, c, subject_rank, 1.0);
		const std::string subject = "p" + two_digits(s + 1);
		for (int k = 0; k < o.classes; ++k) {
			const Expression label = all_expressions[static_cast<std::size_t>(k)];
			const std::string id = subject + "_" + std::string(to_string(label));
			auto rng = tagged_rng(o.seed, 3, static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(k));
			std::normal_distribution<double> normal;

			TriMesh mesh = base;
			for (auto& v : mesh.vertices) {
				const Vec3 u = v.normalized();
				v = u * (1.0 + bump_field(class_bumps[k], u) + bump_field(subject_bumps, u) + 0.002 * normal(rng));
			}
			const auto mesh_rel = std::filesystem::path("meshes") / (id + ".obj");
			write_obj(mesh, dir / mesh_rel);

			FeatureTensor t({o.channels, o.map_size, o.map_size});
			const std::size_t plane = std::size_t(o.map_size) * o.map_size;
			Vector z(class_rank), w(subject_rank);
			for (std::size_t px = 0; px < plane; ++px) {
				for (auto& e : z)
					e = normal(rng);
				for (auto& e : w)
					e = normal(rng);
				const Vector v = class_basis[k] * z + subject_basis * w;
				for (Eigen::Index ch = 0; ch < c; ++ch)
					t.data[static_cast<std::size_t>(ch) * plane + px] = static_cast<float>(v[ch] + 0.5 * normal(rng));
			}
			const auto tensor_rel = std::filesystem::path("tensors") / (id + ".fmap");
			write_fmap(t, dir / tensor_rel);

			manifest.entries.push_back({id, subject, label, mesh_rel, {{std::string(synthetic_stream), tensor_rel}}});
		}
	}
	write_manifest(manifest, dir / "manifest.tsv");
	return manifest;
}

RunConfig synthetic_config(const SyntheticOptions& options)
{
	RunConfig c;
	c.streams = {std::string(synthetic_stream), std::string(shallow_stream)};
	c.codebook_size = 64;
	c.regions = RegionSpec{{1, 2}};
	const auto ch = static_cast<Eigen::Index>(options.channels);
	c.spd_dims = {ch, ch / 2, ch / 4};
	c.fold_count = 10;
	return c;
}

} // namespace covfer
