// covfer: batch front end for the expression-recognition pipeline.

#include "covfer/error.hpp"
#include "covfer/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <numeric>

using namespace covfer;
namespace fs = std::filesystem;

namespace {

constexpr int exit_usage = 2;
constexpr int exit_internal = 1;

/// Command-line values that override the config file when given.
struct Overrides
{
	std::string config;
	std::vector<std::string> streams;
	std::optional<int> codebook_size;
	std::string regions;
	std::vector<Eigen::Index> spd_dims;
	std::optional<double> spd_epsilon;
	std::optional<std::uint64_t> spd_seed;
	std::optional<std::uint64_t> kmeans_seed;
	std::optional<int> kmeans_restarts;
	std::optional<std::uint64_t> fold_seed;
	std::optional<int> folds;
	std::optional<double> svm_c;
	bool svm_grid = false;

	void attach(CLI::App& cmd)
	{
		cmd.add_option("--config", config, "run configuration file");
		cmd.add_option("--streams", streams, "streams to fuse, in order")->delimiter(',');
		cmd.add_option("--codebook-size", codebook_size);
		cmd.add_option("--regions", regions, "grid levels, e.g. 1,2");
		cmd.add_option("--spd-dims", spd_dims, "deep reduction schedule")->delimiter(',');
		cmd.add_option("--spd-eps", spd_epsilon);
		cmd.add_option("--spd-seed", spd_seed);
		cmd.add_option("--kmeans-seed", kmeans_seed);
		cmd.add_option("--kmeans-restarts", kmeans_restarts);
		cmd.add_option("--fold-seed", fold_seed);
		cmd.add_option("--folds", folds);
		cmd.add_option("--svm-c", svm_c);
		cmd.add_flag("--svm-grid", svm_grid, "choose C per fold from 0.1, 1, 10");
	}

	RunConfig resolve(RunConfig c) const
	{
		if (!config.empty())
			c = RunConfig::read(config);
		if (!streams.empty())
			c.streams = streams;
		if (codebook_size)
			c.codebook_size = *codebook_size;
		if (!regions.empty())
			c.regions = RegionSpec::parse(regions);
		if (!spd_dims.empty())
			c.spd_dims = spd_dims;
		if (spd_epsilon)
			c.spd_epsilon = *spd_epsilon;
		if (spd_seed)
			c.spd_seed = *spd_seed;
		if (kmeans_seed)
			c.kmeans_seed = *kmeans_seed;
		if (kmeans_restarts)
			c.kmeans_restarts = *kmeans_restarts;
		if (fold_seed)
			c.fold_seed = *fold_seed;
		if (folds)
			c.fold_count = *folds;
		if (svm_c)
			c.svm_c = *svm_c;
		if (svm_grid)
			c.svm_grid = true;
		c.validate();
		return c;
	}
};

void write_map(const MapImage& image, const std::string& prefix)
{
	write_fmap(to_tensor(image), prefix + ".fmap");
	write_pgm(image, prefix + ".pgm");
}

} // namespace

int main(int argc, char** argv)
{
	CLI::App app{"3D facial expression recognition with covariance descriptors"};
	app.require_subcommand(1);
	std::function<void()> run;

	// synth
	auto* synth = app.add_subcommand("synth", "write a synthetic dataset and its run configuration");
	fs::path synth_out;
	SyntheticOptions synth_opts;
	synth->add_option("--out", synth_out, "output directory")->required();
	synth->add_option("--seed", synth_opts.seed);
	synth->add_option("--subjects", synth_opts.subjects);
	synth->add_option("--classes", synth_opts.classes);
	synth->add_option("--subdivisions", synth_opts.mesh_subdivisions, "icosphere subdivision level");
	synth->callback([&] {
		run = [&] {
			const auto m = generate_synthetic(synth_out, synth_opts);
			synthetic_config(synth_opts).write(synth_out / "run.cfg");
			std::cout << m.entries.size() << " samples written to " << synth_out.string() << "\n";
		};
	});

	// extract-shallow
	auto* shallow = app.add_subcommand("extract-shallow", "shallow patch covariances of one mesh");
	fs::path shallow_mesh, shallow_out;
	std::string shallow_maps;
	Overrides shallow_ov;
	std::optional<int> patch_count;
	shallow->add_option("--mesh", shallow_mesh, "OBJ or PLY mesh")->required();
	shallow->add_option("--out", shallow_out, "FMAP [n, 6, 6]")->required();
	shallow->add_option("--patches", patch_count, "number of patches");
	shallow->add_option("--maps", shallow_maps, "also write <prefix>.depth and <prefix>.curv map images");
	shallow->add_option("--config", shallow_ov.config, "run configuration file");
	shallow->callback([&] {
		run = [&] {
			auto c = shallow_ov.resolve({});
			if (patch_count)
				c.patches.count = *patch_count;
			const auto mesh = prepare_mesh(read_mesh(shallow_mesh), c);
			const auto descs = shallow_descriptors(mesh, c.patches);
			write_fmap(stack_matrices(descs), shallow_out);
			if (!shallow_maps.empty()) {
				write_map(render_depth_map(mesh), shallow_maps + ".depth");
				write_map(render_curvature_map(mesh), shallow_maps + ".curv");
			}
			std::cout << descs.size() << " descriptors written to " << shallow_out.string() << "\n";
		};
	});

	// pool
	auto* pool = app.add_subcommand("pool", "region covariances of a feature tensor");
	fs::path pool_in, pool_out;
	std::string pool_regions_arg = "1,2", pool_stream_name;
	pool->add_option("--in", pool_in, "FMAP [c, h, w]")->required();
	pool->add_option("--out", pool_out, "FMAP [n, c, c]")->required();
	pool->add_option("--regions", pool_regions_arg, "grid levels, e.g. 1,2");
	pool->add_option("--stream", pool_stream_name, "stream name, checks the channel count");
	pool->callback([&] {
		run = [&] {
			const auto spec = RegionSpec::parse(pool_regions_arg);
			const auto tensor = read_fmap(pool_in);
			if (const auto c = expected_channels(pool_stream_name);
			    c && (tensor.dims.size() != 3 || tensor.dims[0] != *c))
				fail(ErrorCode::ShapeMismatch, pool_stream_name + " tensors need " + std::to_string(*c) + " channels");
			const auto pooled = pool_regions(tensor, spec);
			write_fmap(stack_matrices(pooled), pool_out);
			std::cout << pooled.size() << " covariances written to " << pool_out.string() << "\n";
		};
	});

	// reduce
	auto* reduce = app.add_subcommand("reduce", "BiMap/ReEig/LogEig reduction of stacked SPD matrices");
	fs::path reduce_in, reduce_out;
	std::vector<Eigen::Index> reduce_dims{512, 250, 100, 50};
	double reduce_eps = 1e-4;
	std::uint64_t reduce_seed = 1;
	std::string reduce_chain;
	bool reduce_flat = false;
	reduce->add_option("--in", reduce_in, "FMAP [n, d, d]")->required();
	reduce->add_option("--out", reduce_out, "FMAP [n, d', d'] or [n, d'(d'+1)/2] with --flatten")->required();
	reduce->add_option("--spd-dims", reduce_dims, "dimension schedule")->delimiter(',');
	reduce->add_option("--spd-eps", reduce_eps);
	reduce->add_option("--seed", reduce_seed, "BiMap weight seed");
	reduce->add_option("--save-chain", reduce_chain, "also write the frozen weights under this prefix");
	reduce->add_flag("--flatten", reduce_flat, "write flattened vectors");
	reduce->callback([&] {
		run = [&] {
			const auto chain = SpdChain::init({reduce_dims, reduce_eps}, reduce_seed);
			const auto input = unstack_matrices(read_fmap(reduce_in));
			if (reduce_flat) {
				const auto flat = reduce_descriptors(input, chain);
				const auto len = static_cast<std::uint32_t>(flat.front().size());
				FeatureTensor t({static_cast<std::uint32_t>(flat.size()), len});
				for (std::size_t i = 0; i < flat.size(); ++i)
					for (std::uint32_t j = 0; j < len; ++j)
						t.data[i * len + j] = static_cast<float>(flat[i][j]);
				write_fmap(t, reduce_out);
			} else {
				std::vector<SymMatrix> out;
				for (const auto& m : input)
					out.push_back(spd_reduce(m, chain));
				write_fmap(stack_matrices(out), reduce_out);
			}
			if (!reduce_chain.empty())
				save_chain(chain, reduce_chain);
			std::cout << input.size() << " matrices reduced to " << reduce_dims.back() << " x "
			          << reduce_dims.back() << "\n";
		};
	});

	// train
	auto* train = app.add_subcommand("train", "fit codebooks and the classifier on a whole manifest");
	fs::path train_manifest, train_out;
	Overrides train_ov;
	train->add_option("--manifest", train_manifest)->required();
	train->add_option("--out", train_out, "model directory")->required();
	train_ov.attach(*train);
	train->callback([&] {
		run = [&] {
			const auto c = train_ov.resolve({});
			const auto features = extract_features(read_manifest(train_manifest), c);
			std::vector<std::size_t> all(features.sample_ids.size());
			std::iota(all.begin(), all.end(), std::size_t{0});
			save_trained(train_model(features, c, all, c.fold_seed), train_out);
			c.write(train_out / "run.cfg");
			std::cout << "model for " << all.size() << " samples written to " << train_out.string() << "\n";
		};
	});

	// eval
	auto* eval = app.add_subcommand("eval", "cross-validate, or score a trained model, on a manifest");
	fs::path eval_manifest, eval_model, eval_summary;
	Overrides eval_ov;
	eval->add_option("--manifest", eval_manifest)->required();
	eval->add_option("--model", eval_model, "trained model directory; cross-validates when absent");
	eval->add_option("--summary", eval_summary, "machine-readable summary file");
	eval_ov.attach(*eval);
	eval->callback([&] {
		run = [&] {
			const auto manifest = read_manifest(eval_manifest);
			CvResult result;
			if (eval_model.empty()) {
				result = run_cv(manifest, eval_ov.resolve({}));
			} else {
				if (eval_ov.config.empty())
					eval_ov.config = (eval_model / "run.cfg").string();
				const auto c = eval_ov.resolve({});
				const auto model = load_trained(eval_model);
				const auto features = extract_features(manifest, c);
				std::vector<Expression> truth, predicted;
				for (std::size_t i = 0; i < features.sample_ids.size(); ++i) {
					truth.push_back(features.labels[i]);
					predicted.push_back(predict_sample(model, features, i));
				}
				for (int label : model.classifier.classes)
					result.classes.push_back(static_cast<Expression>(label));
				result.folds.push_back(make_fold_report(0, result.classes, truth, predicted));
			}
			print_report(result, std::cout);
			if (!eval_summary.empty())
				write_summary(result, eval_summary);
		};
	});

	// sweep
	auto* sweep = app.add_subcommand("sweep", "cross-validated accuracy per codebook size");
	fs::path sweep_manifest, sweep_out;
	std::vector<int> sweep_sizes(codebook_sizes.begin(), codebook_sizes.end());
	Overrides sweep_ov;
	sweep->add_option("--manifest", sweep_manifest)->required();
	sweep->add_option("--sizes", sweep_sizes, "codebook sizes")->delimiter(',');
	sweep->add_option("--out", sweep_out, "TSV table");
	sweep_ov.attach(*sweep);
	sweep->callback([&] {
		run = [&] {
			const auto c = sweep_ov.resolve({});
			for (int k : sweep_sizes)
				if (!is_codebook_size(k))
					fail(ErrorCode::InvalidConfig, "codebook size " + std::to_string(k) + " is not allowed");
			const auto features = extract_features(read_manifest(sweep_manifest), c);
			const auto rows = sweep_codebooks(features, c, sweep_sizes);
			std::cout << "codebook_size\tmean_accuracy\n";
			for (const auto& r : rows)
				std::cout << r.codebook_size << '\t' << r.mean_accuracy << '\n';
			if (!sweep_out.empty())
				write_sweep(rows, sweep_out);
		};
	});

	try {
		app.parse(argc, argv);
	} catch (const CLI::ParseError& e) {
		const int code = app.exit(e);
		return code == 0 ? 0 : exit_usage;
	}

	try {
		run();
	} catch (const Error& e) {
		std::cerr << "error: " << e.what() << "\n";
		return static_cast<int>(family_of(e.code()));
	} catch (const std::exception& e) {
		std::cerr << "internal error: " << e.what() << "\n";
		return exit_internal;
	}
	return 0;
}
