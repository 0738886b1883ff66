#include "covfer/tensorio.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace covfer {

namespace {

constexpr char fmap_magic[4] = {'F', 'M', 'A', 'P'};
constexpr std::uint32_t fmap_version = 1;

void put_u32(std::string& out, std::uint32_t v)
{
	for (int i = 0; i < 4; ++i)
		out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t offset)
{
	std::uint32_t v = 0;
	for (int i = 0; i < 4; ++i)
		v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
	return v;
}

std::uint64_t checked_product(const std::vector<std::uint32_t>& dims)
{
	std::uint64_t n = 1;
	for (auto d : dims) {
		if (d == 0)
			fail(ErrorCode::DimMismatch, "zero extent in tensor dims");
		n *= d;
		if (n > (std::uint64_t{1} << 40))
			fail(ErrorCode::DimMismatch, "tensor dims overflow");
	}
	return n;
}

std::string read_file(const std::filesystem::path& path)
{
	std::ifstream in(path, std::ios::binary);
	if (!in)
		fail(ErrorCode::IoFailure, "cannot open " + path.string());
	std::ostringstream ss;
	ss << in.rdbuf();
	return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes)
{
	std::ofstream out(path, std::ios::binary | std::ios::trunc);
	if (!out)
		fail(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
	out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
	if (!out)
		fail(ErrorCode::IoFailure, "write failed for " + path.string());
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
	std::vector<std::string_view> parts;
	std::size_t start = 0;
	while (true) {
		auto pos = s.find(sep, start);
		parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
		if (pos == std::string_view::npos)
			break;
		start = pos + 1;
	}
	return parts;
}

std::vector<std::string> tokens(const std::string& line)
{
	std::istringstream ss(line);
	std::vector<std::string> out;
	std::string t;
	while (ss >> t)
		out.push_back(t);
	return out;
}

double parse_double(const std::string& s, std::size_t line_no)
{
	double v = 0.0;
	auto res = std::from_chars(s.data(), s.data() + s.size(), v);
	if (res.ec != std::errc() || res.ptr != s.data() + s.size())
		fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad number '" + s + "'");
	return v;
}

long long parse_int(const std::string& s, std::size_t line_no)
{
	long long v = 0;
	auto res = std::from_chars(s.data(), s.data() + s.size(), v);
	if (res.ec != std::errc() || res.ptr != s.data() + s.size())
		fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad integer '" + s + "'");
	return v;
}

void check_mesh(const TriMesh& mesh)
{
	if (mesh.vertices.size() < 3)
		fail(ErrorCode::ParseError, "mesh has fewer than 3 vertices");
	for (std::size_t i = 0; i < mesh.faces.size(); ++i)
		for (auto v : mesh.faces[i])
			if (v >= mesh.vertices.size())
				fail(ErrorCode::DanglingIndex, "face " + std::to_string(i) + " references vertex " +
				                                   std::to_string(v) + " of " +
				                                   std::to_string(mesh.vertices.size()));
}

} // namespace

FeatureTensor::FeatureTensor(std::vector<std::uint32_t> dims_, std::vector<float> data_)
    : dims(std::move(dims_)), data(std::move(data_))
{
}

FeatureTensor::FeatureTensor(std::vector<std::uint32_t> dims_) : dims(std::move(dims_))
{
	data.assign(checked_product(dims), 0.0f);
}

void validate(const FeatureTensor& tensor)
{
	if (tensor.dims.empty())
		fail(ErrorCode::DimMismatch, "tensor has no dims");
	if (checked_product(tensor.dims) != tensor.data.size())
		fail(ErrorCode::DimMismatch, "dims product " + std::to_string(checked_product(tensor.dims)) +
		                                 " != payload length " + std::to_string(tensor.data.size()));
	for (std::size_t i = 0; i < tensor.data.size(); ++i)
		if (!std::isfinite(tensor.data[i]))
			fail(ErrorCode::NonFiniteValue, "non-finite value at index " + std::to_string(i));
}

std::string encode_fmap(const FeatureTensor& tensor)
{
	validate(tensor);
	std::string out;
	out.reserve(12 + 4 * tensor.dims.size() + 4 * tensor.data.size());
	out.append(fmap_magic, 4);
	put_u32(out, fmap_version);
	put_u32(out, static_cast<std::uint32_t>(tensor.dims.size()));
	for (auto d : tensor.dims)
		put_u32(out, d);
	for (float f : tensor.data)
		put_u32(out, std::bit_cast<std::uint32_t>(f));
	return out;
}

FeatureTensor decode_fmap(std::string_view bytes)
{
	if (bytes.size() < 4 || std::memcmp(bytes.data(), fmap_magic, 4) != 0)
		fail(ErrorCode::BadMagic, "missing FMAP magic");
	if (bytes.size() < 12)
		fail(ErrorCode::DimMismatch, "truncated FMAP header");
	auto version = get_u32(bytes, 4);
	if (version != fmap_version)
		fail(ErrorCode::UnsupportedVersion, "FMAP version " + std::to_string(version));
	auto ndim = get_u32(bytes, 8);
	if (ndim == 0 || bytes.size() < 12 + 4ull * ndim)
		fail(ErrorCode::DimMismatch, "truncated FMAP dims");

	FeatureTensor t;
	t.dims.resize(ndim);
	for (std::uint32_t i = 0; i < ndim; ++i)
		t.dims[i] = get_u32(bytes, 12 + 4 * i);
	const std::size_t offset = 12 + 4 * ndim;
	const auto count = checked_product(t.dims);
	if (bytes.size() - offset != 4 * count)
		fail(ErrorCode::DimMismatch, "payload holds " + std::to_string((bytes.size() - offset) / 4.0) +
		                                 " values, header says " + std::to_string(count));
	t.data.resize(count);
	for (std::size_t i = 0; i < count; ++i)
		t.data[i] = std::bit_cast<float>(get_u32(bytes, offset + 4 * i));
	validate(t);
	return t;
}

FeatureTensor read_fmap(const std::filesystem::path& path)
{
	return decode_fmap(read_file(path));
}

void write_fmap(const FeatureTensor& tensor, const std::filesystem::path& path)
{
	write_file(path, encode_fmap(tensor));
}

// ---------------------------------------------------------------------------
// Meshes

TriMesh parse_obj(std::istream& in)
{
	TriMesh mesh;
	std::string line;
	std::size_t line_no = 0;
	while (std::getline(in, line)) {
		++line_no;
		auto tok = tokens(line);
		if (tok.empty() || tok[0][0] == '#')
			continue;
		if (tok[0] == "v") {
			if (tok.size() < 4)
				fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": vertex needs 3 coordinates");
			mesh.vertices.emplace_back(parse_double(tok[1], line_no), parse_double(tok[2], line_no),
			                           parse_double(tok[3], line_no));
		} else if (tok[0] == "f") {
			if (tok.size() != 4)
				fail(ErrorCode::NonTriangleFace, "line " + std::to_string(line_no) + ": face with " +
				                                     std::to_string(tok.size() - 1) + " vertices");
			Face f{};
			for (int i = 0; i < 3; ++i) {
				// "a", "a/b", "a//c", "a/b/c": the vertex index comes first
				std::string idx = tok[i + 1].substr(0, tok[i + 1].find('/'));
				long long k = parse_int(idx, line_no);
				long long n = static_cast<long long>(mesh.vertices.size());
				long long zero_based = k > 0 ? k - 1 : n + k;
				if (k == 0 || zero_based < 0)
					fail(ErrorCode::DanglingIndex, "line " + std::to_string(line_no) + ": face index " + idx);
				f[i] = static_cast<std::uint32_t>(zero_based);
			}
			mesh.faces.push_back(f);
		}
	}
	check_mesh(mesh);
	return mesh;
}

TriMesh parse_ply(std::istream& in)
{
	struct Element
	{
		std::string name;
		std::size_t count = 0;
		std::vector<std::string> properties;
	};

	std::string line;
	std::size_t line_no = 0;
	auto next = [&]() -> bool {
		if (!std::getline(in, line))
			return false;
		++line_no;
		if (!line.empty() && line.back() == '\r')
			line.pop_back();
		return true;
	};

	if (!next() || line != "ply")
		fail(ErrorCode::ParseError, "missing 'ply' header");
	std::vector<Element> elements;
	bool ascii = false;
	while (true) {
		if (!next())
			fail(ErrorCode::ParseError, "unterminated PLY header");
		auto tok = tokens(line);
		if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info")
			continue;
		if (tok[0] == "end_header")
			break;
		if (tok[0] == "format") {
			if (tok.size() < 2 || tok[1] != "ascii")
				fail(ErrorCode::ParseError, "only ascii PLY is supported, got format '" +
				                                (tok.size() > 1 ? tok[1] : std::string()) + "'");
			ascii = true;
		} else if (tok[0] == "element") {
			if (tok.size() != 3)
				fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad element line");
			elements.push_back({tok[1], static_cast<std::size_t>(parse_int(tok[2], line_no)), {}});
		} else if (tok[0] == "property") {
			if (elements.empty() || tok.size() < 3)
				fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": stray property");
			elements.back().properties.push_back(tok.back());
		}
	}
	if (!ascii)
		fail(ErrorCode::ParseError, "PLY format line missing");

	TriMesh mesh;
	for (const auto& el : elements) {
		int ix = -1, iy = -1, iz = -1;
		for (std::size_t p = 0; p < el.properties.size(); ++p) {
			if (el.properties[p] == "x") ix = static_cast<int>(p);
			if (el.properties[p] == "y") iy = static_cast<int>(p);
			if (el.properties[p] == "z") iz = static_cast<int>(p);
		}
		if (el.name == "vertex" && (ix < 0 || iy < 0 || iz < 0))
			fail(ErrorCode::ParseError, "PLY vertex element lacks x/y/z");
		for (std::size_t i = 0; i < el.count; ++i) {
			if (!next())
				fail(ErrorCode::ParseError, "PLY body ends early in element '" + el.name + "'");
			auto tok = tokens(line);
			if (el.name == "vertex") {
				if (tok.size() < el.properties.size())
					fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": short vertex record");
				mesh.vertices.emplace_back(parse_double(tok[ix], line_no), parse_double(tok[iy], line_no),
				                           parse_double(tok[iz], line_no));
			} else if (el.name == "face") {
				if (tok.empty())
					fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": empty face record");
				auto n = parse_int(tok[0], line_no);
				if (n != 3)
					fail(ErrorCode::NonTriangleFace,
					     "line " + std::to_string(line_no) + ": face with " + std::to_string(n) + " vertices");
				if (tok.size() < 4)
					fail(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": short face record");
				Face f{};
				for (int k = 0; k < 3; ++k) {
					auto idx = parse_int(tok[k + 1], line_no);
					if (idx < 0)
						fail(ErrorCode::DanglingIndex, "line " + std::to_string(line_no) + ": negative index");
					f[k] = static_cast<std::uint32_t>(idx);
				}
				mesh.faces.push_back(f);
			}
		}
	}
	check_mesh(mesh);
	return mesh;
}

TriMesh read_mesh(const std::filesystem::path& path)
{
	std::ifstream in(path);
	if (!in)
		fail(ErrorCode::IoFailure, "cannot open " + path.string());
	auto ext = path.extension().string();
	std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
	if (ext == ".obj")
		return parse_obj(in);
	if (ext == ".ply")
		return parse_ply(in);
	fail(ErrorCode::ParseError, "unknown mesh extension '" + ext + "'");
}

void write_obj(const TriMesh& mesh, const std::filesystem::path& path)
{
	std::ostringstream out;
	out << std::setprecision(17);
	for (const auto& v : mesh.vertices)
		out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
	for (const auto& f : mesh.faces)
		out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
	write_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Manifest

std::string_view to_string(Expression e)
{
	switch (e) {
	case Expression::HA: return "HA";
	case Expression::SA: return "SA";
	case Expression::DI: return "DI";
	case Expression::SU: return "SU";
	case Expression::FE: return "FE";
	case Expression::AN: return "AN";
	case Expression::NE: return "NE";
	}
	return "?";
}

std::optional<Expression> parse_expression(std::string_view s)
{
	for (auto e : all_expressions)
		if (to_string(e) == s)
			return e;
	return std::nullopt;
}

const std::filesystem::path* ManifestEntry::tensor_path(std::string_view stream) const
{
	for (const auto& [name, p] : tensor_paths)
		if (name == stream)
			return &p;
	return nullptr;
}

std::filesystem::path DatasetManifest::resolve(const std::filesystem::path& p) const
{
	return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

namespace {

ManifestEntry parse_manifest_line(std::string_view line)
{
	auto fields = split(line, '\t');
	if (fields.size() < 4)
		fail(ErrorCode::MissingField, "expected at least 4 tab-separated fields, got " +
		                                  std::to_string(fields.size()));
	ManifestEntry e;
	e.sample_id = std::string(fields[0]);
	e.subject_id = std::string(fields[1]);
	if (e.sample_id.empty() || e.subject_id.empty())
		fail(ErrorCode::MissingField, "empty sample or subject id");
	auto label = parse_expression(fields[2]);
	if (!label)
		fail(ErrorCode::UnknownLabel, "unknown label '" + std::string(fields[2]) + "'");
	e.label = *label;
	if (fields[3].substr(0, 5) != "mesh=")
		fail(ErrorCode::MissingField, "fourth field must be mesh=<path or ->");
	auto mesh = fields[3].substr(5);
	if (mesh.empty())
		fail(ErrorCode::MissingField, "empty mesh path (use '-' for none)");
	if (mesh != "-")
		e.mesh_path = std::filesystem::path(std::string(mesh));

	std::set<std::string> seen_paths;
	if (e.mesh_path)
		seen_paths.insert(e.mesh_path->string());
	for (std::size_t i = 4; i < fields.size(); ++i) {
		auto eq = fields[i].find('=');
		if (eq == std::string_view::npos || eq == 0 || eq + 1 == fields[i].size())
			fail(ErrorCode::MissingField, "stream field must be name=path, got '" + std::string(fields[i]) + "'");
		std::string name(fields[i].substr(0, eq));
		std::string p(fields[i].substr(eq + 1));
		if (e.tensor_path(name))
			fail(ErrorCode::ParseError, "stream '" + name + "' listed twice");
		if (!seen_paths.insert(p).second)
			fail(ErrorCode::ParseError, "path '" + p + "' referenced twice in one entry");
		e.tensor_paths.emplace_back(std::move(name), std::filesystem::path(p));
	}
	return e;
}

} // namespace

ManifestParse parse_manifest(std::istream& in)
{
	ManifestParse result;
	std::set<std::string> ids;
	std::string line;
	std::size_t line_no = 0;
	while (std::getline(in, line)) {
		++line_no;
		if (!line.empty() && line.back() == '\r')
			line.pop_back();
		if (line.empty() || line[0] == '#')
			continue;
		try {
			auto entry = parse_manifest_line(line);
			if (!ids.insert(entry.sample_id).second)
				fail(ErrorCode::DuplicateSampleId, "sample id '" + entry.sample_id + "' already defined");
			result.manifest.entries.push_back(std::move(entry));
		} catch (const Error& err) {
			result.errors.push_back({line_no, err.code(), err.what()});
		}
	}
	return result;
}

DatasetManifest read_manifest(const std::filesystem::path& path)
{
	std::ifstream in(path);
	if (!in)
		fail(ErrorCode::IoFailure, "cannot open " + path.string());
	auto parsed = parse_manifest(in);
	if (!parsed.errors.empty()) {
		const auto& e = parsed.errors.front();
		throw Error(e.code, path.string() + ":" + std::to_string(e.line) + ": " + e.message);
	}
	parsed.manifest.base_dir = path.parent_path();
	return std::move(parsed.manifest);
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path)
{
	std::ostringstream out;
	out << "# sample_id\tsubject_id\tlabel\tmesh=<path>\t[stream=<path> ...]\n";
	for (const auto& e : manifest.entries) {
		out << e.sample_id << '\t' << e.subject_id << '\t' << to_string(e.label) << "\tmesh="
		    << (e.mesh_path ? e.mesh_path->generic_string() : std::string("-"));
		for (const auto& [name, p] : e.tensor_paths)
			out << '\t' << name << '=' << p.generic_string();
		out << '\n';
	}
	write_file(path, out.str());
}

} // namespace covfer
