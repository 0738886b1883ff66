#include "covfer/keyvalue.hpp"

#include "covfer/error.hpp"

#include <fstream>
#include <sstream>

namespace covfer {

void KeyValues::set(const std::string& key, const std::string& value)
{
	for (auto& [k, v] : items_)
		if (k == key) {
			v = value;
			return;
		}
	items_.emplace_back(key, value);
}

std::optional<std::string> KeyValues::find(const std::string& key) const
{
	for (const auto& [k, v] : items_)
		if (k == key)
			return v;
	return std::nullopt;
}

const std::string& KeyValues::get(const std::string& key) const
{
	for (const auto& [k, v] : items_)
		if (k == key)
			return v;
	fail(ErrorCode::MissingField, source + ": missing key '" + key + "'");
}

KeyValues KeyValues::read(const std::filesystem::path& path)
{
	std::ifstream in(path);
	if (!in)
		fail(ErrorCode::IoFailure, "cannot open " + path.string());
	KeyValues kv;
	kv.source = path.string();
	std::string line;
	int number = 0;
	while (std::getline(in, line)) {
		++number;
		if (!line.empty() && line.back() == '\r')
			line.pop_back();
		if (line.empty() || line[0] == '#')
			continue;
		const auto tab = line.find('\t');
		if (tab == std::string::npos)
			fail(ErrorCode::ParseError, path.string() + ":" + std::to_string(number) + ": expected key<TAB>value");
		kv.set(line.substr(0, tab), line.substr(tab + 1));
	}
	return kv;
}

void KeyValues::write(const std::filesystem::path& path) const
{
	std::ofstream out(path);
	for (const auto& [k, v] : items_)
		out << k << '\t' << v << '\n';
	if (!out)
		fail(ErrorCode::IoFailure, "cannot write " + path.string());
}

std::filesystem::path with_suffix(const std::filesystem::path& prefix, const std::string& suffix)
{
	return prefix.parent_path() / (prefix.filename().string() + suffix);
}

std::vector<std::string> split_list(const std::string& text, char sep)
{
	std::vector<std::string> out;
	std::istringstream in(text);
	std::string item;
	while (std::getline(in, item, sep))
		if (!item.empty())
			out.push_back(item);
	return out;
}

} // namespace covfer
