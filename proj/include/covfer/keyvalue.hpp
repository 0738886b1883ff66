#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace covfer {

/// Ordered `key<TAB>value` lines; blank lines and lines starting with '#' are
/// skipped on read. Used for sidecars and run configuration files.
class KeyValues
{
public:
	void set(const std::string& key, const std::string& value);
	std::optional<std::string> find(const std::string& key) const;
	/// Throws MissingField naming `source` when the key is absent.
	const std::string& get(const std::string& key) const;

	const std::vector<std::pair<std::string, std::string>>& items() const { return items_; }

	static KeyValues read(const std::filesystem::path& path);
	void write(const std::filesystem::path& path) const;

	std::string source;

private:
	std::vector<std::pair<std::string, std::string>> items_;
};

/// `prefix` with `suffix` appended to its file name.
std::filesystem::path with_suffix(const std::filesystem::path& prefix, const std::string& suffix);

/// Comma-separated list.
std::vector<std::string> split_list(const std::string& text, char sep = ',');

} // namespace covfer
