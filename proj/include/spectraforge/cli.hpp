#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace spectraforge {

/// Exit codes: 0 success, 1 pipeline failure, 2 usage error.
int dispatch(int argc, char** argv);
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// `key = value` lines; `#` starts a comment, `[section]` prefixes the
/// following keys with "section.". Values may be quoted.
std::map<std::string, std::string> parse_config(const std::string& text);

/// Merges config entries under the flags: an entry becomes `--key value`
/// unless the flag is already present. Top-level keys apply when the
/// subcommand knows them; keys of its `[subcommand]` section must be known.
/// "true" turns into a bare flag, "false" drops it. Path-valued keys are
/// resolved against `base_dir`.
std::vector<std::string> merge_config(const std::vector<std::string>& args, const std::string& subcommand,
                                      const std::map<std::string, std::string>& config,
                                      const std::set<std::string>& known_options,
                                      const std::filesystem::path& base_dir);

}  // namespace spectraforge
