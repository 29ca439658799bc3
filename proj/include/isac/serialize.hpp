#pragma once
// Line-oriented `key = value` text schema shared by scene/pilot/observation
// files and run configuration, plus the CSV number format. Vector values are
// whitespace-separated scalars; complex entries are written as (re, im)
// pairs with round-trip-exact precision.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "isac/observation.hpp"

namespace isac {

struct KvDoc {
  std::map<std::string, std::string> values;

  // '#' starts a comment; blank lines are skipped; the last assignment to a
  // key wins. Malformed lines and unreadable files raise ConfigError.
  static KvDoc parse_file(const std::string& path);
  static KvDoc parse_stream(std::istream& in);

  bool has(const std::string& key) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_uint64(const std::string& key,
                           std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      std::vector<double> fallback) const;
  std::vector<std::string> get_string_list(
      const std::string& key, std::vector<std::string> fallback) const;
};

// Scientific notation with 6 significant digits (the CSV number format).
std::string format_sci(double v);

void write_scene(std::ostream& out, const SceneTruth& scene);
SceneTruth read_scene(std::istream& in);

void write_pilots(std::ostream& out, const PilotSet& pilots);
PilotSet read_pilots(std::istream& in);

void write_observation(std::ostream& out, const Observation& obs);
Observation read_observation(std::istream& in);

}  // namespace isac
