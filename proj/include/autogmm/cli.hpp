#ifndef AUTOGMM_CLI_HPP
#define AUTOGMM_CLI_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "autogmm/hgmm.hpp"
#include "autogmm/io.hpp"
#include "autogmm/metrics.hpp"

namespace autogmm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitSearch = 2;

struct Options {
  std::string subcommand;  // fit, hfit, synth, bench, ari
  HgmmConfig hgmm;         // hgmm.search is the flat search config
  std::string input;       // fit/hfit/bench data, first label file for ari
  std::string second;      // second label file for ari
  bool header = false;
  std::filesystem::path out_dir = ".";

  // synth
  SyntheticKind kind = SyntheticKind::three_component;
  int count = 0;
  std::filesystem::path out;

  // bench
  std::string truth;
  std::vector<std::string> variants = {"all", "l2-ward", "none"};
  int reps = 10;
  double frac = 0.8;
  bool exact = false;

  bool help = false;  // --help was given; `usage` holds the text
  std::string usage;
};

/// Parses argv-style arguments (without the program name). Throws InputError
/// for unknown flags, bad values or a missing subcommand.
Options parse(const std::vector<std::string>& args);

/// Runs one invocation. The summary goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Builds the named benchmark configurations: "all" keeps every method of the
/// base config, any other name restricts the search to that single method.
std::vector<NamedConfig> bench_configs(const SearchConfig& base,
                                       const std::vector<std::string>& variants);

}  // namespace autogmm::cli

#endif  // AUTOGMM_CLI_HPP
