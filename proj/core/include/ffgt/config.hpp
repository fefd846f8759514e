#pragma once

#include <string>
#include <vector>

#include "ffgt/sbm.hpp"
#include "ffgt/trainer.hpp"

namespace ffgt {

// Flat key = value config with [sbm], [model] and [train] sections. Unknown
// sections or keys are rejected (ConfigError names the offender). The echoed
// form is canonical: fixed key order, deterministic number formatting.
struct CliConfig {
  SbmPatternParams sbm;
  int n_train = 2000;
  int n_val = 400;
  int n_test = 400;
  TrainConfig train;                   // includes the [model] section
  std::vector<int> fl_list = {-1, 1, 2, 3};  // -1 = vanilla
  std::vector<std::uint64_t> seeds = {1, 2, 3};

  // Canonical text form; reparsing it reproduces this config exactly.
  std::string echo() const;
};

CliConfig parse_config_text(const std::string& text);
CliConfig parse_config_file(const std::string& path);

// Deterministic double formatting: the shortest of %g / %.17g that parses
// back exactly.
std::string format_double(double v);

}  // namespace ffgt
