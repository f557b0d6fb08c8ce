#pragma once

#include "promptseg/config.hpp"

namespace promptseg {

/// Execute the command described by the config. Creates the run directory,
/// freezes the effective config there as config.json, writes the command's
/// artifacts and returns 0. Throws on failure; the CLI maps ConfigError to
/// exit 2 and everything else to exit 3.
int run(const RunConfig& config);

}  // namespace promptseg
