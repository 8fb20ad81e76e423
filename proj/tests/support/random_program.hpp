#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hwdbg/frontend.hpp"

namespace hwdbg::testing {

struct RandomProgramOptions {
  int max_depth = 3;        // if/for nesting
  uint64_t max_trips = 4;   // loop iterations
  int max_vars = 6;         // declared variables besides clock, reset and inputs
  int statements = 8;       // top-level statements in the comb block
};

// A valid mini-HDL program with one comb block and one seq block. Divisors
// are nonzero constants so both evaluators agree.
std::string random_program(uint64_t seed, const RandomProgramOptions& options = {});

// Random values for every input on every cycle; `rst` is high on cycle 0.
std::vector<InputMap> random_stimulus(const SourceProgram& program, uint64_t seed, size_t cycles);

}  // namespace hwdbg::testing
