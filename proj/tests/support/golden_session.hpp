#pragma once

#include <string>

namespace hwdbg::testing {

// Runs the canned two-client protocol session against a replay of the
// listing program and returns its token-normalized transcript.
// `fixtures` is the directory holding sum.mh.
std::string listing_protocol_transcript(const std::string& fixtures);

// Replaces every token with T1, T2, ... in order of first appearance.
std::string normalize_tokens(const std::string& transcript);

}  // namespace hwdbg::testing
