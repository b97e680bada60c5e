#pragma once

#include <cstddef>
#include <functional>
#include <string_view>

namespace sosecure::text {

/// Ratcliff-Obershelp similarity over characters: 2*M/(|a|+|b|) where M sums
/// matched characters from recursive longest-common-substring decomposition.
/// Among equally long matches the one starting earliest in the first operand,
/// then earliest in the second, is taken; operands are put in a canonical
/// order first (shorter, then lexicographically smaller) so the ratio is
/// symmetric. 1.0 for identical strings (including two empty strings); 0.0
/// when no character matches.
double similarity_ratio(std::string_view a, std::string_view b);

using TokenEstimator = std::function<std::size_t(std::string_view)>;

/// Counts word runs ([A-Za-z0-9_]+) plus each remaining non-whitespace
/// character as one token. A BPE-based estimator can be swapped in wherever a
/// TokenEstimator is accepted.
std::size_t estimate_tokens(std::string_view text);

}  // namespace sosecure::text
