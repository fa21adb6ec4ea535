#pragma once

// Syntactic SMILES checks. There is no chemistry here: no valence,
// aromaticity, or canonicalization, only the grammar.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "retroroute/route.hpp"

namespace retroroute {

enum class LintIssueKind {
  kEmpty,
  kIllegalCharacter,
  kUnbalancedParenthesis,
  kUnbalancedBracket,
  kUnclosedRing,
  kBondAtBoundary,
  kDanglingBond,
  kInvalidElement,
  kMalformedBracketAtom,
  kMisplacedBranch,
  kMisplacedRingClosure,
};

std::string_view to_string(LintIssueKind kind) noexcept;

struct LintIssue {
  std::size_t position = 0;
  LintIssueKind kind = LintIssueKind::kEmpty;
  std::string detail;
};

struct LintReport {
  bool valid = true;
  std::vector<LintIssue> issues;
  /// Set by lint_route: pre-order index of the first failing node.
  std::optional<std::size_t> node_index;
};

LintReport lint(std::string_view smiles);

/// Lints every molecule in the tree and reports the issues of the first
/// failing node, in pre-order.
LintReport lint_route(const RouteNode& root);

/// True for the 118 IUPAC element symbols (case-sensitive).
bool is_element_symbol(std::string_view symbol) noexcept;

}  // namespace retroroute
