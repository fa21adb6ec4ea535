#include <gtest/gtest.h>

#include "retroroute/smiles_lint.hpp"
#include "support/test_util.hpp"

using namespace retroroute;

namespace {

bool has_kind(const LintReport& r, LintIssueKind k) {
  for (const auto& i : r.issues) {
    if (i.kind == k) return true;
  }
  return false;
}

// Grammar-driven generator of syntactically valid SMILES: a chain of atoms
// with optional bonds, branches and ring closures that are always closed.
std::string random_smiles(Rng& rng, int depth = 0) {
  static const std::vector<std::string> atoms{"C",     "N",      "O",     "S",      "Cl",  "Br",
                                              "c",     "n",      "[NH4+]", "[C@@H]", "[13C]", "[O-]",
                                              "[Fe+2]", "[nH]",  "P",     "F",      "I",   "[se]"};
  static const std::vector<std::string> bonds{"", "", "", "-", "=", "#", "/", "\\"};
  std::string s = atoms[rng.below(atoms.size())];
  std::vector<int> open_rings;
  const int n = 1 + static_cast<int>(rng.below(6));
  for (int i = 0; i < n; ++i) {
    if (rng.bernoulli(0.2)) {
      const int label = 1 + static_cast<int>(rng.below(9));
      bool already = false;
      for (int r : open_rings) already = already || r == label;
      if (!already) {
        s += std::to_string(label);
        open_rings.push_back(label);
      }
    }
    if (depth < 2 && rng.bernoulli(0.25)) {
      s += "(" + bonds[rng.below(bonds.size())] + random_smiles(rng, depth + 1) + ")";
    }
    s += bonds[rng.below(bonds.size())] + atoms[rng.below(atoms.size())];
  }
  for (int label : open_rings) s += std::to_string(label);
  if (depth == 0 && rng.bernoulli(0.1)) s += "." + random_smiles(rng, 1);
  return s;
}

}  // namespace

TEST(SmilesLint, AcceptsCommonMolecules) {
  for (const char* s : {"CCO", "c1ccccc1", "CC(=O)O", "[NH4+]", "C1CC2CCC1C2", "C%10CC%10",
                        "F/C=C\\F", "[C@@H](N)(C)C(=O)O", "[2H]C", "O=C=O", "[Na+].[Cl-]",
                        "N#N", "C=1CC1", "[Fe@TH1](Cl)(Cl)(Cl)Cl", "[CH2:1]C", "C1CC1C1CC1",
                        "c1cc[nH]c1", "*C"}) {
    const auto r = lint(s);
    EXPECT_TRUE(r.valid) << s << ": "
                         << (r.issues.empty() ? "" : std::string(to_string(r.issues[0].kind)));
  }
}

TEST(SmilesLint, ReportsEachDefectKind) {
  struct Case {
    const char* smiles;
    LintIssueKind kind;
    std::size_t position;
  };
  const std::vector<Case> cases{
      {"", LintIssueKind::kEmpty, 0},
      {"C(", LintIssueKind::kUnbalancedParenthesis, 1},
      {"CC)", LintIssueKind::kUnbalancedParenthesis, 2},
      {"C[NH4", LintIssueKind::kUnbalancedBracket, 1},
      {"CC]", LintIssueKind::kUnbalancedBracket, 2},
      {"C1CC", LintIssueKind::kUnclosedRing, 1},
      {"=CC", LintIssueKind::kBondAtBoundary, 0},
      {"CC#", LintIssueKind::kBondAtBoundary, 2},
      {"C=#C", LintIssueKind::kDanglingBond, 2},
      {"C(=)C", LintIssueKind::kDanglingBond, 3},
      {"C[Xx]", LintIssueKind::kInvalidElement, 2},
      {"C[C@XY1]", LintIssueKind::kMalformedBracketAtom, 4},
      {"(C)C", LintIssueKind::kMisplacedBranch, 0},
      {"C()C", LintIssueKind::kMisplacedBranch, 2},
      {"1CC1", LintIssueKind::kMisplacedRingClosure, 0},
      {"C%1C", LintIssueKind::kMisplacedRingClosure, 1},
      {"CCX", LintIssueKind::kIllegalCharacter, 2},
      {"C C", LintIssueKind::kIllegalCharacter, 1},
  };
  for (const auto& c : cases) {
    const auto r = lint(c.smiles);
    EXPECT_FALSE(r.valid) << c.smiles;
    ASSERT_TRUE(has_kind(r, c.kind)) << c.smiles << " lacks " << to_string(c.kind);
    bool at_position = false;
    for (const auto& i : r.issues) at_position = at_position || (i.kind == c.kind && i.position == c.position);
    EXPECT_TRUE(at_position) << c.smiles;
  }
}

TEST(SmilesLint, ElementWhitelist) {
  EXPECT_TRUE(is_element_symbol("C"));
  EXPECT_TRUE(is_element_symbol("Og"));
  EXPECT_TRUE(is_element_symbol("Zn"));
  EXPECT_FALSE(is_element_symbol("Xx"));
  EXPECT_FALSE(is_element_symbol("c"));
  EXPECT_FALSE(is_element_symbol("CL"));
}

TEST(SmilesLint, GeneratedValidStringsPass) {
  Rng rng(17);
  for (int i = 0; i < 2000; ++i) {
    const auto s = random_smiles(rng);
    EXPECT_TRUE(lint(s).valid) << s;
  }
}

TEST(SmilesLint, BreakingBalanceIsAlwaysCaught) {
  Rng rng(23);
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    auto s = random_smiles(rng);
    const auto close = s.rfind(')');
    if (close == std::string::npos) continue;
    s.erase(close, 1);
    EXPECT_TRUE(has_kind(lint(s), LintIssueKind::kUnbalancedParenthesis)) << s;
    ++checked;
  }
  EXPECT_GT(checked, 100);
}

TEST(SmilesLint, RouteLintNamesFirstFailingNode) {
  const RouteNode r{"CCO", {{"CC", {}}, {"C(", {{"O", {}}}}, {"X", {}}}};
  const auto report = lint_route(r);
  EXPECT_FALSE(report.valid);
  ASSERT_TRUE(report.node_index.has_value());
  EXPECT_EQ(*report.node_index, 2u);
  EXPECT_TRUE(lint_route({"CCO", {{"CC", {}}}}).valid);
}
