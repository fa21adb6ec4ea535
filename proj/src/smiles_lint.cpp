#include "retroroute/smiles_lint.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>

namespace retroroute {

namespace {

constexpr std::array<std::string_view, 118> kElements = {
    "H",  "He", "Li", "Be", "B",  "C",  "N",  "O",  "F",  "Ne", "Na", "Mg",
    "Al", "Si", "P",  "S",  "Cl", "Ar", "K",  "Ca", "Sc", "Ti", "V",  "Cr",
    "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr",
    "Rb", "Sr", "Y",  "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd",
    "In", "Sn", "Sb", "Te", "I",  "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf",
    "Ta", "W",  "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po",
    "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U",  "Np", "Pu", "Am", "Cm",
    "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs",
    "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc", "Lv", "Ts", "Og"};

constexpr std::array<std::string_view, 9> kAromaticBracket = {
    "b", "c", "n", "o", "p", "s", "se", "as", "te"};

enum class Prev { kStart, kAtom, kBond, kDot, kOpen, kClose, kRing };

bool is_bond(char c) noexcept {
  return c == '-' || c == '=' || c == '#' || c == '$' || c == ':' ||
         c == '/' || c == '\\';
}

bool is_digit(char c) noexcept { return c >= '0' && c <= '9'; }

class Linter {
 public:
  explicit Linter(std::string_view s) : s_(s) {}

  LintReport run() {
    if (s_.empty()) {
      add(0, LintIssueKind::kEmpty, "empty molecule string");
      return finish();
    }
    while (pos_ < s_.size()) step();
    if (prev_ == Prev::kBond || prev_ == Prev::kDot) {
      add(s_.size() - 1, LintIssueKind::kBondAtBoundary,
          "bond symbol at end of string");
    }
    for (std::size_t open : branch_stack_) {
      add(open, LintIssueKind::kUnbalancedParenthesis, "unclosed '('");
    }
    for (const auto& [label, open] : rings_) {
      add(open, LintIssueKind::kUnclosedRing,
          "ring label " + std::to_string(label) + " never closed");
    }
    return finish();
  }

 private:
  void add(std::size_t pos, LintIssueKind kind, std::string detail) {
    report_.issues.push_back({pos, kind, std::move(detail)});
  }

  LintReport finish() {
    std::stable_sort(report_.issues.begin(), report_.issues.end(),
                     [](const LintIssue& a, const LintIssue& b) {
                       return a.position < b.position;
                     });
    report_.valid = report_.issues.empty();
    return std::move(report_);
  }

  bool after_atom_like() const noexcept {
    return prev_ == Prev::kAtom || prev_ == Prev::kRing ||
           prev_ == Prev::kClose;
  }

  void step() {
    const std::size_t at = pos_;
    const char c = s_[pos_];
    if (c == '[') {
      bracket_atom();
      return;
    }
    if (c == ']') {
      add(at, LintIssueKind::kUnbalancedBracket, "']' without '['");
      ++pos_;
      return;
    }
    if (c == '(') {
      if (!after_atom_like()) {
        add(at, LintIssueKind::kMisplacedBranch, "branch without a preceding atom");
      }
      branch_stack_.push_back(at);
      prev_ = Prev::kOpen;
      ++pos_;
      return;
    }
    if (c == ')') {
      if (branch_stack_.empty()) {
        add(at, LintIssueKind::kUnbalancedParenthesis, "')' without '('");
      } else {
        branch_stack_.pop_back();
      }
      if (prev_ == Prev::kBond || prev_ == Prev::kDot) {
        add(at, LintIssueKind::kDanglingBond, "bond symbol before ')'");
      } else if (prev_ == Prev::kOpen) {
        add(at, LintIssueKind::kMisplacedBranch, "empty branch");
      }
      prev_ = Prev::kClose;
      ++pos_;
      return;
    }
    if (is_bond(c) || c == '.') {
      if (prev_ == Prev::kStart) {
        add(at, LintIssueKind::kBondAtBoundary, "bond symbol at start of string");
      } else if (prev_ == Prev::kBond || prev_ == Prev::kDot) {
        add(at, LintIssueKind::kDanglingBond, "consecutive bond symbols");
      } else if (c == '.' && prev_ == Prev::kOpen) {
        add(at, LintIssueKind::kDanglingBond, "'.' opening a branch");
      }
      bond_follows_atom_ = after_atom_like();
      prev_ = c == '.' ? Prev::kDot : Prev::kBond;
      ++pos_;
      return;
    }
    if (is_digit(c) || c == '%') {
      ring_closure();
      return;
    }
    if (organic_atom()) return;
    add(at, LintIssueKind::kIllegalCharacter,
        std::string("character '") + c + "' is not SMILES");
    ++pos_;
  }

  bool organic_atom() {
    static constexpr std::array<std::string_view, 2> kTwo = {"Cl", "Br"};
    const std::string_view rest = s_.substr(pos_);
    for (std::string_view sym : kTwo) {
      if (rest.substr(0, sym.size()) == sym) {
        pos_ += sym.size();
        prev_ = Prev::kAtom;
        return true;
      }
    }
    switch (s_[pos_]) {
      case 'B':
      case 'C':
      case 'N':
      case 'O':
      case 'P':
      case 'S':
      case 'F':
      case 'I':
      case 'b':
      case 'c':
      case 'n':
      case 'o':
      case 'p':
      case 's':
      case '*':
        ++pos_;
        prev_ = Prev::kAtom;
        return true;
      default:
        return false;
    }
  }

  void ring_closure() {
    const std::size_t at = pos_;
    int label = 0;
    if (s_[pos_] == '%') {
      if (pos_ + 2 < s_.size() && is_digit(s_[pos_ + 1]) && is_digit(s_[pos_ + 2])) {
        label = (s_[pos_ + 1] - '0') * 10 + (s_[pos_ + 2] - '0');
        pos_ += 3;
      } else {
        add(at, LintIssueKind::kMisplacedRingClosure, "'%' needs two digits");
        ++pos_;
        return;
      }
    } else {
      label = s_[pos_] - '0';
      ++pos_;
    }
    const bool placed = prev_ == Prev::kAtom || prev_ == Prev::kRing ||
                        (prev_ == Prev::kBond && bond_follows_atom_);
    if (!placed) {
      add(at, LintIssueKind::kMisplacedRingClosure,
          "ring label " + std::to_string(label) + " without a preceding atom");
    }
    // A label pairs one opening with one closing; once closed it may be
    // reused for a later ring.
    auto it = rings_.find(label);
    if (it == rings_.end()) {
      rings_.emplace(label, at);
    } else {
      rings_.erase(it);
    }
    prev_ = Prev::kRing;
  }

  void bracket_atom() {
    const std::size_t open = pos_;
    const std::size_t close = s_.find(']', open + 1);
    const std::size_t nested = s_.find('[', open + 1);
    if (close == std::string_view::npos ||
        (nested != std::string_view::npos && nested < close)) {
      add(open, LintIssueKind::kUnbalancedBracket, "unclosed '['");
      ++pos_;
      prev_ = Prev::kAtom;
      return;
    }
    check_bracket_body(open + 1, s_.substr(open + 1, close - open - 1));
    pos_ = close + 1;
    prev_ = Prev::kAtom;
  }

  // isotope? symbol chirality? hcount? charge? class?
  void check_bracket_body(std::size_t base, std::string_view body) {
    std::size_t i = 0;
    auto malformed = [&](std::string what) {
      add(base + i, LintIssueKind::kMalformedBracketAtom, std::move(what));
    };
    while (i < body.size() && is_digit(body[i])) ++i;
    if (i >= body.size()) {
      add(base + i, LintIssueKind::kInvalidElement, "bracket atom lacks an element");
      return;
    }
    const std::size_t sym_start = i;
    if (body[i] == '*') {
      ++i;
    } else if (std::isupper(static_cast<unsigned char>(body[i]))) {
      const bool two = i + 1 < body.size() &&
                       std::islower(static_cast<unsigned char>(body[i + 1])) &&
                       is_element_symbol(body.substr(i, 2));
      const std::string_view sym = body.substr(i, two ? 2 : 1);
      if (!is_element_symbol(sym)) {
        add(base + i, LintIssueKind::kInvalidElement,
            "unknown element '" + std::string(sym) + "'");
        return;
      }
      i += sym.size();
    } else if (std::islower(static_cast<unsigned char>(body[i]))) {
      std::string_view matched;
      for (std::string_view sym : kAromaticBracket) {
        if (body.substr(i, sym.size()) == sym && sym.size() > matched.size()) matched = sym;
      }
      if (matched.empty()) {
        add(base + i, LintIssueKind::kInvalidElement,
            std::string("unknown aromatic element '") + body[i] + "'");
        return;
      }
      i += matched.size();
    } else {
      add(base + sym_start, LintIssueKind::kInvalidElement,
          std::string("expected element symbol, got '") + body[i] + "'");
      return;
    }

    if (i < body.size() && body[i] == '@') {
      ++i;
      if (i < body.size() && body[i] == '@') {
        ++i;
      } else if (i + 1 < body.size() && std::isupper(static_cast<unsigned char>(body[i])) &&
                 std::isupper(static_cast<unsigned char>(body[i + 1]))) {
        const std::string_view cls = body.substr(i, 2);
        if (cls != "TH" && cls != "AL" && cls != "SP" && cls != "TB" && cls != "OH") {
          malformed("unknown chirality class '" + std::string(cls) + "'");
          return;
        }
        i += 2;
        if (i >= body.size() || !is_digit(body[i])) {
          malformed("chirality class needs a number");
          return;
        }
        while (i < body.size() && is_digit(body[i])) ++i;
      }
    }
    if (i < body.size() && body[i] == 'H') {
      ++i;
      while (i < body.size() && is_digit(body[i])) ++i;
    }
    if (i < body.size() && (body[i] == '+' || body[i] == '-')) {
      const char sign = body[i];
      ++i;
      if (i < body.size() && is_digit(body[i])) {
        while (i < body.size() && is_digit(body[i])) ++i;
      } else {
        while (i < body.size() && body[i] == sign) ++i;
      }
    }
    if (i < body.size() && body[i] == ':') {
      ++i;
      if (i >= body.size() || !is_digit(body[i])) {
        malformed("atom class needs a number");
        return;
      }
      while (i < body.size() && is_digit(body[i])) ++i;
    }
    if (i != body.size()) {
      malformed(std::string("unexpected '") + body[i] + "' in bracket atom");
    }
  }

  std::string_view s_;
  std::size_t pos_ = 0;
  Prev prev_ = Prev::kStart;
  bool bond_follows_atom_ = false;
  std::vector<std::size_t> branch_stack_;
  std::map<int, std::size_t> rings_;
  LintReport report_;
};

void lint_nodes(const RouteNode& node, std::size_t& index, LintReport& out) {
  if (!out.valid) return;
  LintReport here = lint(node.smiles);
  if (!here.valid) {
    out = std::move(here);
    out.node_index = index;
    return;
  }
  ++index;
  for (const auto& child : node.children) {
    lint_nodes(child, index, out);
    if (!out.valid) return;
  }
}

}  // namespace

std::string_view to_string(LintIssueKind kind) noexcept {
  switch (kind) {
    case LintIssueKind::kEmpty: return "empty";
    case LintIssueKind::kIllegalCharacter: return "illegal_character";
    case LintIssueKind::kUnbalancedParenthesis: return "unbalanced_parenthesis";
    case LintIssueKind::kUnbalancedBracket: return "unbalanced_bracket";
    case LintIssueKind::kUnclosedRing: return "unclosed_ring";
    case LintIssueKind::kBondAtBoundary: return "bond_at_boundary";
    case LintIssueKind::kDanglingBond: return "dangling_bond";
    case LintIssueKind::kInvalidElement: return "invalid_element";
    case LintIssueKind::kMalformedBracketAtom: return "malformed_bracket_atom";
    case LintIssueKind::kMisplacedBranch: return "misplaced_branch";
    case LintIssueKind::kMisplacedRingClosure: return "misplaced_ring_closure";
  }
  return "unknown";
}

bool is_element_symbol(std::string_view symbol) noexcept {
  return std::find(kElements.begin(), kElements.end(), symbol) != kElements.end();
}

LintReport lint(std::string_view smiles) { return Linter(smiles).run(); }

LintReport lint_route(const RouteNode& root) {
  LintReport out;
  std::size_t index = 0;
  lint_nodes(root, index, out);
  return out;
}

}  // namespace retroroute
