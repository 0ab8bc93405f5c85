#include <cctype>
#include <map>

#include "fragflow/chem.hpp"

namespace fragflow::chem {

namespace {

using Kind = SmilesError::Kind;

struct ElementToken {
  Element element;
  bool aromatic;
};

// Longest-match element lookup. `bracket` admits the full set; outside
// brackets only the organic subset may appear bare.
std::optional<ElementToken> match_element(std::string_view s, size_t pos, size_t* len,
                                          bool bracket) {
  auto two = s.substr(pos, 2);
  auto one = s.substr(pos, 1);
  struct Row {
    std::string_view sym;
    Element el;
    bool aromatic;
    bool organic;  // usable without brackets
  };
  static const Row rows[] = {
      {"Cl", Element::Cl, false, true}, {"Br", Element::Br, false, true},
      {"Si", Element::Si, false, false}, {"As", Element::As, false, false},
      {"Se", Element::Se, false, false}, {"se", Element::Se, true, false},
      {"as", Element::As, true, false},  {"B", Element::B, false, true},
      {"C", Element::C, false, true},   {"N", Element::N, false, true},
      {"O", Element::O, false, true},   {"F", Element::F, false, true},
      {"P", Element::P, false, true},   {"S", Element::S, false, true},
      {"I", Element::I, false, true},   {"b", Element::B, true, true},
      {"c", Element::C, true, true},    {"n", Element::N, true, true},
      {"o", Element::O, true, true},    {"p", Element::P, true, true},
      {"s", Element::S, true, true},
  };
  for (const auto& r : rows) {
    std::string_view probe = r.sym.size() == 2 ? two : one;
    if (probe == r.sym && (bracket || r.organic)) {
      *len = r.sym.size();
      return ElementToken{r.el, r.aromatic};
    }
  }
  return std::nullopt;
}

struct Parser {
  std::string_view text;
  const ParseOptions& opts;
  size_t i = 0;
  MolGraph mol;

  explicit Parser(std::string_view t, const ParseOptions& o) : text(t), opts(o) {}

  [[noreturn]] void fail(Kind kind, const std::string& msg) const {
    throw SmilesError(kind, msg, i);
  }

  char peek() const { return i < text.size() ? text[i] : '\0'; }

  int parse_bracket_atom() {
    size_t open = i;
    ++i;  // '['
    if (peek() == '*') {
      if (!opts.allow_wildcard)
        fail(Kind::UnsupportedElement, "wildcard atom not allowed here");
      ++i;
      if (peek() != ']') fail(Kind::Syntax, "expected ']'");
      ++i;
      Atom a;
      a.element = Element::Star;
      a.explicit_h = 0;
      return mol.add_atom(a);
    }
    if (std::isdigit(static_cast<unsigned char>(peek())))
      fail(Kind::Syntax, "isotope labels not supported");
    size_t len = 0;
    auto tok = match_element(text, i, &len, /*bracket=*/true);
    if (!tok) {
      if (std::isalpha(static_cast<unsigned char>(peek())))
        fail(Kind::UnsupportedElement,
             std::string("unsupported element '") + peek() + "'");
      fail(Kind::Syntax, "expected element symbol");
    }
    i += len;
    Atom a;
    a.element = tok->element;
    a.aromatic = tok->aromatic;
    a.explicit_h = 0;
    if (peek() == '@') fail(Kind::Syntax, "stereochemistry not supported");
    if (peek() == 'H') {
      ++i;
      int h = 1;
      if (std::isdigit(static_cast<unsigned char>(peek()))) {
        h = peek() - '0';
        ++i;
      }
      a.explicit_h = h;
    }
    if (peek() == '+' || peek() == '-')
      fail(Kind::Syntax, "formal charges not supported");
    if (peek() == ':') fail(Kind::Syntax, "atom maps not supported");
    if (peek() != ']') {
      i = open;
      fail(Kind::Syntax, "malformed bracket atom");
    }
    ++i;
    return mol.add_atom(a);
  }

  MolGraph run() {
    // SMILES terminates at the first whitespace
    size_t end = text.find_first_of(" \t\r\n");
    if (end != std::string_view::npos) text = text.substr(0, end);
    if (text.empty()) fail(Kind::Syntax, "empty SMILES");

    std::vector<int> branch_stack;
    std::map<int, std::pair<int, char>> open_rings;  // number -> (atom, bond symbol)
    int prev = -1;
    char pending_bond = 0;

    auto resolve_order = [&](char sym, int a, int b) -> BondOrder {
      switch (sym) {
        case '-': return BondOrder::Single;
        case '=': return BondOrder::Double;
        case '#': return BondOrder::Triple;
        case ':': return BondOrder::Aromatic;
        default:
          // implicit: aromatic between two aromatic atoms (demoted later if
          // the bond turns out to be acyclic), single otherwise
          return (mol.atom(a).aromatic && mol.atom(b).aromatic)
                     ? BondOrder::Aromatic
                     : BondOrder::Single;
      }
    };

    auto close_ring = [&](int number) {
      auto it = open_rings.find(number);
      if (it == open_rings.end()) {
        if (prev < 0) fail(Kind::Syntax, "ring bond before any atom");
        open_rings[number] = {prev, pending_bond};
      } else {
        auto [other, other_sym] = it->second;
        open_rings.erase(it);
        if (other == prev) fail(Kind::Syntax, "ring bond to self");
        char sym = pending_bond ? pending_bond : other_sym;
        if (pending_bond && other_sym && pending_bond != other_sym)
          fail(Kind::Syntax, "conflicting ring bond orders");
        mol.add_bond(other, prev, resolve_order(sym, other, prev));
      }
      pending_bond = 0;
    };

    while (i < text.size()) {
      char c = text[i];
      if (c == '.') fail(Kind::MultiComponent, "multi-component SMILES rejected");
      if (c == '-' || c == '=' || c == '#' || c == ':') {
        if (pending_bond) fail(Kind::Syntax, "two bond symbols in a row");
        if (prev < 0) fail(Kind::Syntax, "bond symbol before any atom");
        pending_bond = c;
        ++i;
        continue;
      }
      if (c == '(') {
        if (prev < 0) fail(Kind::Syntax, "branch before any atom");
        if (pending_bond) fail(Kind::Syntax, "bond symbol before branch");
        branch_stack.push_back(prev);
        ++i;
        continue;
      }
      if (c == ')') {
        if (branch_stack.empty()) fail(Kind::Syntax, "unmatched ')'");
        if (pending_bond) fail(Kind::Syntax, "dangling bond symbol");
        prev = branch_stack.back();
        branch_stack.pop_back();
        ++i;
        continue;
      }
      if (std::isdigit(static_cast<unsigned char>(c))) {
        close_ring(c - '0');
        ++i;
        continue;
      }
      if (c == '%') {
        if (i + 2 >= text.size() ||
            !std::isdigit(static_cast<unsigned char>(text[i + 1])) ||
            !std::isdigit(static_cast<unsigned char>(text[i + 2])))
          fail(Kind::Syntax, "malformed %nn ring closure");
        int num = (text[i + 1] - '0') * 10 + (text[i + 2] - '0');
        i += 3;
        close_ring(num);
        continue;
      }

      int atom;
      if (c == '[') {
        atom = parse_bracket_atom();
      } else if (c == '*') {
        if (!opts.allow_wildcard)
          fail(Kind::UnsupportedElement, "wildcard atom not allowed here");
        Atom a;
        a.element = Element::Star;
        a.explicit_h = 0;
        atom = mol.add_atom(a);
        ++i;
      } else {
        size_t len = 0;
        auto tok = match_element(text, i, &len, /*bracket=*/false);
        if (!tok) {
          if (std::isalpha(static_cast<unsigned char>(c)))
            fail(Kind::UnsupportedElement,
                 std::string("unsupported element '") + c + "'");
          fail(Kind::Syntax, std::string("unexpected character '") + c + "'");
        }
        i += len;
        Atom a;
        a.element = tok->element;
        a.aromatic = tok->aromatic;
        atom = mol.add_atom(a);
      }
      if (prev >= 0)
        mol.add_bond(prev, atom, resolve_order(pending_bond, prev, atom));
      pending_bond = 0;
      prev = atom;
    }

    if (pending_bond) fail(Kind::Syntax, "dangling bond symbol");
    if (!branch_stack.empty()) fail(Kind::Syntax, "unclosed branch");
    if (!open_rings.empty())
      throw SmilesError(Kind::UnclosedRing, "unclosed ring bond " +
                                                std::to_string(open_rings.begin()->first));
    mol.finalize();
    if (mol.num_components() != 1)
      throw SmilesError(Kind::MultiComponent, "molecule is not connected");
    return std::move(mol);
  }
};

}  // namespace

MolGraph parse_smiles(std::string_view text, const ParseOptions& opts) {
  Parser parser(text, opts);
  return parser.run();
}

}  // namespace fragflow::chem
