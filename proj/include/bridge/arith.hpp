#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bridge::arith {

// Resolves an identifier (an alias such as "S" or a name such as "aab").
using Lookup = std::function<std::optional<std::int64_t>(std::string_view)>;

// Integer literal as written inside an expression: negatives are parenthesized.
std::string operand(std::int64_t v);

struct Evaluated {
  std::int64_t value = 0;
  int binary_ops = 0;  // '+', '-', '*' and postfix '^2' each count one
};

// Grammar: expr := term (('+'|'-') term)* ; term := factor ('*' factor)* ;
// factor := atom ('^2')? ; atom := int | '(' '-'? int ')' | ident | '(' expr ')'.
// Throws FormatError on malformed text or unknown identifiers.
Evaluated evaluate(std::string_view text, const Lookup& lookup = {});

// Flat chain of operands joined by binary operators, e.g. "13 + 5 + 6".
struct Chain {
  std::vector<std::string> operands;
  std::vector<char> ops;
};
std::optional<Chain> split_chain(std::string_view text);
std::string join_chain(const Chain& c);

// Left-folds a flat +/- chain one operation at a time:
// "13 + 5 + 6" -> {"18 + 6", "24"}. Single-operation input yields {value}.
std::vector<std::string> fold_left_steps(std::string_view numeric);

}  // namespace bridge::arith
