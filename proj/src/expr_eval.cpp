#include <cctype>

#include "bridge/arith.hpp"
#include "bridge/dag.hpp"
#include "bridge/errors.hpp"

namespace bridge::arith {

std::string operand(std::int64_t v) {
  return v < 0 ? "(" + std::to_string(v) + ")" : std::to_string(v);
}

namespace {

class Parser {
 public:
  Parser(std::string_view text, const Lookup& lookup) : s_(text), lookup_(lookup) {}

  Evaluated run() {
    const std::int64_t v = expr();
    skip();
    if (pos_ != s_.size()) fail("trailing input");
    return {v, ops_};
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw FormatError("cannot evaluate '" + std::string(s_) + "': " + why);
  }

  void skip() {
    while (pos_ < s_.size() && s_[pos_] == ' ') ++pos_;
  }

  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::int64_t expr() {
    std::int64_t v = term();
    while (true) {
      if (eat('+')) {
        ++ops_;
        v = checked_add(v, term());
      } else if (eat('-')) {
        ++ops_;
        v = checked_sub(v, term());
      } else {
        return v;
      }
    }
  }

  std::int64_t term() {
    std::int64_t v = factor();
    while (eat('*')) {
      ++ops_;
      v = checked_mul(v, factor());
    }
    return v;
  }

  std::int64_t factor() {
    std::int64_t v = atom();
    skip();
    if (pos_ + 1 < s_.size() && s_[pos_] == '^' && s_[pos_ + 1] == '2') {
      pos_ += 2;
      ++ops_;
      v = checked_mul(v, v);
    }
    return v;
  }

  std::int64_t integer(bool negative) {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (start == pos_) fail("expected digits");
    if (pos_ - start > 18) fail("literal too long");
    std::int64_t v = std::stoll(std::string(s_.substr(start, pos_ - start)));
    return negative ? -v : v;
  }

  std::int64_t atom() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c))) return integer(false);
    if (c == '(') {
      ++pos_;
      skip();
      std::int64_t v = 0;
      if (pos_ < s_.size() && s_[pos_] == '-') {
        ++pos_;
        v = integer(true);
      } else {
        v = expr();
      }
      if (!eat(')')) fail("expected ')'");
      return v;
    }
    if (c == '-' && pos_ == 0) {
      // A bare negative result such as "-24".
      ++pos_;
      return integer(true);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() &&
             (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) {
        ++pos_;
      }
      const std::string_view ident = s_.substr(start, pos_ - start);
      if (!lookup_) fail("identifier '" + std::string(ident) + "' without bindings");
      const auto v = lookup_(ident);
      if (!v) fail("unknown identifier '" + std::string(ident) + "'");
      return *v;
    }
    fail(std::string("unexpected '") + c + "'");
  }

  std::string_view s_;
  const Lookup& lookup_;
  std::size_t pos_ = 0;
  int ops_ = 0;
};

}  // namespace

Evaluated evaluate(std::string_view text, const Lookup& lookup) {
  return Parser(text, lookup).run();
}

std::optional<Chain> split_chain(std::string_view text) {
  Chain c;
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string_view {
    while (pos < text.size() && text[pos] == ' ') ++pos;
    const std::size_t start = pos;
    if (pos < text.size() && text[pos] == '(') {
      while (pos < text.size() && text[pos] != ')') ++pos;
      if (pos < text.size()) ++pos;
    } else {
      while (pos < text.size() && text[pos] != ' ') ++pos;
    }
    return text.substr(start, pos - start);
  };
  std::string_view t = next_token();
  if (t.empty()) return std::nullopt;
  c.operands.emplace_back(t);
  while (true) {
    std::string_view op = next_token();
    if (op.empty()) break;
    if (op.size() != 1 || (op[0] != '+' && op[0] != '-' && op[0] != '*')) return std::nullopt;
    std::string_view rhs = next_token();
    if (rhs.empty()) return std::nullopt;
    c.ops.push_back(op[0]);
    c.operands.emplace_back(rhs);
  }
  return c;
}

std::string join_chain(const Chain& c) {
  std::string out = c.operands.front();
  for (std::size_t i = 0; i < c.ops.size(); ++i) {
    out += ' ';
    out += c.ops[i];
    out += ' ';
    out += c.operands[i + 1];
  }
  return out;
}

std::vector<std::string> fold_left_steps(std::string_view numeric) {
  auto chain = split_chain(numeric);
  if (!chain) throw FormatError("not a flat chain: '" + std::string(numeric) + "'");
  for (char op : chain->ops) {
    if (op == '*' && chain->ops.size() > 1) {
      throw FormatError("cannot fold mixed-precedence chain: '" + std::string(numeric) + "'");
    }
  }
  std::vector<std::string> out;
  while (!chain->ops.empty()) {
    const std::string head = chain->operands[0] + ' ' + chain->ops[0] + ' ' + chain->operands[1];
    const std::int64_t v = evaluate(head).value;
    chain->operands.erase(chain->operands.begin());
    chain->operands[0] = chain->ops.size() > 1 ? operand(v) : std::to_string(v);
    chain->ops.erase(chain->ops.begin());
    out.push_back(join_chain(*chain));
  }
  return out;
}

}  // namespace bridge::arith
