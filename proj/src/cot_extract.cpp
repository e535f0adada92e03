#include <algorithm>
#include <map>
#include <optional>

#include "bridge/arith.hpp"
#include "bridge/cot.hpp"
#include "bridge/errors.hpp"

namespace bridge {

namespace {

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }
bool ends_with(std::string_view s, std::string_view p) {
  return s.size() >= p.size() && s.substr(s.size() - p.size()) == p;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? end : end - start);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    if (!line.empty()) out.emplace_back(line);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

// Query sentences: lines, further split after ". " and "? ". Names never
// contain '.', so a period followed by a space always ends a sentence.
std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  for (const std::string& line : split_lines(text)) {
    std::size_t start = 0;
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
      if ((line[i] == '.' || line[i] == '?') && line[i + 1] == ' ') {
        out.push_back(line.substr(start, i + 1 - start));
        start = i + 2;
        while (start < line.size() && line[start] == ' ') ++start;
        i = start - 1;
      }
    }
    if (start < line.size()) out.push_back(line.substr(start));
  }
  return out;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  if (s.empty() || s.size() > 19) return std::nullopt;
  std::size_t i = (s[0] == '-') ? 1 : 0;
  if (i == s.size()) return std::nullopt;
  for (std::size_t j = i; j < s.size(); ++j) {
    if (s[j] < '0' || s[j] > '9') return std::nullopt;
  }
  return std::stoll(std::string(s));
}

// A premise before ids are assigned: refs are names.
struct RawPremise {
  std::string subject;
  std::size_t tag = 0;  // Expr alternative index
  std::int64_t k = 0;
  std::vector<std::string> refs;
  std::string sentence;
};

[[noreturn]] void unparseable(std::string_view sentence, std::string_view templates) {
  throw ExtractError("cannot match sentence against the " + std::string(templates) +
                     " templates: '" + std::string(sentence) + "'");
}

// "each A, each B and each C" -> {A, B, C}
std::optional<std::vector<std::string>> each_names(std::string_view s) {
  if (!starts_with(s, "each ")) return std::nullopt;
  std::vector<std::string> out;
  s.remove_prefix(5);
  while (true) {
    const std::size_t comma = s.find(", each ");
    const std::size_t and_ = s.find(" and each ");
    const std::size_t cut = std::min(comma, and_);
    if (cut == std::string_view::npos) {
      out.emplace_back(s);
      break;
    }
    out.emplace_back(s.substr(0, cut));
    s.remove_prefix(cut + (cut == comma ? 7 : 10));
  }
  for (const auto& n : out) {
    if (n.empty()) return std::nullopt;
  }
  return out;
}

constexpr std::size_t kConst = 0, kAddK = 1, kSum = 2, kDiff = 3, kScale = 4, kMul = 5,
                      kSquare = 6;

RawPremise parse_igsm_premise(const std::string& sentence) {
  constexpr std::string_view head = "The number of each ";
  constexpr std::string_view mid = " equals ";
  if (!starts_with(sentence, head) || !ends_with(sentence, ".")) unparseable(sentence, "igsm premise");
  std::string_view body(sentence);
  body.remove_prefix(head.size());
  body.remove_suffix(1);
  const std::size_t eq = body.find(mid);
  if (eq == std::string_view::npos) unparseable(sentence, "igsm premise");
  RawPremise p;
  p.sentence = sentence;
  p.subject = std::string(body.substr(0, eq));
  std::string_view rhs = body.substr(eq + mid.size());

  if (auto k = parse_int(rhs)) {
    p.tag = kConst;
    p.k = *k;
    return p;
  }
  auto with_k = [&](std::string_view marker) -> std::optional<std::pair<std::int64_t, std::string_view>> {
    const std::size_t at = rhs.find(marker);
    if (at == std::string_view::npos) return std::nullopt;
    auto k = parse_int(rhs.substr(0, at));
    if (!k) return std::nullopt;
    return std::make_pair(*k, rhs.substr(at + marker.size()));
  };
  auto refs_or_fail = [&](std::string_view s, std::size_t want_min, std::size_t want_max) {
    auto names = each_names(s);
    if (!names || names->size() < want_min || names->size() > want_max) unparseable(sentence, "igsm premise");
    return *names;
  };

  if (auto m = with_k(" more than the sum of ")) {
    p.tag = kAddK;
    p.k = m->first;
    p.refs = refs_or_fail(m->second, 2, SIZE_MAX);
  } else if (auto m2 = with_k(" more than ")) {
    p.tag = kAddK;
    p.k = m2->first;
    p.refs = refs_or_fail(m2->second, 1, 1);
  } else if (auto m3 = with_k(" times ")) {
    p.tag = kScale;
    p.k = m3->first;
    p.refs = refs_or_fail(m3->second, 1, 1);
  } else if (starts_with(rhs, "the difference of ")) {
    p.tag = kDiff;
    p.refs = refs_or_fail(rhs.substr(18), 2, 2);
  } else if (starts_with(rhs, "the product of ")) {
    p.tag = kMul;
    p.refs = refs_or_fail(rhs.substr(15), 2, 2);
  } else if (starts_with(rhs, "the square of ")) {
    p.tag = kSquare;
    p.refs = refs_or_fail(rhs.substr(14), 1, 1);
  } else if (starts_with(rhs, "the sum of ")) {
    p.tag = kSum;
    p.refs = refs_or_fail(rhs.substr(11), 2, SIZE_MAX);
  } else if (starts_with(rhs, "each ")) {
    p.tag = kSum;
    p.refs = refs_or_fail(rhs, 1, 1);
  } else {
    unparseable(sentence, "igsm premise");
  }
  return p;
}

RawPremise parse_pb_premise(const std::string& sentence) {
  RawPremise p;
  p.sentence = sentence;
  std::string_view s(sentence);
  if (!ends_with(s, ".")) unparseable(sentence, "promptbench premise");
  s.remove_suffix(1);
  if (starts_with(s, "The value of ")) {
    s.remove_prefix(13);
    const std::size_t is = s.find(" is ");
    if (is == std::string_view::npos) unparseable(sentence, "promptbench premise");
    auto k = parse_int(s.substr(is + 4));
    if (!k) unparseable(sentence, "promptbench premise");
    p.subject = std::string(s.substr(0, is));
    p.tag = kConst;
    p.k = *k;
    return p;
  }
  constexpr std::string_view gets = " gets its value by ";
  const std::size_t g = s.find(gets);
  if (g == std::string_view::npos) unparseable(sentence, "promptbench premise");
  p.subject = std::string(s.substr(0, g));
  std::string_view rhs = s.substr(g + gets.size());
  auto two = [&](std::string_view prefix, std::string_view sep) -> bool {
    if (!starts_with(rhs, prefix)) return false;
    std::string_view rest = rhs.substr(prefix.size());
    const std::size_t at = rest.find(sep);
    if (at == std::string_view::npos) unparseable(sentence, "promptbench premise");
    p.refs = {std::string(rest.substr(0, at)), std::string(rest.substr(at + sep.size()))};
    return true;
  };
  if (two("adding together the value of ", " and ")) {
    p.tag = kSum;
  } else if (two("multiplying together the value of ", " and ")) {
    p.tag = kMul;
  } else if (two("subtracting the value of ", " from the value of ")) {
    // "subtracting X from Y" is Y - X.
    p.tag = kDiff;
    std::swap(p.refs[0], p.refs[1]);
  } else if (starts_with(rhs, "squaring the value that ") && ends_with(rhs, " has")) {
    p.tag = kSquare;
    rhs.remove_prefix(24);
    rhs.remove_suffix(4);
    p.refs = {std::string(rhs)};
  } else {
    unparseable(sentence, "promptbench premise");
  }
  return p;
}

std::string parse_question(const std::string& sentence, Family family) {
  std::string_view s(sentence);
  if (family == Family::promptbench) {
    constexpr std::string_view head = "What is the value of ";
    if (!starts_with(s, head) || !ends_with(s, "?")) unparseable(sentence, "promptbench question");
    return std::string(s.substr(head.size(), s.size() - head.size() - 1));
  }
  constexpr std::string_view head = "How many ";
  constexpr std::string_view mid = " does each ";
  constexpr std::string_view tail = " have?";
  if (!starts_with(s, head) || !ends_with(s, tail)) unparseable(sentence, "igsm question");
  s.remove_prefix(head.size());
  s.remove_suffix(tail.size());
  const std::size_t m = s.find(mid);
  if (m == std::string_view::npos) unparseable(sentence, "igsm question");
  return std::string(s.substr(m + mid.size())) + "'s " + std::string(s.substr(0, m));
}

// What the answer contributes: per-node alias, final value and symbolic form.
struct AnswerStep {
  std::string name;
  std::string alias;
  std::string symbolic;  // empty for constants
  std::int64_t value = 0;
};

constexpr std::string_view kIgsmLeads[] = {
    // const leads: name is followed by " is <v>."
    "According to the information given, the number of each ",
    "The number of each ",
    // compute / resolve leads
    "Next, let ",
    "Now, we can find the number of each ",
    "We can then calculate the number of each ",
    "Then, let's denote the number of each ",
    "Next, we come back to the number of each ",
    "Then, let's go back to the number of each ",
};

// Parses one iGSM answer line; nullopt for reflection attempts.
std::optional<AnswerStep> parse_igsm_step(const std::string& line) {
  std::string_view s(line);
  if (!starts_with(s, "- ") || !ends_with(s, ".")) unparseable(line, "igsm answer");
  s.remove_prefix(2);
  if (ends_with(s, " is still unknown.")) return std::nullopt;

  // The equation is the tail " So|Then <alias> = <chain>."
  std::size_t eq = std::string_view::npos;
  for (std::string_view marker : {" So ", " Then "}) {
    const std::size_t at = s.rfind(marker);
    if (at != std::string_view::npos && (eq == std::string_view::npos || at > eq)) eq = at;
  }
  if (eq == std::string_view::npos) unparseable(line, "igsm answer");
  std::string_view tail = s.substr(eq + 1);
  tail.remove_prefix(starts_with(tail, "So ") ? 3 : 5);
  tail.remove_suffix(1);
  const std::size_t first_eq = tail.find(" = ");
  if (first_eq == std::string_view::npos) unparseable(line, "igsm answer");
  AnswerStep out;
  out.alias = std::string(tail.substr(0, first_eq));
  std::vector<std::string> chain;
  std::string_view rest = tail.substr(first_eq + 3);
  while (true) {
    const std::size_t at = rest.find(" = ");
    chain.emplace_back(rest.substr(0, at));
    if (at == std::string_view::npos) break;
    rest.remove_prefix(at + 3);
  }
  auto v = parse_int(chain.back());
  if (!v) unparseable(line, "igsm answer");
  out.value = *v;
  if (chain.size() > 1) out.symbolic = chain.front();

  std::string_view lead = s.substr(0, eq);
  if (starts_with(lead, "Next, let ")) {
    // "Next, let Q represent the number of each <name>."
    lead.remove_prefix(10);
    constexpr std::string_view rep = " represent the number of each ";
    const std::size_t at = lead.find(rep);
    if (at == std::string_view::npos) unparseable(line, "igsm answer");
    lead.remove_prefix(at + rep.size());
  } else {
    bool matched = false;
    for (std::string_view p : kIgsmLeads) {
      if (starts_with(lead, p)) {
        lead.remove_prefix(p.size());
        matched = true;
        break;
      }
    }
    if (!matched) unparseable(line, "igsm answer");
  }
  // Name ends at the first terminator of the lead-in sentence.
  std::size_t end = std::string_view::npos;
  for (std::string_view t : {" is ", " as ", ". "}) {
    const std::size_t at = lead.find(t);
    if (at != std::string_view::npos && at < end) end = at;
  }
  if (end == std::string_view::npos) {
    if (!ends_with(lead, ".")) unparseable(line, "igsm answer");
    end = lead.size() - 1;
  }
  out.name = std::string(lead.substr(0, end));
  return out;
}

std::optional<AnswerStep> parse_pb_step(const std::string& line) {
  std::string_view s(line);
  constexpr std::string_view head = "Let's solve ";
  if (!starts_with(s, head)) unparseable(line, "promptbench answer");
  if (ends_with(s, "let's get back.")) return std::nullopt;
  s.remove_prefix(head.size());
  const std::size_t comma = s.find_first_of(", ");
  if (comma == std::string_view::npos) unparseable(line, "promptbench answer");
  AnswerStep out;
  out.name = std::string(s.substr(0, comma));
  out.alias = out.name;
  const std::size_t last = s.rfind(", ");
  if (last == std::string_view::npos) unparseable(line, "promptbench answer");
  std::string_view eq = s.substr(last + 2);
  if (starts_with(eq, out.name + " is ")) {
    auto v = parse_int(eq.substr(out.name.size() + 4));
    if (!v) unparseable(line, "promptbench answer");
    out.value = *v;
    return out;
  }
  if (!starts_with(eq, out.name + " = ")) unparseable(line, "promptbench answer");
  eq.remove_prefix(out.name.size() + 3);
  const std::size_t at = eq.rfind(" = ");
  if (at == std::string_view::npos) unparseable(line, "promptbench answer");
  auto v = parse_int(eq.substr(at + 3));
  if (!v) unparseable(line, "promptbench answer");
  out.value = *v;
  out.symbolic = std::string(eq.substr(0, at));
  return out;
}

std::vector<AnswerStep> parse_answer(std::string_view answer, Family family) {
  std::vector<AnswerStep> out;
  for (const std::string& line : split_lines(answer)) {
    if (line == "Let's compute the answer step by step." || starts_with(line, "Thus, the answer is ")) {
      continue;
    }
    auto step = family == Family::igsm ? parse_igsm_step(line) : parse_pb_step(line);
    if (step) out.push_back(std::move(*step));
  }
  return out;
}

}  // namespace

Dag extract_dag(std::string_view query, std::string_view answer, Family family,
                const CategoryTable* categories) {
  const auto sentences = split_sentences(query);
  if (sentences.empty()) throw ExtractError("empty query");
  const std::string target_name = parse_question(sentences.back(), family);

  std::vector<RawPremise> premises;
  for (std::size_t i = 0; i + 1 < sentences.size(); ++i) {
    premises.push_back(family == Family::igsm ? parse_igsm_premise(sentences[i])
                                              : parse_pb_premise(sentences[i]));
  }

  // Ids in order of first mention.
  std::vector<std::string> names;
  std::map<std::string, NodeId> id_of;
  auto intern = [&](const std::string& n) {
    if (id_of.emplace(n, static_cast<NodeId>(names.size())).second) names.push_back(n);
  };
  std::map<std::string, const RawPremise*> premise_of;
  for (const RawPremise& p : premises) {
    if (!premise_of.emplace(p.subject, &p).second) {
      throw ExtractError("two premises define '" + p.subject + "': '" + p.sentence + "'");
    }
    intern(p.subject);
    for (const auto& r : p.refs) intern(r);
  }
  intern(target_name);

  const auto steps = parse_answer(answer, family);
  std::map<std::string, std::string> name_of_alias;
  std::map<std::string, const AnswerStep*> step_of;
  for (const AnswerStep& s : steps) {
    if (!id_of.contains(s.name)) {
      throw ExtractError("answer solves '" + s.name + "', which the query never mentions");
    }
    name_of_alias[s.alias] = s.name;
    step_of[s.name] = &s;
  }

  Dag dag;
  dag.nodes.resize(names.size());
  for (NodeId id = 0; id < names.size(); ++id) {
    Node& n = dag.nodes[id];
    n.id = id;
    n.name = names[id];
    const auto pit = premise_of.find(n.name);
    if (pit != premise_of.end()) {
      const RawPremise& p = *pit->second;
      std::vector<NodeId> refs;
      for (const auto& r : p.refs) refs.push_back(id_of.at(r));
      switch (p.tag) {
        case kConst: n.expr = expr::Const{p.k}; break;
        case kAddK: n.expr = expr::AddK{p.k, refs}; break;
        case kSum: n.expr = expr::Sum{refs}; break;
        case kDiff: n.expr = expr::Diff{refs[0], refs[1]}; break;
        case kScale: n.expr = expr::Scale{p.k, refs[0]}; break;
        case kMul: n.expr = expr::Mul{refs[0], refs[1]}; break;
        case kSquare: n.expr = expr::Square{refs[0]}; break;
      }
      n.layer = family == Family::igsm ? LayerTag::instance : LayerTag::none;
      continue;
    }
    if (family == Family::promptbench) {
      throw ExtractError("'" + n.name + "' is used but never defined");
    }
    // Abstract node: members from the answer, else from the category table.
    n.layer = LayerTag::abstract;
    std::vector<NodeId> members;
    if (const auto sit = step_of.find(n.name); sit != step_of.end() && !sit->second->symbolic.empty()) {
      auto chain = arith::split_chain(sit->second->symbolic);
      if (!chain || std::any_of(chain->ops.begin(), chain->ops.end(), [](char c) { return c != '+'; })) {
        throw ExtractError("abstract node '" + n.name + "' is not a sum in the answer");
      }
      for (const auto& a : chain->operands) {
        const auto it = name_of_alias.find(a);
        if (it == name_of_alias.end()) {
          throw ExtractError("answer uses unknown alias '" + a + "' for '" + n.name + "'");
        }
        members.push_back(id_of.at(it->second));
      }
    } else if (categories != nullptr) {
      for (const auto& [category, instances] : *categories) {
        const std::string suffix = "'s " + category;
        if (!ends_with(n.name, suffix)) continue;
        const std::string entity = n.name.substr(0, n.name.size() - suffix.size());
        for (const auto& inst : instances) {
          const auto it = id_of.find(entity + "'s " + inst);
          if (it != id_of.end() && premise_of.contains(it->first)) members.push_back(it->second);
        }
        break;
      }
    }
    if (members.empty()) {
      throw ExtractError("cannot recover the members of abstract node '" + n.name +
                         "' (not solved in the answer and no category table)");
    }
    n.expr = expr::SumChildren{members};
  }
  dag.target = id_of.at(target_name);

  if (const auto v = validate(dag); !v.empty()) {
    throw ExtractError("extracted graph is invalid: " + v.front().message);
  }
  dag = classify_roles(with_values(std::move(dag)));
  for (const AnswerStep& s : steps) {
    const Node& n = dag.at(id_of.at(s.name));
    if (n.value != s.value) {
      throw ExtractError("answer states " + std::to_string(s.value) + " for '" + s.name +
                         "' but the premises give " + std::to_string(n.value));
    }
  }
  return dag;
}

Dag extract_dag(const Task& task) {
  return extract_dag(render_query_text(task), render_answer(task), task.family,
                     task.meta.categories.empty() ? nullptr : &task.meta.categories);
}

ModelOutput parse_model_output(std::string_view text) {
  ModelOutput out;
  std::string_view s = text;
  while (!s.empty() && (s.front() == ' ' || s.front() == '\n')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\n')) s.remove_suffix(1);

  const std::size_t think_open = s.find("<think>");
  const std::size_t think_close = s.find("</think>");
  const std::size_t ans_open = s.find("<answer>");
  const std::size_t ans_close = s.rfind("</answer>");
  out.format_ok = think_open == 0 && think_close != std::string_view::npos &&
                  ans_open != std::string_view::npos && ans_close != std::string_view::npos &&
                  think_close < ans_open && ans_open < ans_close &&
                  ans_close + 9 == s.size() &&
                  s.find("<think>", think_open + 1) == std::string_view::npos &&
                  s.find("</think>", think_close + 1) == std::string_view::npos &&
                  s.find("<answer>", ans_open + 1) == std::string_view::npos;
  if (out.format_ok) {
    std::string_view between = s.substr(think_close + 8, ans_open - think_close - 8);
    out.format_ok = between.find_first_not_of(" \n") == std::string_view::npos;
  }

  // Last \boxed{...} inside the answer tag (or after it opens when unclosed).
  if (ans_open == std::string_view::npos) return out;
  std::string_view region = s.substr(ans_open);
  if (ans_close != std::string_view::npos && ans_close > ans_open) {
    region = s.substr(ans_open, ans_close - ans_open);
  }
  const std::size_t box = region.rfind("\\boxed{");
  if (box == std::string_view::npos) return out;
  std::string_view inner = region.substr(box + 7);
  const std::size_t close = inner.find('}');
  if (close == std::string_view::npos) return out;
  inner = inner.substr(0, close);
  while (!inner.empty() && inner.front() == ' ') inner.remove_prefix(1);
  while (!inner.empty() && inner.back() == ' ') inner.remove_suffix(1);
  out.final_answer = parse_int(inner);
  return out;
}

}  // namespace bridge
