#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "../minicp/lexer.hpp"
#include "json.hpp"
#include "streamforge/pool/pool.hpp"

namespace streamforge::pool {

namespace {

using minicp::detail::Tok;
using minicp::detail::Token;

std::string strip_whitespace(const std::string& text) {
  std::string out;
  for (char ch : text) {
    if (!std::isspace(static_cast<unsigned char>(ch))) out.push_back(ch);
  }
  return out;
}

std::string token_spelling(const Token& token) {
  switch (token.kind) {
    case Tok::Int: return "_";
    case Tok::Ident: return token.text;
    case Tok::LParen: return "(";
    case Tok::RParen: return ")";
    case Tok::LBracket: return "[";
    case Tok::RBracket: return "]";
    case Tok::Comma: return ",";
    case Tok::Semi: return ";";
    case Tok::Pipe: return "|";
    case Tok::Plus: return "+";
    case Tok::Minus: return "-";
    case Tok::Star: return "*";
    case Tok::DotDot: return "..";
    case Tok::Eq: return "=";
    case Tok::Ne: return "!=";
    case Tok::Lt: return "<";
    case Tok::Le: return "<=";
    case Tok::Gt: return ">";
    case Tok::Ge: return ">=";
    case Tok::And: return "/\\";
    case Tok::Or: return "\\/";
    case Tok::Implies: return "->";
    case Tok::KwForall: return "forall";
    case Tok::KwExists: return "exists";
    case Tok::KwSum: return "sum";
    case Tok::KwIn: return "in";
    case Tok::KwWhere: return "where";
    case Tok::KwDiv: return "div";
    case Tok::KwMod: return "mod";
    case Tok::KwNot: return "not";
    case Tok::KwParam: return "param";
    case Tok::KwSet: return "set";
    case Tok::KwVar: return "var";
    case Tok::KwConstraint: return "constraint";
    case Tok::KwBool: return "bool";
    case Tok::KwTrue: return "true";
    case Tok::KwFalse: return "false";
    case Tok::End: return "";
  }
  return "";
}

std::vector<Token> lex_or_throw(const std::string& text) {
  try {
    return minicp::detail::lex(text);
  } catch (const std::exception& e) {
    throw PoolError("candidate text does not lex: " + std::string(e.what()));
  }
}

/// Source span of every integer literal, in order. Mirrors the lexer: digit
/// runs outside identifiers, `%` comments skipped.
struct LiteralSpan {
  std::size_t begin = 0;
  std::size_t length = 0;
  long long value = 0;
};

std::vector<LiteralSpan> literal_spans(const std::string& text) {
  std::vector<LiteralSpan> spans;
  std::size_t i = 0;
  const auto alpha = [](char ch) {
    return std::isalpha(static_cast<unsigned char>(ch)) || ch == '_';
  };
  while (i < text.size()) {
    const char ch = text[i];
    if (ch == '%') {
      while (i < text.size() && text[i] != '\n') ++i;
    } else if (alpha(ch)) {
      while (i < text.size() &&
             (alpha(text[i]) || std::isdigit(static_cast<unsigned char>(text[i])))) {
        ++i;
      }
    } else if (std::isdigit(static_cast<unsigned char>(ch))) {
      LiteralSpan span;
      span.begin = i;
      while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
        ++i;
      }
      span.length = i - span.begin;
      span.value = std::stoll(text.substr(span.begin, span.length));
      spans.push_back(span);
    } else {
      ++i;
    }
  }
  return spans;
}

enum class Direction { None, SmallerTighter, LargerTighter };

bool expression_boundary_before(const std::vector<Token>& tokens,
                                std::size_t ti) {
  if (ti == 0) return true;
  switch (tokens[ti - 1].kind) {
    case Tok::LParen:
    case Tok::Comma:
    case Tok::And:
    case Tok::Or:
    case Tok::Implies:
    case Tok::Semi:
      return true;
    default:
      return false;
  }
}

bool expression_boundary_after(const std::vector<Token>& tokens,
                               std::size_t ti) {
  switch (tokens[ti + 1].kind) {
    case Tok::End:
    case Tok::RParen:
    case Tok::Comma:
    case Tok::And:
    case Tok::Or:
    case Tok::Implies:
    case Tok::Semi:
      return true;
    default:
      return false;
  }
}

/// Direction of tightening for the literal at token index `ti`, readable only
/// when the literal is the entire side of a strict or non-strict inequality.
Direction direction_at(const std::vector<Token>& tokens, std::size_t ti) {
  if (ti > 0) {
    const Tok prev = tokens[ti - 1].kind;
    if ((prev == Tok::Le || prev == Tok::Lt) &&
        expression_boundary_after(tokens, ti)) {
      return Direction::SmallerTighter;  // x <= K
    }
    if ((prev == Tok::Ge || prev == Tok::Gt) &&
        expression_boundary_after(tokens, ti)) {
      return Direction::LargerTighter;  // x >= K
    }
  }
  const Tok next = tokens[ti + 1].kind;
  if ((next == Tok::Le || next == Tok::Lt) &&
      expression_boundary_before(tokens, ti)) {
    return Direction::LargerTighter;  // K <= x
  }
  if ((next == Tok::Ge || next == Tok::Gt) &&
      expression_boundary_before(tokens, ti)) {
    return Direction::SmallerTighter;  // K >= x
  }
  return Direction::None;
}

/// First JSON array-of-integer-arrays embedded in `response`, or nullopt.
std::optional<std::vector<std::vector<int>>> extract_groups(
    const std::string& response) {
  for (std::size_t start = response.find('['); start != std::string::npos;
       start = response.find('[', start + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < response.size(); ++i) {
      const char ch = response[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (ch == '\\') {
          escaped = true;
        } else if (ch == '"') {
          in_string = false;
        }
        continue;
      }
      if (ch == '"') {
        in_string = true;
      } else if (ch == '[') {
        ++depth;
      } else if (ch == ']') {
        if (--depth == 0) {
          const auto parsed = nlohmann::json::parse(
              response.substr(start, i - start + 1), nullptr,
              /*allow_exceptions=*/false);
          if (parsed.is_array()) {
            std::vector<std::vector<int>> groups;
            bool ok = true;
            for (const nlohmann::json& group : parsed) {
              if (!group.is_array()) {
                ok = false;
                break;
              }
              std::vector<int> ids;
              for (const nlohmann::json& id : group) {
                if (!id.is_number_integer()) {
                  ok = false;
                  break;
                }
                ids.push_back(id.get<int>());
              }
              if (!ok) break;
              groups.push_back(std::move(ids));
            }
            if (ok && !groups.empty()) return groups;
          }
          break;  // not a usable array; try the next '['
        }
      }
    }
  }
  return std::nullopt;
}

std::vector<SemanticCluster> cluster_by_signature(
    const std::vector<PooledCandidate>& pool) {
  std::vector<SemanticCluster> clusters;
  std::map<std::string, std::size_t> index;
  for (const PooledCandidate& entry : pool) {
    const std::string signature = signature_of(entry.candidate.text);
    const auto it = index.find(signature);
    if (it == index.end()) {
      index.emplace(signature, clusters.size());
      clusters.push_back({signature, {entry}});
    } else {
      clusters[it->second].members.push_back(entry);
    }
  }
  return clusters;
}

/// Splits one proposed group into signature-pure clusters, preserving order.
std::vector<SemanticCluster> split_by_signature(
    const std::vector<PooledCandidate>& members) {
  std::vector<SemanticCluster> parts;
  std::map<std::string, std::size_t> index;
  for (const PooledCandidate& entry : members) {
    const std::string signature = signature_of(entry.candidate.text);
    const auto it = index.find(signature);
    if (it == index.end()) {
      index.emplace(signature, parts.size());
      parts.push_back({signature, {entry}});
    } else {
      parts[it->second].members.push_back(entry);
    }
  }
  return parts;
}

/// The varying literal values per member when exactly one literal position
/// differs across the cluster; nullopt otherwise.
struct VaryingLiteral {
  std::size_t token_index = 0;    ///< index of the literal in the token stream
  std::size_t literal_index = 0;  ///< index among the text's literals
  std::vector<long long> values;  ///< one per member, in member order
};

std::optional<VaryingLiteral> find_varying_literal(
    const SemanticCluster& cluster) {
  std::vector<std::vector<long long>> tuples;
  for (const PooledCandidate& member : cluster.members) {
    std::vector<long long> tuple;
    for (const LiteralSpan& span : literal_spans(member.candidate.text)) {
      tuple.push_back(span.value);
    }
    if (!tuples.empty() && tuple.size() != tuples.front().size()) {
      return std::nullopt;  // defensive; signatures should prevent this
    }
    tuples.push_back(std::move(tuple));
  }
  if (tuples.empty() || tuples.front().empty()) return std::nullopt;

  std::optional<std::size_t> varying;
  for (std::size_t p = 0; p < tuples.front().size(); ++p) {
    bool differs = false;
    for (const auto& tuple : tuples) {
      if (tuple[p] != tuples.front()[p]) {
        differs = true;
        break;
      }
    }
    if (differs) {
      if (varying) return std::nullopt;  // more than one parameter
      varying = p;
    }
  }
  if (!varying) return std::nullopt;  // single member or identical tuples

  VaryingLiteral result;
  result.literal_index = *varying;
  for (const auto& tuple : tuples) result.values.push_back(tuple[*varying]);

  // Locate the literal's position in the token stream of the first member.
  const auto tokens = lex_or_throw(cluster.members.front().candidate.text);
  std::size_t seen = 0;
  for (std::size_t ti = 0; ti < tokens.size(); ++ti) {
    if (tokens[ti].kind != Tok::Int) continue;
    if (seen == *varying) {
      result.token_index = ti;
      return result;
    }
    ++seen;
  }
  return std::nullopt;
}

long long lower_median(std::vector<long long> values) {
  std::sort(values.begin(), values.end());
  return values[(values.size() - 1) / 2];
}

std::vector<Representative> pass_through(const SemanticCluster& cluster) {
  std::vector<Representative> out;
  for (const PooledCandidate& member : cluster.members) {
    out.push_back({member.candidate, Role::Member, member.provenance});
  }
  return out;
}

std::optional<long long> extrapolated_value(
    const std::optional<props::Progression>& progression,
    Direction direction) {
  if (!progression || !progression->has_fit || progression->rows.size() < 2) {
    return std::nullopt;
  }
  const auto& rows = progression->rows;
  const double step = rows.back().size - rows[rows.size() - 2].size;
  const double predicted =
      progression->slope * (rows.back().size + step) + progression->intercept;
  // Aggressive semantics: round the prediction toward the tighter side.
  const double rounded = direction == Direction::SmallerTighter
                             ? std::floor(predicted)
                             : std::ceil(predicted);
  return static_cast<long long>(rounded);
}

std::string substitute_literal(const std::string& text,
                               std::size_t literal_index, long long value) {
  const auto spans = literal_spans(text);
  const LiteralSpan& span = spans.at(literal_index);
  return text.substr(0, span.begin) + std::to_string(value) +
         text.substr(span.begin + span.length);
}

}  // namespace

std::vector<PooledCandidate> pool_across_instances(
    const std::map<std::string, std::vector<synth::CandidateStreamliner>>&
        per_instance) {
  std::vector<PooledCandidate> pool;
  std::map<std::string, std::size_t> index;
  for (const auto& [instance_id, candidates] : per_instance) {
    for (const synth::CandidateStreamliner& candidate : candidates) {
      const std::string key = strip_whitespace(candidate.text);
      const auto it = index.find(key);
      if (it == index.end()) {
        index.emplace(key, pool.size());
        pool.push_back({candidate, {{instance_id, candidate.seed}}});
      } else {
        PooledCandidate& entry = pool[it->second];
        const Provenance row{instance_id, candidate.seed};
        if (std::find(entry.provenance.begin(), entry.provenance.end(), row) ==
            entry.provenance.end()) {
          entry.provenance.push_back(row);
        }
      }
    }
  }
  return pool;
}

std::string signature_of(const std::string& text) {
  std::string signature;
  for (const Token& token : lex_or_throw(text)) {
    if (token.kind == Tok::End) break;
    if (!signature.empty()) signature.push_back(' ');
    signature += token_spelling(token);
  }
  return signature;
}

std::string build_cluster_payload(const std::vector<PooledCandidate>& pool) {
  std::ostringstream out;
  out << "# Semantic clustering request\n\n"
      << "Group the following constraints. Two constraints belong to the "
         "same group exactly when they differ only in numeric parameter "
         "values.\n\n";
  out << "## Candidates\n";
  for (std::size_t i = 0; i < pool.size(); ++i) {
    out << (i + 1) << ". " << pool[i].candidate.text << "\n";
  }
  if (pool.empty()) out << "(none)\n";
  out << "\n## Task\n"
      << "Respond with a JSON array of groups, each group an array of "
         "candidate numbers, e.g. [[1, 3], [2]]. Every candidate number "
         "must appear in exactly one group.\n";
  return out.str();
}

ClusterResult cluster(const std::vector<PooledCandidate>& pool,
                      synth::LlmBackend* backend) {
  ClusterResult result;
  if (pool.empty()) return result;
  if (backend == nullptr) {
    result.clusters = cluster_by_signature(pool);
    return result;
  }

  const std::string response =
      backend->complete(build_cluster_payload(pool), {});
  const auto groups = extract_groups(response);
  if (!groups) {
    result.diagnostics.push_back(
        "backend answer has no candidate grouping; falling back to "
        "signature clustering");
    result.clusters = cluster_by_signature(pool);
    return result;
  }

  std::vector<bool> assigned(pool.size(), false);
  std::vector<std::vector<PooledCandidate>> proto;
  for (std::size_t g = 0; g < groups->size(); ++g) {
    std::vector<PooledCandidate> members;
    for (int id : (*groups)[g]) {
      if (id < 1 || static_cast<std::size_t>(id) > pool.size()) {
        result.diagnostics.push_back(
            "group " + std::to_string(g + 1) + ": candidate number " +
            std::to_string(id) + " is out of range");
        continue;
      }
      const std::size_t pi = static_cast<std::size_t>(id - 1);
      if (assigned[pi]) {
        result.diagnostics.push_back(
            "candidate " + std::to_string(id) +
            " assigned to more than one group; keeping the first assignment");
        continue;
      }
      assigned[pi] = true;
      members.push_back(pool[pi]);
    }
    if (!members.empty()) proto.push_back(std::move(members));
  }
  for (std::size_t pi = 0; pi < pool.size(); ++pi) {
    if (!assigned[pi]) {
      result.diagnostics.push_back("candidate " + std::to_string(pi + 1) +
                                   " missing from the grouping; kept as a "
                                   "singleton");
      proto.push_back({pool[pi]});
    }
  }

  for (std::size_t g = 0; g < proto.size(); ++g) {
    auto parts = split_by_signature(proto[g]);
    if (parts.size() > 1) {
      result.diagnostics.push_back(
          "group " + std::to_string(g + 1) + " mixes " +
          std::to_string(parts.size()) +
          " constraint shapes; split by signature");
    }
    for (auto& part : parts) result.clusters.push_back(std::move(part));
  }
  return result;
}

const char* role_name(Role role) {
  switch (role) {
    case Role::Tightest: return "tightest";
    case Role::Loosest: return "loosest";
    case Role::ParametricMedian: return "parametric_median";
    case Role::Extrapolated: return "extrapolated";
    case Role::Member: return "member";
  }
  return "member";
}

std::vector<Representative> expand_representatives(
    const SemanticCluster& cluster,
    const std::optional<props::Progression>& progression) {
  if (cluster.members.empty()) return {};
  const auto varying = find_varying_literal(cluster);
  if (!varying) return pass_through(cluster);

  const auto tokens = lex_or_throw(cluster.members.front().candidate.text);
  const Direction direction = direction_at(tokens, varying->token_index);

  const auto member_with_value = [&](long long value) -> std::size_t {
    for (std::size_t m = 0; m < varying->values.size(); ++m) {
      if (varying->values[m] == value) return m;
    }
    return 0;  // unreachable: values come from the members
  };

  std::vector<std::pair<Role, long long>> picks;
  if (direction == Direction::None) {
    picks.emplace_back(Role::ParametricMedian, lower_median(varying->values));
  } else {
    const auto [min_it, max_it] =
        std::minmax_element(varying->values.begin(), varying->values.end());
    const long long tight =
        direction == Direction::SmallerTighter ? *min_it : *max_it;
    const long long loose =
        direction == Direction::SmallerTighter ? *max_it : *min_it;
    picks.emplace_back(Role::Tightest, tight);
    picks.emplace_back(Role::Loosest, loose);
    picks.emplace_back(Role::ParametricMedian, lower_median(varying->values));
  }

  std::vector<Representative> out;
  std::set<long long> chosen;
  for (const auto& [role, value] : picks) {
    if (!chosen.insert(value).second) continue;  // first role wins
    const PooledCandidate& member =
        cluster.members[member_with_value(value)];
    out.push_back({member.candidate, role, member.provenance});
  }

  if (direction != Direction::None) {
    const auto value = extrapolated_value(progression, direction);
    if (value && chosen.insert(*value).second) {
      const auto existing = std::find(varying->values.begin(),
                                      varying->values.end(), *value);
      if (existing != varying->values.end()) {
        const PooledCandidate& member = cluster.members[static_cast<std::size_t>(
            existing - varying->values.begin())];
        out.push_back({member.candidate, Role::Extrapolated, member.provenance});
      } else {
        const PooledCandidate& base = cluster.members.front();
        Representative rep;
        rep.candidate = base.candidate;
        rep.candidate.text = substitute_literal(
            base.candidate.text, varying->literal_index, *value);
        rep.candidate.descriptor = base.candidate.descriptor + "_extrapolated";
        rep.candidate.aggressiveness = synth::Aggressiveness::Aggressive;
        rep.role = Role::Extrapolated;
        rep.provenance = base.provenance;
        out.push_back(std::move(rep));
      }
    }
  }
  return out;
}

std::vector<Representative> expand_all(
    const std::vector<SemanticCluster>& clusters,
    const std::optional<props::Progression>& progression) {
  std::vector<Representative> out;
  for (const SemanticCluster& cluster : clusters) {
    auto expanded = expand_representatives(cluster, progression);
    out.insert(out.end(), std::make_move_iterator(expanded.begin()),
               std::make_move_iterator(expanded.end()));
  }
  return out;
}

std::string cluster_report(const std::vector<SemanticCluster>& clusters,
                           const std::optional<props::Progression>& progression) {
  std::ostringstream out;
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    const SemanticCluster& cluster = clusters[c];
    out << "cluster " << (c + 1) << " (" << cluster.members.size()
        << (cluster.members.size() == 1 ? " member)\n" : " members)\n");
    out << "  signature: " << cluster.signature << "\n";
    for (const PooledCandidate& member : cluster.members) {
      out << "  member: " << member.candidate.descriptor << "  "
          << member.candidate.text << "\n";
    }
    for (const Representative& rep :
         expand_representatives(cluster, progression)) {
      out << "  representative[" << role_name(rep.role) << "]: "
          << rep.candidate.text << "\n";
    }
  }
  if (clusters.empty()) out << "(no clusters)\n";
  return out.str();
}

}  // namespace streamforge::pool
