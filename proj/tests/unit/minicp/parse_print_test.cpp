#include <string>
#include <vector>

#include "doctest.h"
#include "streamforge/minicp/ast.hpp"
#include "streamforge/minicp/parse.hpp"

using namespace streamforge::minicp;

namespace {

// Expression corpus covering every operator, quantifiers with multi-name and
// per-generator where clauses, comprehensions, parameter-composed indexing,
// and the full bracket/precedence surface of the language.
const std::vector<std::string> kRoundTripCorpus = {
    // Position bounds over a layout-indexed variable, three tightness levels.
    "forall(i in 1..17)(y[layout[i,1]] <= 25)",
    "forall(i in 1..17)(y[layout[i,1]] <= 30)",
    "forall(i in 1..17)(y[layout[i,1]] <= 35)",
    // Counting constraint over adjacent positions.
    "sum(p in 1..51)(bool2int(x[p+1] > x[p])) <= 27",
    // Modular pin on the final position.
    "(x[52]-1) mod 13 = 12",
    "x[26]=26",
    "x[52]=52",
    // Algebraic group assignment formulas.
    "forall(g in Golfer)(assign[g, 1] = ((g-1) div n_per_group) + 1)",
    "forall(g in Golfer)(assign[g, 2] = ((((g-1) div n_per_group) + ((g-1) mod n_per_group)) mod n_groups) + 1)",
    "forall(w in Week where w > 1)(assign[1, w] = 1)",
    "forall(g in Golfer where g > 1, w in 1..n_rounds-1)(assign[g, w] != assign[g, w+1])",
    // Packing constraints: orientation-aware bound, parity, clustering.
    "forall(c in Containers where max(width[c], length[c]) <= deck_width)(Left[c] <= deck_width - max(width[c], length[c]))",
    "forall(c in Containers)(Bottom[c] mod 2 = 0)",
    "forall(c, k in Containers where c < k /\\ class[c] = class[k])(abs(Left[c] - Left[k]) <= deck_width div 3)",
    "forall(c1, c2 in Containers where c1 < c2 /\\ width[c1]=width[c2] /\\ length[c1]=length[c2] /\\ class[c1]=class[c2])(lex_lesseq([Left[c1], Bottom[c1]], [Left[c2], Bottom[c2]]))",
    "forall(c in Containers where width[c]=length[c])(not rotated[c])",
    // Arithmetic precedence and associativity.
    "1 + 2 * 3 - 4 div 5 mod 6",
    "(1 + 2) * 3",
    "2 - 3 - 4",
    "2 - (3 - 4)",
    "x div 2 div 3",
    "x - y + z",
    "-x + -5",
    "-(a + b) * c",
    "x = -1",
    "-5 mod 3 = -2",
    "a - -5 = 7",
    // Logical structure.
    "not (a \\/ b) /\\ c -> d",
    "a -> b -> c",
    "a -> (b -> c)",
    "(a /\\ b) \\/ (c /\\ d)",
    "a /\\ (b \\/ c)",
    "not not p",
    "x != y \\/ x = z",
    "p /\\ q /\\ r",
    "p \\/ q \\/ r",
    // Builtins.
    "abs(x - y) <= max(a, b) + min(a, b)",
    "bool2int(x > 0) + bool2int(y > 0) = 1",
    "alldifferent([q[i] | i in 1..n])",
    "alldifferent(q)",
    "lex_lesseq([x[1], x[2]], [y[1], y[2]])",
    "min(max(a, b), c) = b",
    // Quantifiers and comprehensions.
    "exists(i in 1..9 where i mod 2 = 1)(x[i] = i)",
    "exists(w in Week)(assign[1, w] = 2)",
    "sum(i in 1..n, j in 1..n where i != j)(a[i, j]) = total",
    "forall(i in 1..n)(forall(j in 1..n where j > i)(a[i, j] >= a[j, i]))",
    "forall(c1, c2 in Containers where c1 < c2)(Left[c1] <= Left[c2])",
    "sum(i in 1..10)(bool2int(x[i] = i)) >= 3",
    "[x[i] + 1 | i in 1..n]",
    "[a[i] | i in 1..n where a[i] > 0]",
    "[a[i, j] | i in 1..3, j in 1..3]",
    "alldifferent([y[layout[i, 1]] | i in 1..17])",
    // Conjunction chains and index arithmetic.
    "x[1] = 1 /\\ x[2] = 2 /\\ x[3] = 3",
    "x[i+1] - x[i] < 2 /\\ x[i] - x[i+1] < 2",
    "y[layout[i, 1]] + y[layout[i, 2]] <= 60",
    "forall(i in 1..17)(y[layout[i, 1]] <= K)",
    "true",
    "false \\/ 1 = 1",
};

}  // namespace

TEST_CASE("round-trip: parse, print, parse yields an identical tree") {
  REQUIRE(kRoundTripCorpus.size() >= 50);
  for (const std::string& text : kRoundTripCorpus) {
    CAPTURE(text);
    ExprPtr first = parse_expression(text);
    const std::string printed = print(first);
    CAPTURE(printed);
    ExprPtr second = parse_expression(printed);
    CHECK(equal(first, second));
    // The printed form is a fixed point.
    CHECK(print(second) == printed);
  }
}

TEST_CASE("printer canonicalizes whitespace and keeps required parentheses") {
  CHECK(print(parse_expression("x[52]=52")) == "x[52] = 52");
  CHECK(print(parse_expression("(x[52]-1) mod 13 = 12")) == "(x[52] - 1) mod 13 = 12");
  CHECK(print(parse_expression("(1+2)*3")) == "(1 + 2) * 3");
  CHECK(print(parse_expression("1+(2*3)")) == "1 + 2 * 3");
  CHECK(print(parse_expression("2-(3-4)")) == "2 - (3 - 4)");
  CHECK(print(parse_expression("(2-3)-4")) == "2 - 3 - 4");
  CHECK(print(parse_expression("a -> (b -> c)")) == "a -> (b -> c)");
  CHECK(print(parse_expression("(a -> b) -> c")) == "a -> b -> c");
  CHECK(print(parse_expression("a /\\ (b \\/ c)")) == "a /\\ (b \\/ c)");
  CHECK(print(parse_expression("(a /\\ b) \\/ c")) == "a /\\ b \\/ c");
  CHECK(print(parse_expression("not(a)")) == "not a");
  CHECK(print(parse_expression("-(5)")) == "-5");
  CHECK(print(parse_expression("forall(i in 1..3)(x[i]=i)")) ==
        "forall(i in 1..3)(x[i] = i)");
}

TEST_CASE("negated literals fold so they survive printing") {
  ExprPtr neg = parse_expression("-5");
  REQUIRE(neg->kind == Expr::Kind::IntLit);
  CHECK(neg->int_val == -5);
  CHECK(print(neg) == "-5");
}

TEST_CASE("== is accepted as a spelling of =") {
  CHECK(equal(parse_expression("x == 3"), parse_expression("x = 3")));
}

TEST_CASE("structural equality distinguishes different trees") {
  CHECK_FALSE(equal(parse_expression("x + y"), parse_expression("x - y")));
  CHECK_FALSE(equal(parse_expression("x[1]"), parse_expression("x[2]")));
  CHECK_FALSE(equal(parse_expression("forall(i in 1..3)(x[i] = i)"),
                    parse_expression("forall(i in 1..4)(x[i] = i)")));
  CHECK_FALSE(equal(parse_expression("forall(i in 1..3)(x[i] = i)"),
                    parse_expression("forall(i in 1..3 where i > 1)(x[i] = i)")));
  CHECK_FALSE(equal(parse_expression("alldifferent(q)"), parse_expression("alldifferent(r)")));
}

TEST_CASE("parse errors carry position and a description") {
  auto check_error = [](const std::string& text, int line, int column) {
    CAPTURE(text);
    try {
      parse_expression(text);
      FAIL_CHECK("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == line);
      CHECK(e.column() == column);
    }
  };

  check_error("x +", 1, 4);          // runs off the end
  check_error("a = b = c", 1, 7);    // chained comparison
  check_error("foo(1, 2)", 1, 4);    // unknown function (reported at '(')
  check_error("(x", 1, 3);           // unclosed parenthesis
  check_error("1 5", 1, 3);          // trailing token
  check_error("x $ y", 1, 3);        // unknown character
  check_error("forall(i in 1..3)\n  (q[i] =\n)", 3, 1);
}

TEST_CASE("arity of builtins is enforced at parse time") {
  CHECK_THROWS_AS(parse_expression("abs(1, 2)"), ParseError);
  CHECK_THROWS_AS(parse_expression("min(1)"), ParseError);
  CHECK_THROWS_AS(parse_expression("bool2int()"), ParseError);
  CHECK_THROWS_AS(parse_expression("lex_lesseq([1])"), ParseError);
  CHECK_THROWS_AS(parse_expression("alldifferent(x, y)"), ParseError);
}

TEST_CASE("array forms disambiguate: literal, singleton, comprehension") {
  ExprPtr lit = parse_expression("[1, 2, 3]");
  CHECK(lit->kind == Expr::Kind::ArrayLit);
  CHECK(lit->args.size() == 3);

  ExprPtr single = parse_expression("[x]");
  CHECK(single->kind == Expr::Kind::ArrayLit);
  CHECK(single->args.size() == 1);

  ExprPtr comp = parse_expression("[x[i] | i in 1..3]");
  CHECK(comp->kind == Expr::Kind::Comprehension);
  CHECK(comp->gens.size() == 1);

  CHECK_THROWS_AS(parse_expression("[1, 2 | i in 1..3]"), ParseError);
}

TEST_CASE("generators parse multi-name groups and per-generator filters") {
  ExprPtr e = parse_expression(
      "forall(c1, c2 in Containers where c1 < c2, w in 1..n-1 where w mod 2 = 0)(x[w] = c1)");
  REQUIRE(e->gens.size() == 2);
  CHECK(e->gens[0].names == std::vector<std::string>{"c1", "c2"});
  CHECK(e->gens[0].set.is_named());
  CHECK(e->gens[0].set.name == "Containers");
  CHECK(e->gens[0].where != nullptr);
  CHECK(e->gens[1].names == std::vector<std::string>{"w"});
  CHECK_FALSE(e->gens[1].set.is_named());
  CHECK(e->gens[1].where != nullptr);
}
