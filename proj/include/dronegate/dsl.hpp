#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dronegate::dsl {

// ---------------------------------------------------------------------------
// Tokens
// ---------------------------------------------------------------------------

// `Keyword` is reserved for future grammar growth; the current language has
// no reserved words, so the tokenizer never emits it.
enum class TokenKind { Identifier, Number, Punctuation, Keyword };

struct Token {
  TokenKind kind = TokenKind::Identifier;
  std::string lexeme;
  int line = 1;    // 1-based
  int column = 1;  // 1-based
};

class LexError : public std::runtime_error {
 public:
  LexError(int line, int column, std::string snippet);
  int line;
  int column;
  std::string snippet;  // source text from the offending character onward
};

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, std::string expected, std::string found);
  int line;
  int column;
  std::string expected;
  std::string found;
};

/// Splits source into tokens. Whitespace and `#` line comments are skipped;
/// every token keeps its exact 1-based source position.
std::vector<Token> tokenize(std::string_view source);

// ---------------------------------------------------------------------------
// Abstract syntax
// ---------------------------------------------------------------------------
// Expression nodes are value types; recursive children live in vectors so the
// whole tree stays copyable and comparable. Structural equality ignores
// source positions, which makes the parse/pretty-print round trip testable.

struct Expr;

struct NumberLit {
  double value = 0.0;
  friend bool operator==(const NumberLit&, const NumberLit&) = default;
};

struct Ident {
  std::string name;
  friend bool operator==(const Ident&, const Ident&) = default;
};

struct VectorLit {
  std::vector<Expr> elements;  // exactly three: x, y, z in meters
  friend bool operator==(const VectorLit&, const VectorLit&) = default;
};

struct Call {
  std::string receiver;  // "" for a bare call; otherwise the library name "aw"
  std::string function;
  std::vector<Expr> args;
  friend bool operator==(const Call&, const Call&) = default;
};

struct BinaryOp {
  char op = '+';               // one of + - * /
  std::vector<Expr> operands;  // exactly two: left, right
  const Expr& left() const { return operands[0]; }
  const Expr& right() const { return operands[1]; }
  friend bool operator==(const BinaryOp&, const BinaryOp&) = default;
};

struct Index {
  std::vector<Expr> parts;  // exactly two: base, index
  const Expr& base() const { return parts[0]; }
  const Expr& index() const { return parts[1]; }
  friend bool operator==(const Index&, const Index&) = default;
};

struct Expr {
  std::variant<NumberLit, VectorLit, Ident, Call, BinaryOp, Index> node;
  friend bool operator==(const Expr&, const Expr&) = default;
};

struct Assign {
  std::string target;
  Expr value;
  friend bool operator==(const Assign&, const Assign&) = default;
};

struct ExprStmt {
  Expr expr;
  friend bool operator==(const ExprStmt&, const ExprStmt&) = default;
};

struct Statement {
  std::variant<Assign, ExprStmt> node;
  int line = 1;  // source line, for diagnostics only
  friend bool operator==(const Statement& a, const Statement& b) { return a.node == b.node; }
};

struct Program {
  std::vector<Statement> statements;
  friend bool operator==(const Program&, const Program&) = default;
};

/// Parses a whole program. Statements are separated by `;` or a line break;
/// expressions may continue across lines mid-statement. Never crashes on
/// malformed input — it throws ParseError instead.
Program parse(std::string_view source);

/// Canonical text form: one statement per line, single spaces after commas
/// and around binary operators, minimal parentheses, no trailing whitespace.
/// parse(pretty_print(p)) is structurally equal to p.
std::string pretty_print(const Program& program);
std::string pretty_print(const Expr& expr);

// ---------------------------------------------------------------------------
// Function library
// ---------------------------------------------------------------------------

enum class ValueKind { None, Scalar, Vector, Symbol };

struct FunctionSignature {
  std::vector<ValueKind> params;
  bool variadic = false;  // accepts one or more arguments of params[0]'s kind
  ValueKind returns = ValueKind::None;
  bool moves_drone = false;
};

using FunctionLibrary = std::map<std::string, FunctionSignature>;

/// The eight drone-control functions generated code may call.
const FunctionLibrary& standard_library();

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class IssueKind { UnknownFunction, UnknownSymbol, ArityMismatch, KindMismatch };

std::string_view to_string(IssueKind kind);

struct ValidationIssue {
  IssueKind kind = IssueKind::UnknownFunction;
  std::string subject;  // the offending function or symbol name
  std::string detail;   // human-readable description
  int statement_index = 0;
};

/// Checks every call against the library and every free identifier against
/// prior assignments and `known_symbols`. Returns issues instead of throwing;
/// an empty list means the program is safe to hand to the interpreter.
std::vector<ValidationIssue> validate(const Program& program, const FunctionLibrary& library,
                                      const std::set<std::string>& known_symbols);

}  // namespace dronegate::dsl
