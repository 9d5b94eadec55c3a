#include "dronegate/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "dronegate/text.hpp"

namespace dronegate::dsl {

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_body(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)); }

constexpr std::string_view kPunctuation = "()[],.=+-*/;";

}  // namespace

LexError::LexError(int line_, int column_, std::string snippet_)
    : std::runtime_error(cat("lex error at line ", line_, " col ", column_,
                               ": unexpected input '", snippet_, "'")),
      line(line_),
      column(column_),
      snippet(std::move(snippet_)) {}

ParseError::ParseError(int line_, int column_, std::string expected_, std::string found_)
    : std::runtime_error(cat("parse error at line ", line_, " col ", column_, ": expected ",
                               expected_, ", found ", found_)),
      line(line_),
      column(column_),
      expected(std::move(expected_)),
      found(std::move(found_)) {}

std::vector<Token> tokenize(std::string_view source) {
  std::vector<Token> tokens;
  int line = 1;
  int column = 1;
  std::size_t i = 0;
  const std::size_t n = source.size();

  auto snippet_from = [&](std::size_t pos) {
    std::size_t end = pos;
    while (end < n && source[end] != '\n' && end - pos < 10) ++end;
    return std::string(source.substr(pos, end - pos));
  };

  while (i < n) {
    const char c = source[i];
    if (c == '\n') {
      ++i;
      ++line;
      column = 1;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      ++column;
      continue;
    }
    if (c == '#') {  // comment to end of line
      while (i < n && source[i] != '\n') {
        ++i;
        ++column;
      }
      continue;
    }
    if (is_ident_start(c)) {
      std::size_t start = i;
      while (i < n && is_ident_body(source[i])) ++i;
      tokens.push_back({TokenKind::Identifier, std::string(source.substr(start, i - start)), line,
                        column});
      column += static_cast<int>(i - start);
      continue;
    }
    if (is_digit(c)) {
      std::size_t start = i;
      while (i < n && is_digit(source[i])) ++i;
      if (i + 1 < n && source[i] == '.' && is_digit(source[i + 1])) {
        ++i;
        while (i < n && is_digit(source[i])) ++i;
      }
      std::string lexeme(source.substr(start, i - start));
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(lexeme.data(), lexeme.data() + lexeme.size(), value);
      if (ec != std::errc{} || ptr != lexeme.data() + lexeme.size() || !std::isfinite(value)) {
        throw LexError(line, column, snippet_from(start));
      }
      tokens.push_back({TokenKind::Number, std::move(lexeme), line, column});
      column += static_cast<int>(i - start);
      continue;
    }
    if (kPunctuation.find(c) != std::string_view::npos) {
      tokens.push_back({TokenKind::Punctuation, std::string(1, c), line, column});
      ++i;
      ++column;
      continue;
    }
    throw LexError(line, column, snippet_from(i));
  }
  return tokens;
}

namespace {

// Recursive-descent parser over the token stream. Grammar, loosely:
//   program   := statement ((';' | line-break) statement)*
//   statement := IDENT '=' expr | expr
//   expr      := term (('+' | '-') term)*
//   term      := postfix (('*' | '/') postfix)*
//   postfix   := primary ('[' expr ']')*
//   primary   := NUMBER | ('+'|'-') NUMBER | '[' expr (',' expr)* ']'
//              | IDENT ('.' IDENT)? '(' args ')' | IDENT | '(' expr ')'
// Vector literals must hold exactly three elements; a dotted call receiver
// must be the library name `aw`.
class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  Program parse_program() {
    Program program;
    while (!at_end()) {
      if (!program.statements.empty()) {
        if (check_punct(';')) {
          advance();
        } else if (peek().line == last_line_) {
          throw error("';' or line break", describe(peek()));
        }
      }
      if (at_end()) break;  // trailing separator
      program.statements.push_back(parse_statement());
    }
    return program;
  }

 private:
  Statement parse_statement() {
    const int line = peek().line;
    if (peek().kind == TokenKind::Identifier && check_punct_at(1, '=') &&
        tokens_[pos_ + 1].line == line) {
      std::string target = advance().lexeme;
      advance();  // '='
      Expr value = parse_expr();
      return {Assign{std::move(target), std::move(value)}, line};
    }
    return {ExprStmt{parse_expr()}, line};
  }

  // A token extends the expression in progress only from the same source
  // line; once an expression is complete, a line break ends the statement.
  // Continuation across breaks still works wherever the parser is genuinely
  // mid-expression: after an operator, a comma, '=', or an unclosed bracket.
  Expr parse_expr() {
    Expr left = parse_term();
    while ((check_punct('+') || check_punct('-')) && extends_line()) {
      const char op = advance().lexeme[0];
      Expr right = parse_term();
      left = Expr{BinaryOp{op, {std::move(left), std::move(right)}}};
    }
    return left;
  }

  Expr parse_term() {
    Expr left = parse_postfix();
    while ((check_punct('*') || check_punct('/')) && extends_line()) {
      const char op = advance().lexeme[0];
      Expr right = parse_postfix();
      left = Expr{BinaryOp{op, {std::move(left), std::move(right)}}};
    }
    return left;
  }

  Expr parse_postfix() {
    Expr expr = parse_primary();
    while (check_punct('[') && extends_line()) {
      advance();
      Expr index = parse_expr();
      expect_punct(']', "']'");
      expr = Expr{Index{{std::move(expr), std::move(index)}}};
    }
    return expr;
  }

  Expr parse_primary() {
    if (at_end()) throw error("an expression", "end of input");
    const Token& tok = peek();
    if (tok.kind == TokenKind::Number) {
      return Expr{NumberLit{to_number(advance())}};
    }
    if (check_punct('+') || check_punct('-')) {
      const Token sign = advance();
      if (at_end() || peek().kind != TokenKind::Number) {
        throw error("a number after sign", at_end() ? "end of input" : describe(peek()));
      }
      const double magnitude = to_number(advance());
      return Expr{NumberLit{sign.lexeme[0] == '-' ? -magnitude : magnitude}};
    }
    if (check_punct('[')) {
      advance();
      std::vector<Expr> elements;
      elements.push_back(parse_expr());
      while (true) {
        if (check_punct(']')) {
          advance();
          break;
        }
        expect_punct(',', "',' or ']'");
        elements.push_back(parse_expr());
      }
      if (elements.size() != 3) {
        throw error("a vector of exactly 3 elements",
                    cat(elements.size(), " element", elements.size() == 1 ? "" : "s"));
      }
      return Expr{VectorLit{std::move(elements)}};
    }
    if (check_punct('(')) {
      advance();
      Expr inner = parse_expr();  // grouping only; no AST node
      expect_punct(')', "')'");
      return inner;
    }
    if (tok.kind == TokenKind::Identifier) {
      std::string name = advance().lexeme;
      if (check_punct('.') && extends_line()) {
        advance();
        if (at_end() || peek().kind != TokenKind::Identifier) {
          throw error("a function name after '.'", at_end() ? "end of input" : describe(peek()));
        }
        std::string function = advance().lexeme;
        if (name != "aw") {
          throw error("the library receiver 'aw'", cat("'", name, "'"));
        }
        expect_punct('(', "'('");
        return Expr{Call{std::move(name), std::move(function), parse_args()}};
      }
      if (check_punct('(') && extends_line()) {
        advance();
        return Expr{Call{"", std::move(name), parse_args()}};
      }
      return Expr{Ident{std::move(name)}};
    }
    throw error("an expression", describe(tok));
  }

  // Arguments after the opening parenthesis (already consumed).
  std::vector<Expr> parse_args() {
    std::vector<Expr> args;
    if (check_punct(')')) {
      advance();
      return args;
    }
    args.push_back(parse_expr());
    while (check_punct(',')) {
      advance();
      args.push_back(parse_expr());
    }
    expect_punct(')', "',' or ')'");
    return args;
  }

  double to_number(const Token& tok) {
    double value = 0.0;
    std::from_chars(tok.lexeme.data(), tok.lexeme.data() + tok.lexeme.size(), value);
    return value;
  }

  bool at_end() const { return pos_ >= tokens_.size(); }
  const Token& peek() const { return tokens_[pos_]; }

  bool check_punct(char c) const {
    return !at_end() && peek().kind == TokenKind::Punctuation && peek().lexeme[0] == c;
  }

  // True when the upcoming token sits on the same line as the token just
  // consumed, i.e. it may extend the current expression rather than start
  // the next statement.
  bool extends_line() const {
    return pos_ > 0 && !at_end() && peek().line == tokens_[pos_ - 1].line;
  }

  bool check_punct_at(std::size_t offset, char c) const {
    const std::size_t i = pos_ + offset;
    return i < tokens_.size() && tokens_[i].kind == TokenKind::Punctuation &&
           tokens_[i].lexeme[0] == c;
  }

  const Token& advance() {
    const Token& tok = tokens_[pos_++];
    last_line_ = tok.line;
    last_column_ = tok.column + static_cast<int>(tok.lexeme.size());
    return tok;
  }

  void expect_punct(char c, std::string expected) {
    if (!check_punct(c)) {
      throw error(std::move(expected), at_end() ? "end of input" : describe(peek()));
    }
    advance();
  }

  static std::string describe(const Token& tok) { return cat("'", tok.lexeme, "'"); }

  ParseError error(std::string expected, std::string found) const {
    const int line = at_end() ? last_line_ : peek().line;
    const int column = at_end() ? last_column_ : peek().column;
    return ParseError(line, column, std::move(expected), std::move(found));
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  int last_line_ = 1;
  int last_column_ = 1;
};

}  // namespace

Program parse(std::string_view source) { return Parser(tokenize(source)).parse_program(); }

namespace {

// Precedence levels for minimal-parenthesis printing: additive 1,
// multiplicative 2, indexing 3, atoms 4.
int precedence(const Expr& expr) {
  return std::visit(
      [](const auto& node) -> int {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, BinaryOp>) {
          return (node.op == '+' || node.op == '-') ? 1 : 2;
        } else if constexpr (std::is_same_v<T, Index>) {
          return 3;
        } else {
          return 4;
        }
      },
      expr.node);
}

// Shortest decimal form that re-parses to the same value, without scientific
// notation (the grammar has none).
std::string format_number(double value) {
  if (value == std::trunc(value) && std::abs(value) < 1e15) {
    return std::to_string(static_cast<long long>(value));
  }
  char buf[400];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed);
  return std::string(buf, end);
}

void print_expr(std::string& out, const Expr& expr);

void print_child(std::string& out, const Expr& child, bool parens) {
  if (parens) out += '(';
  print_expr(out, child);
  if (parens) out += ')';
}

void print_expr(std::string& out, const Expr& expr) {
  std::visit(
      [&](const auto& node) {
        using T = std::decay_t<decltype(node)>;
        if constexpr (std::is_same_v<T, NumberLit>) {
          out += format_number(node.value);
        } else if constexpr (std::is_same_v<T, Ident>) {
          out += node.name;
        } else if constexpr (std::is_same_v<T, VectorLit>) {
          out += '[';
          for (std::size_t i = 0; i < node.elements.size(); ++i) {
            if (i > 0) out += ", ";
            print_expr(out, node.elements[i]);
          }
          out += ']';
        } else if constexpr (std::is_same_v<T, Call>) {
          if (!node.receiver.empty()) {
            out += node.receiver;
            out += '.';
          }
          out += node.function;
          out += '(';
          for (std::size_t i = 0; i < node.args.size(); ++i) {
            if (i > 0) out += ", ";
            print_expr(out, node.args[i]);
          }
          out += ')';
        } else if constexpr (std::is_same_v<T, BinaryOp>) {
          const int prec = (node.op == '+' || node.op == '-') ? 1 : 2;
          print_child(out, node.left(), precedence(node.left()) < prec);
          out += ' ';
          out += node.op;
          out += ' ';
          // Equal precedence on the right needs parentheses to survive
          // left-associative re-parsing.
          print_child(out, node.right(), precedence(node.right()) <= prec);
        } else if constexpr (std::is_same_v<T, Index>) {
          print_child(out, node.base(), precedence(node.base()) < 3);
          out += '[';
          print_expr(out, node.index());
          out += ']';
        }
      },
      expr.node);
}

}  // namespace

std::string pretty_print(const Expr& expr) {
  std::string out;
  print_expr(out, expr);
  return out;
}

std::string pretty_print(const Program& program) {
  std::string out;
  for (std::size_t i = 0; i < program.statements.size(); ++i) {
    if (i > 0) out += '\n';
    std::visit(
        [&](const auto& node) {
          using T = std::decay_t<decltype(node)>;
          if constexpr (std::is_same_v<T, Assign>) {
            out += node.target;
            out += " = ";
            print_expr(out, node.value);
          } else {
            print_expr(out, node.expr);
          }
        },
        program.statements[i].node);
  }
  return out;
}

const FunctionLibrary& standard_library() {
  static const FunctionLibrary lib = {
      {"takeoff", {{}, false, ValueKind::None, true}},
      {"land", {{}, false, ValueKind::None, true}},
      {"fly_to", {{ValueKind::Vector}, false, ValueKind::None, true}},
      {"fly_path", {{ValueKind::Vector}, true, ValueKind::None, true}},
      {"set_yaw", {{ValueKind::Scalar}, false, ValueKind::None, false}},
      {"get_yaw", {{}, false, ValueKind::Scalar, false}},
      {"get_drone_position", {{}, false, ValueKind::Vector, false}},
      {"get_position", {{ValueKind::Symbol}, false, ValueKind::Vector, false}},
  };
  return lib;
}

std::string_view to_string(IssueKind kind) {
  switch (kind) {
    case IssueKind::UnknownFunction: return "unknown function";
    case IssueKind::UnknownSymbol: return "unknown symbol";
    case IssueKind::ArityMismatch: return "arity mismatch";
    case IssueKind::KindMismatch: return "kind mismatch";
  }
  return "unknown issue";
}

namespace {

// Walks the program in statement order, tracking the value kind of every
// assignment so later uses resolve. A nullopt kind means "already reported,
// don't cascade".
class Validator {
 public:
  Validator(const FunctionLibrary& library, const std::set<std::string>& known_symbols)
      : library_(library), known_symbols_(known_symbols) {}

  std::vector<ValidationIssue> run(const Program& program) {
    for (std::size_t i = 0; i < program.statements.size(); ++i) {
      statement_ = static_cast<int>(i);
      std::visit(
          [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Assign>) {
              std::optional<ValueKind> kind = infer(node.value);
              if (kind == ValueKind::None) {
                report(IssueKind::KindMismatch, node.target,
                       cat("'", node.target,
                           "' is assigned the result of a function that returns nothing"));
                kind.reset();
              }
              assigned_[node.target] = kind;
            } else {
              infer(node.expr);
            }
          },
          program.statements[i].node);
    }
    return std::move(issues_);
  }

 private:
  std::optional<ValueKind> infer(const Expr& expr) {
    return std::visit([&](const auto& node) { return infer_node(node); }, expr.node);
  }

  std::optional<ValueKind> infer_node(const NumberLit&) { return ValueKind::Scalar; }

  std::optional<ValueKind> infer_node(const Ident& node) {
    if (auto it = assigned_.find(node.name); it != assigned_.end()) return it->second;
    if (known_symbols_.contains(node.name)) return ValueKind::Vector;
    report(IssueKind::UnknownSymbol, node.name, cat("unknown symbol '", node.name, "'"));
    return std::nullopt;
  }

  std::optional<ValueKind> infer_node(const VectorLit& node) {
    for (const Expr& element : node.elements) {
      const auto kind = infer(element);
      if (kind && *kind != ValueKind::Scalar) {
        report(IssueKind::KindMismatch, "", "vector elements must be scalars");
      }
    }
    return ValueKind::Vector;
  }

  std::optional<ValueKind> infer_node(const Call& node) {
    const auto it = library_.find(node.function);
    if (it == library_.end()) {
      for (const Expr& arg : node.args) infer(arg);
      report(IssueKind::UnknownFunction, node.function,
             cat("unknown function '", node.function, "'"));
      return std::nullopt;
    }
    const FunctionSignature& sig = it->second;
    if (sig.variadic ? node.args.empty() : node.args.size() != sig.params.size()) {
      const std::string want =
          sig.variadic ? "at least 1 argument"
                       : cat(sig.params.size(), " argument", sig.params.size() == 1 ? "" : "s");
      report(IssueKind::ArityMismatch, node.function,
             cat(node.function, " expects ", want, ", got ", node.args.size()));
    }
    if (!sig.params.empty()) {
      for (std::size_t i = 0; i < node.args.size(); ++i) {
        const ValueKind want =
            sig.variadic || i >= sig.params.size() ? sig.params[0] : sig.params[i];
        check_arg(node.function, node.args[i], want);
      }
    }
    return sig.returns;
  }

  void check_arg(const std::string& function, const Expr& arg, ValueKind want) {
    if (want == ValueKind::Symbol) {
      // Symbol parameters name a scene entry directly, e.g. get_position(turbine1).
      if (const auto* ident = std::get_if<Ident>(&arg.node)) {
        if (known_symbols_.contains(ident->name)) return;
        if (assigned_.contains(ident->name)) {
          report(IssueKind::KindMismatch, function,
                 cat(function, " expects a scene symbol, got variable '", ident->name, "'"));
          return;
        }
        report(IssueKind::UnknownSymbol, ident->name,
               cat("unknown symbol '", ident->name, "'"));
        return;
      }
      report(IssueKind::KindMismatch, function, cat(function, " expects a scene symbol name"));
      return;
    }
    const auto got = infer(arg);
    if (got && *got != want) {
      report(IssueKind::KindMismatch, function,
             cat(function, " expects a ", want == ValueKind::Vector ? "vector" : "scalar",
                 " argument"));
    }
  }

  std::optional<ValueKind> infer_node(const BinaryOp& node) {
    const auto left = infer(node.left());
    const auto right = infer(node.right());
    if (!left || !right) return std::nullopt;
    const ValueKind l = *left;
    const ValueKind r = *right;
    const bool ls = l == ValueKind::Scalar;
    const bool lv = l == ValueKind::Vector;
    const bool rs = r == ValueKind::Scalar;
    const bool rv = r == ValueKind::Vector;
    switch (node.op) {
      case '+':
      case '-':
        if (ls && rs) return ValueKind::Scalar;
        if (lv && rv) return ValueKind::Vector;
        break;
      case '*':
        if (ls && rs) return ValueKind::Scalar;
        if ((lv && rs) || (ls && rv)) return ValueKind::Vector;
        break;
      case '/':
        if (ls && rs) return ValueKind::Scalar;
        if (lv && rs) return ValueKind::Vector;
        break;
    }
    report(IssueKind::KindMismatch, std::string(1, node.op),
           cat("operator '", node.op, "' cannot combine these operand kinds"));
    return std::nullopt;
  }

  std::optional<ValueKind> infer_node(const Index& node) {
    const auto base = infer(node.base());
    const auto index = infer(node.index());
    if (base && *base != ValueKind::Vector) {
      report(IssueKind::KindMismatch, "", "only vectors can be indexed");
      return std::nullopt;
    }
    if (index && *index != ValueKind::Scalar) {
      report(IssueKind::KindMismatch, "", "vector index must be a scalar");
    }
    return base ? std::optional(ValueKind::Scalar) : std::nullopt;
  }

  void report(IssueKind kind, std::string subject, std::string detail) {
    issues_.push_back({kind, std::move(subject), std::move(detail), statement_});
  }

  const FunctionLibrary& library_;
  const std::set<std::string>& known_symbols_;
  std::map<std::string, std::optional<ValueKind>> assigned_;
  std::vector<ValidationIssue> issues_;
  int statement_ = 0;
};

}  // namespace

std::vector<ValidationIssue> validate(const Program& program, const FunctionLibrary& library,
                                      const std::set<std::string>& known_symbols) {
  return Validator(library, known_symbols).run(program);
}

}  // namespace dronegate::dsl
