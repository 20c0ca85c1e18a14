#include "nzpath/sheetdag.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <queue>
#include <sstream>

#include "json.hpp"

namespace nzpath::sheet {

bool is_valid_cell_name(std::string_view name) {
    if (name.empty() || !std::isalpha(static_cast<unsigned char>(name.front()))) {
        return false;
    }
    return std::all_of(name.begin(), name.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    });
}

CycleError::CycleError(std::vector<CellId> cycle)
    : Error([&] {
          std::ostringstream msg;
          msg << "cyclic cell dependency: ";
          for (std::size_t i = 0; i < cycle.size(); ++i) {
              msg << cycle[i] << " -> ";
          }
          msg << (cycle.empty() ? CellId{"?"} : cycle.front());
          return msg.str();
      }()),
      cycle_(std::move(cycle)) {}

std::string EvalError::describe(Kind kind, const CellId& cell) {
    switch (kind) {
    case Kind::DivisionByZero:
        return "division by zero while evaluating cell '" + cell + "'";
    case Kind::DomainError:
        return "domain error while evaluating cell '" + cell + "'";
    }
    return "evaluation error in cell '" + cell + "'";
}

// ---------------------------------------------------------------------------
// Lexer / parser
// ---------------------------------------------------------------------------

namespace {

struct Token {
    enum class Kind { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };
    Kind kind;
    double number = 0.0;
    std::string text;
    std::size_t pos = 0;
};

std::vector<Token> tokenize(std::string_view text) {
    std::vector<Token> out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < n && std::isdigit(static_cast<unsigned char>(text[i + 1])))) {
            double value = 0.0;
            const char* first = text.data() + i;
            const char* last = text.data() + n;
            auto [ptr, ec] = std::from_chars(first, last, value);
            if (ec != std::errc{}) {
                throw SyntaxError(i, "malformed number");
            }
            out.push_back({Token::Kind::Number, value, std::string(first, ptr), i});
            i += static_cast<std::size_t>(ptr - first);
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t j = i + 1;
            while (j < n && (std::isalnum(static_cast<unsigned char>(text[j])) || text[j] == '_')) {
                ++j;
            }
            out.push_back({Token::Kind::Ident, 0.0, std::string(text.substr(i, j - i)), i});
            i = j;
            continue;
        }
        Token::Kind kind;
        switch (c) {
        case '+': kind = Token::Kind::Plus; break;
        case '-': kind = Token::Kind::Minus; break;
        case '*': kind = Token::Kind::Star; break;
        case '/': kind = Token::Kind::Slash; break;
        case '^': kind = Token::Kind::Caret; break;
        case '(': kind = Token::Kind::LParen; break;
        case ')': kind = Token::Kind::RParen; break;
        case ',': kind = Token::Kind::Comma; break;
        default:
            throw SyntaxError(i, std::string("unexpected character '") + c + "'");
        }
        out.push_back({kind, 0.0, std::string(1, c), i});
        ++i;
    }
    out.push_back({Token::Kind::End, 0.0, "", n});
    return out;
}

AstPtr make_node(FormulaAst&& ast) { return std::make_unique<FormulaAst>(std::move(ast)); }

class Parser {
public:
    explicit Parser(std::string_view text) : tokens_(tokenize(text)) {}

    FormulaAst parse() {
        FormulaAst ast = expression();
        expect(Token::Kind::End, "unexpected trailing input");
        return ast;
    }

private:
    const Token& peek() const { return tokens_[pos_]; }
    Token next() { return tokens_[pos_++]; }

    void expect(Token::Kind kind, const std::string& what) {
        if (peek().kind != kind) {
            throw SyntaxError(peek().pos, what);
        }
        ++pos_;
    }

    FormulaAst expression() {
        FormulaAst lhs = term();
        while (peek().kind == Token::Kind::Plus || peek().kind == Token::Kind::Minus) {
            const BinaryOp op = next().kind == Token::Kind::Plus ? BinaryOp::Add : BinaryOp::Sub;
            FormulaAst rhs = term();
            lhs = FormulaAst{Binary{op, make_node(std::move(lhs)), make_node(std::move(rhs))}};
        }
        return lhs;
    }

    FormulaAst term() {
        FormulaAst lhs = unary();
        while (peek().kind == Token::Kind::Star || peek().kind == Token::Kind::Slash) {
            const BinaryOp op = next().kind == Token::Kind::Star ? BinaryOp::Mul : BinaryOp::Div;
            FormulaAst rhs = unary();
            lhs = FormulaAst{Binary{op, make_node(std::move(lhs)), make_node(std::move(rhs))}};
        }
        return lhs;
    }

    FormulaAst unary() {
        if (peek().kind == Token::Kind::Minus) {
            ++pos_;
            return FormulaAst{Negate{make_node(unary())}};
        }
        return power();
    }

    FormulaAst power() {
        FormulaAst lhs = atom();
        while (peek().kind == Token::Kind::Caret) {
            ++pos_;
            FormulaAst rhs = atom();
            lhs = FormulaAst{
                Binary{BinaryOp::Pow, make_node(std::move(lhs)), make_node(std::move(rhs))}};
        }
        return lhs;
    }

    FormulaAst atom() {
        const Token tok = next();
        switch (tok.kind) {
        case Token::Kind::Number:
            return FormulaAst{Constant{tok.number}};
        case Token::Kind::LParen: {
            FormulaAst inner = expression();
            expect(Token::Kind::RParen, "expected ')'");
            return inner;
        }
        case Token::Kind::Ident:
            if (peek().kind == Token::Kind::LParen) {
                return call(tok);
            }
            return FormulaAst{CellRef{tok.text}};
        default:
            throw SyntaxError(tok.pos, "expected a number, cell name, function call or '('");
        }
    }

    FormulaAst call(const Token& name_tok) {
        expect(Token::Kind::LParen, "expected '('");
        std::vector<AstPtr> args;
        args.push_back(make_node(expression()));
        while (peek().kind == Token::Kind::Comma) {
            ++pos_;
            args.push_back(make_node(expression()));
        }
        expect(Token::Kind::RParen, "expected ')' after argument list");

        std::string upper = name_tok.text;
        std::transform(upper.begin(), upper.end(), upper.begin(),
                       [](unsigned char c) { return static_cast<char>(std::toupper(c)); });

        auto require_arity = [&](std::size_t arity) {
            if (args.size() != arity) {
                throw SyntaxError(name_tok.pos, upper + " expects " + std::to_string(arity) +
                                                    " arguments, got " +
                                                    std::to_string(args.size()));
            }
        };

        if (upper == "MIN" || upper == "MAX") {
            require_arity(2);
            const BinaryOp op = upper == "MIN" ? BinaryOp::Min : BinaryOp::Max;
            return FormulaAst{Binary{op, std::move(args[0]), std::move(args[1])}};
        }
        if (upper == "SUM") {
            return FormulaAst{Call{CallFn::Sum, std::move(args)}};
        }
        if (upper == "IF") {
            require_arity(3);
            return FormulaAst{Call{CallFn::If, std::move(args)}};
        }
        if (upper == "CLAMP") {
            require_arity(3);
            return FormulaAst{Call{CallFn::Clamp, std::move(args)}};
        }
        throw UnknownFunctionError(name_tok.pos, name_tok.text);
    }

    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

void collect_refs(const FormulaAst& ast, std::vector<CellId>& out) {
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, CellRef>) {
                out.push_back(node.cell);
            } else if constexpr (std::is_same_v<T, Negate>) {
                collect_refs(*node.child, out);
            } else if constexpr (std::is_same_v<T, Binary>) {
                collect_refs(*node.lhs, out);
                collect_refs(*node.rhs, out);
            } else if constexpr (std::is_same_v<T, Call>) {
                for (const auto& arg : node.args) {
                    collect_refs(*arg, out);
                }
            }
        },
        ast.node);
}

}  // namespace

FormulaAst parse_formula(std::string_view text) {
    if (text.empty()) {
        throw SyntaxError(0, "empty formula");
    }
    return Parser(text).parse();
}

std::vector<CellId> referenced_cells(const FormulaAst& ast) {
    std::vector<CellId> refs;
    collect_refs(ast, refs);
    std::sort(refs.begin(), refs.end());
    refs.erase(std::unique(refs.begin(), refs.end()), refs.end());
    return refs;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

double eval_ast(const FormulaAst& ast, const std::vector<double>& staged,
                const std::map<CellId, int>& index, const CellId& owner) {
    return std::visit(
        [&](const auto& node) -> double {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Constant>) {
                return node.value;
            } else if constexpr (std::is_same_v<T, CellRef>) {
                return staged[static_cast<std::size_t>(index.at(node.cell))];
            } else if constexpr (std::is_same_v<T, Negate>) {
                return -eval_ast(*node.child, staged, index, owner);
            } else if constexpr (std::is_same_v<T, Binary>) {
                const double a = eval_ast(*node.lhs, staged, index, owner);
                const double b = eval_ast(*node.rhs, staged, index, owner);
                switch (node.op) {
                case BinaryOp::Add: return a + b;
                case BinaryOp::Sub: return a - b;
                case BinaryOp::Mul: return a * b;
                case BinaryOp::Div:
                    if (b == 0.0) {
                        throw EvalError(EvalError::Kind::DivisionByZero, owner);
                    }
                    return a / b;
                case BinaryOp::Min: return std::min(a, b);
                case BinaryOp::Max: return std::max(a, b);
                case BinaryOp::Pow:
                    if (a < 0.0 && b != std::floor(b)) {
                        throw EvalError(EvalError::Kind::DomainError, owner);
                    }
                    if (a == 0.0 && b < 0.0) {
                        throw EvalError(EvalError::Kind::DivisionByZero, owner);
                    }
                    return std::pow(a, b);
                }
                throw EvalError(EvalError::Kind::DomainError, owner);
            } else {
                static_assert(std::is_same_v<T, Call>);
                switch (node.fn) {
                case CallFn::Sum: {
                    double acc = eval_ast(*node.args[0], staged, index, owner);
                    for (std::size_t i = 1; i < node.args.size(); ++i) {
                        acc += eval_ast(*node.args[i], staged, index, owner);
                    }
                    return acc;
                }
                case CallFn::If: {
                    const double cond = eval_ast(*node.args[0], staged, index, owner);
                    const double then_v = eval_ast(*node.args[1], staged, index, owner);
                    const double else_v = eval_ast(*node.args[2], staged, index, owner);
                    return cond != 0.0 ? then_v : else_v;
                }
                case CallFn::Clamp: {
                    const double x = eval_ast(*node.args[0], staged, index, owner);
                    const double lo = eval_ast(*node.args[1], staged, index, owner);
                    const double hi = eval_ast(*node.args[2], staged, index, owner);
                    return std::min(std::max(x, lo), hi);
                }
                }
                throw EvalError(EvalError::Kind::DomainError, owner);
            }
        },
        ast.node);
}

}  // namespace

// ---------------------------------------------------------------------------
// SheetGraph
// ---------------------------------------------------------------------------

int SheetGraph::index_of(const CellId& cell) const {
    auto it = index_.find(cell);
    return it == index_.end() ? -1 : it->second;
}

bool SheetGraph::contains(const CellId& cell) const { return index_of(cell) >= 0; }

bool SheetGraph::is_input(const CellId& cell) const {
    const int idx = index_of(cell);
    if (idx < 0) {
        return false;
    }
    return std::holds_alternative<Constant>(cells_[static_cast<std::size_t>(idx)].formula.node);
}

double SheetGraph::value(const CellId& cell) const {
    const int idx = index_of(cell);
    if (idx < 0) {
        throw Error("unknown cell '" + cell + "'");
    }
    return cells_[static_cast<std::size_t>(idx)].value;
}

std::set<CellId> SheetGraph::dirty_cells() const {
    std::set<CellId> out;
    for (const Cell& cell : cells_) {
        if (cell.dirty) {
            out.insert(cell.name);
        }
    }
    return out;
}

std::vector<CellId> SheetGraph::reads_of(const CellId& cell) const {
    const int idx = index_of(cell);
    if (idx < 0) {
        throw Error("unknown cell '" + cell + "'");
    }
    std::vector<CellId> out;
    for (int read : cells_[static_cast<std::size_t>(idx)].reads) {
        out.push_back(cells_[static_cast<std::size_t>(read)].name);
    }
    return out;
}

void SheetGraph::set_input(const CellId& cell, double value) {
    const int idx = index_of(cell);
    if (idx < 0) {
        throw UndefinedReferenceError(cell, "set_input");
    }
    Cell& target = cells_[static_cast<std::size_t>(idx)];
    if (!std::holds_alternative<Constant>(target.formula.node)) {
        throw NotAnInputCellError(cell);
    }
    target.formula.node = Constant{value};
    target.value = value;
    values_[target.name] = value;

    // Mark the cell and all transitive dependents dirty. A dirty cell's
    // dependents are already dirty (set_input and build both guarantee it),
    // so the walk can stop at cells that are dirty already.
    target.dirty = true;
    std::vector<int> stack{idx};
    while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        for (int reader : cells_[static_cast<std::size_t>(cur)].readers) {
            Cell& r = cells_[static_cast<std::size_t>(reader)];
            if (!r.dirty) {
                r.dirty = true;
                stack.push_back(reader);
            }
        }
    }
}

const std::map<CellId, double>& SheetGraph::recompute_dirty() {
    std::vector<double> staged(cells_.size());
    for (std::size_t i = 0; i < cells_.size(); ++i) {
        staged[i] = cells_[i].value;
    }
    std::vector<int> evaluated;
    for (int idx : topo_) {
        Cell& cell = cells_[static_cast<std::size_t>(idx)];
        if (!cell.dirty) {
            continue;
        }
        staged[static_cast<std::size_t>(idx)] = eval_ast(cell.formula, staged, index_, cell.name);
        if (std::isnan(staged[static_cast<std::size_t>(idx)])) {
            throw EvalError(EvalError::Kind::DomainError, cell.name);
        }
        evaluated.push_back(idx);
    }
    for (int idx : evaluated) {
        Cell& cell = cells_[static_cast<std::size_t>(idx)];
        cell.value = staged[static_cast<std::size_t>(idx)];
        cell.dirty = false;
        values_[cell.name] = cell.value;
    }
    evaluations_ += evaluated.size();
    return values_;
}

SheetGraph build_graph(const std::map<CellId, std::string>& definitions) {
    SheetGraph graph;
    graph.cells_.reserve(definitions.size());
    for (const auto& [name, text] : definitions) {
        if (!is_valid_cell_name(name)) {
            throw SyntaxError(0, "invalid cell name '" + name + "'");
        }
        FormulaAst ast;
        try {
            ast = parse_formula(text);
        } catch (const SyntaxError& err) {
            throw SyntaxError(err.position(), "in cell '" + name + "': " + err.what());
        }
        const int idx = static_cast<int>(graph.cells_.size());
        graph.cells_.push_back(SheetGraph::Cell{name, std::move(ast), 0.0, {}, {}, true});
        graph.index_.emplace(name, idx);
    }

    for (std::size_t i = 0; i < graph.cells_.size(); ++i) {
        SheetGraph::Cell& cell = graph.cells_[i];
        for (const CellId& ref : referenced_cells(cell.formula)) {
            const int target = graph.index_of(ref);
            if (target < 0) {
                throw UndefinedReferenceError(ref, cell.name);
            }
            cell.reads.push_back(target);
        }
        for (int target : cell.reads) {
            graph.cells_[static_cast<std::size_t>(target)].readers.push_back(static_cast<int>(i));
        }
    }

    // Kahn's algorithm; ready cells taken in index (= name) order so the
    // topological order is deterministic.
    std::vector<int> pending(graph.cells_.size(), 0);
    std::priority_queue<int, std::vector<int>, std::greater<>> ready;
    for (std::size_t i = 0; i < graph.cells_.size(); ++i) {
        pending[i] = static_cast<int>(graph.cells_[i].reads.size());
        if (pending[i] == 0) {
            ready.push(static_cast<int>(i));
        }
    }
    while (!ready.empty()) {
        const int idx = ready.top();
        ready.pop();
        graph.topo_.push_back(idx);
        for (int reader : graph.cells_[static_cast<std::size_t>(idx)].readers) {
            if (--pending[static_cast<std::size_t>(reader)] == 0) {
                ready.push(reader);
            }
        }
    }

    if (graph.topo_.size() < graph.cells_.size()) {
        // Every unresolved cell still reads another unresolved cell, so
        // walking those edges must loop back on itself; report that loop.
        std::vector<bool> unresolved(graph.cells_.size(), true);
        for (int idx : graph.topo_) {
            unresolved[static_cast<std::size_t>(idx)] = false;
        }
        int start = 0;
        while (!unresolved[static_cast<std::size_t>(start)]) {
            ++start;
        }
        std::vector<int> path;
        std::map<int, std::size_t> seen_at;
        int cur = start;
        while (seen_at.find(cur) == seen_at.end()) {
            seen_at[cur] = path.size();
            path.push_back(cur);
            for (int read : graph.cells_[static_cast<std::size_t>(cur)].reads) {
                if (unresolved[static_cast<std::size_t>(read)]) {
                    cur = read;
                    break;
                }
            }
        }
        std::vector<CellId> cycle;
        for (std::size_t i = seen_at[cur]; i < path.size(); ++i) {
            cycle.push_back(graph.cells_[static_cast<std::size_t>(path[i])].name);
        }
        throw CycleError(std::move(cycle));
    }

    graph.topo_names_.reserve(graph.topo_.size());
    for (int idx : graph.topo_) {
        graph.topo_names_.push_back(graph.cells_[static_cast<std::size_t>(idx)].name);
    }
    return graph;
}

std::map<CellId, std::string> defs_from_json(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& err) {
        throw Error(std::string("sheet definition is not valid JSON: ") + err.what());
    }
    if (!doc.is_object()) {
        throw Error("sheet definition must be a JSON object mapping cell names to formulas");
    }
    std::map<CellId, std::string> defs;
    for (const auto& [key, value] : doc.items()) {
        if (!value.is_string()) {
            throw Error("formula for cell '" + key + "' must be a string");
        }
        defs[key] = value.get<std::string>();
    }
    return defs;
}

}  // namespace nzpath::sheet
