#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nzpath/error.hpp"

namespace nzpath::sheet {

// A miniature spreadsheet engine: text formulas over named cells, compiled
// into a dependency DAG with dirty-set incremental recomputation.
//
// Grammar (case-insensitive function names, '#' nowhere, whitespace free):
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/') unary)*
//   unary  := '-' unary | power
//   power  := atom ('^' atom)*            // left-associative, like the rest
//   atom   := number | cell | fn '(' expr (',' expr)* ')' | '(' expr ')'
// MIN and MAX are two-argument functions lowered to binary nodes; SUM takes
// one or more arguments, IF and CLAMP exactly three. IF treats a nonzero
// condition as true and evaluates all three arguments. CLAMP(x, lo, hi) is
// min(max(x, lo), hi).

/// Symbolic cell name: letters, digits and underscores, starting with a letter.
using CellId = std::string;

bool is_valid_cell_name(std::string_view name);

struct FormulaAst;
using AstPtr = std::unique_ptr<FormulaAst>;

struct Constant {
    double value = 0.0;
};

struct CellRef {
    CellId cell;
};

struct Negate {
    AstPtr child;
};

enum class BinaryOp { Add, Sub, Mul, Div, Min, Max, Pow };

struct Binary {
    BinaryOp op;
    AstPtr lhs;
    AstPtr rhs;
};

enum class CallFn { Sum, If, Clamp };

struct Call {
    CallFn fn;
    std::vector<AstPtr> args;
};

struct FormulaAst {
    std::variant<Constant, CellRef, Negate, Binary, Call> node;
};

class SyntaxError : public Error {
public:
    SyntaxError(std::size_t position, const std::string& what)
        : Error("syntax error at position " + std::to_string(position) + ": " + what),
          position_(position) {}
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

class UnknownFunctionError : public Error {
public:
    UnknownFunctionError(std::size_t position, const std::string& name)
        : Error("unknown function '" + name + "' at position " + std::to_string(position)),
          position_(position),
          name_(name) {}
    std::size_t position() const { return position_; }
    const std::string& name() const { return name_; }

private:
    std::size_t position_;
    std::string name_;
};

class CycleError : public Error {
public:
    explicit CycleError(std::vector<CellId> cycle);
    const std::vector<CellId>& cycle() const { return cycle_; }

private:
    std::vector<CellId> cycle_;
};

class UndefinedReferenceError : public Error {
public:
    UndefinedReferenceError(const CellId& missing, const CellId& referenced_from)
        : Error("cell '" + referenced_from + "' references undefined cell '" + missing + "'"),
          missing_(missing),
          referenced_from_(referenced_from) {}
    const CellId& missing() const { return missing_; }

private:
    CellId missing_;
    CellId referenced_from_;
};

class NotAnInputCellError : public Error {
public:
    explicit NotAnInputCellError(const CellId& cell)
        : Error("cell '" + cell + "' holds a derived formula, not an input constant") {}
};

class EvalError : public Error {
public:
    enum class Kind { DivisionByZero, DomainError };

    EvalError(Kind kind, const CellId& cell)
        : Error(describe(kind, cell)), kind_(kind), cell_(cell) {}
    Kind kind() const { return kind_; }
    const CellId& cell() const { return cell_; }

private:
    static std::string describe(Kind kind, const CellId& cell);
    Kind kind_;
    CellId cell_;
};

/// Parse one formula. Throws SyntaxError or UnknownFunctionError.
FormulaAst parse_formula(std::string_view text);

/// Cells read by a formula, sorted and deduplicated.
std::vector<CellId> referenced_cells(const FormulaAst& ast);

class SheetGraph {
public:
    SheetGraph() = default;
    SheetGraph(SheetGraph&&) = default;
    SheetGraph& operator=(SheetGraph&&) = default;

    /// Overwrite an input cell (one whose formula is a constant). The cell and
    /// every transitive dependent become dirty; derived cells are rejected.
    void set_input(const CellId& cell, double value);

    /// Evaluate dirty cells in topological order and return the full value
    /// map. On EvalError nothing is committed and the dirty set is unchanged,
    /// so the graph stays usable.
    const std::map<CellId, double>& recompute_dirty();

    const std::map<CellId, double>& values() const { return values_; }
    double value(const CellId& cell) const;

    bool contains(const CellId& cell) const;
    bool is_input(const CellId& cell) const;
    std::size_t size() const { return cells_.size(); }

    const std::vector<CellId>& topo_order() const { return topo_names_; }
    std::set<CellId> dirty_cells() const;
    std::vector<CellId> reads_of(const CellId& cell) const;

    /// Cumulative number of cell evaluations committed by recompute_dirty.
    std::size_t evaluation_count() const { return evaluations_; }

    friend SheetGraph build_graph(const std::map<CellId, std::string>& definitions);

private:
    struct Cell {
        CellId name;
        FormulaAst formula;
        double value = 0.0;
        std::vector<int> reads;    // indices of cells this formula references
        std::vector<int> readers;  // reverse edges
        bool dirty = true;
    };

    int index_of(const CellId& cell) const;  // -1 when absent

    std::vector<Cell> cells_;
    std::map<CellId, int> index_;
    std::vector<int> topo_;
    std::vector<CellId> topo_names_;
    std::map<CellId, double> values_;
    std::size_t evaluations_ = 0;
};

/// Compile cell definitions (name -> formula text) into a graph. All cells
/// start dirty. Throws SyntaxError/UnknownFunctionError from parsing,
/// UndefinedReferenceError for references to missing cells, CycleError when
/// the dependency relation is not acyclic.
SheetGraph build_graph(const std::map<CellId, std::string>& definitions);

/// Parse a sheet definition file: a single JSON object {cell: "formula", ...}.
std::map<CellId, std::string> defs_from_json(const std::string& json_text);

}  // namespace nzpath::sheet
