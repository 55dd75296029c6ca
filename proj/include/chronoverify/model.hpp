#pragma once

#include "chronoverify/base.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace chronoverify {

// ---------------------------------------------------------------------------
// Sorts and values
// ---------------------------------------------------------------------------

// `Time` is integer-valued but participates in the canonical time shift; the
// sort checker only lets time values meet other time values in comparisons,
// which is what makes every invariant shift-invariant by construction.
enum class Sort { Int, Bool, Time, ObjRef, ObjSet };

inline const char* sort_name(Sort s) {
    switch (s) {
        case Sort::Int: return "int";
        case Sort::Bool: return "bool";
        case Sort::Time: return "time";
        case Sort::ObjRef: return "objref";
        case Sort::ObjSet: return "objset";
    }
    return "?";
}

struct Value {
    Sort sort = Sort::Int;
    Int i;                  // Int / Time
    bool b = false;         // Bool
    int ref = -1;           // ObjRef: object index into the universe
    std::vector<char> set;  // ObjSet: total map object index -> bool

    static Value of_int(Int v) { Value x; x.sort = Sort::Int; x.i = std::move(v); return x; }
    static Value of_time(Int v) { Value x; x.sort = Sort::Time; x.i = std::move(v); return x; }
    static Value of_bool(bool v) { Value x; x.sort = Sort::Bool; x.b = v; return x; }
    static Value of_ref(int obj) { Value x; x.sort = Sort::ObjRef; x.ref = obj; return x; }
    static Value of_set(std::size_t universe) {
        Value x;
        x.sort = Sort::ObjSet;
        x.set.assign(universe, 0);
        return x;
    }

    friend bool operator==(const Value& a, const Value& b) {
        if (a.sort != b.sort) {
            // Int and Time compare by numeric value; mixing anything else is
            // a checker bug, treated as unequal.
            bool num = (a.sort == Sort::Int || a.sort == Sort::Time) &&
                       (b.sort == Sort::Int || b.sort == Sort::Time);
            return num && a.i == b.i;
        }
        switch (a.sort) {
            case Sort::Int:
            case Sort::Time: return a.i == b.i;
            case Sort::Bool: return a.b == b.b;
            case Sort::ObjRef: return a.ref == b.ref;
            case Sort::ObjSet: return a.set == b.set;
        }
        return false;
    }
    friend bool operator!=(const Value& a, const Value& b) { return !(a == b); }
};

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

enum class ExprKind {
    IntLit,
    BoolLit,
    SelfRef,   // `self` inside a type's invariants
    ObjLit,    // a named universe object
    VarRef,    // forall-bound object variable
    FieldGet,  // kids[0].name
    MapIndex,  // kids[0][kids[1]]
    Old,       // old(kids[0])
    CurTime,   // T
    DeltaTime, // dT
    Inv2,      // inv2(kids[0])
    Mine,      // mine(kids[0])
    ClosedOf,  // closed(kids[0])
    Elapsed,   // elapsed(name) — thread-local timer stamp read
    Not,
    Neg,
    Binary,
    Cond,      // kids[0] ? kids[1] : kids[2]
    Forall,    // forall name: kids[0]
};

enum class BinOp { Add, Sub, Mul, Eq, Ne, Lt, Le, Gt, Ge, And, Or, Imp };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
    ExprKind kind;
    Sort sort = Sort::Bool;  // filled by the sort checker
    SourcePos pos;
    Int ival;
    bool bval = false;
    int obj = -1;            // ObjLit: universe index
    std::string name;        // field / variable / stamp name
    BinOp op = BinOp::Add;
    std::vector<ExprPtr> kids;
    // FieldGet only: statically inferred pointee type of the base, or -1.
    int pointee_type = -1;
};

// ---------------------------------------------------------------------------
// Declarations
// ---------------------------------------------------------------------------

struct FieldDecl {
    std::string name;
    Sort sort = Sort::Int;
    bool is_volatile = false;
    bool is_ghost = false;
    std::optional<std::pair<Int, Int>> range;  // enumeration range for admissibility
    int pointee_type = -1;  // ObjRef: inferred from object initializers
    bool erased = false;    // dead after deadline elimination; skipped in canonical forms
    SourcePos pos;
};

// One invariant conjunct, kept with its printed source form so verdicts can
// name the exact failing clause.
struct Clause {
    ExprPtr expr;
    std::string text;
    SourcePos pos;
    bool synthetic = false;  // expanded from `timed` / `dynamics`, not printed back
};

struct TypeDecl {
    std::string name;
    bool timed = false;
    bool builtin = false;
    std::vector<FieldDecl> fields;
    std::vector<Clause> invariants;          // user clauses incl. expanded TIMED/dynamics
    std::vector<Clause> on_unwrap;           // guarded by closed->open edges
    std::vector<int> approvals;              // field indices with owner approval
    std::vector<std::pair<int, ExprPtr>> dynamics;  // field index -> post value under a time step
    SourcePos pos;

    int field_index(const std::string& f) const {
        for (std::size_t i = 0; i < fields.size(); ++i)
            if (fields[i].name == f) return static_cast<int>(i);
        return -1;
    }
    bool approved(int field) const {
        for (int a : approvals)
            if (a == field) return true;
        return false;
    }
};

enum class ObjKind { Plain, Thread, TimeSingleton, Env };

struct ObjectDecl {
    std::string name;
    int type = -1;  // index into Model::types; -1 for thread/env pseudo-objects
    ObjKind kind = ObjKind::Plain;
    std::map<std::string, Value> init;  // field name -> initial value
    bool init_closed = false;
    int init_owner = -1;  // universe index; threads/env default to themselves
    bool erased = false;  // deadline-elimination transform marks, never removes
    SourcePos pos;
};

// ---------------------------------------------------------------------------
// Thread programs
// ---------------------------------------------------------------------------

enum class StmtKind {
    Atomic,
    Assign,
    Assume,
    Assert,
    Wrap,
    Unwrap,
    Own,
    Loop,
    DeadlineNew,
    DeadlineReset,
    DeadlineDestroy,
    TimerNew,
    TimerReset,
    TimerDestroy,
    TimerRecord,
    Skip,  // produced by the deadline-elimination transform
};

struct Stmt {
    StmtKind kind;
    SourcePos pos;
    int obj = -1;          // target object (assign/wrap/unwrap/own/primitives)
    std::string field;     // assign target field
    ExprPtr expr;          // assign rhs / assume / assert / loop invariant
    Int delta;             // deadline/timer delta
    std::string name;      // timer stamp name
    int new_owner = -1;    // own
    Int bound;             // loop bound
    std::vector<Stmt> body;  // atomic actions / loop body
};

struct ThreadDecl {
    std::string name;
    int obj = -1;  // its thread object in the universe
    std::vector<Stmt> program;
    SourcePos pos;
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

struct Model {
    std::vector<TypeDecl> types;
    std::vector<ObjectDecl> objects;  // the fixed universe, incl. time/env/threads
    std::vector<ThreadDecl> threads;
    int time_obj = -1;
    int env_obj = -1;
    int time_type = -1;
    int deadline_type = -1;
    int timer_type = -1;

    int find_type(const std::string& n) const {
        for (std::size_t i = 0; i < types.size(); ++i)
            if (types[i].name == n) return static_cast<int>(i);
        return -1;
    }
    int find_object(const std::string& n) const {
        for (std::size_t i = 0; i < objects.size(); ++i)
            if (objects[i].name == n) return static_cast<int>(i);
        return -1;
    }
    const TypeDecl* type_of(int obj) const {
        int t = objects[static_cast<std::size_t>(obj)].type;
        return t >= 0 ? &types[static_cast<std::size_t>(t)] : nullptr;
    }
    bool is_deadline(int obj) const {
        return objects[static_cast<std::size_t>(obj)].type == deadline_type;
    }
    bool is_timer(int obj) const {
        return objects[static_cast<std::size_t>(obj)].type == timer_type;
    }
    bool is_thread(int obj) const {
        return objects[static_cast<std::size_t>(obj)].kind == ObjKind::Thread;
    }
};

}  // namespace chronoverify
