#pragma once

#include "chronoverify/model.hpp"

#include <string>

namespace chronoverify {

namespace detail {

inline int prec_of(const Expr& e) {
    switch (e.kind) {
        case ExprKind::Cond: return 1;
        case ExprKind::Forall: return 0;
        case ExprKind::Binary:
            switch (e.op) {
                case BinOp::Imp: return 2;
                case BinOp::Or: return 3;
                case BinOp::And: return 4;
                case BinOp::Eq:
                case BinOp::Ne: return 5;
                case BinOp::Lt:
                case BinOp::Le:
                case BinOp::Gt:
                case BinOp::Ge: return 6;
                case BinOp::Add:
                case BinOp::Sub: return 7;
                case BinOp::Mul: return 8;
            }
            return 8;
        case ExprKind::Not:
        case ExprKind::Neg: return 9;
        default: return 10;
    }
}

inline const char* op_text(BinOp op) {
    switch (op) {
        case BinOp::Add: return "+";
        case BinOp::Sub: return "-";
        case BinOp::Mul: return "*";
        case BinOp::Eq: return "==";
        case BinOp::Ne: return "!=";
        case BinOp::Lt: return "<";
        case BinOp::Le: return "<=";
        case BinOp::Gt: return ">";
        case BinOp::Ge: return ">=";
        case BinOp::And: return "&&";
        case BinOp::Or: return "||";
        case BinOp::Imp: return "==>";
    }
    return "?";
}

}  // namespace detail

// Source form of an expression, re-parenthesized from precedence. Resolved
// self-field accesses print back as the bare field name they came from.
inline std::string expr_str(const Expr& e, const Model* m = nullptr) {
    auto child = [&](const Expr& k, bool tighter) {
        std::string s = expr_str(k, m);
        int pe = detail::prec_of(e), pk = detail::prec_of(k);
        if (pk < pe || (tighter && pk == pe)) return "(" + s + ")";
        return s;
    };
    switch (e.kind) {
        case ExprKind::IntLit: return e.ival.str();
        case ExprKind::BoolLit: return e.bval ? "true" : "false";
        case ExprKind::SelfRef: return "self";
        case ExprKind::ObjLit:
            return m ? m->objects[static_cast<std::size_t>(e.obj)].name
                     : "#" + std::to_string(e.obj);
        case ExprKind::VarRef: return e.name;
        case ExprKind::FieldGet:
            if (e.kids[0]->kind == ExprKind::SelfRef) return e.name;
            return child(*e.kids[0], false) + "." + e.name;
        case ExprKind::MapIndex:
            return child(*e.kids[0], false) + "[" + expr_str(*e.kids[1], m) + "]";
        case ExprKind::Old: return "old(" + expr_str(*e.kids[0], m) + ")";
        case ExprKind::CurTime: return "T";
        case ExprKind::DeltaTime: return "dT";
        case ExprKind::Inv2: return "inv2(" + expr_str(*e.kids[0], m) + ")";
        case ExprKind::Mine: return "mine(" + expr_str(*e.kids[0], m) + ")";
        case ExprKind::ClosedOf: return "closed(" + expr_str(*e.kids[0], m) + ")";
        case ExprKind::Elapsed: return "elapsed(" + e.name + ")";
        case ExprKind::Not: return "!" + child(*e.kids[0], false);
        case ExprKind::Neg: return "-" + child(*e.kids[0], false);
        case ExprKind::Binary:
            return child(*e.kids[0], false) + " " + detail::op_text(e.op) + " " +
                   child(*e.kids[1], true);
        case ExprKind::Cond:
            return child(*e.kids[0], true) + " ? " + child(*e.kids[1], true) + " : " +
                   child(*e.kids[2], false);
        case ExprKind::Forall:
            return "forall " + e.name + " :: " + expr_str(*e.kids[0], m);
    }
    return "?";
}

namespace detail {

inline void print_stmts(const Model& m, const std::vector<Stmt>& body, int indent,
                        std::string& out) {
    std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    auto obj_name = [&](int o) { return m.objects[static_cast<std::size_t>(o)].name; };
    for (const Stmt& s : body) {
        switch (s.kind) {
            case StmtKind::Atomic:
                out += pad + "atomic {\n";
                print_stmts(m, s.body, indent + 1, out);
                out += pad + "}\n";
                break;
            case StmtKind::Assign:
                out += pad + obj_name(s.obj) + "." + s.field + " = " + expr_str(*s.expr, &m) +
                       ";\n";
                break;
            case StmtKind::Assume:
                out += pad + "assume " + expr_str(*s.expr, &m) + ";\n";
                break;
            case StmtKind::Assert:
                out += pad + "assert " + expr_str(*s.expr, &m) + ";\n";
                break;
            case StmtKind::Wrap: out += pad + "wrap " + obj_name(s.obj) + ";\n"; break;
            case StmtKind::Unwrap: out += pad + "unwrap " + obj_name(s.obj) + ";\n"; break;
            case StmtKind::Own:
                out += pad + "own " + obj_name(s.obj) + " by " + obj_name(s.new_owner) + ";\n";
                break;
            case StmtKind::Loop:
                out += pad + "loop " + s.bound.str() + " invariant " + expr_str(*s.expr, &m) +
                       " {\n";
                print_stmts(m, s.body, indent + 1, out);
                out += pad + "}\n";
                break;
            case StmtKind::DeadlineNew:
                out += pad + "deadline_new " + obj_name(s.obj) + " " + s.delta.str() + ";\n";
                break;
            case StmtKind::DeadlineReset:
                out += pad + "deadline_reset " + obj_name(s.obj) + " " + s.delta.str() + ";\n";
                break;
            case StmtKind::DeadlineDestroy:
                out += pad + "deadline_destroy " + obj_name(s.obj) + ";\n";
                break;
            case StmtKind::TimerNew:
                out += pad + "timer_new " + obj_name(s.obj) + " " + s.delta.str() + ";\n";
                break;
            case StmtKind::TimerReset:
                out += pad + "timer_reset " + obj_name(s.obj) + " " + s.delta.str() + ";\n";
                break;
            case StmtKind::TimerDestroy:
                out += pad + "timer_destroy " + obj_name(s.obj) + ";\n";
                break;
            case StmtKind::TimerRecord: out += pad + "timer_record " + s.name + ";\n"; break;
            case StmtKind::Skip: out += pad + "skip;\n"; break;
        }
    }
}

inline std::string value_str(const Model& m, const Value& v) {
    switch (v.sort) {
        case Sort::Int:
        case Sort::Time: return v.i.str();
        case Sort::Bool: return v.b ? "true" : "false";
        case Sort::ObjRef:
            return v.ref >= 0 ? m.objects[static_cast<std::size_t>(v.ref)].name : "null";
        case Sort::ObjSet: return "{}";
    }
    return "?";
}

}  // namespace detail

// Source form of the user-declared part of a model; builtins are implicit.
inline std::string print_model(const Model& m) {
    std::string out;
    for (const TypeDecl& t : m.types) {
        if (t.builtin) continue;
        out += "type " + t.name + (t.timed ? " timed" : "") + " {\n";
        for (const FieldDecl& f : t.fields) {
            out += "  ";
            if (f.is_volatile) out += "volatile ";
            if (f.is_ghost) out += "ghost ";
            out += std::string(sort_name(f.sort)) + " " + f.name;
            if (f.range) out += " in " + f.range->first.str() + " .. " + f.range->second.str();
            out += ";\n";
        }
        for (const auto& [fi, rhs] : t.dynamics)
            out += "  dynamics " + t.fields[static_cast<std::size_t>(fi)].name + " = " +
                   expr_str(*rhs, &m) + ";\n";
        for (const Clause& c : t.invariants) {
            if (c.synthetic) continue;
            out += "  invariant " + c.text + ";\n";
        }
        for (const Clause& c : t.on_unwrap) out += "  on_unwrap " + c.text + ";\n";
        for (int a : t.approvals)
            out += "  approves(owner, " + t.fields[static_cast<std::size_t>(a)].name + ");\n";
        out += "}\n";
    }
    for (const ObjectDecl& o : m.objects) {
        if (o.kind != ObjKind::Plain) continue;
        out += "object " + o.name + " : " + m.types[static_cast<std::size_t>(o.type)].name +
               " {\n";
        for (const auto& [f, v] : o.init)
            out += "  " + f + " = " + detail::value_str(m, v) + ";\n";
        if (o.init_closed) out += "  closed = true;\n";
        if (o.init_owner >= 0)
            out += "  owner = " + m.objects[static_cast<std::size_t>(o.init_owner)].name + ";\n";
        out += "}\n";
    }
    for (const ThreadDecl& th : m.threads) {
        out += "thread " + th.name + " {\n";
        detail::print_stmts(m, th.program, 1, out);
        out += "}\n";
    }
    return out;
}

}  // namespace chronoverify
