#pragma once

#include "chronoverify/lexer.hpp"
#include "chronoverify/model.hpp"
#include "chronoverify/printer.hpp"

#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace chronoverify {

// Built-in types, written in the same surface language as user models. Time
// is the global clock with its three clauses; Deadline adds the freeze and
// unwrap obligations on top of Timer.
inline const char* builtin_source() {
    return R"(
type Time {
  volatile ghost time cur;
  volatile ghost objset timed;
  invariant old(cur) <= cur;
  invariant forall o :: old(timed[o]) ==> timed[o] || inv2(o);
  invariant forall o :: timed[o] && closed(o) ==> unchanged(cur) || inv2(o);
}
type Deadline timed {
  volatile ghost time t;
  invariant T <= t;
  invariant unchanged(t) || old(T < t);
  on_unwrap old(T < t);
  approves(owner, t);
}
type Timer timed {
  volatile ghost time t;
  invariant T <= t;
  approves(owner, t);
}
)";
}

namespace detail {

inline ExprPtr mk(Expr e) { return std::make_shared<Expr>(std::move(e)); }

// ---------------------------------------------------------------------------
// Syntax
// ---------------------------------------------------------------------------

class Parser {
public:
    // Raw object initializer captured before types are necessarily complete.
    struct RawInit {
        int obj;
        std::string field;
        Token value;
        bool negated;
    };

    Parser(const std::vector<Token>& toks, Model& m, Diagnostics& diag, bool builtin)
        : toks_(toks), m_(m), diag_(diag), builtin_(builtin) {}

    std::vector<RawInit> raw_inits;

    // Registers every declared type, object, and thread name up front so
    // bodies can reference them regardless of declaration order.
    void prepass() {
        for (std::size_t k = 0; k + 1 < toks_.size(); ++k) {
            if (toks_[k].kind != Token::Ident) continue;
            if (k > 0 && !(toks_[k - 1].text == ";" || toks_[k - 1].text == "}")) continue;
            const std::string& w = toks_[k].text;
            if (toks_[k + 1].kind != Token::Ident) continue;
            const Token& name = toks_[k + 1];
            if (w == "type") {
                if (!builtin_ && m_.find_type(name.text) >= 0) {
                    diag_.error(m_.types[static_cast<std::size_t>(m_.find_type(name.text))]
                                        .builtin
                                    ? "E_BUILTIN"
                                    : "E_DUP_TYPE",
                                "type '" + name.text + "' already declared", name.pos);
                    continue;
                }
                TypeDecl t;
                t.name = name.text;
                t.builtin = builtin_;
                t.pos = name.pos;
                m_.types.push_back(std::move(t));
            } else if (w == "object" || w == "thread") {
                if (m_.find_object(name.text) >= 0) {
                    diag_.error("E_DUP_OBJ", "object '" + name.text + "' already declared",
                                name.pos);
                    continue;
                }
                ObjectDecl o;
                o.name = name.text;
                o.kind = w == "thread" ? ObjKind::Thread : ObjKind::Plain;
                o.pos = name.pos;
                m_.objects.push_back(std::move(o));
            }
        }
    }

    void parse() {
        while (!at_end()) {
            Token t = peek();
            if (accept_word("type")) parse_type();
            else if (accept_word("object")) parse_object();
            else if (accept_word("thread")) parse_thread();
            else {
                diag_.error("E_PARSE", "expected a type, object, or thread declaration, got '" +
                                           t.text + "'",
                            t.pos);
                sync();
            }
        }
    }

    // Expression entry for macro snippets.
    ExprPtr parse_expr_entry() { return parse_expr(); }

private:
    // ----- token plumbing ----------------------------------------------------

    const Token& peek(int off = 0) const {
        std::size_t k = i_ + static_cast<std::size_t>(off);
        return k < toks_.size() ? toks_[k] : toks_.back();
    }
    bool at_end() const { return peek().kind == Token::End; }

    // Consumes the closing brace; running off the end of input is an error,
    // not a silently closed block.
    bool more_in_block() {
        if (accept_punct("}")) return false;
        if (at_end()) {
            diag_.error("E_PARSE", "unterminated '{' block (unexpected end of input)",
                        peek().pos);
            return false;
        }
        return true;
    }
    const Token& advance() { return toks_[i_ < toks_.size() - 1 ? i_++ : i_]; }

    bool accept_word(const std::string& w) {
        if (peek().kind == Token::Ident && peek().text == w) {
            advance();
            return true;
        }
        return false;
    }
    bool accept_punct(const std::string& p) {
        if (peek().kind == Token::Punct && peek().text == p) {
            advance();
            return true;
        }
        return false;
    }
    void expect_punct(const std::string& p) {
        if (!accept_punct(p))
            diag_.error("E_PARSE", "expected '" + p + "', got '" + peek().text + "'", peek().pos);
    }
    std::string expect_ident() {
        if (peek().kind == Token::Ident) return advance().text;
        diag_.error("E_PARSE", "expected an identifier, got '" + peek().text + "'", peek().pos);
        return "";
    }
    std::optional<Int> expect_int() {
        if (peek().kind == Token::IntLit) return advance().ival;
        if (peek().kind == Token::Punct && peek().text == "-" && peek(1).kind == Token::IntLit) {
            SourcePos p = peek().pos;
            advance();
            Int v = advance().ival;
            diag_.error("E_NEGATIVE_DELTA", "this count must be nonnegative", p);
            return -v;
        }
        diag_.error("E_PARSE", "expected an integer, got '" + peek().text + "'", peek().pos);
        return std::nullopt;
    }

    void sync() {
        while (!at_end()) {
            std::string t = advance().text;
            if (t == ";" || t == "}") return;
        }
    }

    int lookup_object(const std::string& name, SourcePos pos) {
        int o = m_.find_object(name);
        if (o < 0) diag_.error("E_UNKNOWN_OBJ", "unknown object '" + name + "'", pos);
        return o;
    }

    // ----- declarations ------------------------------------------------------

    static Sort sort_from_word(const std::string& w, bool& ok) {
        ok = true;
        if (w == "int") return Sort::Int;
        if (w == "bool") return Sort::Bool;
        if (w == "time") return Sort::Time;
        if (w == "objref") return Sort::ObjRef;
        if (w == "objset") return Sort::ObjSet;
        ok = false;
        return Sort::Int;
    }

    void parse_type() {
        SourcePos pos = peek().pos;
        std::string name = expect_ident();
        int ti = m_.find_type(name);
        if (ti < 0) {  // prepass refused a duplicate; parse body into a scratch decl
            m_.types.push_back(TypeDecl{});
            ti = static_cast<int>(m_.types.size()) - 1;
            m_.types.back().name = name + "#dup";
        }
        TypeDecl& t = m_.types[static_cast<std::size_t>(ti)];
        t.pos = pos;
        if (accept_word("timed")) t.timed = true;
        expect_punct("{");
        std::vector<std::pair<std::string, SourcePos>> approvals;
        std::vector<std::tuple<std::string, ExprPtr, SourcePos>> dynamics;
        while (more_in_block()) {
            SourcePos mp = peek().pos;
            if (accept_word("invariant")) {
                ExprPtr e = parse_expr();
                expect_punct(";");
                t.invariants.push_back({e, expr_str(*e), mp, false});
            } else if (accept_word("on_unwrap")) {
                ExprPtr e = parse_expr();
                expect_punct(";");
                t.on_unwrap.push_back({e, expr_str(*e), mp, false});
            } else if (accept_word("approves")) {
                expect_punct("(");
                if (!accept_word("owner"))
                    diag_.error("E_PARSE", "only owner approval is supported", peek().pos);
                expect_punct(",");
                approvals.emplace_back(expect_ident(), mp);
                expect_punct(")");
                expect_punct(";");
            } else if (accept_word("dynamics")) {
                std::string f = expect_ident();
                expect_punct("=");
                ExprPtr e = parse_expr();
                expect_punct(";");
                dynamics.emplace_back(f, e, mp);
            } else {
                parse_field(t);
            }
        }
        for (auto& [f, p] : approvals) {
            int fi = t.field_index(f);
            if (fi < 0) {
                diag_.error("E_UNKNOWN_FIELD", "approval names unknown field '" + f + "'", p);
            } else if (!t.fields[static_cast<std::size_t>(fi)].is_volatile) {
                diag_.error("E_APPROVAL_NONVOLATILE",
                            "approval on nonvolatile field '" + f + "' is meaningless", p);
            } else {
                t.approvals.push_back(fi);
            }
        }
        for (auto& [f, e, p] : dynamics) {
            int fi = t.field_index(f);
            if (fi < 0)
                diag_.error("E_UNKNOWN_FIELD", "dynamics names unknown field '" + f + "'", p);
            else
                t.dynamics.emplace_back(fi, e);
        }
    }

    void parse_field(TypeDecl& t) {
        FieldDecl f;
        f.pos = peek().pos;
        while (true) {
            if (accept_word("volatile")) f.is_volatile = true;
            else if (accept_word("ghost")) f.is_ghost = true;
            else break;
        }
        bool ok = false;
        std::string sw = expect_ident();
        f.sort = sort_from_word(sw, ok);
        if (!ok) {
            diag_.error("E_PARSE", "expected a field sort, got '" + sw + "'", f.pos);
            sync();
            return;
        }
        f.name = expect_ident();
        if (accept_word("in")) {
            auto lo = expect_int();
            expect_punct("..");
            auto hi = expect_int();
            if (lo && hi && *lo > *hi)
                diag_.error("E_RANGE", "empty range: " + lo->str() + " .. " + hi->str(), f.pos);
            else if (lo && hi)
                f.range = std::make_pair(*lo, *hi);
        }
        expect_punct(";");
        if (t.field_index(f.name) >= 0)
            diag_.error("E_DUP_FIELD", "field '" + f.name + "' already declared", f.pos);
        else
            t.fields.push_back(std::move(f));
    }

    void parse_object() {
        SourcePos pos = peek().pos;
        std::string name = expect_ident();
        int oi = m_.find_object(name);
        expect_punct(":");
        SourcePos tpos = peek().pos;
        std::string tname = expect_ident();
        int ti = m_.find_type(tname);
        if (ti < 0) {
            diag_.error("E_UNKNOWN_TYPE", "unknown type '" + tname + "'", tpos);
        } else if (ti == m_.time_type) {
            diag_.error("E_BUILTIN", "the Time singleton is built in; declare no Time objects",
                        tpos);
            ti = -1;
        }
        if (oi >= 0) m_.objects[static_cast<std::size_t>(oi)].type = ti;
        expect_punct("{");
        while (more_in_block()) {
            SourcePos fp = peek().pos;
            std::string f = expect_ident();
            expect_punct("=");
            if (f == "closed") {
                if (accept_word("true")) set_closed(oi, true);
                else if (accept_word("false")) set_closed(oi, false);
                else diag_.error("E_PARSE", "closed must be true or false", peek().pos);
            } else if (f == "owner") {
                SourcePos wp = peek().pos;
                int owner = lookup_object(expect_ident(), wp);
                if (oi >= 0) m_.objects[static_cast<std::size_t>(oi)].init_owner = owner;
            } else {
                bool neg = accept_punct("-");
                Token v = advance();
                if (v.kind != Token::IntLit && v.kind != Token::Ident)
                    diag_.error("E_PARSE", "expected a literal initializer", v.pos);
                else if (oi >= 0)
                    raw_inits.push_back({oi, f, v, neg});
            }
            expect_punct(";");
            (void)fp;
        }
        (void)pos;
    }

    void set_closed(int oi, bool v) {
        if (oi >= 0) m_.objects[static_cast<std::size_t>(oi)].init_closed = v;
    }

    void parse_thread() {
        SourcePos pos = peek().pos;
        std::string name = expect_ident();
        ThreadDecl th;
        th.name = name;
        th.obj = m_.find_object(name);
        th.pos = pos;
        expect_punct("{");
        th.program = parse_block_body();
        m_.threads.push_back(std::move(th));
    }

    std::vector<Stmt> parse_block_body() {
        std::vector<Stmt> out;
        while (more_in_block()) out.push_back(parse_stmt());
        return out;
    }

    Stmt parse_stmt() {
        Stmt s;
        s.pos = peek().pos;
        if (accept_word("atomic")) {
            s.kind = StmtKind::Atomic;
            expect_punct("{");
            s.body = parse_block_body();
            return s;
        }
        if (accept_word("assume")) {
            s.kind = StmtKind::Assume;
            s.expr = parse_expr();
            expect_punct(";");
            return s;
        }
        if (accept_word("assert")) {
            s.kind = StmtKind::Assert;
            s.expr = parse_expr();
            expect_punct(";");
            return s;
        }
        if (accept_word("wrap") || accept_word("unwrap")) {
            s.kind = toks_[i_ - 1].text == "wrap" ? StmtKind::Wrap : StmtKind::Unwrap;
            SourcePos p = peek().pos;
            s.obj = lookup_object(expect_ident(), p);
            expect_punct(";");
            return s;
        }
        if (accept_word("own")) {
            s.kind = StmtKind::Own;
            SourcePos p = peek().pos;
            s.obj = lookup_object(expect_ident(), p);
            if (!accept_word("by"))
                diag_.error("E_PARSE", "expected 'by' in own statement", peek().pos);
            SourcePos q = peek().pos;
            s.new_owner = lookup_object(expect_ident(), q);
            expect_punct(";");
            return s;
        }
        if (accept_word("loop")) {
            s.kind = StmtKind::Loop;
            auto b = expect_int();
            s.bound = b.value_or(0);
            if (!accept_word("invariant"))
                diag_.error("E_PARSE", "loop requires an invariant", peek().pos);
            s.expr = parse_expr();
            if (accept_word("writes")) {  // documentation only
                expect_ident();
                while (accept_punct(",")) expect_ident();
            }
            expect_punct("{");
            s.body = parse_block_body();
            return s;
        }
        static const std::pair<const char*, StmtKind> prims[] = {
            {"deadline_new", StmtKind::DeadlineNew},
            {"deadline_reset", StmtKind::DeadlineReset},
            {"deadline_destroy", StmtKind::DeadlineDestroy},
            {"timer_new", StmtKind::TimerNew},
            {"timer_reset", StmtKind::TimerReset},
            {"timer_destroy", StmtKind::TimerDestroy},
        };
        for (auto& [w, k] : prims) {
            if (accept_word(w)) {
                s.kind = k;
                SourcePos p = peek().pos;
                s.obj = lookup_object(expect_ident(), p);
                if (k == StmtKind::DeadlineNew || k == StmtKind::DeadlineReset ||
                    k == StmtKind::TimerNew || k == StmtKind::TimerReset)
                    s.delta = expect_int().value_or(0);
                expect_punct(";");
                return s;
            }
        }
        if (accept_word("timer_record")) {
            s.kind = StmtKind::TimerRecord;
            s.name = expect_ident();
            expect_punct(";");
            return s;
        }
        if (accept_word("skip")) {
            s.kind = StmtKind::Skip;
            expect_punct(";");
            return s;
        }
        if (accept_word("bump_volatile_version")) {  // framing annotation, no semantics
            s.kind = StmtKind::Skip;
            if (peek().kind == Token::Ident) advance();
            expect_punct(";");
            return s;
        }
        if (peek().kind == Token::Ident && peek(1).text == "." && peek(3).text == "=") {
            s.kind = StmtKind::Assign;
            SourcePos p = peek().pos;
            s.obj = lookup_object(expect_ident(), p);
            expect_punct(".");
            s.field = expect_ident();
            expect_punct("=");
            s.expr = parse_expr();
            expect_punct(";");
            return s;
        }
        diag_.error("E_PARSE", "expected a statement, got '" + peek().text + "'", peek().pos);
        sync();
        s.kind = StmtKind::Skip;
        return s;
    }

    // ----- expressions ---------------------------------------------------------

    ExprPtr parse_expr() {
        if (accept_word("forall")) {
            Expr e;
            e.kind = ExprKind::Forall;
            e.pos = toks_[i_ - 1].pos;
            e.name = expect_ident();
            expect_punct("::");
            e.kids.push_back(parse_expr());
            return mk(std::move(e));
        }
        return parse_cond();
    }

    ExprPtr parse_cond() {
        ExprPtr c = parse_imp();
        if (accept_punct("?")) {
            Expr e;
            e.kind = ExprKind::Cond;
            e.pos = c->pos;
            e.kids.push_back(c);
            e.kids.push_back(parse_expr());
            expect_punct(":");
            e.kids.push_back(parse_expr());
            return mk(std::move(e));
        }
        return c;
    }

    ExprPtr binary(BinOp op, ExprPtr a, ExprPtr b) {
        Expr e;
        e.kind = ExprKind::Binary;
        e.op = op;
        e.pos = a->pos;
        e.kids = {std::move(a), std::move(b)};
        return mk(std::move(e));
    }

    ExprPtr parse_imp() {
        ExprPtr a = parse_or();
        if (accept_punct("==>")) return binary(BinOp::Imp, a, parse_imp());
        return a;
    }
    ExprPtr parse_or() {
        ExprPtr a = parse_and();
        while (accept_punct("||")) a = binary(BinOp::Or, a, parse_and());
        return a;
    }
    ExprPtr parse_and() {
        ExprPtr a = parse_eq();
        while (accept_punct("&&")) a = binary(BinOp::And, a, parse_eq());
        return a;
    }
    ExprPtr parse_eq() {
        ExprPtr a = parse_rel();
        while (true) {
            if (accept_punct("==")) a = binary(BinOp::Eq, a, parse_rel());
            else if (accept_punct("!=")) a = binary(BinOp::Ne, a, parse_rel());
            else return a;
        }
    }
    ExprPtr parse_rel() {
        ExprPtr a = parse_add();
        while (true) {
            if (accept_punct("<=")) a = binary(BinOp::Le, a, parse_add());
            else if (accept_punct(">=")) a = binary(BinOp::Ge, a, parse_add());
            else if (accept_punct("<")) a = binary(BinOp::Lt, a, parse_add());
            else if (accept_punct(">")) a = binary(BinOp::Gt, a, parse_add());
            else return a;
        }
    }
    ExprPtr parse_add() {
        ExprPtr a = parse_mul();
        while (true) {
            if (accept_punct("+")) a = binary(BinOp::Add, a, parse_mul());
            else if (accept_punct("-")) a = binary(BinOp::Sub, a, parse_mul());
            else return a;
        }
    }
    ExprPtr parse_mul() {
        ExprPtr a = parse_unary();
        while (accept_punct("*")) a = binary(BinOp::Mul, a, parse_unary());
        return a;
    }
    ExprPtr parse_unary() {
        SourcePos pos = peek().pos;
        if (accept_punct("!")) {
            Expr e;
            e.kind = ExprKind::Not;
            e.pos = pos;
            e.kids.push_back(parse_unary());
            return mk(std::move(e));
        }
        if (accept_punct("-")) {
            Expr e;
            e.kind = ExprKind::Neg;
            e.pos = pos;
            e.kids.push_back(parse_unary());
            return mk(std::move(e));
        }
        return parse_postfix();
    }
    ExprPtr parse_postfix() {
        ExprPtr a = parse_primary();
        while (true) {
            if (accept_punct(".")) {
                Expr e;
                e.kind = ExprKind::FieldGet;
                e.pos = a->pos;
                e.name = expect_ident();
                e.kids.push_back(a);
                a = mk(std::move(e));
            } else if (accept_punct("[")) {
                Expr e;
                e.kind = ExprKind::MapIndex;
                e.pos = a->pos;
                e.kids.push_back(a);
                e.kids.push_back(parse_expr());
                expect_punct("]");
                a = mk(std::move(e));
            } else {
                return a;
            }
        }
    }

    ExprPtr unary_call(ExprKind k, SourcePos pos) {
        Expr e;
        e.kind = k;
        e.pos = pos;
        expect_punct("(");
        e.kids.push_back(parse_expr());
        expect_punct(")");
        return mk(std::move(e));
    }

    ExprPtr parse_primary() {
        const Token& t = peek();
        if (t.kind == Token::IntLit) {
            advance();
            Expr e;
            e.kind = ExprKind::IntLit;
            e.ival = t.ival;
            e.pos = t.pos;
            return mk(std::move(e));
        }
        if (accept_punct("(")) {
            ExprPtr e = parse_expr();
            expect_punct(")");
            return e;
        }
        if (t.kind == Token::Ident) {
            advance();
            Expr e;
            e.pos = t.pos;
            const std::string& w = t.text;
            if (w == "true" || w == "false") {
                e.kind = ExprKind::BoolLit;
                e.bval = w == "true";
                return mk(std::move(e));
            }
            if (w == "self") {
                e.kind = ExprKind::SelfRef;
                return mk(std::move(e));
            }
            if (w == "T") {
                e.kind = ExprKind::CurTime;
                return mk(std::move(e));
            }
            if (w == "dT") {
                e.kind = ExprKind::DeltaTime;
                return mk(std::move(e));
            }
            if (w == "old") return unary_call(ExprKind::Old, t.pos);
            if (w == "inv2") return unary_call(ExprKind::Inv2, t.pos);
            if (w == "mine") return unary_call(ExprKind::Mine, t.pos);
            if (w == "closed") return unary_call(ExprKind::ClosedOf, t.pos);
            if (w == "unchanged") {
                ExprPtr inner;
                expect_punct("(");
                inner = parse_expr();
                expect_punct(")");
                Expr olde;
                olde.kind = ExprKind::Old;
                olde.pos = t.pos;
                olde.kids.push_back(inner);
                return binary(BinOp::Eq, mk(std::move(olde)), inner);
            }
            if (w == "elapsed") {
                e.kind = ExprKind::Elapsed;
                expect_punct("(");
                e.name = expect_ident();
                expect_punct(")");
                return mk(std::move(e));
            }
            if (w == "forall") {
                e.kind = ExprKind::Forall;
                e.name = expect_ident();
                expect_punct("::");
                e.kids.push_back(parse_expr());
                return mk(std::move(e));
            }
            e.kind = ExprKind::VarRef;
            e.name = w;
            return mk(std::move(e));
        }
        diag_.error("E_PARSE", "expected an expression, got '" + t.text + "'", t.pos);
        advance();
        Expr e;
        e.kind = ExprKind::IntLit;
        e.ival = 0;
        e.pos = t.pos;
        return mk(std::move(e));
    }

    const std::vector<Token>& toks_;
    std::size_t i_ = 0;
    Model& m_;
    Diagnostics& diag_;
    bool builtin_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Resolution and sort checking
// ---------------------------------------------------------------------------

namespace detail {

class Checker {
public:
    Checker(Model& m, Diagnostics& diag) : m_(m), diag_(diag) {}

    struct Ctx {
        int self_type = -1;
        const std::set<std::string>* stamps = nullptr;
        std::vector<std::string> bound;
        bool in_old = false;
    };

    void run() {
        convert_inits_done_externally_ = true;
        infer_pointees();
        expand_macros();
        for (std::size_t ti = 0; ti < m_.types.size(); ++ti) {
            Ctx cx;
            cx.self_type = static_cast<int>(ti);
            TypeDecl& t = m_.types[ti];
            for (Clause& c : t.invariants) c.expr = check_bool(c.expr, cx);
            for (Clause& c : t.on_unwrap) c.expr = check_bool(c.expr, cx);
            for (auto& [fi, rhs] : t.dynamics) {
                rhs = check(rhs, cx);
                Sort fs = t.fields[static_cast<std::size_t>(fi)].sort;
                if (rhs->sort != fs)
                    diag_.error("E_SORT",
                                "dynamics for '" + t.fields[static_cast<std::size_t>(fi)].name +
                                    "' has sort " + sort_name(rhs->sort) + ", field is " +
                                    sort_name(fs),
                                rhs->pos);
            }
        }
        for (ThreadDecl& th : m_.threads) {
            std::set<std::string> stamps;
            check_stmts(th.program, stamps, false);
        }
    }

    // Initial values typed against the declared fields.
    void convert_inits(const std::vector<Parser::RawInit>& raw) {
        for (const auto& r : raw) {
            ObjectDecl& od = m_.objects[static_cast<std::size_t>(r.obj)];
            if (od.type < 0) continue;
            const TypeDecl& t = m_.types[static_cast<std::size_t>(od.type)];
            int fi = t.field_index(r.field);
            if (fi < 0) {
                diag_.error("E_UNKNOWN_FIELD",
                            "object '" + od.name + "' initializes unknown field '" + r.field +
                                "'",
                            r.value.pos);
                continue;
            }
            const FieldDecl& f = t.fields[static_cast<std::size_t>(fi)];
            if (r.value.kind == Token::IntLit) {
                Int v = r.negated ? Int(-r.value.ival) : r.value.ival;
                if (f.sort == Sort::Int) od.init[r.field] = Value::of_int(v);
                else if (f.sort == Sort::Time) od.init[r.field] = Value::of_time(v);
                else
                    diag_.error("E_SORT", "integer initializer for " +
                                              std::string(sort_name(f.sort)) + " field '" +
                                              r.field + "'",
                                r.value.pos);
            } else if (r.value.text == "true" || r.value.text == "false") {
                if (f.sort == Sort::Bool)
                    od.init[r.field] = Value::of_bool(r.value.text == "true");
                else
                    diag_.error("E_SORT", "boolean initializer for field '" + r.field + "'",
                                r.value.pos);
            } else {
                int target = m_.find_object(r.value.text);
                if (target < 0)
                    diag_.error("E_UNKNOWN_OBJ", "unknown object '" + r.value.text + "'",
                                r.value.pos);
                else if (f.sort != Sort::ObjRef)
                    diag_.error("E_SORT", "object initializer for field '" + r.field + "'",
                                r.value.pos);
                else
                    od.init[r.field] = Value::of_ref(target);
            }
        }
    }

private:
    // objref fields get their static pointee type from object initializers.
    void infer_pointees() {
        for (const ObjectDecl& od : m_.objects) {
            if (od.type < 0) continue;
            TypeDecl& t = m_.types[static_cast<std::size_t>(od.type)];
            for (const auto& [fname, v] : od.init) {
                if (v.sort != Sort::ObjRef || v.ref < 0) continue;
                int fi = t.field_index(fname);
                if (fi < 0) continue;
                FieldDecl& f = t.fields[static_cast<std::size_t>(fi)];
                int pt = m_.objects[static_cast<std::size_t>(v.ref)].type;
                if (pt < 0) continue;
                if (f.pointee_type < 0) f.pointee_type = pt;
                else if (f.pointee_type != pt)
                    diag_.error("E_POINTEE",
                                "field '" + fname + "' points at objects of different types",
                                od.pos);
            }
        }
    }

    // `timed` expands to the membership clause; dynamics become two-state
    // clauses tying the field to its rule.
    void expand_macros() {
        for (TypeDecl& t : m_.types) {
            if (static_cast<std::size_t>(&t - m_.types.data()) ==
                static_cast<std::size_t>(m_.time_type))
                continue;
            for (auto& [fi, rhs] : t.dynamics) {
                Expr self;
                self.kind = ExprKind::SelfRef;
                Expr get;
                get.kind = ExprKind::FieldGet;
                get.name = t.fields[static_cast<std::size_t>(fi)].name;
                get.kids.push_back(mk(std::move(self)));
                Expr eq;
                eq.kind = ExprKind::Binary;
                eq.op = BinOp::Eq;
                eq.kids = {mk(std::move(get)), rhs};
                t.invariants.push_back({mk(std::move(eq)),
                                        "dynamics " +
                                            t.fields[static_cast<std::size_t>(fi)].name,
                                        t.pos, true});
            }
            if (t.timed) {
                Expr self;
                self.kind = ExprKind::SelfRef;
                Expr cl;
                cl.kind = ExprKind::ClosedOf;
                cl.kids.push_back(mk(std::move(self)));
                Expr timeobj;
                timeobj.kind = ExprKind::ObjLit;
                timeobj.obj = m_.time_obj;
                Expr timed;
                timed.kind = ExprKind::FieldGet;
                timed.name = "timed";
                timed.kids.push_back(mk(std::move(timeobj)));
                Expr self2;
                self2.kind = ExprKind::SelfRef;
                Expr idx;
                idx.kind = ExprKind::MapIndex;
                idx.kids = {mk(std::move(timed)), mk(std::move(self2))};
                Expr imp;
                imp.kind = ExprKind::Binary;
                imp.op = BinOp::Imp;
                imp.kids = {mk(std::move(cl)), mk(std::move(idx))};
                t.invariants.push_back(
                    {mk(std::move(imp)), "closed(self) ==> time.timed[self]", t.pos, true});
            }
        }
    }

    // ----- expressions ---------------------------------------------------------

    ExprPtr fallback(Sort s, SourcePos pos) {
        Expr e;
        e.kind = s == Sort::Bool ? ExprKind::BoolLit : ExprKind::IntLit;
        e.sort = s;
        e.ival = 0;
        e.bval = true;
        e.pos = pos;
        return mk(std::move(e));
    }

    ExprPtr check_bool(const ExprPtr& e, Ctx& cx) {
        ExprPtr r = check(e, cx);
        if (r->sort != Sort::Bool) {
            diag_.error("E_SORT", "expected bool, got " + std::string(sort_name(r->sort)),
                        r->pos);
            return fallback(Sort::Bool, r->pos);
        }
        return r;
    }

    int pointee_of(const Expr& e, const Ctx& cx) const {
        switch (e.kind) {
            case ExprKind::ObjLit:
                return m_.objects[static_cast<std::size_t>(e.obj)].type;
            case ExprKind::SelfRef: return cx.self_type;
            case ExprKind::FieldGet: return e.pointee_type;
            case ExprKind::Old: return pointee_of(*e.kids[0], cx);
            case ExprKind::Cond: return pointee_of(*e.kids[1], cx);
            default: return -1;
        }
    }

    ExprPtr check(const ExprPtr& ep, Ctx& cx) {
        const Expr& e = *ep;
        Expr out = e;  // copy; kids replaced below
        switch (e.kind) {
            case ExprKind::IntLit: out.sort = Sort::Int; break;
            case ExprKind::BoolLit: out.sort = Sort::Bool; break;
            case ExprKind::SelfRef:
                if (cx.self_type < 0) {
                    diag_.error("E_UNRESOLVED", "'self' outside a type declaration", e.pos);
                    return fallback(Sort::Int, e.pos);
                }
                out.sort = Sort::ObjRef;
                break;
            case ExprKind::VarRef: {
                for (auto it = cx.bound.rbegin(); it != cx.bound.rend(); ++it)
                    if (*it == e.name) {
                        out.sort = Sort::ObjRef;
                        return mk(std::move(out));
                    }
                if (cx.self_type >= 0) {
                    const TypeDecl& t = m_.types[static_cast<std::size_t>(cx.self_type)];
                    int fi = t.field_index(e.name);
                    if (fi >= 0) {
                        Expr self;
                        self.kind = ExprKind::SelfRef;
                        self.sort = Sort::ObjRef;
                        self.pos = e.pos;
                        Expr get;
                        get.kind = ExprKind::FieldGet;
                        get.name = e.name;
                        get.pos = e.pos;
                        get.sort = t.fields[static_cast<std::size_t>(fi)].sort;
                        get.pointee_type = t.fields[static_cast<std::size_t>(fi)].pointee_type;
                        get.kids.push_back(mk(std::move(self)));
                        return mk(std::move(get));
                    }
                }
                int oi = m_.find_object(e.name);
                if (oi >= 0) {
                    out.kind = ExprKind::ObjLit;
                    out.obj = oi;
                    out.sort = Sort::ObjRef;
                    break;
                }
                diag_.error("E_UNRESOLVED", "unknown name '" + e.name + "'", e.pos);
                return fallback(Sort::Int, e.pos);
            }
            case ExprKind::ObjLit: out.sort = Sort::ObjRef; break;
            case ExprKind::FieldGet: {
                ExprPtr base = check(e.kids[0], cx);
                if (base->sort != Sort::ObjRef) {
                    diag_.error("E_SORT", "field access on a non-reference", e.pos);
                    return fallback(Sort::Int, e.pos);
                }
                int pt = pointee_of(*base, cx);
                if (pt < 0) {
                    diag_.error("E_SORT",
                                "cannot determine the type behind this reference (quantified "
                                "variables cannot be dereferenced)",
                                e.pos);
                    return fallback(Sort::Int, e.pos);
                }
                const TypeDecl& t = m_.types[static_cast<std::size_t>(pt)];
                int fi = t.field_index(e.name);
                if (fi < 0) {
                    diag_.error("E_UNKNOWN_FIELD",
                                "type " + t.name + " has no field '" + e.name + "'", e.pos);
                    return fallback(Sort::Int, e.pos);
                }
                out.kids = {base};
                out.sort = t.fields[static_cast<std::size_t>(fi)].sort;
                out.pointee_type = t.fields[static_cast<std::size_t>(fi)].pointee_type;
                break;
            }
            case ExprKind::MapIndex: {
                ExprPtr base = check(e.kids[0], cx);
                ExprPtr idx = check(e.kids[1], cx);
                if (base->sort != Sort::ObjSet)
                    diag_.error("E_SORT", "indexing a non-set", e.pos);
                if (idx->sort != Sort::ObjRef)
                    diag_.error("E_SORT", "set index must be an object reference", e.pos);
                out.kids = {base, idx};
                out.sort = Sort::Bool;
                break;
            }
            case ExprKind::Old: {
                if (cx.in_old) {
                    diag_.error("E_NESTED_OLD", "old(...) cannot nest", e.pos);
                    return fallback(Sort::Int, e.pos);
                }
                cx.in_old = true;
                ExprPtr kid = check(e.kids[0], cx);
                cx.in_old = false;
                out.kids = {kid};
                out.sort = kid->sort;
                break;
            }
            case ExprKind::CurTime: out.sort = Sort::Time; break;
            case ExprKind::DeltaTime:
                if (cx.in_old) diag_.error("E_SORT", "dT inside old(...)", e.pos);
                out.sort = Sort::Int;
                break;
            case ExprKind::Elapsed:
                if (cx.in_old) diag_.error("E_SORT", "elapsed inside old(...)", e.pos);
                if (!cx.stamps || !cx.stamps->count(e.name))
                    diag_.error("E_STAMP", "no timer stamp named '" + e.name + "' recorded here",
                                e.pos);
                out.sort = Sort::Int;
                break;
            case ExprKind::Inv2:
            case ExprKind::Mine:
            case ExprKind::ClosedOf: {
                ExprPtr kid = check(e.kids[0], cx);
                if (kid->sort != Sort::ObjRef)
                    diag_.error("E_SORT", "argument must be an object reference", e.pos);
                out.kids = {kid};
                out.sort = Sort::Bool;
                break;
            }
            case ExprKind::Not: {
                ExprPtr kid = check(e.kids[0], cx);
                if (kid->sort != Sort::Bool) diag_.error("E_SORT", "! needs a bool", e.pos);
                out.kids = {kid};
                out.sort = Sort::Bool;
                break;
            }
            case ExprKind::Neg: {
                ExprPtr kid = check(e.kids[0], cx);
                if (kid->sort != Sort::Int)
                    diag_.error("E_SORT", "unary minus needs an int (time points cannot be "
                                          "negated)",
                                e.pos);
                out.kids = {kid};
                out.sort = Sort::Int;
                break;
            }
            case ExprKind::Binary: {
                ExprPtr a = check(e.kids[0], cx);
                ExprPtr b = check(e.kids[1], cx);
                out.kids = {a, b};
                out.sort = binary_sort(e.op, a->sort, b->sort, e.pos);
                break;
            }
            case ExprKind::Cond: {
                ExprPtr c = check(e.kids[0], cx);
                ExprPtr a = check(e.kids[1], cx);
                ExprPtr b = check(e.kids[2], cx);
                if (c->sort != Sort::Bool)
                    diag_.error("E_SORT", "condition must be bool", e.pos);
                if (a->sort != b->sort)
                    diag_.error("E_SORT", "branches of ?: have different sorts", e.pos);
                out.kids = {c, a, b};
                out.sort = a->sort;
                break;
            }
            case ExprKind::Forall: {
                cx.bound.push_back(e.name);
                ExprPtr kid = check(e.kids[0], cx);
                cx.bound.pop_back();
                if (kid->sort != Sort::Bool)
                    diag_.error("E_SORT", "forall body must be bool", e.pos);
                out.kids = {kid};
                out.sort = Sort::Bool;
                break;
            }
        }
        return mk(std::move(out));
    }

    // Time points form an affine space: point +/- duration is a point, the
    // difference of two points is a duration, and comparisons never mix the
    // two. Every well-sorted formula is invariant under shifting all time
    // points, which the canonicalizer relies on.
    Sort binary_sort(BinOp op, Sort a, Sort b, SourcePos pos) {
        auto err = [&](const char* msg) {
            diag_.error("E_SORT", msg, pos);
            return Sort::Int;
        };
        switch (op) {
            case BinOp::Add:
                if (a == Sort::Int && b == Sort::Int) return Sort::Int;
                if (a == Sort::Time && b == Sort::Int) return Sort::Time;
                if (a == Sort::Int && b == Sort::Time) return Sort::Time;
                return err("+ needs ints or a time point and an int");
            case BinOp::Sub:
                if (a == Sort::Int && b == Sort::Int) return Sort::Int;
                if (a == Sort::Time && b == Sort::Int) return Sort::Time;
                if (a == Sort::Time && b == Sort::Time) return Sort::Int;
                return err("- needs ints, time - int, or time - time");
            case BinOp::Mul:
                if (a == Sort::Int && b == Sort::Int) return Sort::Int;
                return err("* needs ints");
            case BinOp::Lt:
            case BinOp::Le:
            case BinOp::Gt:
            case BinOp::Ge:
                if ((a == Sort::Int && b == Sort::Int) || (a == Sort::Time && b == Sort::Time)) {
                    (void)0;
                } else {
                    return err("comparison needs two ints or two time points");
                }
                return Sort::Bool;
            case BinOp::Eq:
            case BinOp::Ne:
                if (a != b) return err("equality needs operands of the same sort");
                if (a == Sort::ObjSet) return err("sets cannot be compared directly");
                return Sort::Bool;
            case BinOp::And:
            case BinOp::Or:
            case BinOp::Imp:
                if (a != Sort::Bool || b != Sort::Bool)
                    return err("logical connective needs bools");
                return Sort::Bool;
        }
        return Sort::Int;
    }

    // ----- statements ------------------------------------------------------

    bool reads_ghost(const Expr& e) const {
        switch (e.kind) {
            case ExprKind::Old:
            case ExprKind::CurTime:
            case ExprKind::DeltaTime:
            case ExprKind::Elapsed:
            case ExprKind::Inv2:
            case ExprKind::Mine:
            case ExprKind::ClosedOf:
            case ExprKind::Forall:
            case ExprKind::MapIndex: return true;
            case ExprKind::FieldGet: {
                int pt = e.kids[0]->kind == ExprKind::ObjLit
                             ? m_.objects[static_cast<std::size_t>(e.kids[0]->obj)].type
                             : e.kids[0]->pointee_type;
                if (pt >= 0) {
                    const TypeDecl& t = m_.types[static_cast<std::size_t>(pt)];
                    int fi = t.field_index(e.name);
                    if (fi >= 0 && t.fields[static_cast<std::size_t>(fi)].is_ghost) return true;
                }
                break;
            }
            default: break;
        }
        for (const ExprPtr& k : e.kids)
            if (reads_ghost(*k)) return true;
        return false;
    }

    void check_stmts(std::vector<Stmt>& body, std::set<std::string>& stamps, bool in_atomic) {
        Ctx cx;
        cx.stamps = &stamps;
        for (Stmt& s : body) {
            switch (s.kind) {
                case StmtKind::Atomic:
                    if (in_atomic)
                        diag_.error("E_NESTED_ATOMIC", "atomic blocks cannot nest", s.pos);
                    check_stmts(s.body, stamps, true);
                    break;
                case StmtKind::Assign: check_assign(s, cx, in_atomic); break;
                case StmtKind::Assume:
                case StmtKind::Assert: s.expr = check_bool(s.expr, cx); break;
                case StmtKind::Wrap:
                case StmtKind::Unwrap:
                    if (s.obj == m_.time_obj)
                        diag_.error("E_ETERNAL", "the time object is eternal", s.pos);
                    else if (s.obj >= 0 &&
                             m_.objects[static_cast<std::size_t>(s.obj)].kind != ObjKind::Plain)
                        diag_.error("E_SORT", "only plain objects can be wrapped", s.pos);
                    break;
                case StmtKind::Own:
                    if (s.obj == m_.time_obj || s.new_owner == m_.time_obj ||
                        (s.new_owner >= 0 &&
                         m_.objects[static_cast<std::size_t>(s.new_owner)].kind == ObjKind::Env))
                        diag_.error("E_ETERNAL", "ownership cannot involve time or env", s.pos);
                    break;
                case StmtKind::Loop:
                    if (s.bound <= 0)
                        diag_.error("E_LOOP_BOUND", "loop bound must be positive", s.pos);
                    if (in_atomic)
                        diag_.error("E_ATOMIC", "loops cannot appear inside atomic", s.pos);
                    s.expr = check_bool(s.expr, cx);
                    check_stmts(s.body, stamps, false);
                    break;
                case StmtKind::DeadlineNew:
                case StmtKind::DeadlineReset:
                case StmtKind::DeadlineDestroy:
                    if (s.obj >= 0 && !m_.is_deadline(s.obj))
                        diag_.error("E_TYPE", "not a Deadline object", s.pos);
                    if (s.kind == StmtKind::DeadlineReset && !in_atomic)
                        diag_.error("E_ATOMIC", "deadline_reset must sit inside atomic", s.pos);
                    break;
                case StmtKind::TimerNew:
                case StmtKind::TimerReset:
                case StmtKind::TimerDestroy:
                    if (s.obj >= 0 && !m_.is_timer(s.obj))
                        diag_.error("E_TYPE", "not a Timer object", s.pos);
                    if (s.kind == StmtKind::TimerReset && !in_atomic)
                        diag_.error("E_ATOMIC", "timer_reset must sit inside atomic", s.pos);
                    break;
                case StmtKind::TimerRecord: stamps.insert(s.name); break;
                case StmtKind::Skip: break;
            }
        }
    }

    void check_assign(Stmt& s, Ctx& cx, bool in_atomic) {
        s.expr = check(s.expr, cx);
        if (s.obj < 0) return;
        const ObjectDecl& od = m_.objects[static_cast<std::size_t>(s.obj)];
        if (s.obj == m_.time_obj) {
            diag_.error("E_ETERNAL", "time advances only through the environment", s.pos);
            return;
        }
        if (od.kind != ObjKind::Plain || od.type < 0) {
            diag_.error("E_SORT", "'" + od.name + "' has no assignable fields", s.pos);
            return;
        }
        if (od.type == m_.deadline_type || od.type == m_.timer_type) {
            diag_.error("E_PRIMITIVE",
                        "Deadline/Timer fields change only through their primitives", s.pos);
            return;
        }
        const TypeDecl& t = m_.types[static_cast<std::size_t>(od.type)];
        int fi = t.field_index(s.field);
        if (fi < 0) {
            diag_.error("E_UNKNOWN_FIELD",
                        "type " + t.name + " has no field '" + s.field + "'", s.pos);
            return;
        }
        const FieldDecl& f = t.fields[static_cast<std::size_t>(fi)];
        if (s.expr->sort != f.sort)
            diag_.error("E_SORT", "assigning " + std::string(sort_name(s.expr->sort)) +
                                      " to " + sort_name(f.sort) + " field '" + s.field + "'",
                        s.pos);
        if (!f.is_ghost) {
            if (!in_atomic)
                diag_.error("E_ATOMIC", "writes to concrete fields must sit inside atomic",
                            s.pos);
            if (reads_ghost(*s.expr))
                diag_.error("E_INFOFLOW",
                            "a concrete field cannot be computed from ghost state", s.pos);
        }
    }

    Model& m_;
    Diagnostics& diag_;
    bool convert_inits_done_externally_ = false;
};

}  // namespace detail

// Full front end: built-ins, user source, name resolution, sort checking.
// Returns a model only when the diagnostics stay clean.
inline std::optional<Model> load_model(const std::string& source, Diagnostics& diag) {
    Model m;
    {
        std::string b = builtin_source();
        Lexer lx(b);
        std::vector<Token> toks = lx.run(diag);
        detail::Parser p(toks, m, diag, true);
        p.prepass();
        p.parse();
    }
    m.time_type = m.find_type("Time");
    m.deadline_type = m.find_type("Deadline");
    m.timer_type = m.find_type("Timer");
    {
        ObjectDecl t;
        t.name = "time";
        t.type = m.time_type;
        t.kind = ObjKind::TimeSingleton;
        t.init_closed = true;
        m.objects.push_back(std::move(t));
        ObjectDecl e;
        e.name = "env";
        e.kind = ObjKind::Env;
        m.objects.push_back(std::move(e));
    }
    m.time_obj = m.find_object("time");
    m.env_obj = m.find_object("env");

    Lexer lx(source);
    std::vector<Token> toks = lx.run(diag);
    detail::Parser p(toks, m, diag, false);
    p.prepass();
    p.parse();
    if (!diag.ok()) return std::nullopt;

    detail::Checker c(m, diag);
    c.convert_inits(p.raw_inits);
    c.run();
    if (!diag.ok()) return std::nullopt;

    // Plain objects without a declared owner fall to the environment.
    for (ObjectDecl& od : m.objects)
        if (od.kind == ObjKind::Plain && od.init_owner < 0) od.init_owner = m.env_obj;
    return m;
}

}  // namespace chronoverify
