#pragma once

#include "chronoverify/state.hpp"

#include <map>
#include <string>
#include <vector>

namespace chronoverify {

struct EvalCtx {
    const Transition* tr = nullptr;
    int self = -1;
    const std::map<std::string, Value>* locals = nullptr;  // thread-local ghost values
    std::vector<std::pair<std::string, int>> bound;        // forall bindings
    bool in_old = false;
    int depth = 0;  // inv2 recursion guard
};

struct InvResult {
    bool ok = true;
    std::string clause;   // failing clause, printed form
    SourcePos pos;
};

struct GoodResult {
    bool ok = true;
    int obj = -1;
    std::string clause;
};

struct Legality {
    bool legal = true;
    bool vacuous = false;  // prestate not good
    int obj = -1;
    std::string clause;
    std::string code;  // E_INV / E_APPROVAL
};

struct TimeClauseResult {
    bool ok = true;
    int clause = -1;   // 0 monotonicity, 1 stability, 2 respects-timed
    std::string text;
    int witness = -1;  // object instantiating a failing quantified clause
};

// Two-state object invariant semantics and the judgments built on them: a
// state is good if all object invariants hold on its stutter; a
// transition is good if every object's invariant holds across it; it is
// legal if its prestate is not good or the invariants of all updated
// objects (plus owner-approval side conditions) hold.
class Kernel {
public:
    explicit Kernel(const Model& m) : m_(m) {}

    const Model& model() const { return m_; }

    // ----- expression evaluation -------------------------------------------

    Value eval(const Expr& e, EvalCtx& ctx) const {
        switch (e.kind) {
            case ExprKind::IntLit: return Value::of_int(e.ival);
            case ExprKind::BoolLit: return Value::of_bool(e.bval);
            case ExprKind::SelfRef: return Value::of_ref(ctx.self);
            case ExprKind::ObjLit: return Value::of_ref(e.obj);
            case ExprKind::VarRef: {
                for (auto it = ctx.bound.rbegin(); it != ctx.bound.rend(); ++it)
                    if (it->first == e.name) return Value::of_ref(it->second);
                throw EvalError("unbound variable '" + e.name + "'", e.pos);
            }
            case ExprKind::FieldGet: {
                Value base = eval(*e.kids[0], ctx);
                return read_field(base.ref, e.name, ctx, e.pos);
            }
            case ExprKind::MapIndex: {
                Value map = eval(*e.kids[0], ctx);
                Value idx = eval(*e.kids[1], ctx);
                if (idx.ref < 0 || static_cast<std::size_t>(idx.ref) >= map.set.size())
                    throw EvalError("map index out of universe", e.pos);
                return Value::of_bool(map.set[static_cast<std::size_t>(idx.ref)] != 0);
            }
            case ExprKind::Old: {
                bool save = ctx.in_old;
                ctx.in_old = true;
                Value v = eval(*e.kids[0], ctx);
                ctx.in_old = save;
                return v;
            }
            case ExprKind::CurTime: return cur_time(ctx);
            case ExprKind::DeltaTime: {
                Int post = time_field(ctx.tr->post).i;
                Int pre = time_field(ctx.tr->pre).i;
                return Value::of_int(post - pre);
            }
            case ExprKind::Inv2: {
                Value o = eval(*e.kids[0], ctx);
                if (o.ref < 0) throw EvalError("inv2 of null reference", e.pos);
                if (ctx.depth > kMaxInvDepth)
                    throw EvalError("inv2 recursion too deep (cyclic invariants?)", e.pos);
                return Value::of_bool(object_inv2(*ctx.tr, o.ref, ctx.locals, ctx.depth + 1).ok);
            }
            case ExprKind::Mine: {
                Value o = eval(*e.kids[0], ctx);
                if (o.ref < 0) throw EvalError("mine of null reference", e.pos);
                const State& s = ctx.in_old ? ctx.tr->pre : ctx.tr->post;
                const ObjectState& os = s.objs[static_cast<std::size_t>(o.ref)];
                return Value::of_bool(os.owner == ctx.self && os.closed);
            }
            case ExprKind::ClosedOf: {
                Value o = eval(*e.kids[0], ctx);
                if (o.ref < 0) throw EvalError("closed of null reference", e.pos);
                const State& s = ctx.in_old ? ctx.tr->pre : ctx.tr->post;
                return Value::of_bool(s.objs[static_cast<std::size_t>(o.ref)].closed);
            }
            case ExprKind::Elapsed: {
                if (!ctx.locals) throw EvalError("elapsed outside thread context", e.pos);
                auto it = ctx.locals->find(e.name);
                if (it == ctx.locals->end())
                    throw EvalError("unknown timer stamp '" + e.name + "'", e.pos);
                return Value::of_int(cur_time(ctx).i - it->second.i);
            }
            case ExprKind::Not: return Value::of_bool(!eval(*e.kids[0], ctx).b);
            case ExprKind::Neg: {
                Value v = eval(*e.kids[0], ctx);
                v.i = -v.i;
                return v;
            }
            case ExprKind::Binary: return eval_binary(e, ctx);
            case ExprKind::Cond: {
                Value c = eval(*e.kids[0], ctx);
                return eval(*(c.b ? e.kids[1] : e.kids[2]), ctx);
            }
            case ExprKind::Forall: {
                for (std::size_t o = 0; o < m_.objects.size(); ++o) {
                    ctx.bound.emplace_back(e.name, static_cast<int>(o));
                    bool hold = eval(*e.kids[0], ctx).b;
                    ctx.bound.pop_back();
                    if (!hold) return Value::of_bool(false);
                }
                return Value::of_bool(true);
            }
        }
        throw EvalError("unhandled expression", e.pos);
    }

    // A clause that cannot be evaluated (null dereference, cyclic inv2) is
    // not satisfied; the judgments stay total.
    bool eval_bool(const ExprPtr& e, EvalCtx& ctx) const {
        try {
            return eval(*e, ctx).b;
        } catch (const EvalError&) {
            return false;
        }
    }

    // ----- judgments --------------------------------------------------------

    std::vector<int> updated_objects(const Transition& tr) const {
        std::vector<int> out;
        for (std::size_t o = 0; o < tr.pre.objs.size(); ++o)
            if (!(tr.pre.objs[o] == tr.post.objs[o])) out.push_back(static_cast<int>(o));
        return out;
    }

    InvResult object_inv2(const Transition& tr, int obj,
                          const std::map<std::string, Value>* locals = nullptr,
                          int depth = 0) const {
        const ObjectDecl& od = m_.objects[static_cast<std::size_t>(obj)];
        if (od.erased || od.type < 0) return {};
        const TypeDecl& t = m_.types[static_cast<std::size_t>(od.type)];
        const ObjectState& pre = tr.pre.objs[static_cast<std::size_t>(obj)];
        const ObjectState& post = tr.post.objs[static_cast<std::size_t>(obj)];

        // Implicit clause: nonvolatile fields don't change while the object
        // stays closed.
        if (pre.closed && post.closed) {
            for (std::size_t f = 0; f < t.fields.size(); ++f) {
                if (t.fields[f].is_volatile) continue;
                if (!(pre.fields[f] == post.fields[f]))
                    return {false, "nonvolatile field '" + t.fields[f].name +
                                       "' unchanged while closed",
                            t.fields[f].pos};
            }
        }

        EvalCtx ctx;
        ctx.tr = &tr;
        ctx.self = obj;
        ctx.locals = locals;
        ctx.depth = depth;

        // User clauses are guaranteed only while the object is closed (in
        // the poststate of the transition).
        if (post.closed) {
            for (const Clause& c : t.invariants)
                if (!eval_bool(c.expr, ctx)) return {false, c.text, c.pos};
        }
        // Unwrap clauses bind exactly on closed -> open edges.
        if (pre.closed && !post.closed) {
            for (const Clause& c : t.on_unwrap)
                if (!eval_bool(c.expr, ctx)) return {false, "on_unwrap " + c.text, c.pos};
        }
        return {};
    }

    GoodResult is_good_state(const State& s) const {
        Transition tr = stutter(s);
        for (std::size_t o = 0; o < s.objs.size(); ++o) {
            if (!s.objs[o].valid) continue;
            InvResult r = object_inv2(tr, static_cast<int>(o));
            if (!r.ok) return {false, static_cast<int>(o), r.clause};
        }
        return {};
    }

    GoodResult is_good_transition(const Transition& tr) const {
        for (std::size_t o = 0; o < tr.pre.objs.size(); ++o) {
            InvResult r = object_inv2(tr, static_cast<int>(o));
            if (!r.ok) return {false, static_cast<int>(o), r.clause};
        }
        return {};
    }

    // Owner approval for one changed field: the pre-state owner either is
    // the acting thread, or is a (non-thread) object whose own two-state
    // invariant sanctions the change.
    bool approval_holds(const Transition& tr, int obj, int actor) const {
        int approver = tr.pre.objs[static_cast<std::size_t>(obj)].owner;
        if (approver < 0) return false;
        const ObjectDecl& ad = m_.objects[static_cast<std::size_t>(approver)];
        if (ad.kind == ObjKind::Thread) return actor == approver;
        if (ad.kind == ObjKind::Env) return actor == m_.env_obj;
        return object_inv2(tr, approver).ok;
    }

    // Failed approval: blame the approver's failing clause when the owner is
    // an object; otherwise blame the mutated object with the approval text.
    Legality approval_failure(const Transition& tr, int obj, const std::string& what) const {
        int approver = tr.pre.objs[static_cast<std::size_t>(obj)].owner;
        if (approver >= 0 &&
            m_.objects[static_cast<std::size_t>(approver)].kind == ObjKind::Plain) {
            InvResult r = object_inv2(tr, approver);
            if (!r.ok) return {false, false, approver, r.clause, "E_APPROVAL"};
        }
        return {false, false, obj, what, "E_APPROVAL"};
    }

    Legality is_legal_transition(const Transition& tr) const {
        GoodResult pre_good = is_good_state(tr.pre);
        if (!pre_good.ok) return {true, true, -1, "", ""};

        for (int o : updated_objects(tr)) {
            InvResult r = object_inv2(tr, o);
            if (!r.ok) return {false, false, o, r.clause, "E_INV"};

            const ObjectDecl& od = m_.objects[static_cast<std::size_t>(o)];
            if (od.kind != ObjKind::Plain) continue;
            const TypeDecl& t = m_.types[static_cast<std::size_t>(od.type)];
            const ObjectState& pre = tr.pre.objs[static_cast<std::size_t>(o)];
            const ObjectState& post = tr.post.objs[static_cast<std::size_t>(o)];

            // Declared owner-approved fields.
            for (int f : t.approvals) {
                if (pre.fields[static_cast<std::size_t>(f)] ==
                    post.fields[static_cast<std::size_t>(f)])
                    continue;
                if (!approval_holds(tr, o, tr.actor))
                    return approval_failure(
                        tr, o, "approves(owner, " +
                                   t.fields[static_cast<std::size_t>(f)].name + ")");
            }
            // Ownership-protocol fields: closing, opening, or giving away an
            // object is sanctioned by its current owner.
            if (pre.closed != post.closed || pre.owner != post.owner) {
                if (!approval_holds(tr, o, tr.actor))
                    return approval_failure(tr, o, "approves(owner, closed/owner)");
            }
        }
        return {};
    }

    // Focused evaluation of the Time type's three clauses, with a witness
    // object for the quantified ones.
    TimeClauseResult check_time_clauses(const Transition& tr) const {
        const TypeDecl& tt = m_.types[static_cast<std::size_t>(m_.time_type)];
        for (std::size_t c = 0; c < tt.invariants.size(); ++c) {
            const Clause& cl = tt.invariants[c];
            EvalCtx ctx;
            ctx.tr = &tr;
            ctx.self = m_.time_obj;
            if (cl.expr->kind == ExprKind::Forall) {
                for (std::size_t o = 0; o < m_.objects.size(); ++o) {
                    ctx.bound.assign(1, {cl.expr->name, static_cast<int>(o)});
                    if (!eval_bool(cl.expr->kids[0], ctx))
                        return {false, static_cast<int>(c), cl.text, static_cast<int>(o)};
                }
            } else if (!eval_bool(cl.expr, ctx)) {
                return {false, static_cast<int>(c), cl.text, -1};
            }
        }
        return {};
    }

    Int cur(const State& s) const { return time_field(s).i; }

private:
    static constexpr int kMaxInvDepth = 8;

    const Value& time_field(const State& s) const {
        const TypeDecl& tt = m_.types[static_cast<std::size_t>(m_.time_type)];
        static thread_local int cur_idx = -1;
        if (cur_idx < 0) cur_idx = tt.field_index("cur");
        return s.get(m_.time_obj, cur_idx);
    }

    Value cur_time(EvalCtx& ctx) const {
        const State& s = ctx.in_old ? ctx.tr->pre : ctx.tr->post;
        return time_field(s);
    }

    Value read_field(int obj, const std::string& field, EvalCtx& ctx, SourcePos pos) const {
        if (obj < 0) throw EvalError("field access through null reference", pos);
        const ObjectDecl& od = m_.objects[static_cast<std::size_t>(obj)];
        if (od.type < 0)
            throw EvalError("object '" + od.name + "' has no fields", pos);
        const TypeDecl& t = m_.types[static_cast<std::size_t>(od.type)];
        int f = t.field_index(field);
        if (f < 0)
            throw EvalError("undeclared field '" + field + "' on type " + t.name, pos);
        const State& s = ctx.in_old ? ctx.tr->pre : ctx.tr->post;
        return s.get(obj, f);
    }

    Value eval_binary(const Expr& e, EvalCtx& ctx) const {
        // Short-circuit forms first.
        if (e.op == BinOp::And) {
            if (!eval(*e.kids[0], ctx).b) return Value::of_bool(false);
            return Value::of_bool(eval(*e.kids[1], ctx).b);
        }
        if (e.op == BinOp::Or) {
            if (eval(*e.kids[0], ctx).b) return Value::of_bool(true);
            return Value::of_bool(eval(*e.kids[1], ctx).b);
        }
        if (e.op == BinOp::Imp) {
            if (!eval(*e.kids[0], ctx).b) return Value::of_bool(true);
            return Value::of_bool(eval(*e.kids[1], ctx).b);
        }
        Value a = eval(*e.kids[0], ctx);
        Value b = eval(*e.kids[1], ctx);
        switch (e.op) {
            case BinOp::Add: return numeric(e.sort, a.i + b.i);
            case BinOp::Sub: return numeric(e.sort, a.i - b.i);
            case BinOp::Mul: return numeric(e.sort, a.i * b.i);
            case BinOp::Eq: return Value::of_bool(a == b);
            case BinOp::Ne: return Value::of_bool(!(a == b));
            case BinOp::Lt: return Value::of_bool(a.i < b.i);
            case BinOp::Le: return Value::of_bool(a.i <= b.i);
            case BinOp::Gt: return Value::of_bool(a.i > b.i);
            case BinOp::Ge: return Value::of_bool(a.i >= b.i);
            default: break;
        }
        throw EvalError("unhandled binary operator", e.pos);
    }

    static Value numeric(Sort s, Int v) {
        return s == Sort::Time ? Value::of_time(std::move(v)) : Value::of_int(std::move(v));
    }

    const Model& m_;
};

}  // namespace chronoverify
