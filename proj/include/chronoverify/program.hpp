#pragma once

#include "chronoverify/kernel.hpp"
#include "chronoverify/printer.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace chronoverify {

// Meta-field codes used in recorded deltas.
constexpr int kFieldClosed = -1;
constexpr int kFieldOwner = -2;

struct FieldDelta {
    int obj;
    int field;  // >= 0 data field, else meta code
    Value oldv;
    Value newv;
};

// One checked transition, stored as its diff for trace replay.
struct TransRec {
    int actor;
    std::vector<FieldDelta> deltas;
};

struct RunFinding {
    std::string kind;   // finding taxonomy: invariant-violation, illegal-transition, ...
    int obj = -1;
    std::string clause;
    std::string code;
    SourcePos pos;
};

// Thread program counter: a stack of statement lists. Loops push a frame
// that remembers its iteration count; the count is part of configuration
// identity, so bounded loops unroll exactly.
struct Frame {
    const std::vector<Stmt>* body = nullptr;
    std::size_t idx = 0;
    Int counter;
    const Stmt* loop = nullptr;  // set for loop-body frames

    friend bool operator==(const Frame& a, const Frame& b) {
        return a.body == b.body && a.idx == b.idx && a.counter == b.counter && a.loop == b.loop;
    }
};

struct ThreadRT {
    std::vector<Frame> frames;
    std::map<std::string, Value> locals;           // timer stamps
    std::vector<std::pair<int, int>> obligations;  // (deadline obj, scope depth)
    bool terminated = false;

    friend bool operator==(const ThreadRT& a, const ThreadRT& b) {
        return a.frames == b.frames && a.locals == b.locals && a.obligations == b.obligations &&
               a.terminated == b.terminated;
    }
};

struct Configuration {
    State state;
    std::vector<ThreadRT> threads;
    int env_streak = 0;

    friend bool operator==(const Configuration& a, const Configuration& b) {
        return a.state == b.state && a.threads == b.threads && a.env_streak == b.env_streak;
    }
};

// Result of running one thread from a rest point to the next boundary, or
// of one environment move. At most one of finding/pruned is set.
struct StepResult {
    Configuration cfg;
    std::vector<TransRec> recs;
    std::optional<RunFinding> finding;
    bool pruned = false;
    const Stmt* prune_site = nullptr;
    std::vector<std::pair<const Stmt*, bool>> assume_events;  // (site, passed)
};

class Runner {
public:
    explicit Runner(const Model& m) : m_(m), k_(m) {}

    const Kernel& kernel() const { return k_; }
    const Model& model() const { return m_; }

    Configuration initial() const {
        Configuration c;
        c.state = initial_state(m_);
        c.threads.resize(m_.threads.size());
        for (std::size_t i = 0; i < m_.threads.size(); ++i) {
            const ThreadDecl& th = m_.threads[i];
            if (th.program.empty()) {
                c.threads[i].terminated = true;
            } else {
                c.threads[i].frames.push_back(Frame{&th.program, 0, Int(0), nullptr});
            }
        }
        return c;
    }

    // True when the thread's next statement is an atomic block: the rest
    // points where environment moves interleave.
    bool at_atomic(const Configuration& c, std::size_t ti) const {
        const ThreadRT& t = c.threads[ti];
        if (t.terminated || t.frames.empty()) return false;
        const Frame& f = t.frames.back();
        return f.idx < f.body->size() && (*f.body)[f.idx].kind == StmtKind::Atomic;
    }

    // ----- thread edges ------------------------------------------------------

    StepResult step_thread(const Configuration& c, std::size_t ti) const {
        StepResult res;
        res.cfg = c;
        Configuration& cfg = res.cfg;
        ThreadRT& t = cfg.threads[ti];
        int actor = m_.threads[ti].obj;
        int steps = 0;

        try {
            while (true) {
                if (t.frames.empty()) {
                    if (!t.obligations.empty()) {
                        int d = t.obligations.front().first;
                        res.finding = RunFinding{"obligation-leak", d,
                                                 "live deadline at thread exit", "E_LEAK",
                                                 m_.threads[ti].pos};
                    }
                    t.terminated = true;
                    break;
                }
                Frame& f = t.frames.back();
                if (f.idx == f.body->size()) {
                    if (f.loop) {
                        f.counter += 1;
                        if (!ghost_bool(cfg.state, actor, t, *f.loop->expr)) {
                            res.finding = RunFinding{"assertion-failure", actor,
                                                     "loop invariant " + expr_str(*f.loop->expr, &m_),
                                                     "E_LOOP_INV", f.loop->pos};
                            break;
                        }
                        if (f.counter < f.loop->bound) {
                            f.idx = 0;
                            continue;
                        }
                    }
                    t.frames.pop_back();
                    if (auto leak = scope_leak(t, actor)) {
                        res.finding = leak;
                        break;
                    }
                    continue;
                }
                const Stmt& s = (*f.body)[f.idx];
                if (s.kind == StmtKind::Atomic && steps > 0) break;  // boundary
                f.idx++;
                steps++;
                exec(res, cfg, ti, actor, s);
                if (res.finding || res.pruned) break;
            }
        } catch (const EvalError& e) {
            res.finding = RunFinding{"invariant-violation", actor, e.what(), "E_EVAL", e.pos};
        }
        cfg.env_streak = 0;
        return res;
    }

    // ----- environment moves --------------------------------------------------

    // Every enabled time advance of 1..max_dt units: cur moves, closed timed
    // objects follow their dynamics, all computed from the prestate. A delta
    // whose transition is illegal is simply not enabled; a legal one landing
    // in a bad state is a reported violation.
    std::vector<StepResult> env_moves(const Configuration& c, const Int& max_dt) const {
        std::vector<StepResult> out;
        const TypeDecl& tt = m_.types[static_cast<std::size_t>(m_.time_type)];
        int cur_idx = tt.field_index("cur");
        for (Int d = 1; d <= max_dt; ++d) {
            State post = c.state;
            post.at(m_.time_obj, cur_idx).i += d;
            Transition probe{c.state, post, m_.env_obj};
            for (std::size_t o = 0; o < m_.objects.size(); ++o) {
                const ObjectDecl& od = m_.objects[o];
                if (od.erased || od.type < 0) continue;
                const TypeDecl& ot = m_.types[static_cast<std::size_t>(od.type)];
                if (ot.dynamics.empty() || !c.state.objs[o].closed) continue;
                for (const auto& [fi, rhs] : ot.dynamics) {
                    EvalCtx cx;
                    cx.tr = &probe;
                    cx.self = static_cast<int>(o);
                    Value v = k_.eval(*rhs, cx);
                    post.at(static_cast<int>(o), fi) = v;
                }
            }
            Transition tr{c.state, post, m_.env_obj};
            Legality leg = k_.is_legal_transition(tr);
            if (!leg.legal) continue;
            StepResult r;
            r.cfg = c;
            r.cfg.state = post;
            r.cfg.env_streak = c.env_streak + 1;
            r.recs.push_back(record(tr));
            GoodResult g = k_.is_good_state(post);
            if (!g.ok)
                r.finding = RunFinding{"invariant-violation", g.obj, g.clause, "E_BAD_STATE", {}};
            out.push_back(std::move(r));
        }
        return out;
    }

private:
    // ----- helpers -------------------------------------------------------------

    std::optional<RunFinding> scope_leak(const ThreadRT& t, int actor) const {
        for (const auto& [obj, depth] : t.obligations) {
            if (depth > static_cast<int>(t.frames.size()))
                return RunFinding{"obligation-leak", obj, "live deadline at scope exit",
                                  "E_LEAK", m_.objects[static_cast<std::size_t>(obj)].pos};
        }
        (void)actor;
        return std::nullopt;
    }

    bool ghost_bool(const State& s, int actor, const ThreadRT& t, const Expr& e) const {
        Transition tr = stutter(s, actor);
        EvalCtx cx;
        cx.tr = &tr;
        cx.self = actor;
        cx.locals = &t.locals;
        return k_.eval(e, cx).b;
    }

    TransRec record(const Transition& tr) const {
        TransRec rec;
        rec.actor = tr.actor;
        for (std::size_t o = 0; o < tr.pre.objs.size(); ++o) {
            const ObjectState& a = tr.pre.objs[o];
            const ObjectState& b = tr.post.objs[o];
            if (a.closed != b.closed)
                rec.deltas.push_back({static_cast<int>(o), kFieldClosed,
                                      Value::of_bool(a.closed), Value::of_bool(b.closed)});
            if (a.owner != b.owner)
                rec.deltas.push_back({static_cast<int>(o), kFieldOwner, Value::of_ref(a.owner),
                                      Value::of_ref(b.owner)});
            for (std::size_t fi = 0; fi < a.fields.size(); ++fi)
                if (a.fields[fi] != b.fields[fi])
                    rec.deltas.push_back({static_cast<int>(o), static_cast<int>(fi),
                                          a.fields[fi], b.fields[fi]});
        }
        return rec;
    }

    // Validates one transition against the kernel judgments and commits it.
    // The prestate is a previously validated good state.
    void commit(StepResult& res, Configuration& cfg, State post, int actor,
                SourcePos pos) const {
        Transition tr{cfg.state, std::move(post), actor};
        Legality leg = k_.is_legal_transition(tr);
        if (!leg.legal) {
            std::string kind = "illegal-transition";
            std::string code = leg.code;
            if (leg.obj >= 0 && m_.is_deadline(leg.obj) &&
                leg.clause.find("old(T < t)") != std::string::npos)
                code = "E_FROZEN";
            res.finding = RunFinding{kind, leg.obj, leg.clause, code, pos};
            return;
        }
        GoodResult g = k_.is_good_state(tr.post);
        res.recs.push_back(record(tr));
        cfg.state = std::move(tr.post);
        if (!g.ok)
            res.finding = RunFinding{"invariant-violation", g.obj, g.clause, "E_BAD_STATE", pos};
    }

    bool access_write(StepResult& res, const State& s, int obj, int field, int actor,
                      bool in_atomic, SourcePos pos) const {
        const ObjectState& os = s.objs[static_cast<std::size_t>(obj)];
        const TypeDecl& t = *m_.type_of(obj);
        const FieldDecl& f = t.fields[static_cast<std::size_t>(field)];
        if (os.closed) {
            if (!f.is_volatile) {
                res.finding = RunFinding{"access-violation", obj,
                                         "write to nonvolatile field '" + f.name +
                                             "' of a closed object",
                                         "E_CLOSED", pos};
                return false;
            }
            if (!f.is_ghost && !in_atomic) {
                res.finding = RunFinding{"access-violation", obj,
                                         "concrete write to a closed object outside atomic",
                                         "E_ATOMIC", pos};
                return false;
            }
        } else if (os.owner != actor) {
            res.finding = RunFinding{"access-violation", obj,
                                     "object is owned by '" +
                                         m_.objects[static_cast<std::size_t>(os.owner)].name +
                                         "'",
                                     "E_NOT_OWNED", pos};
            return false;
        }
        return true;
    }

    bool require(StepResult& res, bool cond, int obj, const std::string& msg,
                 const std::string& code, SourcePos pos) const {
        if (!cond)
            res.finding = RunFinding{"access-violation", obj, msg, code, pos};
        return cond;
    }

    Int cur_of(const State& s) const { return k_.cur(s); }

    // ----- statement execution --------------------------------------------------

    void exec(StepResult& res, Configuration& cfg, std::size_t ti, int actor,
              const Stmt& s) const {
        ThreadRT& t = cfg.threads[ti];
        switch (s.kind) {
            case StmtKind::Skip: return;
            case StmtKind::Atomic: exec_atomic(res, cfg, ti, actor, s); return;
            case StmtKind::Assume: {
                bool pass = ghost_bool(cfg.state, actor, t, *s.expr);
                res.assume_events.emplace_back(&s, pass);
                if (!pass) {
                    res.pruned = true;
                    res.prune_site = &s;
                }
                return;
            }
            case StmtKind::Assert: {
                if (!ghost_bool(cfg.state, actor, t, *s.expr))
                    res.finding = RunFinding{"assertion-failure", actor, expr_str(*s.expr, &m_),
                                             "E_ASSERT", s.pos};
                return;
            }
            case StmtKind::Assign: {
                const TypeDecl& ot = *m_.type_of(s.obj);
                int fi = ot.field_index(s.field);
                if (!access_write(res, cfg.state, s.obj, fi, actor, false, s.pos)) return;
                Transition st = stutter(cfg.state, actor);
                EvalCtx cx;
                cx.tr = &st;
                cx.self = actor;
                cx.locals = &t.locals;
                Value v = k_.eval(*s.expr, cx);
                State post = cfg.state;
                post.at(s.obj, fi) = std::move(v);
                commit(res, cfg, std::move(post), actor, s.pos);
                return;
            }
            case StmtKind::Wrap: {
                const ObjectState& os = cfg.state.objs[static_cast<std::size_t>(s.obj)];
                if (!require(res, !os.closed, s.obj, "already closed", "E_ALREADY_CLOSED",
                             s.pos) ||
                    !require(res, os.owner == actor, s.obj, "not owned by this thread",
                             "E_NOT_OWNED", s.pos))
                    return;
                State post = cfg.state;
                post.objs[static_cast<std::size_t>(s.obj)].closed = true;
                sync_timed(post, s.obj, true);
                commit(res, cfg, std::move(post), actor, s.pos);
                return;
            }
            case StmtKind::Unwrap: {
                const ObjectState& os = cfg.state.objs[static_cast<std::size_t>(s.obj)];
                if (!require(res, os.closed, s.obj, "not closed", "E_NOT_CLOSED", s.pos) ||
                    !require(res, os.owner == actor, s.obj, "not owned by this thread",
                             "E_NOT_OWNED", s.pos))
                    return;
                if (m_.is_deadline(s.obj) && expired(cfg.state, s.obj)) {
                    res.finding = RunFinding{"deadline-expired", s.obj,
                                             "on_unwrap old(T < t)", "E_EXPIRED", s.pos};
                    return;
                }
                State post = cfg.state;
                post.objs[static_cast<std::size_t>(s.obj)].closed = false;
                sync_timed(post, s.obj, false);
                // Everything the unwrapped object owned moves to the thread.
                for (std::size_t o = 0; o < post.objs.size(); ++o)
                    if (post.objs[o].owner == s.obj)
                        post.objs[o].owner = actor;
                commit(res, cfg, std::move(post), actor, s.pos);
                return;
            }
            case StmtKind::Own: {
                const ObjectState& os = cfg.state.objs[static_cast<std::size_t>(s.obj)];
                if (!require(res, os.owner == actor, s.obj, "not owned by this thread",
                             "E_NOT_OWNED", s.pos))
                    return;
                State post = cfg.state;
                post.objs[static_cast<std::size_t>(s.obj)].owner = s.new_owner;
                commit(res, cfg, std::move(post), actor, s.pos);
                return;
            }
            case StmtKind::Loop: {
                if (!ghost_bool(cfg.state, actor, t, *s.expr)) {
                    res.finding = RunFinding{"assertion-failure", actor,
                                             "loop invariant " + expr_str(*s.expr, &m_),
                                             "E_LOOP_INV", s.pos};
                    return;
                }
                t.frames.push_back(Frame{&s.body, 0, Int(0), &s});
                return;
            }
            case StmtKind::TimerRecord:
                t.locals[s.name] = Value::of_time(cur_of(cfg.state));
                return;
            case StmtKind::DeadlineNew:
            case StmtKind::TimerNew: exec_new(res, cfg, ti, actor, s); return;
            case StmtKind::DeadlineDestroy:
            case StmtKind::TimerDestroy: exec_destroy(res, cfg, ti, actor, s); return;
            case StmtKind::DeadlineReset:
            case StmtKind::TimerReset:
                // statically confined to atomic blocks
                res.finding = RunFinding{"access-violation", s.obj, "reset outside atomic",
                                         "E_ATOMIC", s.pos};
                return;
        }
    }

    bool expired(const State& s, int d) const {
        const TypeDecl& dt = *m_.type_of(d);
        int fi = dt.field_index("t");
        return cur_of(s) >= s.get(d, fi).i;
    }

    void sync_timed(State& s, int obj, bool member) const {
        const TypeDecl* ot = m_.type_of(obj);
        if (!ot || !ot->timed) return;
        const TypeDecl& tt = m_.types[static_cast<std::size_t>(m_.time_type)];
        s.at(m_.time_obj, tt.field_index("timed")).set[static_cast<std::size_t>(obj)] =
            member ? 1 : 0;
    }

    // Creation runs as two transitions: set t while still open (the clauses
    // are vacuous), then close and join the timed set together. Folding both
    // into one step would trip the Deadline freeze clause whenever t moves.
    void exec_new(StepResult& res, Configuration& cfg, std::size_t ti, int actor,
                  const Stmt& s) const {
        ThreadRT& t = cfg.threads[ti];
        const ObjectState& os = cfg.state.objs[static_cast<std::size_t>(s.obj)];
        if (!require(res, !os.closed, s.obj, "already closed", "E_ALREADY_CLOSED", s.pos) ||
            !require(res, os.owner == actor, s.obj, "not owned by this thread", "E_NOT_OWNED",
                     s.pos))
            return;
        const TypeDecl& dt = *m_.type_of(s.obj);
        int fi = dt.field_index("t");
        State post = cfg.state;
        post.at(s.obj, fi) = Value::of_time(cur_of(cfg.state) + s.delta);
        commit(res, cfg, std::move(post), actor, s.pos);
        if (res.finding) return;
        State post2 = cfg.state;
        post2.objs[static_cast<std::size_t>(s.obj)].closed = true;
        sync_timed(post2, s.obj, true);
        commit(res, cfg, std::move(post2), actor, s.pos);
        if (res.finding) return;
        if (s.kind == StmtKind::DeadlineNew)
            t.obligations.emplace_back(s.obj, static_cast<int>(t.frames.size()));
    }

    void exec_destroy(StepResult& res, Configuration& cfg, std::size_t ti, int actor,
                      const Stmt& s) const {
        ThreadRT& t = cfg.threads[ti];
        const ObjectState& os = cfg.state.objs[static_cast<std::size_t>(s.obj)];
        if (!require(res, os.closed, s.obj, "not closed", "E_NOT_CLOSED", s.pos) ||
            !require(res, os.owner == actor, s.obj, "not owned by this thread", "E_NOT_OWNED",
                     s.pos))
            return;
        if (s.kind == StmtKind::DeadlineDestroy && expired(cfg.state, s.obj)) {
            res.finding =
                RunFinding{"deadline-expired", s.obj, "on_unwrap old(T < t)", "E_EXPIRED", s.pos};
            return;
        }
        State post = cfg.state;
        post.objs[static_cast<std::size_t>(s.obj)].closed = false;
        sync_timed(post, s.obj, false);
        commit(res, cfg, std::move(post), actor, s.pos);
        if (res.finding) return;
        for (auto it = t.obligations.begin(); it != t.obligations.end(); ++it)
            if (it->first == s.obj) {
                t.obligations.erase(it);
                break;
            }
    }

    // One atomic block is one transition: the body runs on a working copy
    // with old(...) pinned to the entry state, then commits as a whole.
    void exec_atomic(StepResult& res, Configuration& cfg, std::size_t ti, int actor,
                     const Stmt& s) const {
        ThreadRT& t = cfg.threads[ti];
        State entry = cfg.state;
        State work = cfg.state;
        for (const Stmt& b : s.body) {
            Transition tr{entry, work, actor};
            EvalCtx cx;
            cx.tr = &tr;
            cx.self = actor;
            cx.locals = &t.locals;
            switch (b.kind) {
                case StmtKind::Skip: break;
                case StmtKind::Assume: {
                    bool pass = k_.eval(*b.expr, cx).b;
                    res.assume_events.emplace_back(&b, pass);
                    if (!pass) {
                        res.pruned = true;
                        res.prune_site = &b;
                        return;
                    }
                    break;
                }
                case StmtKind::Assert:
                    if (!k_.eval(*b.expr, cx).b) {
                        res.finding = RunFinding{"assertion-failure", actor,
                                                 expr_str(*b.expr, &m_), "E_ASSERT", b.pos};
                        return;
                    }
                    break;
                case StmtKind::Assign: {
                    const TypeDecl& ot = *m_.type_of(b.obj);
                    int fi = ot.field_index(b.field);
                    if (!access_write(res, work, b.obj, fi, actor, true, b.pos)) return;
                    Value v = k_.eval(*b.expr, cx);
                    work.at(b.obj, fi) = std::move(v);
                    break;
                }
                case StmtKind::DeadlineReset:
                case StmtKind::TimerReset: {
                    const TypeDecl& dt = *m_.type_of(b.obj);
                    int fi = dt.field_index("t");
                    work.at(b.obj, fi) = Value::of_time(cur_of(work) + b.delta);
                    break;
                }
                case StmtKind::TimerRecord:
                    t.locals[b.name] = Value::of_time(cur_of(work));
                    break;
                case StmtKind::Wrap:
                    work.objs[static_cast<std::size_t>(b.obj)].closed = true;
                    sync_timed(work, b.obj, true);
                    break;
                case StmtKind::Unwrap:
                    work.objs[static_cast<std::size_t>(b.obj)].closed = false;
                    sync_timed(work, b.obj, false);
                    break;
                case StmtKind::Own:
                    work.objs[static_cast<std::size_t>(b.obj)].owner = b.new_owner;
                    break;
                default:
                    res.finding = RunFinding{"access-violation", actor,
                                             "statement not allowed inside atomic", "E_ATOMIC",
                                             b.pos};
                    return;
            }
        }
        commit(res, cfg, std::move(work), actor, s.pos);
    }

    const Model& m_;
    Kernel k_;
};

}  // namespace chronoverify
