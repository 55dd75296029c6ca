#pragma once

#include "chronoverify/program.hpp"

#include <deque>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

namespace chronoverify {

struct Bounds {
    Int max_dt = 4;
    std::size_t max_configs = 2000000;
    Int loop_bound = 100;
    int max_env_moves = 8;  // per rest point
};

struct Finding {
    RunFinding info;
    std::vector<TransRec> trace;
};

struct AssumeSiteStat {
    SourcePos pos;
    std::string text;
    std::size_t reached = 0;
    std::size_t passed = 0;
};

struct Stats {
    std::size_t configs = 0;
    std::size_t transitions = 0;
    std::size_t env_moves = 0;
    std::size_t pruned = 0;
    std::size_t dedup_hits = 0;
    Int max_time;
    bool hit_config_cap = false;
    std::vector<AssumeSiteStat> assumes;
};

struct Report {
    std::string verdict;  // pass | fail | inconclusive
    std::vector<Finding> findings;
    Stats stats;
};

// Overrides every loop bound in the model (the CLI knob).
inline void apply_loop_bound(std::vector<Stmt>& body, const Int& bound) {
    for (Stmt& s : body) {
        if (s.kind == StmtKind::Loop) s.bound = bound;
        apply_loop_bound(s.body, bound);
    }
}
inline void apply_loop_bound(Model& m, const Int& bound) {
    for (ThreadDecl& th : m.threads) apply_loop_bound(th.program, bound);
}

// Least value among all stored time points; the canonical shift base.
inline Int min_time_value(const Model& m, const Configuration& c, bool* any_out = nullptr) {
    Int base;
    bool any = false;
    auto consider = [&](const Int& v) {
        if (!any || v < base) base = v;
        any = true;
    };
    for (std::size_t o = 0; o < m.objects.size(); ++o) {
        if (m.objects[o].erased) continue;
        const TypeDecl* t = m.type_of(static_cast<int>(o));
        if (!t) continue;
        for (std::size_t f = 0; f < t->fields.size(); ++f)
            if (t->fields[f].sort == Sort::Time && !t->fields[f].erased)
                consider(c.state.objs[o].fields[f].i);
    }
    for (const ThreadRT& t : c.threads)
        for (const auto& [k, v] : t.locals)
            if (v.sort == Sort::Time) consider(v.i);
    if (any_out) *any_out = any;
    return any ? base : Int(0);
}

class Explorer {
public:
    // Called on the initial configuration and after each committed thread
    // edge (boundary configurations); also on env-move successors with
    // boundary=false. Used by the elimination and equivalence checks.
    using Observer = std::function<void(const Configuration&, bool boundary)>;

    Explorer(const Model& m, Bounds b) : m_(m), b_(std::move(b)), runner_(m) {}

    const Runner& runner() const { return runner_; }

    void set_observer(Observer obs) { obs_ = std::move(obs); }

    // ----- canonical form -----------------------------------------------------

    // All invariants are shift-invariant in time points, so configurations
    // that differ only by a uniform shift of every stored time value are
    // identified. Loop counters and program counters stay significant.
    std::string canon_key(const Configuration& c) const {
        Int base = min_time_value(m_, c);
        std::string k;
        k.reserve(256);
        for (std::size_t o = 0; o < m_.objects.size(); ++o) {
            if (m_.objects[o].erased) continue;
            const ObjectState& os = c.state.objs[o];
            k += os.valid ? 'v' : '.';
            k += os.closed ? 'c' : 'o';
            k += std::to_string(os.owner);
            k += ':';
            const TypeDecl* t = m_.type_of(static_cast<int>(o));
            if (t) {
                for (std::size_t f = 0; f < t->fields.size(); ++f) {
                    if (t->fields[f].erased) continue;
                    const Value& v = os.fields[f];
                    append_value(k, v, t->fields[f].sort == Sort::Time ? base : Int(0));
                    k += ',';
                }
            }
            k += '|';
        }
        for (const ThreadRT& t : c.threads) {
            k += t.terminated ? 'T' : 'r';
            for (const Frame& f : t.frames) {
                k += std::to_string(f.idx);
                k += '@';
                k += f.counter.str();
                k += ';';
            }
            k += '/';
            for (const auto& [name, v] : t.locals) {
                k += name;
                k += '=';
                append_value(k, v, v.sort == Sort::Time ? base : Int(0));
                k += ';';
            }
            k += '/';
            for (const auto& [obj, depth] : t.obligations)
                k += std::to_string(obj) + "^" + std::to_string(depth) + ";";
            k += '|';
        }
        k += 's';
        k += std::to_string(c.env_streak);
        return k;
    }

    // ----- exhaustive exploration ----------------------------------------------

    Report explore() {
        Report rep;
        nodes_.clear();
        std::unordered_set<std::string> visited;
        std::deque<std::pair<Configuration, int>> frontier;
        std::map<std::pair<int, int>, AssumeSiteStat> assume_stats;

        Configuration init = runner_.initial();
        GoodResult g0 = runner_.kernel().is_good_state(init.state);
        if (!g0.ok) {
            rep.findings.push_back(
                {RunFinding{"invariant-violation", g0.obj, g0.clause, "E_BAD_STATE", {}}, {}});
            rep.verdict = "fail";
            finish_stats(rep, assume_stats);
            return rep;
        }
        if (obs_) obs_(init, true);
        visited.insert(canon_key(init));
        nodes_.push_back({-1, {}});
        frontier.emplace_back(init, 0);
        rep.stats.configs = 1;
        rep.stats.max_time = runner_.kernel().cur(init.state);

        auto note_assumes = [&](const StepResult& r) {
            for (const auto& [site, pass] : r.assume_events) {
                auto key = std::make_pair(site->pos.line, site->pos.col);
                auto& st = assume_stats[key];
                if (st.reached == 0 && st.passed == 0) {
                    st.pos = site->pos;
                    st.text = expr_str(*site->expr, &m_);
                }
                st.reached++;
                if (pass) st.passed++;
            }
        };
        auto fail_with = [&](const RunFinding& f, int parent, const std::vector<TransRec>& recs) {
            Finding out{f, trace_of(parent)};
            out.trace.insert(out.trace.end(), recs.begin(), recs.end());
            rep.findings.push_back(std::move(out));
            rep.verdict = "fail";
            finish_stats(rep, assume_stats);
        };

        while (!frontier.empty()) {
            auto [cfg, node] = std::move(frontier.front());
            frontier.pop_front();

            std::size_t succ = 0, prunes = 0;
            bool any_at_atomic = false;
            for (std::size_t ti = 0; ti < cfg.threads.size(); ++ti)
                if (runner_.at_atomic(cfg, ti)) any_at_atomic = true;

            if (any_at_atomic && cfg.env_streak < b_.max_env_moves) {
                for (StepResult& r : runner_.env_moves(cfg, b_.max_dt)) {
                    rep.stats.env_moves++;
                    rep.stats.transitions++;
                    if (r.finding) {
                        fail_with(*r.finding, node, r.recs);
                        return rep;
                    }
                    succ++;
                    if (obs_) obs_(r.cfg, false);
                    push(visited, frontier, rep, std::move(r.cfg), node, std::move(r.recs));
                    if (rep.stats.hit_config_cap) break;
                }
            }
            if (!rep.stats.hit_config_cap) {
                for (std::size_t ti = 0; ti < cfg.threads.size(); ++ti) {
                    if (cfg.threads[ti].terminated) continue;
                    StepResult r = runner_.step_thread(cfg, ti);
                    note_assumes(r);
                    rep.stats.transitions += r.recs.size();
                    if (r.finding) {
                        fail_with(*r.finding, node, r.recs);
                        return rep;
                    }
                    if (r.pruned) {
                        prunes++;
                        rep.stats.pruned++;
                        continue;
                    }
                    succ++;
                    if (obs_) obs_(r.cfg, true);
                    push(visited, frontier, rep, std::move(r.cfg), node, std::move(r.recs));
                    if (rep.stats.hit_config_cap) break;
                }
            }

            // A rest point with no successor at all, not explained by assume
            // pruning, while a closed deadline has caught up with the clock:
            // the whole system is wedged forever.
            if (succ == 0 && prunes == 0 && alive(cfg)) {
                int d = frozen_deadline(cfg);
                if (d >= 0) {
                    fail_with(RunFinding{"time-frozen", d,
                                         "no enabled move and T has reached t", "E_FROZEN",
                                         m_.objects[static_cast<std::size_t>(d)].pos},
                              node, {});
                    return rep;
                }
            }
            if (rep.stats.hit_config_cap) break;
        }

        finish_stats(rep, assume_stats);
        if (rep.stats.hit_config_cap) {
            rep.verdict = "inconclusive";
            return rep;
        }
        for (const AssumeSiteStat& st : rep.stats.assumes) {
            if (st.reached > 0 && st.passed == 0)
                rep.findings.push_back(
                    {RunFinding{"vacuous-assume", -1, st.text, "E_VACUOUS", st.pos}, {}});
        }
        rep.verdict = rep.findings.empty() ? "pass" : "fail";
        return rep;
    }

    // ----- seeded random walk ---------------------------------------------------

    Report simulate(std::uint64_t seed, std::size_t steps,
                    std::vector<TransRec>* trace_out = nullptr) {
        Report rep;
        std::mt19937_64 rng(seed);
        Configuration cfg = runner_.initial();
        GoodResult g0 = runner_.kernel().is_good_state(cfg.state);
        rep.stats.max_time = runner_.kernel().cur(cfg.state);
        if (!g0.ok) {
            rep.findings.push_back(
                {RunFinding{"invariant-violation", g0.obj, g0.clause, "E_BAD_STATE", {}}, {}});
            rep.verdict = "fail";
            return rep;
        }
        std::vector<TransRec> trace;
        for (std::size_t n = 0; n < steps; ++n) {
            std::vector<StepResult> cands;
            std::size_t prunes = 0;
            bool any_at_atomic = false;
            for (std::size_t ti = 0; ti < cfg.threads.size(); ++ti)
                if (runner_.at_atomic(cfg, ti)) any_at_atomic = true;
            if (any_at_atomic && cfg.env_streak < b_.max_env_moves)
                for (StepResult& r : runner_.env_moves(cfg, b_.max_dt))
                    cands.push_back(std::move(r));
            for (std::size_t ti = 0; ti < cfg.threads.size(); ++ti) {
                if (cfg.threads[ti].terminated) continue;
                StepResult r = runner_.step_thread(cfg, ti);
                if (r.pruned) {
                    prunes++;
                    rep.stats.pruned++;
                    continue;
                }
                cands.push_back(std::move(r));
            }
            if (cands.empty()) {
                // A walk stranded only by assume pruning is infeasible, not wedged.
                int d = frozen_deadline(cfg);
                if (d >= 0 && prunes == 0 && alive(cfg))
                    rep.findings.push_back(
                        {RunFinding{"time-frozen", d, "no enabled move and T has reached t",
                                    "E_FROZEN", {}},
                         trace});
                break;
            }
            std::size_t pick = static_cast<std::size_t>(
                rng() % static_cast<std::uint64_t>(cands.size()));
            StepResult& r = cands[pick];
            trace.insert(trace.end(), r.recs.begin(), r.recs.end());
            rep.stats.transitions += r.recs.size();
            if (r.finding) {
                rep.findings.push_back({*r.finding, trace});
                break;
            }
            cfg = std::move(r.cfg);
            rep.stats.configs++;
            Int t = runner_.kernel().cur(cfg.state);
            if (t > rep.stats.max_time) rep.stats.max_time = t;
        }
        rep.verdict = rep.findings.empty() ? "pass" : "fail";
        if (!rep.findings.empty() && rep.findings.front().trace.empty())
            rep.findings.front().trace = trace;
        if (trace_out) *trace_out = std::move(trace);
        return rep;
    }

    // Replays a trace of deltas from the initial state, re-checking legality
    // of every recorded transition. Used by tests and the report validator.
    bool replay(const std::vector<TransRec>& trace, std::string* why = nullptr) const {
        State s = initial_state(m_);
        const Kernel& k = runner_.kernel();
        for (const TransRec& rec : trace) {
            State post = s;
            for (const FieldDelta& d : rec.deltas) {
                ObjectState& os = post.objs[static_cast<std::size_t>(d.obj)];
                if (d.field == kFieldClosed) os.closed = d.newv.b;
                else if (d.field == kFieldOwner) os.owner = d.newv.ref;
                else os.fields[static_cast<std::size_t>(d.field)] = d.newv;
            }
            Legality leg = k.is_legal_transition(Transition{s, post, rec.actor});
            if (!leg.legal) {
                if (why) *why = "illegal transition during replay: " + leg.clause;
                return false;
            }
            if (k.cur(post) < k.cur(s)) {
                if (why) *why = "time moved backwards during replay";
                return false;
            }
            s = std::move(post);
        }
        return true;
    }

private:
    struct Node {
        int parent;
        std::vector<TransRec> recs;
    };

    static void append_value(std::string& k, const Value& v, const Int& base) {
        switch (v.sort) {
            case Sort::Int: k += v.i.str(); break;
            case Sort::Time: k += Int(v.i - base).str(); break;
            case Sort::Bool: k += v.b ? '1' : '0'; break;
            case Sort::ObjRef: k += 'r' + std::to_string(v.ref); break;
            case Sort::ObjSet:
                for (char c : v.set) k += c ? '1' : '0';
                break;
        }
    }

    bool alive(const Configuration& c) const {
        for (const ThreadRT& t : c.threads)
            if (!t.terminated) return true;
        return false;
    }

    // A closed Deadline whose expiration has arrived; with no successor this
    // wedges the clock forever.
    int frozen_deadline(const Configuration& c) const {
        for (std::size_t o = 0; o < m_.objects.size(); ++o) {
            if (m_.objects[o].erased || !m_.is_deadline(static_cast<int>(o))) continue;
            if (!c.state.objs[o].closed) continue;
            const TypeDecl& dt = *m_.type_of(static_cast<int>(o));
            int fi = dt.field_index("t");
            if (runner_.kernel().cur(c.state) >= c.state.get(static_cast<int>(o), fi).i)
                return static_cast<int>(o);
        }
        return -1;
    }

    void push(std::unordered_set<std::string>& visited,
              std::deque<std::pair<Configuration, int>>& frontier, Report& rep,
              Configuration cfg, int parent, std::vector<TransRec> recs) {
        std::string key = canon_key(cfg);
        if (!visited.insert(std::move(key)).second) {
            rep.stats.dedup_hits++;
            return;
        }
        Int t = runner_.kernel().cur(cfg.state);
        if (t > rep.stats.max_time) rep.stats.max_time = t;
        rep.stats.configs++;
        if (rep.stats.configs > b_.max_configs) {
            rep.stats.hit_config_cap = true;
            return;
        }
        nodes_.push_back({parent, std::move(recs)});
        frontier.emplace_back(std::move(cfg), static_cast<int>(nodes_.size()) - 1);
    }

    std::vector<TransRec> trace_of(int node) const {
        std::vector<std::vector<TransRec> const*> chain;
        for (int n = node; n >= 0; n = nodes_[static_cast<std::size_t>(n)].parent)
            chain.push_back(&nodes_[static_cast<std::size_t>(n)].recs);
        std::vector<TransRec> out;
        for (auto it = chain.rbegin(); it != chain.rend(); ++it)
            out.insert(out.end(), (*it)->begin(), (*it)->end());
        return out;
    }

    void finish_stats(Report& rep, const std::map<std::pair<int, int>, AssumeSiteStat>& as) {
        for (const auto& [k, st] : as) rep.stats.assumes.push_back(st);
    }

    const Model& m_;
    Bounds b_;
    Runner runner_;
    Observer obs_;
    std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Deadline elimination
// ---------------------------------------------------------------------------

namespace detail {

inline bool mentions_deadline(const Expr& e, const Model& m) {
    if (e.kind == ExprKind::ObjLit &&
        m.objects[static_cast<std::size_t>(e.obj)].type == m.deadline_type)
        return true;
    if (e.pointee_type >= 0 && e.pointee_type == m.deadline_type) return true;
    for (const ExprPtr& k : e.kids)
        if (mentions_deadline(*k, m)) return true;
    return false;
}

inline bool mentions_field_name(const Expr& e, const std::string& fname) {
    if (e.kind == ExprKind::FieldGet && e.name == fname) return true;
    for (const ExprPtr& k : e.kids)
        if (mentions_field_name(*k, fname)) return true;
    return false;
}

inline bool field_in_use(const std::vector<Stmt>& body, const std::string& fname) {
    for (const Stmt& s : body) {
        if (s.kind == StmtKind::Assign && s.field == fname) return true;
        if (s.expr && mentions_field_name(*s.expr, fname)) return true;
        if (field_in_use(s.body, fname)) return true;
    }
    return false;
}

inline bool field_in_use(const Model& m, const std::string& fname) {
    for (const TypeDecl& t : m.types) {
        for (const Clause& c : t.invariants)
            if (mentions_field_name(*c.expr, fname)) return true;
        for (const Clause& c : t.on_unwrap)
            if (mentions_field_name(*c.expr, fname)) return true;
        for (const auto& [f, e] : t.dynamics)
            if (mentions_field_name(*e, fname)) return true;
    }
    for (const ThreadDecl& th : m.threads)
        if (field_in_use(th.program, fname)) return true;
    return false;
}

inline ExprPtr true_expr(SourcePos pos) {
    Expr e;
    e.kind = ExprKind::BoolLit;
    e.bval = true;
    e.sort = Sort::Bool;
    e.pos = pos;
    return std::make_shared<Expr>(std::move(e));
}

inline void erase_in_stmts(std::vector<Stmt>& body, const Model& m) {
    for (Stmt& s : body) {
        bool kill = false;
        switch (s.kind) {
            case StmtKind::DeadlineNew:
            case StmtKind::DeadlineReset:
            case StmtKind::DeadlineDestroy: kill = true; break;
            case StmtKind::Wrap:
            case StmtKind::Unwrap:
                kill = s.obj >= 0 && m.objects[static_cast<std::size_t>(s.obj)].erased;
                break;
            case StmtKind::Own:
                kill = (s.obj >= 0 && m.objects[static_cast<std::size_t>(s.obj)].erased) ||
                       (s.new_owner >= 0 &&
                        m.objects[static_cast<std::size_t>(s.new_owner)].erased);
                break;
            case StmtKind::Assign:
                kill = (s.obj >= 0 && m.objects[static_cast<std::size_t>(s.obj)].erased) ||
                       mentions_deadline(*s.expr, m);
                break;
            case StmtKind::Assume:
            case StmtKind::Assert: kill = mentions_deadline(*s.expr, m); break;
            case StmtKind::Loop:
                if (mentions_deadline(*s.expr, m)) s.expr = true_expr(s.pos);
                erase_in_stmts(s.body, m);
                break;
            case StmtKind::Atomic: erase_in_stmts(s.body, m); break;
            default: break;
        }
        if (kill) {
            Stmt repl;
            repl.kind = StmtKind::Skip;
            repl.pos = s.pos;
            s = std::move(repl);
        }
    }
}

}  // namespace detail

// The model with every Deadline object marked erased, every statement that
// touches one replaced by skip (positions preserved, so program counters
// line up), and every clause that mentions one dropped.
inline Model erase_deadlines(const Model& m) {
    Model out = m;
    for (ObjectDecl& od : out.objects)
        if (od.type == out.deadline_type) od.erased = true;
    for (TypeDecl& t : out.types) {
        if (t.builtin) continue;
        auto drop = [&](std::vector<Clause>& cs) {
            std::vector<Clause> keep;
            for (Clause& c : cs)
                if (!detail::mentions_deadline(*c.expr, out)) keep.push_back(std::move(c));
            cs = std::move(keep);
        };
        drop(t.invariants);
        drop(t.on_unwrap);
    }
    for (ThreadDecl& th : out.threads) detail::erase_in_stmts(th.program, out);
    // A ghost time field whose reads and writes were all erased (the shadow
    // copy of an expiry point) would pin the canonical base at its stale
    // value forever; drop it from canonicalization.
    for (TypeDecl& t : out.types) {
        if (t.builtin) continue;
        for (FieldDecl& f : t.fields)
            if (f.sort == Sort::Time && f.is_ghost && !detail::field_in_use(out, f.name))
                f.erased = true;
    }
    return out;
}

// Projection used to compare the two runs: thread control points plus every
// non-time value of the surviving objects. Time points are excluded because
// the eliminated run lets the clock drift further between atomics; those
// drifted branches die at the next assume and never reach a boundary.
inline std::string elim_projection(const Model& m, const Configuration& c) {
    std::string k;
    for (std::size_t o = 0; o < m.objects.size(); ++o) {
        const ObjectDecl& od = m.objects[o];
        if (od.erased || od.type == m.deadline_type) continue;
        const ObjectState& os = c.state.objs[o];
        k += os.closed ? 'c' : 'o';
        k += std::to_string(os.owner);
        k += ':';
        const TypeDecl* t = m.type_of(static_cast<int>(o));
        if (t) {
            for (std::size_t f = 0; f < t->fields.size(); ++f) {
                if (t->fields[f].sort == Sort::Time) continue;
                const Value& v = os.fields[f];
                switch (v.sort) {
                    case Sort::Int: k += v.i.str(); break;
                    case Sort::Bool: k += v.b ? '1' : '0'; break;
                    case Sort::ObjRef: k += 'r' + std::to_string(v.ref); break;
                    case Sort::ObjSet:
                        for (std::size_t j = 0; j < v.set.size(); ++j) {
                            if (m.objects[j].erased || m.objects[j].type == m.deadline_type)
                                continue;
                            k += v.set[j] ? '1' : '0';
                        }
                        break;
                    default: break;
                }
                k += ',';
            }
        }
        k += '|';
    }
    for (const ThreadRT& t : c.threads) {
        k += t.terminated ? 'T' : 'r';
        for (const Frame& f : t.frames) k += std::to_string(f.idx) + "@" + f.counter.str() + ";";
        k += '/';
        for (const auto& [name, v] : t.locals)
            if (v.sort != Sort::Time) k += name + "=" + v.i.str() + ";";
        k += '|';
    }
    return k;
}

struct ElimResult {
    bool pass = false;
    Report base;
    Report elim;
    std::size_t only_base = 0;  // projected states seen only in the full run
    std::size_t only_elim = 0;
};

inline ElimResult deadline_elimination_check(const Model& m, const Bounds& b) {
    ElimResult res;
    std::set<std::string> pa, pb;
    {
        Explorer ex(m, b);
        ex.set_observer([&](const Configuration& c, bool boundary) {
            if (boundary) pa.insert(elim_projection(m, c));
        });
        res.base = ex.explore();
    }
    Model elim = erase_deadlines(m);
    {
        Explorer ex(elim, b);
        ex.set_observer([&](const Configuration& c, bool boundary) {
            if (boundary) pb.insert(elim_projection(elim, c));
        });
        res.elim = ex.explore();
    }
    for (const std::string& s : pa)
        if (!pb.count(s)) res.only_base++;
    for (const std::string& s : pb)
        if (!pa.count(s)) res.only_elim++;
    res.pass = res.base.verdict == "pass" && res.elim.verdict == "pass" &&
               res.only_base == 0 && res.only_elim == 0;
    return res;
}

}  // namespace chronoverify
