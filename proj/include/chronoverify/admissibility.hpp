#pragma once

#include "chronoverify/kernel.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace chronoverify {

struct RangeSpec {
    Int lo;
    Int hi;
    Int step = 1;
};

struct AdmissOptions {
    std::map<std::string, RangeSpec> ranges;  // "obj.field" -> enumeration range
    std::size_t max_pairs = 10000000;
};

struct AdmissResult {
    std::string type_name;
    std::string error;  // E_UNBOUNDED / E_TOO_LARGE / E_NO_SUBJECT; empty when the run finished
    bool admissible = false;
    int condition = 0;  // violated condition (1 or 2) when inadmissible
    Transition cex;
    std::string clause;
    int subject = -1;
    std::size_t pairs_evaluated = 0;
    std::size_t good_pres = 0;
};

namespace detail {

// One enumerated coordinate of the state grid.
struct AdmVar {
    int kind;  // 0 data field, 1 closed, 2 owner, 3 timed bit
    int field = -1;
    std::vector<Value> values;
};

// All coordinates of one object, enumerated together so its invariant can
// prune the grid as early as possible.
struct AdmGroup {
    int obj;
    bool is_time = false;
    std::vector<AdmVar> vars;
};

// Static object reference of an expression: self, a literal object, or the
// pinned target of an objref field (objref fields are never enumerated).
inline int resolve_static(const Model& m, const Expr& e, int self) {
    switch (e.kind) {
        case ExprKind::SelfRef: return self;
        case ExprKind::ObjLit: return e.obj;
        case ExprKind::FieldGet: {
            int base = resolve_static(m, *e.kids[0], self);
            if (base < 0) return -1;
            const ObjectDecl& od = m.objects[static_cast<std::size_t>(base)];
            auto it = od.init.find(e.name);
            if (it != od.init.end() && it->second.sort == Sort::ObjRef)
                return it->second.ref;
            return -1;
        }
        default: return -1;
    }
}

// Objects whose state an invariant of `self` can read. Used to order the
// enumeration checks: an object's clauses run once every referenced object
// has been assigned.
inline void collect_deps(const Model& m, const Expr& e, int self, std::set<int>& out) {
    switch (e.kind) {
        case ExprKind::SelfRef: out.insert(self); break;
        case ExprKind::ObjLit: out.insert(e.obj); break;
        case ExprKind::CurTime:
        case ExprKind::DeltaTime:
        case ExprKind::Elapsed: out.insert(m.time_obj); break;
        case ExprKind::FieldGet: {
            int base = resolve_static(m, *e.kids[0], self);
            if (base >= 0) out.insert(base);
            break;
        }
        case ExprKind::Inv2:
        case ExprKind::Mine:
        case ExprKind::ClosedOf: {
            int o = resolve_static(m, *e.kids[0], self);
            if (o >= 0) out.insert(o);
            break;
        }
        default: break;
    }
    for (const auto& kid : e.kids) collect_deps(m, *kid, self, out);
}

inline bool has_two_state(const Expr& e) {
    if (e.kind == ExprKind::Old || e.kind == ExprKind::DeltaTime ||
        e.kind == ExprKind::Elapsed)
        return true;
    for (const auto& kid : e.kids)
        if (has_two_state(*kid)) return true;
    return false;
}

// Brute-force admissibility engine. The subject, the time object, and every
// object named in the range map are enumerated over their ranges (meta state
// included); all other objects stay pinned at their declared initial values.
class AdmEngine {
public:
    AdmEngine(const Model& m, int subject, const AdmissOptions& opt, AdmissResult& res)
        : m_(m), k_(m), opt_(opt), res_(res), subject_(subject) {}

    bool build() {
        std::vector<bool> active(m_.objects.size(), false);
        active[static_cast<std::size_t>(subject_)] = true;
        active[static_cast<std::size_t>(m_.time_obj)] = true;
        for (const auto& [key, r] : opt_.ranges) {
            std::string obj = key.substr(0, key.find('.'));
            int oi = m_.find_object(obj);
            if (oi < 0) {
                res_.error = "E_NO_SUBJECT: range names unknown object " + obj;
                return false;
            }
            active[static_cast<std::size_t>(oi)] = true;
        }

        // The time group goes first: every clause may read cur.
        push_group(m_.time_obj);
        for (std::size_t o = 0; o < m_.objects.size(); ++o)
            if (active[o] && static_cast<int>(o) != m_.time_obj)
                push_group(static_cast<int>(o));
        if (!res_.error.empty()) return false;

        // Check slot per object: the last group among the object itself and
        // everything its invariants read. Purely positional; the bundled
        // universes declare referenced objects before referencing ones.
        pre_checks_.assign(groups_.size(), {});
        post_checks_.assign(groups_.size(), {});
        for (std::size_t g = 0; g < groups_.size(); ++g) {
            int o = groups_[g].obj;
            if (groups_[g].is_time) continue;  // time's clauses handled per instance
            const TypeDecl* t = m_.type_of(o);
            if (!t) continue;
            std::set<int> deps{o};
            for (const Clause& c : t->invariants) collect_deps(m_, *c.expr, o, deps);
            for (const Clause& c : t->on_unwrap) collect_deps(m_, *c.expr, o, deps);
            std::size_t slot = g;
            for (int d : deps) slot = std::max(slot, group_of(d));
            pre_checks_[slot].push_back(o);
            post_checks_[slot].push_back(o);
        }
        pre_tr_ = stutter(initial_state(m_), m_.env_obj);
        tr_ = pre_tr_;
        timed_field_ = m_.types[static_cast<std::size_t>(m_.time_type)].field_index("timed");
        const TypeDecl& st = *m_.type_of(subject_);
        bool two_state = false;
        for (const Clause& c : st.invariants) two_state |= has_two_state(*c.expr);
        // Condition 2 compares the subject's invariant across the transition
        // (required for goodness) with its reading on the poststate stutter;
        // the two coincide unless some clause reads the prestate.
        need_cond2_ = two_state;

        actors_.push_back(m_.env_obj);
        for (const ThreadDecl& th : m_.threads) actors_.push_back(th.obj);
        return true;
    }

    void run() {
        if (!enum_pre(0)) return;  // stopped by a counterexample or the cap
    }

private:
    // ----- grid construction -------------------------------------------------

    void push_group(int obj) {
        AdmGroup g;
        g.obj = obj;
        g.is_time = obj == m_.time_obj;
        const ObjectDecl& od = m_.objects[static_cast<std::size_t>(obj)];
        const TypeDecl* t = m_.type_of(obj);
        if (!t) {
            if (obj == subject_)
                res_.error = "E_NO_SUBJECT: subject object has no type";
            return;
        }
        for (std::size_t f = 0; f < t->fields.size(); ++f) {
            const FieldDecl& fd = t->fields[f];
            if (fd.sort == Sort::ObjSet || fd.sort == Sort::ObjRef) continue;
            if (fd.sort == Sort::Bool) {
                g.vars.push_back({0, static_cast<int>(f),
                                  {Value::of_bool(false), Value::of_bool(true)}});
                continue;
            }
            std::string key = od.name + "." + fd.name;
            RangeSpec r;
            if (auto it = opt_.ranges.find(key); it != opt_.ranges.end()) {
                r = it->second;
            } else if (fd.range) {
                r = {fd.range->first, fd.range->second, 1};
            } else {
                res_.error = "E_UNBOUNDED: no range for " + key;
                return;
            }
            AdmVar v{0, static_cast<int>(f), {}};
            for (Int x = r.lo; x <= r.hi; x += r.step)
                v.values.push_back(fd.sort == Sort::Time ? Value::of_time(x)
                                                         : Value::of_int(x));
            g.vars.push_back(std::move(v));
        }
        if (!g.is_time && od.kind == ObjKind::Plain) {
            g.vars.push_back({1, -1, {Value::of_bool(false), Value::of_bool(true)}});
            std::vector<int> owners;
            auto add = [&](int o) {
                if (o < 0) return;
                for (int x : owners)
                    if (x == o) return;
                owners.push_back(o);
            };
            add(od.init_owner);
            for (const ThreadDecl& th : m_.threads) add(th.obj);
            add(subject_);
            AdmVar ov{2, -1, {}};
            for (int o : owners) ov.values.push_back(Value::of_ref(o));
            g.vars.push_back(std::move(ov));
            if (t->timed)
                g.vars.push_back({3, -1, {Value::of_bool(false), Value::of_bool(true)}});
        }
        groups_.push_back(std::move(g));
    }

    std::size_t group_of(int obj) const {
        for (std::size_t g = 0; g < groups_.size(); ++g)
            if (groups_[g].obj == obj) return g;
        return 0;  // pinned objects impose no ordering
    }

    void apply_var(State& s, int obj, const AdmVar& v, const Value& val) {
        switch (v.kind) {
            case 0: s.at(obj, v.field) = val; break;
            case 1: s.objs[static_cast<std::size_t>(obj)].closed = val.b; break;
            case 2: s.objs[static_cast<std::size_t>(obj)].owner = val.ref; break;
            case 3:
                s.at(m_.time_obj, timed_field_).set[static_cast<std::size_t>(obj)] =
                    val.b ? 1 : 0;
                break;
        }
    }

    bool spend() {
        if (++res_.pairs_evaluated > opt_.max_pairs) {
            res_.error = "E_TOO_LARGE: enumeration exceeded " +
                         std::to_string(opt_.max_pairs) + " pairs";
            return false;
        }
        return true;
    }

    // ----- prestate enumeration ----------------------------------------------

    // Every assignment of group g's coordinates, applied to both sides of the
    // stutter; each object's one-state invariant prunes at its check slot.
    bool enum_pre(std::size_t g) {
        if (g == groups_.size()) return finish_pre();
        const AdmGroup& gr = groups_[g];
        std::vector<std::size_t> idx(gr.vars.size(), 0);
        while (true) {
            for (std::size_t i = 0; i < gr.vars.size(); ++i) {
                apply_var(pre_tr_.pre, gr.obj, gr.vars[i], gr.vars[i].values[idx[i]]);
                apply_var(pre_tr_.post, gr.obj, gr.vars[i], gr.vars[i].values[idx[i]]);
            }
            if (!spend()) return false;
            bool ok = true;
            for (int o : pre_checks_[g])
                if (!k_.object_inv2(pre_tr_, o).ok) {
                    ok = false;
                    break;
                }
            if (ok && !enum_pre(g + 1)) return false;
            std::size_t i = 0;
            for (; i < gr.vars.size(); ++i) {
                if (++idx[i] < gr.vars[i].values.size()) break;
                idx[i] = 0;
            }
            if (i == gr.vars.size()) return true;
        }
    }

    bool finish_pre() {
        // Canonical prestates only: the least stored time value is 0.
        Int lo;
        bool any = false;
        for (std::size_t o = 0; o < m_.objects.size(); ++o) {
            const TypeDecl* t = m_.type_of(static_cast<int>(o));
            if (!t) continue;
            for (std::size_t f = 0; f < t->fields.size(); ++f)
                if (t->fields[f].sort == Sort::Time) {
                    const Int& x = pre_tr_.pre.objs[o].fields[f].i;
                    if (!any || x < lo) lo = x;
                    any = true;
                }
        }
        if (any && lo != 0) return true;
        if (!k_.is_good_state(pre_tr_.pre).ok) return true;  // pinned objects too
        res_.good_pres++;

        tr_.pre = pre_tr_.pre;
        tr_.post = pre_tr_.pre;
        subject_closed_ = pre_tr_.pre.objs[static_cast<std::size_t>(subject_)].closed;

        if (subject_closed_ && !enum_post(0, /*cond=*/1)) return false;
        if (need_cond2_ && !enum_post(0, /*cond=*/2)) return false;
        return true;
    }

    // ----- poststate enumeration ----------------------------------------------

    // Condition 1 keeps the subject pinned and demands its two-state invariant
    // on every legal transition; condition 2 demands the poststate stutter
    // reading after every good transition. Group checks are necessary
    // conditions of legality/goodness, so pruning on them is exact; the full
    // kernel judgment runs at the leaves.
    bool enum_post(std::size_t g, int cond) {
        if (g == groups_.size()) return finish_post(cond);
        const AdmGroup& gr = groups_[g];
        if (cond == 1 && gr.obj == subject_) {
            // Subject untouched: its pre coordinates stand.
            return post_group_ok(g, cond) ? enum_post(g + 1, cond) : true;
        }
        std::vector<std::size_t> idx(gr.vars.size(), 0);
        while (true) {
            for (std::size_t i = 0; i < gr.vars.size(); ++i)
                apply_var(tr_.post, gr.obj, gr.vars[i], gr.vars[i].values[idx[i]]);
            if (!spend()) return false;
            if (post_group_ok(g, cond) && !enum_post(g + 1, cond)) return false;
            std::size_t i = 0;
            for (; i < gr.vars.size(); ++i) {
                if (++idx[i] < gr.vars[i].values.size()) break;
                idx[i] = 0;
            }
            if (i == gr.vars.size()) return true;
        }
    }

    bool post_group_ok(std::size_t g, int cond) {
        const AdmGroup& gr = groups_[g];
        if (gr.is_time) return k_.cur(tr_.post) >= k_.cur(tr_.pre);  // monotone clock
        for (int o : post_checks_[g]) {
            bool required = cond == 2;  // goodness needs every object's inv2
            if (!required) {
                const auto& a = tr_.pre.objs[static_cast<std::size_t>(o)];
                const auto& b = tr_.post.objs[static_cast<std::size_t>(o)];
                required = !(a == b);  // legality needs it for updated objects
            }
            if (required && !k_.object_inv2(tr_, o).ok) return false;
            // Per-object instances of Time's quantified clauses; both hold
            // trivially whenever the relevant time state is unchanged.
            bool pre_t = timed_bit(tr_.pre, o), post_t = timed_bit(tr_.post, o);
            if (pre_t && !post_t && !k_.object_inv2(tr_, o).ok) return false;
            if (post_t && tr_.post.objs[static_cast<std::size_t>(o)].closed &&
                k_.cur(tr_.post) != k_.cur(tr_.pre) && !k_.object_inv2(tr_, o).ok)
                return false;
        }
        return true;
    }

    bool timed_bit(const State& s, int o) const {
        return s.get(m_.time_obj, timed_field_).set[static_cast<std::size_t>(o)] != 0;
    }

    bool finish_post(int cond) {
        if (cond == 1) {
            bool legal = false;
            for (int a : actors_) {
                tr_.actor = a;
                if (k_.is_legal_transition(tr_).legal) {
                    legal = true;
                    break;
                }
            }
            if (!legal) return true;
            InvResult r = k_.object_inv2(tr_, subject_);
            if (r.ok) return true;
            res_.condition = 1;
            res_.cex = tr_;
            res_.clause = r.clause;
            return false;
        }
        if (!k_.is_good_transition(tr_).ok) return true;
        InvResult r = k_.object_inv2(stutter(tr_.post, m_.env_obj), subject_);
        if (r.ok) return true;
        res_.condition = 2;
        res_.cex = tr_;
        res_.clause = r.clause;
        return false;
    }

    const Model& m_;
    Kernel k_;
    const AdmissOptions& opt_;
    AdmissResult& res_;
    int subject_;
    std::vector<AdmGroup> groups_;
    std::vector<std::vector<int>> pre_checks_;
    std::vector<std::vector<int>> post_checks_;
    Transition pre_tr_{State{}, State{}, -1};
    Transition tr_{State{}, State{}, -1};
    std::vector<int> actors_;
    int timed_field_ = -1;
    bool subject_closed_ = false;
    bool need_cond2_ = false;
};

}  // namespace detail

// Brute-force admissibility of one type on the model's universe. Condition 1:
// the subject's two-state invariant holds on every legal transition (any
// actor) with a good canonical prestate that leaves the subject untouched.
// Condition 2: the poststate of every good transition from a good prestate
// satisfies the subject's invariant on its stutter.
inline AdmissResult check_admissibility(const Model& m, const std::string& type_name,
                                        const AdmissOptions& opt) {
    AdmissResult res;
    res.type_name = type_name;

    int ti = m.find_type(type_name);
    if (ti < 0) {
        res.error = "E_NO_SUBJECT: unknown type " + type_name;
        return res;
    }
    int subject = -1;
    for (std::size_t o = 0; o < m.objects.size(); ++o)
        if (m.objects[o].type == ti) {
            subject = static_cast<int>(o);
            break;
        }
    if (subject < 0) {
        res.error = "E_NO_SUBJECT: no object of type " + type_name + " in the universe";
        return res;
    }
    res.subject = subject;

    detail::AdmEngine eng(m, subject, opt, res);
    if (!eng.build()) return res;
    eng.run();
    if (!res.error.empty()) return res;
    res.admissible = res.condition == 0;
    return res;
}

}  // namespace chronoverify
