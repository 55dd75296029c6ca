#pragma once

#include "chronoverify/model.hpp"

namespace chronoverify {

// Snapshot of one object. `valid` is carried for completeness; the bundled
// universes keep it true throughout (creation beyond Deadline/Timer stack
// objects is modeled by wrap/unwrap, not validation).
struct ObjectState {
    bool valid = true;
    bool closed = false;
    int owner = -1;
    std::vector<Value> fields;  // aligned with TypeDecl::fields

    friend bool operator==(const ObjectState& a, const ObjectState& b) {
        return a.valid == b.valid && a.closed == b.closed && a.owner == b.owner &&
               a.fields == b.fields;
    }
};

// Value-semantic program state: every write produces a new snapshot.
struct State {
    std::vector<ObjectState> objs;

    const Value& get(int obj, int field) const {
        return objs[static_cast<std::size_t>(obj)].fields[static_cast<std::size_t>(field)];
    }
    Value& at(int obj, int field) {
        return objs[static_cast<std::size_t>(obj)].fields[static_cast<std::size_t>(field)];
    }

    friend bool operator==(const State& a, const State& b) { return a.objs == b.objs; }
};

// The unit all invariants are evaluated over. `actor` is the universe index
// of the acting thread, or the env pseudo-object for environment moves.
struct Transition {
    State pre;
    State post;
    int actor = -1;
};

inline Transition stutter(const State& s, int actor = -1) { return Transition{s, s, actor}; }

inline Value default_value(Sort s, std::size_t universe) {
    switch (s) {
        case Sort::Int: return Value::of_int(0);
        case Sort::Time: return Value::of_time(0);
        case Sort::Bool: return Value::of_bool(false);
        case Sort::ObjRef: return Value::of_ref(-1);
        case Sort::ObjSet: return Value::of_set(universe);
    }
    return Value::of_int(0);
}

// Builds the declared initial state: field initializers applied over
// per-sort defaults; time.timed seeded with the initially closed objects of
// timed types; threads and env own (and close) themselves.
inline State initial_state(const Model& m) {
    State s;
    std::size_t n = m.objects.size();
    s.objs.resize(n);
    for (std::size_t o = 0; o < n; ++o) {
        const ObjectDecl& od = m.objects[o];
        ObjectState& os = s.objs[o];
        os.valid = true;
        os.closed = od.init_closed;
        os.owner = od.init_owner;
        if (od.kind == ObjKind::Thread || od.kind == ObjKind::Env) {
            os.closed = true;
            os.owner = static_cast<int>(o);
            continue;
        }
        const TypeDecl& t = m.types[static_cast<std::size_t>(od.type)];
        os.fields.reserve(t.fields.size());
        for (const FieldDecl& f : t.fields) {
            auto it = od.init.find(f.name);
            os.fields.push_back(it != od.init.end() ? it->second : default_value(f.sort, n));
        }
    }
    // time is eternal: closed, owned by the environment pseudo-thread.
    if (m.time_obj >= 0) {
        ObjectState& ts = s.objs[static_cast<std::size_t>(m.time_obj)];
        ts.closed = true;
        ts.owner = m.env_obj;
        const TypeDecl& tt = m.types[static_cast<std::size_t>(m.time_type)];
        int timed_idx = tt.field_index("timed");
        Value& timed = ts.fields[static_cast<std::size_t>(timed_idx)];
        for (std::size_t o = 0; o < n; ++o) {
            const TypeDecl* ot = m.type_of(static_cast<int>(o));
            if (ot && ot->timed && s.objs[o].closed && !m.objects[o].erased)
                timed.set[o] = 1;
        }
    }
    return s;
}

}  // namespace chronoverify
