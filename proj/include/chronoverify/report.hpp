#pragma once

#include "chronoverify/admissibility.hpp"
#include "chronoverify/explorer.hpp"
#include "chronoverify/printer.hpp"

#include <json.hpp>

#include <string>

namespace chronoverify {

using ordered_json = nlohmann::ordered_json;

namespace detail {

inline std::string obj_name(const Model& m, int obj) {
    if (obj < 0 || obj >= static_cast<int>(m.objects.size())) return "";
    return m.objects[static_cast<std::size_t>(obj)].name;
}

inline std::string field_name(const Model& m, int obj, int field) {
    if (field == kFieldClosed) return "closed";
    if (field == kFieldOwner) return "owner";
    const TypeDecl* t = m.type_of(obj);
    if (!t || field < 0 || field >= static_cast<int>(t->fields.size())) return "?";
    return t->fields[static_cast<std::size_t>(field)].name;
}

inline ordered_json value_json(const Model& m, const Value& v) {
    switch (v.sort) {
        case Sort::Int:
        case Sort::Time: return v.i.str();
        case Sort::Bool: return v.b;
        case Sort::ObjRef: return v.ref < 0 ? "null" : obj_name(m, v.ref);
        case Sort::ObjSet: {
            ordered_json a = ordered_json::array();
            for (std::size_t o = 0; o < v.set.size(); ++o)
                if (v.set[o]) a.push_back(obj_name(m, static_cast<int>(o)));
            return a;
        }
    }
    return nullptr;
}

inline ordered_json trans_json(const Model& m, const TransRec& r) {
    ordered_json j;
    j["actor"] = obj_name(m, r.actor);
    ordered_json ds = ordered_json::array();
    for (const FieldDelta& d : r.deltas) {
        ordered_json e;
        e["object"] = obj_name(m, d.obj);
        e["field"] = field_name(m, d.obj, d.field);
        e["old"] = value_json(m, d.oldv);
        e["new"] = value_json(m, d.newv);
        ds.push_back(std::move(e));
    }
    j["deltas"] = std::move(ds);
    return j;
}

inline ordered_json finding_json(const Model& m, const Finding& f) {
    ordered_json j;
    j["kind"] = f.info.kind;
    ordered_json culprit;
    culprit["object"] = obj_name(m, f.info.obj);
    culprit["clause"] = f.info.clause;
    culprit["code"] = f.info.code;
    j["culprit"] = std::move(culprit);
    j["pos"] = {{"line", f.info.pos.line}, {"col", f.info.pos.col}};
    ordered_json tr = ordered_json::array();
    for (const TransRec& r : f.trace) tr.push_back(trans_json(m, r));
    j["trace"] = std::move(tr);
    return j;
}

inline ordered_json state_json(const Model& m, const State& s) {
    ordered_json j;
    for (std::size_t o = 0; o < m.objects.size(); ++o) {
        const ObjectDecl& od = m.objects[o];
        const TypeDecl* t = m.type_of(static_cast<int>(o));
        if (!t || od.erased) continue;
        ordered_json e;
        e["closed"] = s.objs[o].closed;
        e["owner"] = obj_name(m, s.objs[o].owner);
        for (std::size_t f = 0; f < t->fields.size(); ++f)
            e[t->fields[f].name] = value_json(m, s.objs[o].fields[f]);
        j[od.name] = std::move(e);
    }
    return j;
}

}  // namespace detail

inline ordered_json explore_json(const Model& m, const Report& rep) {
    ordered_json j;
    j["mode"] = "explore";
    j["verdict"] = rep.verdict;
    ordered_json fs = ordered_json::array();
    for (const Finding& f : rep.findings) fs.push_back(detail::finding_json(m, f));
    j["findings"] = std::move(fs);
    ordered_json st;
    st["configs"] = rep.stats.configs;
    st["transitions"] = rep.stats.transitions;
    st["env_moves"] = rep.stats.env_moves;
    st["pruned"] = rep.stats.pruned;
    st["dedup_hits"] = rep.stats.dedup_hits;
    st["max_time"] = rep.stats.max_time.str();
    st["hit_config_cap"] = rep.stats.hit_config_cap;
    j["stats"] = std::move(st);
    return j;
}

inline ordered_json admissible_json(const Model& m, const AdmissResult& r) {
    ordered_json j;
    j["mode"] = "admissible";
    j["type"] = r.type_name;
    if (!r.error.empty()) {
        j["verdict"] = "error";
        j["error"] = r.error;
        return j;
    }
    j["verdict"] = r.admissible ? "admissible" : "inadmissible";
    if (!r.admissible) {
        j["condition"] = r.condition;
        j["clause"] = r.clause;
        ordered_json cex;
        cex["pre"] = detail::state_json(m, r.cex.pre);
        cex["post"] = detail::state_json(m, r.cex.post);
        cex["actor"] = detail::obj_name(m, r.cex.actor);
        j["counterexample"] = std::move(cex);
    }
    j["pairs_evaluated"] = r.pairs_evaluated;
    j["good_prestates"] = r.good_pres;
    return j;
}

inline std::string explore_human(const Model& m, const Report& rep) {
    std::string out = "verdict: " + rep.verdict + "\n";
    for (const Finding& f : rep.findings) {
        out += "finding: " + f.info.kind;
        if (f.info.obj >= 0) out += " object=" + detail::obj_name(m, f.info.obj);
        if (!f.info.code.empty()) out += " code=" + f.info.code;
        if (!f.info.clause.empty()) out += "\n  clause: " + f.info.clause;
        if (f.info.pos.line) out += "\n  at line " + std::to_string(f.info.pos.line);
        out += "\n";
        for (const TransRec& r : f.trace) {
            out += "  step by " + detail::obj_name(m, r.actor) + ":";
            if (r.deltas.empty()) out += " (stutter)";
            for (const FieldDelta& d : r.deltas)
                out += " " + detail::obj_name(m, d.obj) + "." +
                       detail::field_name(m, d.obj, d.field) + " " +
                       detail::value_str(m, d.oldv) + "->" + detail::value_str(m, d.newv);
            out += "\n";
        }
    }
    out += "configs: " + std::to_string(rep.stats.configs) +
           ", transitions: " + std::to_string(rep.stats.transitions) +
           ", env moves: " + std::to_string(rep.stats.env_moves) +
           ", pruned: " + std::to_string(rep.stats.pruned) +
           ", dedup hits: " + std::to_string(rep.stats.dedup_hits) +
           ", max time: " + rep.stats.max_time.str() + "\n";
    return out;
}

inline std::string admissible_human(const Model& m, const AdmissResult& r) {
    if (!r.error.empty()) return "error: " + r.error + "\n";
    std::string out = "type " + r.type_name + ": " +
                      (r.admissible ? "admissible" : "inadmissible") + "\n";
    if (!r.admissible) {
        out += "violated condition " + std::to_string(r.condition) + ", clause: " +
               r.clause + "\n";
        out += "counterexample (actor " + detail::obj_name(m, r.cex.actor) + "):\n";
        Kernel k(m);
        for (std::size_t o = 0; o < m.objects.size(); ++o) {
            const TypeDecl* t = m.type_of(static_cast<int>(o));
            if (!t || m.objects[o].kind == ObjKind::Thread ||
                m.objects[o].kind == ObjKind::Env)
                continue;
            const ObjectState& a = r.cex.pre.objs[o];
            const ObjectState& b = r.cex.post.objs[o];
            out += "  " + m.objects[o].name + ": closed " +
                   (a.closed ? "true" : "false") + "->" + (b.closed ? "true" : "false") +
                   ", owner " + detail::obj_name(m, a.owner) + "->" +
                   detail::obj_name(m, b.owner);
            for (std::size_t f = 0; f < t->fields.size(); ++f)
                out += ", " + t->fields[f].name + " " +
                       detail::value_str(m, a.fields[f]) + "->" +
                       detail::value_str(m, b.fields[f]);
            out += "\n";
        }
    }
    out += "pairs evaluated: " + std::to_string(r.pairs_evaluated) +
           ", good prestates: " + std::to_string(r.good_pres) + "\n";
    return out;
}

}  // namespace chronoverify
