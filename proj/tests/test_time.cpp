#include <catch2/catch_amalgamated.hpp>

#include <chronoverify/kernel.hpp>
#include <chronoverify/state.hpp>

#include "helpers.hpp"

using namespace chronoverify;

namespace {

// A timed cell whose only dynamics-free field makes any time advance with
// the cell closed and unchanged an invariant question for the cell itself.
const char* kTimedModel = R"(
type Probe timed {
    volatile time limit;
    invariant T <= limit;
}
object p : Probe { limit = 10; closed = true; owner = main; }
thread main { skip; }
)";

struct Fix {
    Model m;
    Kernel k;
    int time_o, p, fcur, ftimed, flimit;

    Fix()
        : m(testutil::load(kTimedModel)),
          k(m),
          time_o(m.time_obj),
          p(m.find_object("p")),
          fcur(m.types[static_cast<std::size_t>(m.time_type)].field_index("cur")),
          ftimed(m.types[static_cast<std::size_t>(m.time_type)].field_index("timed")),
          flimit(m.types[static_cast<std::size_t>(m.objects[static_cast<std::size_t>(p)].type)]
                     .field_index("limit")) {}
};

}  // namespace

TEST_CASE("time only moves forward", "[time]") {
    Fix f;
    State pre = initial_state(f.m);
    pre.at(f.time_o, f.fcur) = Value::of_time(5);
    State post = pre;

    post.at(f.time_o, f.fcur) = Value::of_time(5);
    CHECK(f.k.check_time_clauses(Transition{pre, post, f.m.env_obj}).ok);

    post.at(f.time_o, f.fcur) = Value::of_time(6);
    CHECK(f.k.check_time_clauses(Transition{pre, post, f.m.env_obj}).ok);

    post.at(f.time_o, f.fcur) = Value::of_time(4);
    TimeClauseResult r = f.k.check_time_clauses(Transition{pre, post, f.m.env_obj});
    CHECK_FALSE(r.ok);
    CHECK(r.clause == 0);
}

TEST_CASE("timed registration is stable unless the object tolerates leaving", "[time]") {
    Fix f;
    State pre = initial_state(f.m);
    // p is closed and of a timed type: seeded into the timed map.
    REQUIRE(pre.get(f.time_o, f.ftimed).set[static_cast<std::size_t>(f.p)]);

    // Dropping a still-closed timed object from the map breaks its
    // registration clause, so stability rejects the deregistration.
    State post = pre;
    post.at(f.time_o, f.ftimed).set[static_cast<std::size_t>(f.p)] = 0;
    TimeClauseResult r = f.k.check_time_clauses(Transition{pre, post, f.m.env_obj});
    CHECK_FALSE(r.ok);
    CHECK(r.clause == 1);
    CHECK(r.witness == f.p);

    // Opening the object on the same edge is the sanctioned way to leave.
    State post2 = post;
    post2.objs[static_cast<std::size_t>(f.p)].closed = false;
    TimeClauseResult r2 = f.k.check_time_clauses(Transition{pre, post2, f.m.env_obj});
    CHECK(r2.ok);
}

TEST_CASE("time cannot advance past a closed timed object's tolerance", "[time]") {
    Fix f;
    State pre = initial_state(f.m);
    State post = pre;

    // Advance to the limit: inv2(p) still holds.
    post.at(f.time_o, f.fcur) = Value::of_time(10);
    CHECK(f.k.check_time_clauses(Transition{pre, post, f.m.env_obj}).ok);

    // Past the limit: the respects-timed clause fails with p as witness.
    post.at(f.time_o, f.fcur) = Value::of_time(11);
    TimeClauseResult r = f.k.check_time_clauses(Transition{pre, post, f.m.env_obj});
    CHECK_FALSE(r.ok);
    CHECK(r.clause == 2);
    CHECK(r.witness == f.p);

    // An open object does not restrict time.
    State pre2 = pre;
    pre2.objs[static_cast<std::size_t>(f.p)].closed = false;
    pre2.at(f.time_o, f.ftimed).set[static_cast<std::size_t>(f.p)] = 0;
    State post2 = pre2;
    post2.at(f.time_o, f.fcur) = Value::of_time(11);
    CHECK(f.k.check_time_clauses(Transition{pre2, post2, f.m.env_obj}).ok);
}

TEST_CASE("time clauses are part of legality", "[time]") {
    Fix f;
    State pre = initial_state(f.m);
    State post = pre;
    post.at(f.time_o, f.fcur) = Value::of_time(11);
    Legality leg = f.k.is_legal_transition(Transition{pre, post, f.m.env_obj});
    CHECK_FALSE(leg.legal);
}
