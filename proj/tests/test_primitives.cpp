#include <catch2/catch_amalgamated.hpp>

#include <chronoverify/explorer.hpp>
#include <chronoverify/kernel.hpp>

#include "helpers.hpp"

using namespace chronoverify;

namespace {

struct Fix {
    Model m;
    Kernel k;
    int time_o, d, owner, fcur, ftimed, ft;

    explicit Fix(const char* file, const char* obj)
        : m(testutil::load_corpus(file)),
          k(m),
          time_o(m.time_obj),
          d(m.find_object(obj)),
          owner(m.find_object("main")),
          fcur(m.types[static_cast<std::size_t>(m.time_type)].field_index("cur")),
          ftimed(m.types[static_cast<std::size_t>(m.time_type)].field_index("timed")),
          ft(m.type_of(d)->field_index("t")) {}

    // Closed, registered primitive at expiry point t with clock at cur.
    State armed(const Int& t, const Int& cur) const {
        State s = initial_state(m);
        s.objs[static_cast<std::size_t>(d)].closed = true;
        s.at(time_o, ftimed).set[static_cast<std::size_t>(d)] = 1;
        s.at(d, ft) = Value::of_time(t);
        s.at(time_o, fcur) = Value::of_time(cur);
        return s;
    }
};

}  // namespace

TEST_CASE("deadline retarget legality matches the brute-force oracle", "[primitives]") {
    Fix f("universe_deadline.tvk", "d");
    // Owner-actor transitions that only rewrite d.t, exhaustively over a
    // small grid. Oracle: the expiry point may change only while T < t
    // (freeze), and the invariant T <= t' must hold afterwards.
    for (Int t = 0; t <= 3; ++t) {
        for (Int cur = 0; cur <= t; ++cur) {
            State pre = f.armed(t, cur);
            REQUIRE(f.k.is_good_state(pre).ok);
            for (Int t2 = 0; t2 <= 6; ++t2) {
                State post = pre;
                post.at(f.d, f.ft) = Value::of_time(t2);
                bool legal =
                    f.k.is_legal_transition(Transition{pre, post, f.owner}).legal;
                bool oracle = (t2 == t || cur < t) && cur <= t2;
                INFO("t=" << t << " cur=" << cur << " t'=" << t2);
                CHECK(legal == oracle);
            }
        }
    }
}

TEST_CASE("timer retarget has no freeze clause", "[primitives]") {
    Fix f("universe_timer.tvk", "tm");
    for (Int t = 0; t <= 3; ++t) {
        for (Int cur = 0; cur <= t; ++cur) {
            State pre = f.armed(t, cur);
            REQUIRE(f.k.is_good_state(pre).ok);
            for (Int t2 = 0; t2 <= 6; ++t2) {
                State post = pre;
                post.at(f.d, f.ft) = Value::of_time(t2);
                bool legal =
                    f.k.is_legal_transition(Transition{pre, post, f.owner}).legal;
                bool oracle = cur <= t2;  // only the T <= t invariant
                INFO("t=" << t << " cur=" << cur << " t'=" << t2);
                CHECK(legal == oracle);
            }
        }
    }
}

TEST_CASE("an armed deadline blocks time at its expiry point", "[primitives]") {
    Fix f("universe_deadline.tvk", "d");
    State pre = f.armed(3, 2);
    State post = pre;
    post.at(f.time_o, f.fcur) = Value::of_time(3);
    CHECK(f.k.is_legal_transition(Transition{pre, post, f.m.env_obj}).legal);
    post.at(f.time_o, f.fcur) = Value::of_time(4);
    CHECK_FALSE(f.k.is_legal_transition(Transition{pre, post, f.m.env_obj}).legal);
}

TEST_CASE("destroying at the expiry point is reported, resetting earlier is fine",
          "[primitives]") {
    Model m = testutil::load(R"(
object d : Deadline { owner = main; }
thread main {
    deadline_new d 2;
    atomic { skip; }
    deadline_destroy d;
}
)");
    Explorer ex(m, Bounds{});
    Report rep = ex.explore();
    REQUIRE(rep.verdict == "fail");
    REQUIRE_FALSE(rep.findings.empty());
    CHECK(rep.findings.front().info.kind == "deadline-expired");

    // The Timer twin has no destruction duty: time is merely capped at t.
    Model mt = testutil::load(R"(
object tm : Timer { owner = main; }
thread main {
    timer_new tm 2;
    atomic { skip; }
    timer_destroy tm;
}
)");
    Explorer ext(mt, Bounds{});
    CHECK(ext.explore().verdict == "pass");
}

TEST_CASE("a deadline left alive at scope exit leaks its obligation", "[primitives]") {
    Model m = testutil::load(R"(
object d : Deadline { owner = main; }
thread main {
    deadline_new d 50;
    atomic { skip; }
}
)");
    Explorer ex(m, Bounds{});
    Report rep = ex.explore();
    REQUIRE(rep.verdict == "fail");
    REQUIRE_FALSE(rep.findings.empty());
    CHECK(rep.findings.front().info.kind == "obligation-leak");
}
