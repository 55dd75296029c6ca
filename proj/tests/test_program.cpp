#include <catch2/catch_amalgamated.hpp>

#include <chronoverify/program.hpp>

#include "helpers.hpp"

using namespace chronoverify;

namespace {

// Steps thread ti until it terminates or a finding appears, with no
// environment interference. Returns the final configuration.
Configuration run_alone(const Runner& r, Configuration c, std::size_t ti,
                        std::optional<RunFinding>* finding = nullptr) {
    while (!c.threads[ti].terminated) {
        StepResult res = r.step_thread(c, ti);
        REQUIRE_FALSE(res.pruned);
        if (res.finding) {
            if (finding) *finding = res.finding;
            return res.cfg;
        }
        c = std::move(res.cfg);
    }
    return c;
}

}  // namespace

TEST_CASE("wrap closes, unwrap opens and returns owned objects", "[program]") {
    Model m = testutil::load(R"(
type Box { int x; }
type Holder { objref b; invariant mine(b); }
object box : Box { x = 1; closed = true; owner = main; }
object h : Holder { b = box; owner = main; }
thread main {
    own box by h;
    atomic { skip; }
    wrap h;
    atomic { skip; }
    unwrap h;
    skip;
}
)");
    Runner r(m);
    int h = m.find_object("h");
    int box = m.find_object("box");
    int main_t = m.find_object("main");

    Configuration c = r.initial();
    // own box by h, up to the first boundary
    StepResult s1 = r.step_thread(c, 0);
    REQUIRE_FALSE(s1.finding.has_value());
    CHECK(s1.cfg.state.objs[static_cast<std::size_t>(box)].owner == h);

    // wrap h
    StepResult s2 = r.step_thread(s1.cfg, 0);
    REQUIRE_FALSE(s2.finding.has_value());
    CHECK(s2.cfg.state.objs[static_cast<std::size_t>(h)].closed);

    // unwrap h: h opens and its owned box comes back to the actor.
    StepResult s3 = r.step_thread(s2.cfg, 0);
    REQUIRE_FALSE(s3.finding.has_value());
    CHECK(s3.cfg.threads[0].terminated);
    CHECK_FALSE(s3.cfg.state.objs[static_cast<std::size_t>(h)].closed);
    CHECK(s3.cfg.state.objs[static_cast<std::size_t>(box)].owner == main_t);
}

TEST_CASE("wrapping an object whose invariant fails is a finding", "[program]") {
    Model m = testutil::load(R"(
type Cell { volatile int v in 0 .. 9; invariant v <= 5; }
object c : Cell { v = 7; owner = main; }
thread main { wrap c; }
)");
    Runner r(m);
    std::optional<RunFinding> finding;
    run_alone(r, r.initial(), 0, &finding);
    REQUIRE(finding.has_value());
    CHECK(finding->kind == "illegal-transition");
    CHECK(finding->clause == "v <= 5");
}

TEST_CASE("loop bodies run exactly the declared bound", "[program]") {
    Model m = testutil::load(R"(
type Ctr { volatile int n in 0 .. 100; }
object c : Ctr { n = 0; owner = main; }
thread main {
    loop 7 invariant true {
        atomic { c.n = c.n + 1; }
    }
    skip;
}
)");
    Runner r(m);
    Configuration c = run_alone(r, r.initial(), 0);
    CHECK(c.threads[0].terminated);
    int ci = m.find_object("c");
    CHECK(c.state.objs[static_cast<std::size_t>(ci)].fields[0].i == 7);
}

TEST_CASE("a failing loop invariant is a finding", "[program]") {
    Model m = testutil::load(R"(
type Ctr { volatile int n in 0 .. 100; }
object c : Ctr { n = 0; owner = main; }
thread main {
    loop 3 invariant c.n == 0 {
        atomic { c.n = c.n + 1; }
    }
}
)");
    Runner r(m);
    std::optional<RunFinding> finding;
    run_alone(r, r.initial(), 0, &finding);
    REQUIRE(finding.has_value());
    CHECK(finding->kind == "assertion-failure");
    CHECK(finding->code == "E_LOOP_INV");
}

TEST_CASE("deadline_new arms in two transitions and records an obligation", "[program]") {
    Model m = testutil::load(R"(
object d : Deadline { owner = main; }
thread main {
    deadline_new d 5;
    atomic { skip; }
    deadline_destroy d;
}
)");
    Runner r(m);
    Configuration c = r.initial();
    StepResult s1 = r.step_thread(c, 0);
    REQUIRE_FALSE(s1.finding.has_value());
    // Setting the expiry point while open, then closing: two transitions.
    CHECK(s1.recs.size() == 2);
    REQUIRE(s1.cfg.threads[0].obligations.size() == 1);
    CHECK(s1.cfg.threads[0].obligations[0].first == m.find_object("d"));

    StepResult s2 = r.step_thread(s1.cfg, 0);
    REQUIRE_FALSE(s2.finding.has_value());
    CHECK(s2.cfg.threads[0].terminated);
    CHECK(s2.cfg.threads[0].obligations.empty());
}

TEST_CASE("timer_record stores the current instant as a thread-local stamp", "[program]") {
    Model m = testutil::load(R"(
thread main {
    timer_record t0;
    assert elapsed(t0) == 0;
    skip;
}
)");
    Runner r(m);
    Configuration c = run_alone(r, r.initial(), 0);
    CHECK(c.threads[0].terminated);
    REQUIRE(c.threads[0].locals.count("t0") == 1);
    CHECK(c.threads[0].locals.at("t0").sort == Sort::Time);
}

TEST_CASE("a false assume prunes the branch instead of reporting", "[program]") {
    Model m = testutil::load("thread main { assume false; skip; }");
    Runner r(m);
    StepResult s = r.step_thread(r.initial(), 0);
    CHECK(s.pruned);
    CHECK_FALSE(s.finding.has_value());

    Model m2 = testutil::load("thread main { assert false; skip; }");
    Runner r2(m2);
    StepResult s2 = r2.step_thread(r2.initial(), 0);
    REQUIRE(s2.finding.has_value());
    CHECK(s2.finding->kind == "assertion-failure");
}

TEST_CASE("an atomic block commits as one transition", "[program]") {
    Model m = testutil::load(R"(
type Pair { volatile int a in 0 .. 9; volatile int b in 0 .. 9; invariant a == b; }
object p : Pair { a = 0; b = 0; closed = true; owner = main; }
thread main {
    atomic {
        p.a = 1;
        p.b = 1;
    }
    skip;
}
)");
    Runner r(m);
    Configuration c = r.initial();
    REQUIRE(r.at_atomic(c, 0));
    StepResult s = r.step_thread(c, 0);
    REQUIRE_FALSE(s.finding.has_value());
    // One committed transition carrying both writes; the intermediate
    // a != b state is never an observable prestate.
    CHECK(s.recs.size() == 1);
    CHECK(s.recs[0].deltas.size() == 2);
}
