#include <catch2/catch_amalgamated.hpp>

#include <chronoverify/admissibility.hpp>

#include "helpers.hpp"

using namespace chronoverify;

namespace {

AdmissOptions ctrl_ranges() {
    AdmissOptions opt;
    opt.ranges["time.cur"] = RangeSpec{0, 4, 1};
    opt.ranges["d.t"] = RangeSpec{0, 4, 1};
    opt.ranges["ctrl.deadline"] = RangeSpec{0, 4, 1};
    opt.ranges["boiler.level"] = RangeSpec{64, 72, 2};
    return opt;
}

}  // namespace

TEST_CASE("Deadline is admissible on its tiny universe", "[admissibility]") {
    Model m = testutil::load_corpus("universe_deadline.tvk");
    AdmissOptions opt;
    opt.ranges["time.cur"] = RangeSpec{0, 3, 1};
    opt.ranges["d.t"] = RangeSpec{0, 3, 1};
    AdmissResult r = check_admissibility(m, "Deadline", opt);
    REQUIRE(r.error.empty());
    CHECK(r.admissible);
    CHECK(r.good_pres > 0);
}

TEST_CASE("Timer is admissible on its tiny universe", "[admissibility]") {
    Model m = testutil::load_corpus("universe_timer.tvk");
    AdmissOptions opt;
    opt.ranges["time.cur"] = RangeSpec{0, 3, 1};
    opt.ranges["tm.t"] = RangeSpec{0, 3, 1};
    AdmissResult r = check_admissibility(m, "Timer", opt);
    REQUIRE(r.error.empty());
    CHECK(r.admissible);
}

TEST_CASE("Boiler is admissible on its tiny universe", "[admissibility]") {
    Model m = testutil::load_corpus("universe_boiler.tvk");
    AdmissOptions opt;
    opt.ranges["time.cur"] = RangeSpec{0, 3, 1};
    opt.ranges["boiler.level"] = RangeSpec{28, 72, 4};
    AdmissResult r = check_admissibility(m, "Boiler", opt);
    REQUIRE(r.error.empty());
    CHECK(r.admissible);
}

TEST_CASE("the full controller is admissible", "[admissibility]") {
    Model m = testutil::load_corpus("boiler_deadline.tvk");
    AdmissResult r = check_admissibility(m, "BoilerCtrl", ctrl_ranges());
    REQUIRE(r.error.empty());
    CHECK(r.admissible);
}

TEST_CASE("dropping the couplings makes the controller inadmissible", "[admissibility]") {
    Model m = testutil::load_corpus("mutants/missing_coupling.tvk");
    AdmissResult r = check_admissibility(m, "BoilerCtrl", ctrl_ranges());
    REQUIRE(r.error.empty());
    REQUIRE_FALSE(r.admissible);
    CHECK(r.condition == 1);

    // The counterexample is a pure time advance by the environment.
    CHECK(r.cex.actor == m.env_obj);
    int fcur = m.types[static_cast<std::size_t>(m.time_type)].field_index("cur");
    CHECK(r.cex.post.get(m.time_obj, fcur).i > r.cex.pre.get(m.time_obj, fcur).i);
}

TEST_CASE("evidence is monotone in the enumerated ranges", "[admissibility]") {
    Model m = testutil::load_corpus("mutants/missing_coupling.tvk");
    AdmissResult small = check_admissibility(m, "BoilerCtrl", ctrl_ranges());
    REQUIRE_FALSE(small.admissible);

    AdmissOptions wide = ctrl_ranges();
    wide.ranges["boiler.level"] = RangeSpec{60, 72, 2};
    wide.ranges["time.cur"] = RangeSpec{0, 5, 1};
    wide.ranges["d.t"] = RangeSpec{0, 5, 1};
    wide.ranges["ctrl.deadline"] = RangeSpec{0, 5, 1};
    wide.max_pairs = 100000000;
    AdmissResult r = check_admissibility(m, "BoilerCtrl", wide);
    REQUIRE(r.error.empty());
    // A violation found at the small ranges persists at any superset.
    CHECK_FALSE(r.admissible);
    CHECK(r.pairs_evaluated >= small.pairs_evaluated);
}

TEST_CASE("an unranged unbounded field is rejected, not guessed", "[admissibility]") {
    Model m = testutil::load_corpus("universe_deadline.tvk");
    AdmissOptions opt;  // no ranges for time.cur / d.t
    AdmissResult r = check_admissibility(m, "Deadline", opt);
    CHECK(r.error.rfind("E_UNBOUNDED", 0) == 0);
    CHECK_FALSE(r.admissible);
}

TEST_CASE("the pair budget aborts cleanly", "[admissibility]") {
    Model m = testutil::load_corpus("boiler_deadline.tvk");
    AdmissOptions opt = ctrl_ranges();
    opt.max_pairs = 100;
    AdmissResult r = check_admissibility(m, "BoilerCtrl", opt);
    CHECK(r.error.rfind("E_TOO_LARGE", 0) == 0);
}

TEST_CASE("an unknown type name is an error", "[admissibility]") {
    Model m = testutil::load_corpus("universe_deadline.tvk");
    AdmissResult r = check_admissibility(m, "Nope", AdmissOptions{});
    CHECK_FALSE(r.error.empty());
}
