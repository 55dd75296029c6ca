// chronoverify: bounded verification of timed object models.

#include "chronoverify/parser.hpp"
#include "chronoverify/report.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace cv = chronoverify;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFindings = 1;
constexpr int kExitUsage = 2;
constexpr int kExitInconclusive = 3;

std::optional<std::string> slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::optional<cv::Model> load(const std::string& path) {
    auto src = slurp(path);
    if (!src) {
        std::cerr << "error: cannot read " << path << "\n";
        return std::nullopt;
    }
    cv::Diagnostics diag;
    auto m = cv::load_model(*src, diag);
    if (!m) {
        std::cerr << diag.render();
        return std::nullopt;
    }
    return m;
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path);
    out << text;
}

bool parse_range(const std::string& spec, std::string& key, cv::RangeSpec& r) {
    auto eq = spec.find('=');
    if (eq == std::string::npos) return false;
    key = spec.substr(0, eq);
    std::string rest = spec.substr(eq + 1);
    auto dots = rest.find("..");
    if (dots == std::string::npos) return false;
    std::string hi = rest.substr(dots + 2);
    cv::Int step = 1;
    if (auto colon = hi.find(':'); colon != std::string::npos) {
        step = cv::Int(hi.substr(colon + 1));
        hi = hi.substr(0, colon);
    }
    try {
        r = {cv::Int(rest.substr(0, dots)), cv::Int(hi), step};
    } catch (...) {
        return false;
    }
    return r.step > 0;
}

struct ExploreFlags {
    cv::Bounds bounds;
    std::string format = "human";
    std::string out;
    bool skip_elim = false;
};

int run_explore(const cv::Model& m, const ExploreFlags& f) {
    cv::Explorer ex(m, f.bounds);
    cv::Report rep = ex.explore();

    cv::ElimResult elim;
    bool elim_ran = false;
    if (rep.verdict == "pass" && !f.skip_elim) {
        elim = cv::deadline_elimination_check(m, f.bounds);
        elim_ran = true;
    }

    if (f.format == "structured") {
        cv::ordered_json j = cv::explore_json(m, rep);
        if (elim_ran)
            j["elimination"] = {{"match", elim.pass},
                                {"only_full", elim.only_base},
                                {"only_eliminated", elim.only_elim}};
        emit(j.dump(2) + "\n", f.out);
    } else {
        std::string text = cv::explore_human(m, rep);
        if (elim_ran)
            text += std::string("deadline elimination: ") +
                    (elim.pass ? "projections match" : "projections differ") + "\n";
        emit(text, f.out);
    }

    if (rep.verdict == "inconclusive") return kExitInconclusive;
    if (rep.verdict != "pass") return kExitFindings;
    if (elim_ran && !elim.pass) return kExitFindings;
    return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"chronoverify: explicit-time object-invariant model checker"};
    app.require_subcommand(1);

    std::string path, format = "human", out, type_name;
    cv::Bounds bounds;
    long long max_dt = 4, loop_bound = 100;
    std::uint64_t seed = 0;
    std::size_t steps = 200;
    std::size_t max_pairs = 10000000;
    std::vector<std::string> range_specs;
    bool skip_elim = false;

    auto add_common = [&](CLI::App* c, bool with_bounds) {
        c->add_option("model", path, "model file (.tvk)")->required();
        c->add_option("--format", format, "human|structured")
            ->check(CLI::IsMember({"human", "structured"}));
        c->add_option("--out", out, "write the report to a file");
        if (with_bounds) {
            c->add_option("--max-dt", max_dt, "largest single time advance");
            c->add_option("--max-configs", bounds.max_configs, "configuration cap");
            c->add_option("--loop-bound", loop_bound, "override all loop bounds");
            c->add_option("--env-moves", bounds.max_env_moves,
                          "env moves per rest point");
        }
    };

    CLI::App* check = app.add_subcommand("check", "parse and sort-check a model");
    add_common(check, false);

    CLI::App* explore = app.add_subcommand("explore", "bounded exhaustive exploration");
    add_common(explore, true);
    explore->add_flag("--skip-elim", skip_elim,
                      "skip the deadline elimination cross-check");

    CLI::App* adm = app.add_subcommand("admissible", "brute-force type admissibility");
    add_common(adm, false);
    adm->add_option("--type", type_name, "type to check")->required();
    adm->add_option("--range", range_specs,
                    "enumeration range obj.field=LO..HI[:STEP] (repeatable)");
    adm->add_option("--max-pairs", max_pairs, "pair enumeration cap");

    CLI::App* sim = app.add_subcommand("simulate", "seeded random walk");
    add_common(sim, true);
    sim->add_option("--seed", seed, "random seed");
    sim->add_option("--steps", steps, "walk length");

    CLI::App* corpus = app.add_subcommand("corpus", "run the bundled fixtures");
    std::string corpus_dir = "corpus";
    corpus->add_option("dir", corpus_dir, "corpus directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help exits 0; any real usage error maps to the usage exit code.
        return app.exit(e) == 0 ? 0 : kExitUsage;
    }
    bounds.max_dt = max_dt;
    bounds.loop_bound = loop_bound;

    if (check->parsed()) {
        auto m = load(path);
        if (!m) return kExitUsage;
        emit(cv::print_model(*m), out);
        return kExitPass;
    }

    if (explore->parsed()) {
        auto m = load(path);
        if (!m) return kExitUsage;
        cv::apply_loop_bound(*m, bounds.loop_bound);
        ExploreFlags f{bounds, format, out, skip_elim};
        return run_explore(*m, f);
    }

    if (adm->parsed()) {
        auto m = load(path);
        if (!m) return kExitUsage;
        cv::AdmissOptions opt;
        opt.max_pairs = max_pairs;
        for (const std::string& spec : range_specs) {
            std::string key;
            cv::RangeSpec r;
            if (!parse_range(spec, key, r)) {
                std::cerr << "error: bad range '" << spec << "'\n";
                return kExitUsage;
            }
            opt.ranges[key] = r;
        }
        cv::AdmissResult res = cv::check_admissibility(*m, type_name, opt);
        if (format == "structured")
            emit(cv::admissible_json(*m, res).dump(2) + "\n", out);
        else
            emit(cv::admissible_human(*m, res), out);
        if (!res.error.empty()) return kExitUsage;
        return res.admissible ? kExitPass : kExitFindings;
    }

    if (sim->parsed()) {
        auto m = load(path);
        if (!m) return kExitUsage;
        cv::apply_loop_bound(*m, bounds.loop_bound);
        cv::Explorer ex(*m, bounds);
        cv::Report rep = ex.simulate(seed, steps);
        if (format == "structured")
            emit(cv::explore_json(*m, rep).dump(2) + "\n", out);
        else
            emit(cv::explore_human(*m, rep), out);
        return rep.verdict == "pass" ? kExitPass : kExitFindings;
    }

    // corpus: every fixture must reproduce its expected verdict.
    auto manifest_src = slurp(corpus_dir + "/manifest.json");
    if (!manifest_src) {
        std::cerr << "error: cannot read " << corpus_dir << "/manifest.json\n";
        return kExitUsage;
    }
    cv::ordered_json manifest;
    try {
        manifest = cv::ordered_json::parse(*manifest_src);
    } catch (const std::exception& e) {
        std::cerr << "error: bad manifest: " << e.what() << "\n";
        return kExitUsage;
    }

    int failures = 0;
    for (const auto& entry : manifest.at("fixtures")) {
        std::string file = entry.at("file").get<std::string>();
        std::string command = entry.at("command").get<std::string>();
        std::string expect = entry.at("expect").get<std::string>();
        auto m = load(corpus_dir + "/" + file);
        std::string got = "parse-error";
        std::string detail;
        if (m) {
            if (command == "explore") {
                cv::Bounds b;
                if (entry.contains("loop_bound"))
                    b.loop_bound = cv::Int(entry["loop_bound"].get<long long>());
                cv::apply_loop_bound(*m, b.loop_bound);
                cv::Explorer ex(*m, b);
                cv::Report rep = ex.explore();
                got = rep.verdict;
                if (!rep.findings.empty()) detail = rep.findings.front().info.kind;
                if (entry.contains("finding_kind") &&
                    detail != entry["finding_kind"].get<std::string>())
                    got = "wrong-finding:" + detail;
            } else if (command == "admissible") {
                cv::AdmissOptions opt;
                if (entry.contains("max_pairs"))
                    opt.max_pairs = entry["max_pairs"].get<std::size_t>();
                if (entry.contains("ranges"))
                    for (const auto& [key, val] : entry["ranges"].items()) {
                        cv::RangeSpec r;
                        std::string k2;
                        if (!parse_range(key + "=" + val.get<std::string>(), k2, r)) {
                            std::cerr << "error: bad manifest range for " << key << "\n";
                            return kExitUsage;
                        }
                        opt.ranges[k2] = r;
                    }
                cv::AdmissResult res =
                    cv::check_admissibility(*m, entry.at("type").get<std::string>(), opt);
                got = !res.error.empty() ? "error"
                      : res.admissible   ? "admissible"
                                         : "inadmissible";
            } else {
                got = "bad-command";
            }
        }
        bool ok = got == expect;
        if (!ok) failures++;
        std::cout << (ok ? "ok   " : "FAIL ") << file << ": expected " << expect
                  << ", got " << got;
        if (!detail.empty()) std::cout << " (" << detail << ")";
        std::cout << "\n";
    }
    return failures == 0 ? kExitPass : kExitFindings;
}
