#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace chronoverify {

// Unbounded integers everywhere; model arithmetic never wraps.
using Int = boost::multiprecision::cpp_int;

struct SourcePos {
    int line = 0;
    int col = 0;
};

inline std::string to_string(const SourcePos& p) {
    return std::to_string(p.line) + ":" + std::to_string(p.col);
}

struct Diagnostic {
    std::string code;
    std::string message;
    SourcePos pos;
};

// Collects parse/check errors in source order; reporting stops at a cap so a
// cascade of follow-on errors does not drown the first real one.
class Diagnostics {
public:
    static constexpr std::size_t kMax = 20;

    void error(std::string code, std::string message, SourcePos pos) {
        if (items_.size() < kMax)
            items_.push_back({std::move(code), std::move(message), pos});
        count_++;
    }

    bool ok() const { return count_ == 0; }
    std::size_t total() const { return count_; }
    const std::vector<Diagnostic>& items() const { return items_; }

    std::string render() const {
        std::string out;
        for (const auto& d : items_) {
            out += to_string(d.pos) + ": error [" + d.code + "] " + d.message + "\n";
        }
        return out;
    }

private:
    std::vector<Diagnostic> items_;
    std::size_t count_ = 0;
};

// Raised by the evaluator for model bugs that slip past static checks
// (e.g. a field access through an objref pointing at an object that lacks
// the field). Surfaced to callers as a diagnostic, never as a crash.
struct EvalError : std::runtime_error {
    SourcePos pos;
    EvalError(const std::string& msg, SourcePos p) : std::runtime_error(msg), pos(p) {}
};

}  // namespace chronoverify
