#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <chronoverify/parser.hpp>

namespace testutil {

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Parses a model that the test requires to be well-formed.
inline chronoverify::Model load(const std::string& source) {
    chronoverify::Diagnostics diag;
    auto m = chronoverify::load_model(source, diag);
    if (!m) throw std::runtime_error("fixture failed to load:\n" + diag.render());
    return *m;
}

inline chronoverify::Model load_corpus(const std::string& rel) {
    return load(slurp(std::string(CHRONOVERIFY_CORPUS_DIR) + "/" + rel));
}

inline std::string corpus_path(const std::string& rel) {
    return std::string(CHRONOVERIFY_CORPUS_DIR) + "/" + rel;
}

}  // namespace testutil
