#pragma once

#include "chronoverify/base.hpp"

#include <cctype>
#include <string>
#include <vector>

namespace chronoverify {

struct Token {
    enum Kind { Ident, IntLit, Punct, End };
    Kind kind = End;
    std::string text;
    Int ival;
    SourcePos pos;
};

// Hand-rolled scanner for the model language. `//` comments run to end of
// line; multi-char operators are matched longest-first.
class Lexer {
public:
    explicit Lexer(const std::string& src) : src_(src) {}

    std::vector<Token> run(Diagnostics& diag) {
        std::vector<Token> out;
        while (true) {
            skip_ws();
            SourcePos pos{line_, col_};
            if (i_ >= src_.size()) {
                out.push_back({Token::End, "", 0, pos});
                return out;
            }
            char c = src_[i_];
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                std::string s;
                while (i_ < src_.size() &&
                       (std::isalnum(static_cast<unsigned char>(src_[i_])) || src_[i_] == '_'))
                    s += advance();
                out.push_back({Token::Ident, s, 0, pos});
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c))) {
                std::string s;
                while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_])))
                    s += advance();
                Token t{Token::IntLit, s, Int(s), pos};
                out.push_back(std::move(t));
                continue;
            }
            static const char* multi[] = {"==>", "::", "==", "!=", "<=", ">=", "&&", "||", ".."};
            bool matched = false;
            for (const char* op : multi) {
                std::size_t n = std::char_traits<char>::length(op);
                if (src_.compare(i_, n, op) == 0) {
                    for (std::size_t k = 0; k < n; ++k) advance();
                    out.push_back({Token::Punct, op, 0, pos});
                    matched = true;
                    break;
                }
            }
            if (matched) continue;
            if (std::string("{}()[];,:.=<>+-*!?").find(c) != std::string::npos) {
                out.push_back({Token::Punct, std::string(1, advance()), 0, pos});
                continue;
            }
            diag.error("E_LEX", std::string("unexpected character '") + c + "'", pos);
            advance();
        }
    }

private:
    char advance() {
        char c = src_[i_++];
        if (c == '\n') {
            line_++;
            col_ = 1;
        } else {
            col_++;
        }
        return c;
    }

    void skip_ws() {
        while (i_ < src_.size()) {
            char c = src_[i_];
            if (c == '/' && i_ + 1 < src_.size() && src_[i_ + 1] == '/') {
                while (i_ < src_.size() && src_[i_] != '\n') advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    const std::string& src_;
    std::size_t i_ = 0;
    int line_ = 1;
    int col_ = 1;
};

}  // namespace chronoverify
