#pragma once

#include <cctype>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rhlq/model.hpp"

namespace rhlq::io {

using la::Matrix;
using la::SymMatrix;
using la::Vector;

// ---------------------------------------------------------------------------
// configuration documents: one canonical schema, two encodings (key = value
// text with nested numeric arrays, or JSON carrying the same keys)
// ---------------------------------------------------------------------------

struct ConfigValue {
    enum class Kind { Number, String, Array };
    Kind kind = Kind::Number;
    double number = 0.0;
    std::string text;
    std::vector<ConfigValue> items;
    int line = 0;
};

struct ConfigDoc {
    std::vector<std::pair<std::string, ConfigValue>> entries;

    const ConfigValue* find(const std::string& key) const {
        for (const auto& [k, v] : entries)
            if (k == key) return &v;
        return nullptr;
    }
    bool has(const std::string& key) const { return find(key) != nullptr; }
};

namespace detail {

struct Token {
    enum class Kind { Ident, Number, LBracket, RBracket, Comma, Equals, End };
    Kind kind;
    std::string text;
    double number = 0.0;
    int line = 1;
};

inline std::vector<Token> tokenize(const std::string& text) {
    std::vector<Token> out;
    int line = 1;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c == '\n') {
            ++line;
            ++i;
        } else if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == '#') {
            while (i < text.size() && text[i] != '\n') ++i;
        } else if (c == '[') {
            out.push_back({Token::Kind::LBracket, "[", 0.0, line});
            ++i;
        } else if (c == ']') {
            out.push_back({Token::Kind::RBracket, "]", 0.0, line});
            ++i;
        } else if (c == ',') {
            out.push_back({Token::Kind::Comma, ",", 0.0, line});
            ++i;
        } else if (c == '=') {
            out.push_back({Token::Kind::Equals, "=", 0.0, line});
            ++i;
        } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' ||
                   c == '.') {
            std::size_t end = i;
            while (end < text.size() && (std::isalnum(static_cast<unsigned char>(text[end])) ||
                                         text[end] == '.' || text[end] == '-' ||
                                         text[end] == '+')) {
                // stop a number token before a sign that is not an exponent sign
                if ((text[end] == '-' || text[end] == '+') && end > i &&
                    !(text[end - 1] == 'e' || text[end - 1] == 'E'))
                    break;
                ++end;
            }
            const std::string lit = text.substr(i, end - i);
            char* parse_end = nullptr;
            const double v = std::strtod(lit.c_str(), &parse_end);
            if (parse_end == nullptr || *parse_end != '\0')
                throw ConfigError("line " + std::to_string(line) + ": bad number '" + lit + "'");
            out.push_back({Token::Kind::Number, lit, v, line});
            i = end;
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t end = i;
            while (end < text.size() && (std::isalnum(static_cast<unsigned char>(text[end])) ||
                                         text[end] == '_' || text[end] == '-' ||
                                         text[end] == '.'))
                ++end;
            out.push_back({Token::Kind::Ident, text.substr(i, end - i), 0.0, line});
            i = end;
        } else {
            throw ConfigError("line " + std::to_string(line) + ": unexpected character '" +
                              std::string(1, c) + "'");
        }
    }
    out.push_back({Token::Kind::End, "", 0.0, line});
    return out;
}

inline ConfigValue parse_value(const std::vector<Token>& toks, std::size_t& pos) {
    const Token& t = toks[pos];
    ConfigValue v;
    v.line = t.line;
    switch (t.kind) {
        case Token::Kind::Number:
            v.kind = ConfigValue::Kind::Number;
            v.number = t.number;
            ++pos;
            return v;
        case Token::Kind::Ident:
            v.kind = ConfigValue::Kind::String;
            v.text = t.text;
            ++pos;
            return v;
        case Token::Kind::LBracket: {
            v.kind = ConfigValue::Kind::Array;
            ++pos;
            bool expect_item = true;
            while (true) {
                if (toks[pos].kind == Token::Kind::RBracket) {
                    ++pos;
                    return v;
                }
                if (!expect_item) {
                    if (toks[pos].kind != Token::Kind::Comma)
                        throw ConfigError("line " + std::to_string(toks[pos].line) +
                                          ": expected ',' or ']'");
                    ++pos;
                }
                if (toks[pos].kind == Token::Kind::RBracket) {  // trailing comma
                    ++pos;
                    return v;
                }
                v.items.push_back(parse_value(toks, pos));
                expect_item = false;
            }
        }
        default:
            throw ConfigError("line " + std::to_string(t.line) + ": expected a value");
    }
}

inline ConfigValue from_json(const nlohmann::json& j) {
    ConfigValue v;
    if (j.is_number()) {
        v.kind = ConfigValue::Kind::Number;
        v.number = j.get<double>();
    } else if (j.is_string()) {
        v.kind = ConfigValue::Kind::String;
        v.text = j.get<std::string>();
    } else if (j.is_array()) {
        v.kind = ConfigValue::Kind::Array;
        for (const auto& item : j) v.items.push_back(from_json(item));
    } else {
        throw ConfigError("JSON values must be numbers, strings or arrays");
    }
    return v;
}

}  // namespace detail

inline ConfigDoc parse_config_text(const std::string& text) {
    const auto toks = detail::tokenize(text);
    ConfigDoc doc;
    std::size_t pos = 0;
    while (toks[pos].kind != detail::Token::Kind::End) {
        if (toks[pos].kind != detail::Token::Kind::Ident)
            throw ConfigError("line " + std::to_string(toks[pos].line) + ": expected a key");
        const std::string key = toks[pos].text;
        const int line = toks[pos].line;
        ++pos;
        if (toks[pos].kind != detail::Token::Kind::Equals)
            throw ConfigError("line " + std::to_string(toks[pos].line) + ": expected '=' after '" +
                              key + "'");
        ++pos;
        ConfigValue v = detail::parse_value(toks, pos);
        v.line = line;
        if (doc.has(key)) throw ConfigError("line " + std::to_string(line) + ": duplicate key '" +
                                            key + "'");
        doc.entries.emplace_back(key, std::move(v));
    }
    return doc;
}

inline ConfigDoc parse_config_json(const std::string& text) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("JSON parse error: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("JSON config must be an object");
    ConfigDoc doc;
    for (const auto& [key, value] : j.items()) {
        if (doc.has(key)) throw ConfigError("duplicate key '" + key + "'");
        doc.entries.emplace_back(key, detail::from_json(value));
    }
    return doc;
}

/// Sniffs the encoding: a document whose first meaningful character is '{'
/// is JSON, anything else is the key = value text form.
inline ConfigDoc parse_config(const std::string& text) {
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        return c == '{' ? parse_config_json(text) : parse_config_text(text);
    }
    return ConfigDoc{};
}

// ---------------------------------------------------------------------------
// schema extraction
// ---------------------------------------------------------------------------

inline Matrix as_matrix(const ConfigValue& v, const std::string& key) {
    if (v.kind != ConfigValue::Kind::Array || v.items.empty())
        throw ConfigError("key '" + key + "': expected an array of rows");
    const std::size_t rows = v.items.size();
    const auto& first = v.items.front();
    if (first.kind != ConfigValue::Kind::Array || first.items.empty())
        throw ConfigError("key '" + key + "': expected nested rows of numbers");
    const std::size_t cols = first.items.size();
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto& row = v.items[i];
        if (row.kind != ConfigValue::Kind::Array || row.items.size() != cols)
            throw ConfigError("key '" + key + "': ragged rows");
        for (std::size_t j = 0; j < cols; ++j) {
            if (row.items[j].kind != ConfigValue::Kind::Number)
                throw ConfigError("key '" + key + "': matrix entries must be numbers");
            m(i, j) = row.items[j].number;
        }
    }
    m.check_finite();
    return m;
}

inline Vector as_vector(const ConfigValue& v, const std::string& key) {
    if (v.kind != ConfigValue::Kind::Array)
        throw ConfigError("key '" + key + "': expected an array of numbers");
    Vector out(v.items.size());
    for (std::size_t i = 0; i < v.items.size(); ++i) {
        if (v.items[i].kind != ConfigValue::Kind::Number)
            throw ConfigError("key '" + key + "': entries must be numbers");
        out[i] = v.items[i].number;
    }
    return out;
}

inline double as_number(const ConfigValue& v, const std::string& key) {
    if (v.kind != ConfigValue::Kind::Number)
        throw ConfigError("key '" + key + "': expected a number");
    return v.number;
}

inline std::size_t as_count(const ConfigValue& v, const std::string& key) {
    const double d = as_number(v, key);
    if (d < 0.0 || d != static_cast<double>(static_cast<std::size_t>(d)))
        throw ConfigError("key '" + key + "': expected a nonnegative integer");
    return static_cast<std::size_t>(d);
}

inline std::string as_string(const ConfigValue& v, const std::string& key) {
    if (v.kind != ConfigValue::Kind::String)
        throw ConfigError("key '" + key + "': expected a name");
    return v.text;
}

// ---------------------------------------------------------------------------
// problem schema: A, B, Q, S, R, Pf, optional Lambda, optional C, D, e
// ---------------------------------------------------------------------------

struct ParsedProblem {
    model::LqProblem problem;
    std::optional<model::StorageMatrix> storage;
    std::optional<model::AffineConstraintSet> constraints;
};

inline const std::vector<std::string>& problem_keys() {
    static const std::vector<std::string> keys = {"A", "B", "Q", "S", "R",
                                                  "Pf", "Lambda", "C", "D", "e"};
    return keys;
}

inline ParsedProblem problem_from_config(const ConfigDoc& doc) {
    auto require = [&](const std::string& key) -> const ConfigValue& {
        const ConfigValue* v = doc.find(key);
        if (!v) throw ConfigError("missing required key '" + key + "'");
        return *v;
    };
    const Matrix a = as_matrix(require("A"), "A");
    const Matrix b = as_matrix(require("B"), "B");
    model::LinearSystem sys(a, b);
    SymMatrix q, r, pf;
    try {
        q = SymMatrix(as_matrix(require("Q"), "Q"));
        r = SymMatrix(as_matrix(require("R"), "R"));
        pf = SymMatrix(as_matrix(require("Pf"), "Pf"));
    } catch (const DimensionError& e) {
        throw ConfigError(std::string("Q, R and Pf must be symmetric: ") + e.what());
    }
    model::StageCost cost(q, as_matrix(require("S"), "S"), r);
    ParsedProblem out{model::LqProblem(std::move(sys), std::move(cost),
                                       model::TerminalCost{pf}),
                      std::nullopt, std::nullopt};
    if (doc.has("Lambda")) {
        try {
            out.storage = model::StorageMatrix{SymMatrix(as_matrix(*doc.find("Lambda"), "Lambda"))};
        } catch (const DimensionError& e) {
            throw ConfigError(std::string("Lambda must be symmetric: ") + e.what());
        }
    }
    const bool any_cons = doc.has("C") || doc.has("D") || doc.has("e");
    if (any_cons) {
        if (!(doc.has("C") && doc.has("D") && doc.has("e")))
            throw ConfigError("constraints need all three keys 'C', 'D' and 'e'");
        out.constraints = model::AffineConstraintSet(as_matrix(*doc.find("C"), "C"),
                                                     as_matrix(*doc.find("D"), "D"),
                                                     as_vector(*doc.find("e"), "e"));
    }
    return out;
}

// ---------------------------------------------------------------------------
// deterministic serialization
// ---------------------------------------------------------------------------

/// Shortest representation that round-trips the double exactly.
inline std::string format_number(double v) {
    char buf[40];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_matrix_literal(const Matrix& m) {
    std::string out = "[";
    for (std::size_t i = 0; i < m.rows(); ++i) {
        out += i == 0 ? "[" : " [";
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j) out += ", ";
            out += format_number(m(i, j));
        }
        out += i + 1 < m.rows() ? "]," : "]";
    }
    return out + "]";
}

inline std::string format_vector_literal(const Vector& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ", ";
        out += format_number(v[i]);
    }
    return out + "]";
}

/// Flattened row-major entries for a CSV cell.
inline std::string flatten(const Matrix& m) {
    std::string out;
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (!out.empty()) out += ';';
            out += format_number(m(i, j));
        }
    return out;
}

/// Canonical text form of a problem; re-parses to the identical problem.
inline std::string dump_problem(const ParsedProblem& p) {
    std::string out;
    out += "A = " + format_matrix_literal(p.problem.sys.A) + "\n";
    out += "B = " + format_matrix_literal(p.problem.sys.B) + "\n";
    out += "Q = " + format_matrix_literal(p.problem.cost.Q.matrix()) + "\n";
    out += "S = " + format_matrix_literal(p.problem.cost.S) + "\n";
    out += "R = " + format_matrix_literal(p.problem.cost.R.matrix()) + "\n";
    out += "Pf = " + format_matrix_literal(p.problem.terminal.Pf.matrix()) + "\n";
    if (p.storage) out += "Lambda = " + format_matrix_literal(p.storage->Lambda.matrix()) + "\n";
    if (p.constraints) {
        out += "C = " + format_matrix_literal(p.constraints->C) + "\n";
        out += "D = " + format_matrix_literal(p.constraints->D) + "\n";
        out += "e = " + format_vector_literal(p.constraints->e) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// result tables
// ---------------------------------------------------------------------------

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};

inline std::string to_csv(const Table& t) {
    std::string out;
    for (std::size_t j = 0; j < t.columns.size(); ++j) {
        if (j) out += ',';
        out += t.columns[j];
    }
    out += '\n';
    for (const auto& row : t.rows) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out += ',';
            out += row[j];
        }
        out += '\n';
    }
    return out;
}

inline nlohmann::ordered_json table_to_json(const Table& t) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& row : t.rows) {
        nlohmann::ordered_json obj;
        for (std::size_t j = 0; j < t.columns.size() && j < row.size(); ++j)
            obj[t.columns[j]] = row[j];
        rows.push_back(std::move(obj));
    }
    return rows;
}

}  // namespace rhlq::io
