// JSON and QASM-subset readers/writers for Circuit.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "qexpr/circuit.hpp"
#include "qexpr/error.hpp"

namespace qexpr {

namespace {

using nlohmann::json;

std::pair<std::size_t, std::size_t> line_col(std::string_view text,
                                             std::size_t offset) {
    offset = std::min(offset, text.size());
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < offset; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

[[noreturn]] void json_fail(std::string_view text, const std::string &needle,
                            const std::string &msg) {
    const auto pos = needle.empty() ? std::string_view::npos : text.find(needle);
    const auto [l, c] = line_col(text, pos == std::string_view::npos ? 0 : pos);
    throw ParseError(msg, l, c);
}

std::string format_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

// ---------------------------------------------------------------- JSON

Circuit parse_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error &e) {
        const auto [l, c] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
        throw ParseError(e.what(), l, c);
    }
    if (!doc.is_object() || !doc.contains("n_qubits") ||
        !doc["n_qubits"].is_number_integer()) {
        json_fail(text, "", "expected object with integer \"n_qubits\"");
    }
    if (!doc.contains("gates") || !doc["gates"].is_array()) {
        json_fail(text, "", "expected array \"gates\"");
    }
    Circuit circuit(doc["n_qubits"].get<int>());
    const auto &gates = doc["gates"];
    for (std::size_t i = 0; i < gates.size(); ++i) {
        const auto &g = gates[i];
        const std::string where = "gates[" + std::to_string(i) + "]: ";
        if (!g.is_object() || !g.contains("kind") || !g["kind"].is_string()) {
            json_fail(text, "", where + "missing string \"kind\"");
        }
        const auto name = g["kind"].get<std::string>();
        const auto kind = gate_from_name(name);
        if (!kind) {
            json_fail(text, "\"" + name + "\"", where + "unknown gate " + name);
        }
        if (!g.contains("qubits") || !g["qubits"].is_array()) {
            json_fail(text, "", where + "missing array \"qubits\"");
        }
        std::vector<int> qs;
        for (const auto &q : g["qubits"]) {
            if (!q.is_number_integer()) {
                json_fail(text, "", where + "qubit indices must be integers");
            }
            qs.push_back(q.get<int>());
        }
        if (qs.size() != arity(*kind)) {
            throw Error(ErrorKind::Validation,
                        where + name + " expects " +
                            std::to_string(arity(*kind)) + " qubit(s)");
        }
        Param p{};
        if (g.contains("param") && !g["param"].is_null()) {
            const auto &pj = g["param"];
            if (pj.contains("sym") && pj["sym"].is_number_unsigned()) {
                p = Symbol{pj["sym"].get<std::size_t>()};
            } else if (pj.contains("val") && pj["val"].is_number()) {
                p = pj["val"].get<double>();
            } else {
                json_fail(text, "", where + "param must be {\"sym\"} or {\"val\"}");
            }
        }
        circuit.add(qs.size() == 1 ? Gate::one(*kind, qs[0], p)
                                   : Gate::two(*kind, qs[0], qs[1], p));
    }
    if (doc.contains("n_params")) {
        if (!doc["n_params"].is_number_unsigned()) {
            json_fail(text, "\"n_params\"", "\"n_params\" must be non-negative");
        }
        const auto declared = doc["n_params"].get<std::size_t>();
        if (declared < circuit.n_params()) {
            throw Error(ErrorKind::Validation,
                        "n_params smaller than largest symbol index");
        }
        circuit.set_n_params(declared);
    }
    circuit.validate();
    return circuit;
}

json gate_to_json(const Gate &g) {
    json j;
    j["kind"] = std::string(gate_name(g.kind));
    j["qubits"] = json::array();
    for (int q : g.qubits()) {
        j["qubits"].push_back(q);
    }
    if (const auto *s = std::get_if<Symbol>(&g.param)) {
        j["param"] = {{"sym", s->index}};
    } else if (const auto *v = std::get_if<double>(&g.param)) {
        j["param"] = {{"val", *v}};
    } else {
        j["param"] = nullptr;
    }
    return j;
}

std::string serialize_json(const Circuit &c) {
    json doc;
    doc["n_qubits"] = c.n_qubits();
    doc["n_params"] = c.n_params();
    doc["gates"] = json::array();
    for (const auto &g : c.gates()) {
        doc["gates"].push_back(gate_to_json(g));
    }
    return doc.dump();
}

// ---------------------------------------------------------------- QASM

enum class Tok { Ident, Number, String, Punct, End };

struct Token {
    Tok type = Tok::End;
    std::string text;
    std::size_t line = 1;
    std::size_t col = 1;
};

class Lexer {
  public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            skip_space();
            Token t;
            t.line = line_;
            t.col = col_;
            if (pos_ >= src_.size()) {
                out.push_back(t);
                return out;
            }
            const char ch = src_[pos_];
            if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_') {
                t.type = Tok::Ident;
                while (pos_ < src_.size() &&
                       (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
                        src_[pos_] == '_')) {
                    t.text += advance();
                }
            } else if (std::isdigit(static_cast<unsigned char>(ch)) ||
                       (ch == '.' && pos_ + 1 < src_.size() &&
                        std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
                t.type = Tok::Number;
                while (pos_ < src_.size()) {
                    const char c = src_[pos_];
                    const bool exp_sign =
                        (c == '+' || c == '-') && !t.text.empty() &&
                        (t.text.back() == 'e' || t.text.back() == 'E');
                    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' ||
                        c == 'e' || c == 'E' || exp_sign) {
                        t.text += advance();
                    } else {
                        break;
                    }
                }
            } else if (ch == '"') {
                t.type = Tok::String;
                advance();
                while (pos_ < src_.size() && src_[pos_] != '"') {
                    t.text += advance();
                }
                if (pos_ >= src_.size()) {
                    throw ParseError("unterminated string", t.line, t.col);
                }
                advance();
            } else if (ch == '-' && pos_ + 1 < src_.size() &&
                       src_[pos_ + 1] == '>') {
                t.type = Tok::Punct;
                t.text = "->";
                advance();
                advance();
            } else if (std::string_view("[](),;*/+-").find(ch) !=
                       std::string_view::npos) {
                t.type = Tok::Punct;
                t.text = std::string(1, advance());
            } else {
                throw ParseError(std::string("unexpected character '") + ch + "'",
                                 t.line, t.col);
            }
            out.push_back(std::move(t));
        }
    }

  private:
    char advance() {
        const char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void skip_space() {
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else if (c == '/' && pos_ + 1 < src_.size() &&
                       src_[pos_ + 1] == '/') {
                while (pos_ < src_.size() && src_[pos_] != '\n') {
                    advance();
                }
            } else {
                return;
            }
        }
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
    std::size_t col_ = 1;
};

std::optional<GateKind> qasm_gate(std::string_view name) {
    if (name == "id" || name == "i") {
        return GateKind::I;
    }
    if (name == "cnot") {
        return GateKind::CX;
    }
    if (name == "measure") {
        return std::nullopt;
    }
    for (char c : name) {
        if (std::isupper(static_cast<unsigned char>(c))) {
            return std::nullopt;
        }
    }
    return gate_from_name(name);
}

class QasmParser {
  public:
    explicit QasmParser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    Circuit run() {
        expect_ident("OPENQASM");
        const Token &ver = next();
        if (ver.type != Tok::Number || (ver.text != "2.0" && ver.text != "3.0" &&
                                        ver.text != "2" && ver.text != "3")) {
            fail("unsupported OPENQASM version", ver);
        }
        expect_punct(";");
        std::optional<Circuit> circuit;
        while (peek().type != Tok::End) {
            const Token &t = next();
            if (t.type != Tok::Ident) {
                fail("expected statement", t);
            }
            if (t.text == "include") {
                if (next().type != Tok::String) {
                    fail("expected file name", toks_[pos_ - 1]);
                }
                expect_punct(";");
            } else if (t.text == "qreg") {
                if (circuit) {
                    fail("only one quantum register is supported", t);
                }
                qreg_ = expect(Tok::Ident, "register name").text;
                expect_punct("[");
                const Token &n = expect(Tok::Number, "register size");
                expect_punct("]");
                expect_punct(";");
                const int size = to_int(n);
                if (size < 1 || size > kMaxQubits) {
                    throw Error(ErrorKind::Validation,
                                "register size must be in 1.." +
                                    std::to_string(kMaxQubits));
                }
                circuit.emplace(size);
            } else if (t.text == "creg") {
                creg_ = expect(Tok::Ident, "register name").text;
                expect_punct("[");
                expect(Tok::Number, "register size");
                expect_punct("]");
                expect_punct(";");
            } else if (t.text == "measure") {
                require_reg(circuit, t);
                measure(*circuit);
            } else {
                require_reg(circuit, t);
                gate(*circuit, t);
            }
        }
        if (!circuit) {
            throw ParseError("missing qreg declaration", 1, 1);
        }
        circuit->validate();
        return *circuit;
    }

  private:
    const Token &peek() const { return toks_[pos_]; }
    const Token &next() {
        const Token &t = toks_[pos_];
        if (t.type != Tok::End) {
            ++pos_;
        }
        return t;
    }

    [[noreturn]] static void fail(const std::string &msg, const Token &t) {
        throw ParseError(msg + (t.type == Tok::End ? " at end of input"
                                                   : " near '" + t.text + "'"),
                         t.line, t.col);
    }

    const Token &expect(Tok type, const std::string &what) {
        const Token &t = next();
        if (t.type != type) {
            fail("expected " + what, t);
        }
        return t;
    }
    void expect_punct(std::string_view p) {
        const Token &t = next();
        if (t.type != Tok::Punct || t.text != p) {
            fail("expected '" + std::string(p) + "'", t);
        }
    }
    void expect_ident(std::string_view id) {
        const Token &t = next();
        if (t.type != Tok::Ident || t.text != id) {
            fail("expected '" + std::string(id) + "'", t);
        }
    }
    static int to_int(const Token &t) {
        int v = 0;
        const auto *b = t.text.data();
        const auto *e = b + t.text.size();
        const auto [p, ec] = std::from_chars(b, e, v);
        if (ec != std::errc() || p != e) {
            fail("expected integer", t);
        }
        return v;
    }
    void require_reg(const std::optional<Circuit> &c, const Token &t) const {
        if (!c) {
            fail("gate before qreg declaration", t);
        }
    }

    int qarg(const Circuit &c) {
        const Token &name = expect(Tok::Ident, "qubit register");
        if (name.text != qreg_) {
            fail("unknown register", name);
        }
        expect_punct("[");
        const int idx = to_int(expect(Tok::Number, "qubit index"));
        expect_punct("]");
        if (idx < 0 || idx >= c.n_qubits()) {
            throw Error(ErrorKind::Validation,
                        "qubit " + std::to_string(idx) + " out of range for " +
                            std::to_string(c.n_qubits()) + "-qubit register");
        }
        return idx;
    }

    void measure(Circuit &c) {
        if (peek().type == Tok::Ident && pos_ + 1 < toks_.size() &&
            toks_[pos_ + 1].text == "->") {
            // whole-register form: measure q -> c;
            const Token &name = next();
            if (name.text != qreg_) {
                fail("unknown register", name);
            }
            expect_punct("->");
            expect(Tok::Ident, "classical register");
            expect_punct(";");
            for (int q = 0; q < c.n_qubits(); ++q) {
                c.add(Gate::one(GateKind::MEASURE, q));
            }
            return;
        }
        const int q = qarg(c);
        expect_punct("->");
        expect(Tok::Ident, "classical register");
        expect_punct("[");
        expect(Tok::Number, "bit index");
        expect_punct("]");
        expect_punct(";");
        c.add(Gate::one(GateKind::MEASURE, q));
    }

    void gate(Circuit &c, const Token &name) {
        const auto kind = qasm_gate(name.text);
        if (!kind || *kind == GateKind::MEASURE) {
            fail("unknown gate", name);
        }
        Param p{};
        if (peek().type == Tok::Punct && peek().text == "(") {
            const Token &open = next();
            if (!is_parameterized(*kind)) {
                fail("gate takes no parameter", open);
            }
            p = param();
            expect_punct(")");
        } else if (is_parameterized(*kind)) {
            fail("missing parameter", peek());
        }
        std::array<int, 2> qs{};
        for (std::size_t i = 0; i < arity(*kind); ++i) {
            if (i > 0) {
                expect_punct(",");
            }
            qs[i] = qarg(c);
        }
        expect_punct(";");
        if (arity(*kind) == 2 && qs[0] == qs[1]) {
            throw Error(ErrorKind::Validation,
                        "gate on line " + std::to_string(name.line) +
                            " repeats a qubit");
        }
        c.add(arity(*kind) == 1 ? Gate::one(*kind, qs[0], p)
                                : Gate::two(*kind, qs[0], qs[1], p));
    }

    // A symbol may only stand alone: theta[3]
    Param param() {
        const Token &t = peek();
        if (t.type == Tok::Ident && t.text != "pi" && pos_ + 1 < toks_.size() &&
            toks_[pos_ + 1].text == "[") {
            next();
            next();
            const int idx = to_int(expect(Tok::Number, "symbol index"));
            expect_punct("]");
            if (idx < 0) {
                fail("negative symbol index", t);
            }
            return Symbol{static_cast<std::size_t>(idx)};
        }
        return expr();
    }

    double expr() {
        double v = term();
        while (peek().type == Tok::Punct &&
               (peek().text == "+" || peek().text == "-")) {
            const bool plus = next().text == "+";
            const double r = term();
            v = plus ? v + r : v - r;
        }
        return v;
    }

    double term() {
        double v = factor();
        while (peek().type == Tok::Punct &&
               (peek().text == "*" || peek().text == "/")) {
            const bool mul = next().text == "*";
            const double r = factor();
            v = mul ? v * r : v / r;
        }
        return v;
    }

    double factor() {
        const Token &t = next();
        if (t.type == Tok::Punct && t.text == "-") {
            return -factor();
        }
        if (t.type == Tok::Punct && t.text == "+") {
            return factor();
        }
        if (t.type == Tok::Punct && t.text == "(") {
            const double v = expr();
            expect_punct(")");
            return v;
        }
        if (t.type == Tok::Ident && t.text == "pi") {
            return std::numbers::pi;
        }
        if (t.type == Tok::Number) {
            double v = 0.0;
            const auto *b = t.text.data();
            const auto *e = b + t.text.size();
            const auto [p, ec] = std::from_chars(b, e, v);
            if (ec != std::errc() || p != e) {
                fail("malformed number", t);
            }
            return v;
        }
        fail("expected expression", t);
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::string qreg_;
    std::string creg_;
};

std::string serialize_qasm(const Circuit &c) {
    std::ostringstream out;
    out << "OPENQASM 2.0;\ninclude \"qelib1.inc\";\n";
    out << "qreg q[" << c.n_qubits() << "];\n";
    if (c.has_measure()) {
        out << "creg c[" << c.n_qubits() << "];\n";
    }
    for (const auto &g : c.gates()) {
        if (g.kind == GateKind::MEASURE) {
            out << "measure q[" << g.q[0] << "] -> c[" << g.q[0] << "];\n";
            continue;
        }
        std::string name(gate_name(g.kind));
        std::transform(name.begin(), name.end(), name.begin(),
                       [](unsigned char ch) { return std::tolower(ch); });
        if (g.kind == GateKind::I) {
            name = "id";
        }
        out << name;
        if (const auto *s = std::get_if<Symbol>(&g.param)) {
            out << "(theta[" << s->index << "])";
        } else if (const auto *v = std::get_if<double>(&g.param)) {
            out << "(" << format_double(*v) << ")";
        }
        const auto qs = g.qubits();
        for (std::size_t i = 0; i < qs.size(); ++i) {
            out << (i == 0 ? " " : ", ") << "q[" << qs[i] << "]";
        }
        out << ";\n";
    }
    return out.str();
}

} // namespace

Circuit parse_circuit(std::string_view text, Format format) {
    if (format == Format::Json) {
        return parse_json(text);
    }
    Lexer lexer(text);
    QasmParser parser(lexer.run());
    return parser.run();
}

std::string serialize_circuit(const Circuit &circuit, Format format) {
    return format == Format::Json ? serialize_json(circuit)
                                  : serialize_qasm(circuit);
}

Circuit load_circuit_file(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorKind::Io, "cannot open " + path);
    }
    std::stringstream buf;
    buf << in.rdbuf();
    const bool qasm = path.size() >= 5 && path.substr(path.size() - 5) == ".qasm";
    return parse_circuit(buf.str(), qasm ? Format::Qasm : Format::Json);
}

} // namespace qexpr
