#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "vesselwatch/csv.hpp"
#include "vesselwatch/error.hpp"
#include "vesselwatch/geo.hpp"

namespace vesselwatch::anomaly {

// Ground atom.
struct Fact {
    std::string predicate;
    std::vector<std::string> args;

    friend auto operator<=>(const Fact&, const Fact&) = default;
};

inline std::string to_string(const Fact& f) {
    std::string s = f.predicate;
    if (!f.args.empty()) {
        s += '(';
        for (std::size_t i = 0; i < f.args.size(); ++i) s += (i ? ", " : "") + f.args[i];
        s += ')';
    }
    return s;
}

struct Term {
    std::string text;
    bool is_variable = false;

    friend bool operator==(const Term&, const Term&) = default;
};

struct Atom {
    std::string predicate;
    std::vector<Term> args;
};

struct Literal {
    Atom atom;
    bool negated = false;
    std::size_t line = 0;
    std::size_t column = 0;
};

struct Rule {
    Atom head;
    std::vector<Literal> body;
    std::size_t line = 0;
};

struct Program {
    std::vector<Fact> facts;
    std::vector<Rule> rules;
};

namespace detail {

class ClauseParser {
public:
    ClauseParser(std::string_view text, std::size_t line) : s_(text), line_(line) {}

    [[noreturn]] void fail(const std::string& msg) const {
        throw InputError("line " + std::to_string(line_) + " col " + std::to_string(pos_ + 1) + ": " + msg);
    }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool eat(std::string_view tok) {
        skip_ws();
        if (s_.substr(pos_, tok.size()) == tok) {
            pos_ += tok.size();
            return true;
        }
        return false;
    }

    static bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

    Term term() {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == '"') {
            const std::size_t end = s_.find('"', pos_ + 1);
            if (end == std::string_view::npos) fail("unterminated string");
            Term t{std::string(s_.substr(pos_ + 1, end - pos_ - 1)), false};
            pos_ = end + 1;
            return t;
        }
        const std::size_t start = pos_;
        while (pos_ < s_.size() && ident_char(s_[pos_])) ++pos_;
        if (start == pos_) fail("expected a term");
        const char c = s_[start];
        return {std::string(s_.substr(start, pos_ - start)), std::isupper(static_cast<unsigned char>(c)) || c == '_'};
    }

    Atom atom() {
        skip_ws();
        const std::size_t start = pos_;
        if (pos_ >= s_.size() || !std::islower(static_cast<unsigned char>(s_[pos_]))) fail("expected a predicate name");
        while (pos_ < s_.size() && ident_char(s_[pos_])) ++pos_;
        Atom a{std::string(s_.substr(start, pos_ - start)), {}};
        if (eat("(")) {
            do {
                a.args.push_back(term());
            } while (eat(","));
            if (!eat(")")) fail("expected ')'");
        }
        return a;
    }

    Literal literal() {
        skip_ws();
        Literal lit;
        lit.line = line_;
        if (s_.substr(pos_, 4) == "not " || s_.substr(pos_, 4) == "not\t") {
            pos_ += 4;
            lit.negated = true;
        }
        skip_ws();
        lit.column = pos_ + 1;
        lit.atom = atom();
        return lit;
    }

    // Returns a rule; a bodyless clause comes back with an empty body.
    Rule clause() {
        Rule r;
        r.line = line_;
        r.head = atom();
        if (eat(":-")) {
            do {
                r.body.push_back(literal());
            } while (eat(","));
        }
        if (!eat(".")) fail("expected '.' at end of clause");
        skip_ws();
        if (pos_ != s_.size()) fail("unexpected text after clause");
        return r;
    }

private:
    std::string_view s_;
    std::size_t line_;
    std::size_t pos_ = 0;
};

inline std::string_view strip_comment(std::string_view line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

} // namespace detail

// Checks range restriction and facts-only negation; throws with the offending position.
inline void check_program(const Program& p) {
    std::set<std::string> idb;
    for (const auto& r : p.rules) idb.insert(r.head.predicate);
    for (const auto& r : p.rules) {
        std::set<std::string> bound;
        for (const auto& lit : r.body) {
            if (lit.negated) continue;
            for (const auto& t : lit.atom.args) {
                if (t.is_variable && t.text != "_") bound.insert(t.text);
            }
        }
        for (const auto& t : r.head.args) {
            if (t.is_variable && !bound.count(t.text)) {
                throw InputError("line " + std::to_string(r.line) + ": head variable " + t.text +
                                 " does not appear in a positive body literal");
            }
        }
        for (const auto& lit : r.body) {
            if (!lit.negated) continue;
            const std::string where = "line " + std::to_string(lit.line) + " col " + std::to_string(lit.column) + ": ";
            if (idb.count(lit.atom.predicate)) {
                throw InputError(where + "negation over derived predicate " + lit.atom.predicate);
            }
            for (const auto& t : lit.atom.args) {
                if (t.is_variable && !bound.count(t.text)) {
                    throw InputError(where + "variable " + t.text + " in negated literal is not bound");
                }
            }
        }
    }
}

inline Program parse_program(std::string_view text) {
    Program prog;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        const auto body = csv::trim(detail::strip_comment(text.substr(start, end - start)));
        if (!body.empty()) {
            Rule r = detail::ClauseParser(body, line_no).clause();
            if (r.body.empty()) {
                Fact f{r.head.predicate, {}};
                for (const auto& t : r.head.args) {
                    if (t.is_variable) {
                        throw InputError("line " + std::to_string(line_no) + ": fact has variable " + t.text);
                    }
                    f.args.push_back(t.text);
                }
                prog.facts.push_back(std::move(f));
            } else {
                prog.rules.push_back(std::move(r));
            }
        }
        start = end + 1;
    }
    check_program(prog);
    return prog;
}

namespace detail {

using Binding = std::vector<std::pair<std::string, std::string>>;

inline const std::string* lookup(const Binding& b, const std::string& var) {
    for (const auto& [k, v] : b) {
        if (k == var) return &v;
    }
    return nullptr;
}

// Extends `b` so that `atom` matches `fact`; false on mismatch.
inline bool unify(const Atom& atom, const Fact& fact, Binding& b) {
    if (atom.args.size() != fact.args.size()) return false;
    for (std::size_t i = 0; i < atom.args.size(); ++i) {
        const Term& t = atom.args[i];
        if (!t.is_variable) {
            if (t.text != fact.args[i]) return false;
        } else if (t.text == "_") {
            continue;
        } else if (const std::string* v = lookup(b, t.text)) {
            if (*v != fact.args[i]) return false;
        } else {
            b.emplace_back(t.text, fact.args[i]);
        }
    }
    return true;
}

inline Fact ground(const Atom& atom, const Binding& b) {
    Fact f{atom.predicate, {}};
    for (const auto& t : atom.args) f.args.push_back(t.is_variable ? *lookup(b, t.text) : t.text);
    return f;
}

using Index = std::map<std::string, std::vector<Fact>>;

} // namespace detail

struct InferenceStats {
    std::size_t productive_passes = 0; // passes that derived at least one new fact
};

// Least fixpoint by semi-naive forward chaining. Negated literals are tested against the input facts.
inline std::set<Fact> infer(const std::vector<Fact>& facts, const std::vector<Rule>& rules,
                            InferenceStats* stats = nullptr) {
    check_program({{}, rules});
    const std::set<Fact> input(facts.begin(), facts.end());
    std::set<Fact> all = input;
    detail::Index full, delta;
    for (const auto& f : all) {
        full[f.predicate].push_back(f);
        delta[f.predicate].push_back(f);
    }
    InferenceStats local;

    while (true) {
        std::set<Fact> fresh;
        for (const auto& rule : rules) {
            std::vector<const Literal*> pos, neg;
            for (const auto& lit : rule.body) (lit.negated ? neg : pos).push_back(&lit);

            // One literal reads from delta, the rest from the full set.
            for (std::size_t d = 0; d < pos.size(); ++d) {
                auto search = [&](auto&& self, std::size_t k, detail::Binding& b) -> void {
                    if (k == pos.size()) {
                        for (const Literal* n : neg) {
                            if (input.count(detail::ground(n->atom, b))) return;
                        }
                        Fact head = detail::ground(rule.head, b);
                        if (!all.count(head)) fresh.insert(std::move(head));
                        return;
                    }
                    const auto& src = (k == d) ? delta : full;
                    auto it = src.find(pos[k]->atom.predicate);
                    if (it == src.end()) return;
                    for (const Fact& f : it->second) {
                        const std::size_t mark = b.size();
                        if (detail::unify(pos[k]->atom, f, b)) self(self, k + 1, b);
                        b.resize(mark);
                    }
                };
                detail::Binding b;
                search(search, 0, b);
            }
        }
        if (fresh.empty()) break;
        ++local.productive_passes;
        delta.clear();
        for (const auto& f : fresh) {
            all.insert(f);
            full[f.predicate].push_back(f);
            delta[f.predicate].push_back(f);
        }
    }
    if (stats) *stats = local;
    return all;
}

struct Verdict {
    bool conflict = false;
    std::string reason; // empty when confirmed

    friend bool operator==(const Verdict&, const Verdict&) = default;
};

inline std::string class_atom(std::string_view class_name) { return "class" + std::string(class_name); }

// Runs the rules over the candidate's facts and reports the first derived conflict(pair, Reason).
inline Verdict verify_context(std::string_view pair_id, const std::vector<Fact>& facts, const std::vector<Rule>& rules) {
    const auto derived = infer(facts, rules);
    for (const auto& f : derived) {
        if (f.predicate == "conflict" && f.args.size() == 2 && f.args[0] == pair_id) return {true, f.args[1]};
    }
    return {};
}

struct ImpactTable {
    std::map<std::string, double> impact; // class name -> [0, 1]
    double conflict_impact = 0.5;

    void validate(const std::vector<std::string>& classes) const {
        auto in_range = [](double v) { return v >= 0.0 && v <= 1.0; };
        if (!in_range(conflict_impact)) throw InputError("impact table: conflict_impact outside [0, 1]");
        for (const auto& [k, v] : impact) {
            if (!in_range(v)) throw InputError("impact table: value for " + k + " outside [0, 1]");
        }
        for (const auto& c : classes) {
            if (!impact.count(c)) throw InputError("impact table: no entry for class " + c);
        }
    }
};

inline double calculate_impact(const Verdict& verdict, const std::string& detected, const ImpactTable& table) {
    auto it = table.impact.find(detected);
    if (it == table.impact.end()) throw InputError("impact table: no entry for class " + detected);
    return verdict.conflict ? std::max(it->second, table.conflict_impact) : it->second;
}

struct Alert {
    std::string candidate_id;
    std::string detected_class;
    Verdict verdict;
    double impact = 0.0;
    std::size_t rank = 0;
};

// Conflicts first, then impact descending, then candidate id. Ranks are 1..n.
inline std::vector<Alert> rank_alerts(std::vector<Alert> alerts) {
    std::sort(alerts.begin(), alerts.end(), [](const Alert& a, const Alert& b) {
        if (a.verdict.conflict != b.verdict.conflict) return a.verdict.conflict;
        if (a.impact != b.impact) return a.impact > b.impact;
        if (a.candidate_id != b.candidate_id) return a.candidate_id < b.candidate_id;
        return std::tie(a.detected_class, a.verdict.reason) < std::tie(b.detected_class, b.verdict.reason);
    });
    for (std::size_t i = 0; i < alerts.size(); ++i) alerts[i].rank = i + 1;
    return alerts;
}

inline void write_alerts_csv(std::ostream& out, const std::vector<Alert>& alerts) {
    out << "rank,pair,detected_class,verdict,reason,impact\n";
    for (const auto& a : alerts) {
        out << a.rank << ',' << a.candidate_id << ',' << a.detected_class << ','
            << (a.verdict.conflict ? "conflict" : "confirmed") << ',' << a.verdict.reason << ','
            << csv::format_double(a.impact) << '\n';
    }
}

struct Zone {
    std::string name;
    std::vector<geo::GeoPoint> vertices; // lat/lon polygon, implicitly closed
};

// Ray casting in (lon, lat); points on an edge or vertex count as inside.
inline bool point_in_polygon(geo::GeoPoint p, const std::vector<geo::GeoPoint>& poly) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const double xi = poly[i].lon, yi = poly[i].lat, xj = poly[j].lon, yj = poly[j].lat;
        const double cross = (xj - xi) * (p.lat - yi) - (yj - yi) * (p.lon - xi);
        if (std::abs(cross) <= 1e-12 && p.lon >= std::min(xi, xj) && p.lon <= std::max(xi, xj) &&
            p.lat >= std::min(yi, yj) && p.lat <= std::max(yi, yj)) {
            return true;
        }
        if ((yi > p.lat) != (yj > p.lat)) {
            const double x_cross = xi + (p.lat - yi) * (xj - xi) / (yj - yi);
            if (p.lon < x_cross) inside = !inside;
        }
    }
    return inside;
}

} // namespace vesselwatch::anomaly
