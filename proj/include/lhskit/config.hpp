#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lhskit/dynamics.hpp"
#include "lhskit/report.hpp"

namespace lhskit {

// ---------------------------------------------------------------------------
// JSON run configuration. Parsing is strict: unknown keys are rejected with
// their JSON path so typos cannot silently disable a check.
// ---------------------------------------------------------------------------

struct StructureSpec {
    enum class Kind { TorusBundle, McDuff, Contactisation, Expressions };
    Kind kind = Kind::TorusBundle;
    std::string name = "torus_bundle";

    Eigen::Matrix2i matrix{};                     // torus_bundle
    std::vector<std::string> base_lambda;         // contactisation (defaults to p dq)

    // expression-defined structure
    Chart chart;
    std::vector<std::string> eta_exprs, beta_exprs;
    int n = 2;
    std::optional<DeckMap> deck;
};

struct FlowParams {
    double tau = 1.0;
    double step = 1e-3;
};

struct RunConfig {
    StructureSpec structure;
    GridSpec grid{{32}, 2048, 17};
    std::map<std::string, double> tolerances;
    double epsilon = 0.1;
    bool epsilon_auto = false;
    std::uint64_t seed = 17;
    int kmax = 4;
    FlowParams flow;

    double tol(const std::string& rule, double fallback) const {
        auto it = tolerances.find(rule);
        return it == tolerances.end() ? fallback : it->second;
    }
};

namespace cfgdetail {

using nlohmann::json;

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
    throw ConfigError(path, msg);
}

inline void expect_keys(const json& j, const std::string& path,
                        std::initializer_list<const char*> allowed) {
    if (!j.is_object()) fail(path, "expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) fail(path + "." + it.key(), "unknown key");
    }
}

inline double get_number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

inline std::string get_string(const json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

inline Chart parse_chart(const json& j, const std::string& path) {
    expect_keys(j, path, {"coords", "periodic", "bounds"});
    if (!j.contains("coords") || !j.contains("periodic") || !j.contains("bounds"))
        fail(path, "chart needs coords, periodic, bounds");
    std::vector<std::string> names;
    for (const auto& c : j.at("coords")) names.push_back(get_string(c, path + ".coords[]"));
    std::vector<bool> periodic;
    for (const auto& p : j.at("periodic")) {
        if (!p.is_boolean()) fail(path + ".periodic[]", "expected a boolean");
        periodic.push_back(p.get<bool>());
    }
    std::vector<std::array<double, 2>> bounds;
    for (const auto& b : j.at("bounds")) {
        if (!b.is_array() || b.size() != 2) fail(path + ".bounds[]", "expected [lo, hi]");
        bounds.push_back({get_number(b[0], path), get_number(b[1], path)});
    }
    try {
        return Chart(std::move(names), std::move(periodic), std::move(bounds));
    } catch (const Error& e) {
        fail(path, e.what());
    }
}

inline StructureSpec parse_structure(const json& j, const std::string& path) {
    StructureSpec s;
    if (j.contains("builtin")) {
        expect_keys(j, path, {"builtin", "matrix", "base_lambda"});
        std::string name = get_string(j.at("builtin"), path + ".builtin");
        s.name = name;
        if (name == "torus_bundle") {
            s.kind = StructureSpec::Kind::TorusBundle;
            if (!j.contains("matrix")) fail(path + ".matrix", "torus_bundle needs a 2x2 matrix");
            const auto& m = j.at("matrix");
            if (!m.is_array() || m.size() != 2 || !m[0].is_array() || m[0].size() != 2 ||
                m[1].size() != 2)
                fail(path + ".matrix", "expected [[a,b],[c,d]]");
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < 2; ++c) {
                    if (!m[r][c].is_number_integer())
                        fail(path + ".matrix", "entries must be integers");
                    s.matrix(r, c) = m[r][c].get<int>();
                }
        } else if (name == "mcduff") {
            s.kind = StructureSpec::Kind::McDuff;
        } else if (name == "contactisation") {
            s.kind = StructureSpec::Kind::Contactisation;
            if (j.contains("base_lambda"))
                for (const auto& e : j.at("base_lambda"))
                    s.base_lambda.push_back(get_string(e, path + ".base_lambda[]"));
        } else {
            fail(path + ".builtin", "unknown builtin '" + name + "'");
        }
        return s;
    }
    expect_keys(j, path, {"chart", "eta", "beta", "n", "deck"});
    if (!j.contains("chart") || !j.contains("eta") || !j.contains("beta"))
        fail(path, "expression-defined structure needs chart, eta, beta");
    s.kind = StructureSpec::Kind::Expressions;
    s.name = "custom";
    s.chart = parse_chart(j.at("chart"), path + ".chart");
    for (const auto& e : j.at("eta")) s.eta_exprs.push_back(get_string(e, path + ".eta[]"));
    for (const auto& e : j.at("beta")) s.beta_exprs.push_back(get_string(e, path + ".beta[]"));
    s.n = j.contains("n") ? j.at("n").get<int>() : 2;
    if (j.contains("deck")) {
        const auto& d = j.at("deck");
        expect_keys(d, path + ".deck", {"angle_map", "scale", "fiber_index", "angle_indices"});
        DeckMap deck;
        const auto& m = d.at("angle_map");
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) deck.angle_map(r, c) = m.at(r).at(c).get<int>();
        deck.scale = get_number(d.at("scale"), path + ".deck.scale");
        deck.fiber_index = d.contains("fiber_index") ? d.at("fiber_index").get<int>() : 2;
        if (d.contains("angle_indices")) {
            deck.angle_index[0] = d.at("angle_indices").at(0).get<int>();
            deck.angle_index[1] = d.at("angle_indices").at(1).get<int>();
        }
        s.deck = deck;
    }
    return s;
}

inline GridSpec parse_grid(const json& j, const std::string& path) {
    expect_keys(j, path, {"samples", "random_samples", "seed"});
    GridSpec g;
    g.samples = {32};
    if (j.contains("samples")) {
        const auto& s = j.at("samples");
        g.samples.clear();
        if (s.is_number_integer()) {
            g.samples.push_back(s.get<int>());
        } else if (s.is_array()) {
            for (const auto& e : s) g.samples.push_back(e.get<int>());
        } else {
            fail(path + ".samples", "expected an integer or an integer list");
        }
    }
    g.random_extra = j.contains("random_samples") ? j.at("random_samples").get<int>() : 0;
    g.seed = j.contains("seed") ? j.at("seed").get<std::uint64_t>() : 0;
    return g;
}

}  // namespace cfgdetail

inline RunConfig parse_config_json(const nlohmann::json& j) {
    using cfgdetail::fail;
    cfgdetail::expect_keys(j, "$",
                           {"structure", "grid", "tolerances", "epsilon", "seed", "kmax", "flow"});
    RunConfig cfg;
    if (!j.contains("structure")) fail("$.structure", "missing");
    cfg.structure = cfgdetail::parse_structure(j.at("structure"), "$.structure");
    if (j.contains("grid")) cfg.grid = cfgdetail::parse_grid(j.at("grid"), "$.grid");
    if (j.contains("tolerances")) {
        if (!j.at("tolerances").is_object()) fail("$.tolerances", "expected an object");
        for (auto it = j.at("tolerances").begin(); it != j.at("tolerances").end(); ++it)
            cfg.tolerances[it.key()] = cfgdetail::get_number(it.value(), "$.tolerances." + it.key());
    }
    if (j.contains("epsilon")) {
        if (j.at("epsilon").is_string()) {
            if (j.at("epsilon").get<std::string>() != "auto")
                fail("$.epsilon", "expected a number or \"auto\"");
            cfg.epsilon_auto = true;
        } else {
            cfg.epsilon = cfgdetail::get_number(j.at("epsilon"), "$.epsilon");
            if (!(cfg.epsilon > 0.0)) fail("$.epsilon", "must be positive");
        }
    }
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("kmax")) cfg.kmax = j.at("kmax").get<int>();
    if (j.contains("flow")) {
        cfgdetail::expect_keys(j.at("flow"), "$.flow", {"tau", "step"});
        if (j.at("flow").contains("tau"))
            cfg.flow.tau = cfgdetail::get_number(j.at("flow").at("tau"), "$.flow.tau");
        if (j.at("flow").contains("step"))
            cfg.flow.step = cfgdetail::get_number(j.at("flow").at("step"), "$.flow.step");
    }
    // the grid inherits the run seed unless it sets its own
    if (cfg.grid.seed == 0) cfg.grid.seed = cfg.seed;
    return cfg;
}

inline RunConfig parse_config_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("$", std::string("invalid JSON: ") + e.what());
    }
    return parse_config_json(j);
}

inline RunConfig load_config(const std::string& file_path) {
    std::ifstream in(file_path, std::ios::binary);
    if (!in) throw ConfigError("$", "cannot open config file '" + file_path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

// ---------------------------------------------------------------------------
// Building the structure described by a config
// ---------------------------------------------------------------------------

struct BuiltStructure {
    LHStructure structure;
    std::string name;
    std::optional<TorusBundle> torus;    // populated for the torus bundle
    std::optional<McDuffModel> mcduff;   // populated for the McDuff model
};

inline BuiltStructure build_structure(const StructureSpec& spec) {
    BuiltStructure out;
    out.name = spec.name;
    switch (spec.kind) {
        case StructureSpec::Kind::TorusBundle: {
            out.torus = torus_bundle(spec.matrix);
            out.structure = out.torus->structure;
            break;
        }
        case StructureSpec::Kind::McDuff: {
            out.mcduff = mcduff_model();
            out.structure = out.mcduff->structure;
            break;
        }
        case StructureSpec::Kind::Contactisation: {
            if (spec.base_lambda.empty()) {
                out.structure = contactisation_pdq();
            } else {
                Chart base({"q", "p"}, {false, false}, {{{-1.0, 1.0}}, {{-1.0, 1.0}}});
                if (spec.base_lambda.size() != 2)
                    throw ConfigError("$.structure.base_lambda", "expected two expressions");
                std::vector<ExpressionTree> coeffs;
                for (const auto& e : spec.base_lambda) coeffs.push_back(parse_expression(e, base));
                out.structure = contactisation(base, DifferentialForm(2, 1, std::move(coeffs)));
            }
            break;
        }
        case StructureSpec::Kind::Expressions: {
            const Chart& chart = spec.chart;
            auto parse_form = [&](const std::vector<std::string>& exprs, const char* which) {
                if (static_cast<int>(exprs.size()) != chart.dim())
                    throw ConfigError(std::string("$.structure.") + which,
                                      "needs one expression per chart coordinate");
                std::vector<ExpressionTree> coeffs;
                for (const auto& e : exprs) coeffs.push_back(parse_expression(e, chart));
                return DifferentialForm(chart.dim(), 1, std::move(coeffs));
            };
            out.structure = LHStructure(chart, parse_form(spec.eta_exprs, "eta"),
                                        parse_form(spec.beta_exprs, "beta"), spec.n, spec.deck);
            break;
        }
    }
    return out;
}

// Canonical config echo for reports (deterministic key order and floats).
inline Json config_echo(const RunConfig& cfg) {
    Json s = Json::object();
    switch (cfg.structure.kind) {
        case StructureSpec::Kind::TorusBundle: {
            s.add("builtin", "torus_bundle");
            Json m = Json::array();
            for (int r = 0; r < 2; ++r) {
                Json row = Json::array();
                row.push(cfg.structure.matrix(r, 0));
                row.push(cfg.structure.matrix(r, 1));
                m.push(std::move(row));
            }
            s.add("matrix", std::move(m));
            break;
        }
        case StructureSpec::Kind::McDuff:
            s.add("builtin", "mcduff");
            break;
        case StructureSpec::Kind::Contactisation: {
            s.add("builtin", "contactisation");
            if (!cfg.structure.base_lambda.empty()) {
                Json bl = Json::array();
                for (const auto& e : cfg.structure.base_lambda) bl.push(e);
                s.add("base_lambda", std::move(bl));
            }
            break;
        }
        case StructureSpec::Kind::Expressions: {
            Json chart = Json::object();
            Json coords = Json::array(), periodic = Json::array(), bounds = Json::array();
            for (int i = 0; i < cfg.structure.chart.dim(); ++i) {
                coords.push(cfg.structure.chart.coord_names()[static_cast<std::size_t>(i)]);
                periodic.push(cfg.structure.chart.periodic(i));
                Json b = Json::array();
                b.push(cfg.structure.chart.bounds(i)[0]);
                b.push(cfg.structure.chart.bounds(i)[1]);
                bounds.push(std::move(b));
            }
            chart.add("coords", std::move(coords));
            chart.add("periodic", std::move(periodic));
            chart.add("bounds", std::move(bounds));
            s.add("chart", std::move(chart));
            Json eta = Json::array(), beta = Json::array();
            for (const auto& e : cfg.structure.eta_exprs) eta.push(e);
            for (const auto& e : cfg.structure.beta_exprs) beta.push(e);
            s.add("eta", std::move(eta));
            s.add("beta", std::move(beta));
            s.add("n", cfg.structure.n);
            break;
        }
    }
    Json g = Json::object();
    Json samples = Json::array();
    for (int n : cfg.grid.samples) samples.push(n);
    g.add("samples", std::move(samples));
    g.add("random_samples", cfg.grid.random_extra);
    g.add("seed", static_cast<long long>(cfg.grid.seed));

    Json root = Json::object();
    root.add("structure", std::move(s));
    root.add("grid", std::move(g));
    if (!cfg.tolerances.empty()) {
        Json tols = Json::object();
        for (const auto& [k, v] : cfg.tolerances) tols.add(k, v);
        root.add("tolerances", std::move(tols));
    }
    if (cfg.epsilon_auto)
        root.add("epsilon", "auto");
    else
        root.add("epsilon", cfg.epsilon);
    root.add("seed", static_cast<long long>(cfg.seed));
    root.add("kmax", cfg.kmax);
    return root;
}

}  // namespace lhskit
