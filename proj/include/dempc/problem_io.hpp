#pragma once

// JSON problem files. Top-level "type" selects the problem kind;
// unknown fields are rejected so typos fail loudly.

#include <fstream>
#include <set>
#include <string>
#include <variant>

#include <json.hpp>

#include "dempc/problem.hpp"

namespace dempc {

using AnyProblem = std::variant<LinearQuadraticProblem, ScalarGridProblem>;

namespace detail {

inline void reject_unknown_fields(const nlohmann::json& j, const std::set<std::string>& allowed,
                                  const std::string& where) {
    for (const auto& item : j.items()) {
        if (!allowed.count(item.key()))
            throw std::invalid_argument("unknown field \"" + item.key() + "\" in " + where);
    }
}

inline Eigen::MatrixXd parse_matrix(const nlohmann::json& j, const std::string& name) {
    if (!j.is_array() || j.empty() || !j[0].is_array())
        throw std::invalid_argument(name + ": expected an array of rows");
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].size();
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!j[r].is_array() || j[r].size() != cols)
            throw std::invalid_argument(name + ": ragged rows");
        for (std::size_t c = 0; c < cols; ++c) {
            if (!j[r][c].is_number()) throw std::invalid_argument(name + ": non-numeric entry");
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
        }
    }
    return m;
}

inline std::vector<Interval> parse_box(const nlohmann::json& j, const std::string& name) {
    std::vector<Interval> box;
    if (!j.is_array()) throw std::invalid_argument(name + ": expected an array of [lo, hi] pairs");
    for (const auto& e : j) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
            throw std::invalid_argument(name + ": expected [lo, hi] pairs");
        box.push_back(Interval{e[0].get<double>(), e[1].get<double>()});
    }
    return box;
}

inline double require_number(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key) || !j[key].is_number())
        throw std::invalid_argument("missing or non-numeric field \"" + key + "\"");
    return j[key].get<double>();
}

inline LinearQuadraticProblem parse_linear_quadratic(const nlohmann::json& j) {
    reject_unknown_fields(j, {"type", "A", "B", "Q", "R", "gamma", "state_box", "input_box"},
                          "linear_quadratic problem");
    for (const char* key : {"A", "B", "Q", "R"})
        if (!j.contains(key)) throw std::invalid_argument(std::string("missing field \"") + key + "\"");
    std::vector<Interval> sbox, ibox;
    if (j.contains("state_box")) sbox = parse_box(j["state_box"], "state_box");
    if (j.contains("input_box")) ibox = parse_box(j["input_box"], "input_box");
    return LinearQuadraticProblem(parse_matrix(j["A"], "A"), parse_matrix(j["B"], "B"),
                                  parse_matrix(j["Q"], "Q"), parse_matrix(j["R"], "R"),
                                  require_number(j, "gamma"), sbox, ibox);
}

inline ScalarGridProblem parse_scalar_grid(const nlohmann::json& j) {
    reject_unknown_fields(j,
                          {"type", "family", "f_expr", "l_expr", "x_min", "x_max", "u_min", "u_max",
                           "nx", "nu", "gamma"},
                          "scalar_grid problem");
    const bool has_family = j.contains("family");
    const bool has_exprs = j.contains("f_expr") || j.contains("l_expr");
    if (has_family == has_exprs)
        throw std::invalid_argument(
            "scalar_grid: give either \"family\" or \"f_expr\"/\"l_expr\", not both");

    ScalarGridProblem::Dynamics dyn = DynamicsFamily{};
    ScalarGridProblem::Cost cost = CostFamily{};
    if (has_family) {
        const auto& f = j["family"];
        reject_unknown_fields(f, {"a", "b", "c1", "c2", "c3", "d"}, "family");
        dyn = DynamicsFamily{require_number(f, "a"), require_number(f, "b")};
        cost = CostFamily{require_number(f, "c1"), require_number(f, "c2"),
                          require_number(f, "c3"), require_number(f, "d")};
    } else {
        for (const char* key : {"f_expr", "l_expr"})
            if (!j.contains(key) || !j[key].is_string())
                throw std::invalid_argument(std::string("missing or non-string field \"") + key +
                                            "\"");
        dyn = parse_expression(j["f_expr"].get<std::string>());
        cost = parse_expression(j["l_expr"].get<std::string>());
    }
    const double nx = require_number(j, "nx");
    const double nu = require_number(j, "nu");
    return ScalarGridProblem(std::move(dyn), std::move(cost),
                             Interval{require_number(j, "x_min"), require_number(j, "x_max")},
                             Interval{require_number(j, "u_min"), require_number(j, "u_max")},
                             static_cast<int>(nx), static_cast<int>(nu),
                             require_number(j, "gamma"));
}

}  // namespace detail

inline AnyProblem load_problem(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open problem file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument("invalid JSON in " + path + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
        throw std::invalid_argument(path + ": expected an object with a \"type\" field");
    const std::string type = j["type"].get<std::string>();
    if (type == "linear_quadratic") return detail::parse_linear_quadratic(j);
    if (type == "scalar_grid") return detail::parse_scalar_grid(j);
    throw std::invalid_argument(path + ": unknown problem type \"" + type + "\"");
}

}  // namespace dempc
