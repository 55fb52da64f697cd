#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "epi/error.hpp"
#include "epi/torus_grid.hpp"

namespace epi {

/// Real function on the torus [0,1)^d, with a textual form for configs.
struct Profile {
    std::string text;
    std::function<double(std::span<const double>)> fn;

    double operator()(std::span<const double> r) const { return fn(r); }

    std::vector<double> sample(const TorusGrid& grid) const {
        std::vector<double> v(grid.n_sites());
        for (std::size_t x = 0; x < v.size(); ++x) v[x] = fn(grid.position(x));
        return v;
    }
};

namespace detail {

inline std::vector<double> parse_numbers(const std::string& text, const std::string& whole) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw InvalidProfile("bad number '" + item + "' in profile " + whole);
        }
        if (used != item.size()) throw InvalidProfile("bad number '" + item + "' in profile " + whole);
        out.push_back(v);
    }
    return out;
}

/// Minimal-image distance from r to the diagonal point (c,...,c).
inline double torus_distance(std::span<const double> r, double c) {
    double acc = 0.0;
    for (double v : r) {
        double delta = v - c;
        delta -= std::round(delta);
        acc += delta * delta;
    }
    return std::sqrt(acc);
}

}  // namespace detail

/// Parses
///   const:<v>
///   bump:<center>:<width>:<height>[:<base>]   smooth compactly supported bump
///   cos:<mean>:<amp>[:<k>]                     mean + amp/d * sum_j cos(2 pi k r_j)
inline Profile parse_profile(const std::string& text) {
    const auto colon = text.find(':');
    const std::string head = text.substr(0, colon);
    const std::vector<double> a =
        colon == std::string::npos ? std::vector<double>{} : detail::parse_numbers(text.substr(colon + 1), text);

    if (head == "const" && a.size() == 1) {
        const double v = a[0];
        return {text, [v](std::span<const double>) { return v; }};
    }
    if (head == "bump" && (a.size() == 3 || a.size() == 4)) {
        const double center = a[0], width = a[1], height = a[2], base = a.size() == 4 ? a[3] : 0.0;
        if (!(width > 0.0)) throw InvalidProfile("bump width must be positive: " + text);
        return {text, [=](std::span<const double> r) {
                    const double s = detail::torus_distance(r, center) / width;
                    return base + (s < 1.0 ? height * std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0);
                }};
    }
    if (head == "cos" && (a.size() == 2 || a.size() == 3)) {
        const double mean = a[0], amp = a[1], k = a.size() == 3 ? a[2] : 1.0;
        return {text, [=](std::span<const double> r) {
                    double acc = 0.0;
                    for (double v : r) acc += std::cos(2.0 * std::numbers::pi * k * v);
                    return mean + amp * acc / static_cast<double>(r.size());
                }};
    }
    throw InvalidProfile("unrecognized profile: " + text);
}

inline Profile constant_profile(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "const:%.17g", v);
    return parse_profile(buf);
}

/// Checks 0 <= rho0, 0 <= rho1, rho0 + rho1 <= 1 site by site.
inline void check_profiles(std::span<const double> rho0, std::span<const double> rho1, double slack = 0.0) {
    if (rho0.size() != rho1.size()) throw GridMismatch("initial profiles differ in size");
    for (std::size_t x = 0; x < rho0.size(); ++x) {
        if (!(rho0[x] >= -slack) || !(rho1[x] >= -slack) || !(rho0[x] + rho1[x] <= 1.0 + slack))
            throw InvalidProfile("initial densities out of range at site " + std::to_string(x) +
                                 ": rho0=" + std::to_string(rho0[x]) + " rho1=" + std::to_string(rho1[x]));
    }
}

/// Test function G for empirical averages <pi, G>.
struct TestFunction {
    std::string name;
    std::function<double(std::span<const double>)> fn;
};

/// Expands a comma list such as "1,cos1,sin1,cos2" into test functions:
/// "1" is the constant, "cosK"/"sinK" give cos(2 pi K r_j)/sin(2 pi K r_j)
/// for every coordinate j.
inline std::vector<TestFunction> parse_test_functions(const std::string& list, int dimension) {
    std::vector<TestFunction> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        while (!item.empty() && item.front() == ' ') item.erase(item.begin());
        while (!item.empty() && item.back() == ' ') item.pop_back();
        if (item == "1") {
            out.push_back({"1", [](std::span<const double>) { return 1.0; }});
            continue;
        }
        const bool is_cos = item.rfind("cos", 0) == 0;
        const bool is_sin = item.rfind("sin", 0) == 0;
        if (!is_cos && !is_sin) throw InvalidProfile("unknown test function: " + item);
        int k = 0;
        try {
            k = std::stoi(item.substr(3));
        } catch (const std::exception&) {
            throw InvalidProfile("unknown test function: " + item);
        }
        for (int j = 0; j < dimension; ++j) {
            const double freq = 2.0 * std::numbers::pi * k;
            const auto idx = static_cast<std::size_t>(j);
            auto fn = is_cos ? std::function<double(std::span<const double>)>(
                                   [=](std::span<const double> r) { return std::cos(freq * r[idx]); })
                             : std::function<double(std::span<const double>)>(
                                   [=](std::span<const double> r) { return std::sin(freq * r[idx]); });
            out.push_back({item + "[" + std::to_string(j) + "]", std::move(fn)});
        }
    }
    if (out.empty()) throw InvalidProfile("empty test function list");
    return out;
}

}  // namespace epi
