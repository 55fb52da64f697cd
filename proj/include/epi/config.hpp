#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "epi/error.hpp"
#include "epi/kernel.hpp"
#include "epi/profile.hpp"

namespace epi {

enum class InitMode { Product, Exact };

/// Flat key = value experiment description. Lists are comma separated and
/// '#' starts a comment. Keys under "run." are informational and ignored on
/// input, so a manifest can be read back as a config.
struct ExperimentConfig {
    std::string kernel = "meanfield";
    std::vector<double> beta{2.0};
    int d = 1;
    std::vector<std::int64_t> L{100};
    double alpha = 0.25;
    int replicas = 1;
    std::uint64_t seed = 1;
    std::string test_functions = "1,cos1,sin1,cos2";
    std::string out = "out";
    double dt = 1e-3;
    double t_end = 10.0;
    int samples = 64;
    std::string rho0 = "const:0.99";
    std::string rho1 = "const:0.01";
    double u1_tol = 1e-8;
    double tol = 1e-12;
    int sample_every = 100;
    InitMode init = InitMode::Product;
    long long n_infected = -1;  // critical runs: negative means round(gamma^alpha L^d)
    std::string input;
    bool timing = false;
    int threads = 1;

    KernelSpec kernel_spec(double b) const { return parse_kernel_spec(kernel, b); }

    void validate() const {
        if (d < 1) throw ConfigError("d must be positive");
        if (beta.empty()) throw ConfigError("beta list is empty");
        for (double b : beta) kernel_spec(b);
        if (L.empty()) throw ConfigError("L list is empty");
        for (std::size_t i = 0; i < L.size(); ++i) {
            if (L[i] < 1) throw ConfigError("L values must be positive");
            if (i > 0 && L[i] <= L[i - 1]) throw ConfigError("L values must be strictly increasing");
        }
        if (replicas < 1) throw ConfigError("replicas must be >= 1");
        if (!(dt > 0.0) || dt > 0.1) throw ConfigError("dt must lie in (0, 0.1]");
        if (!(t_end >= 0.0)) throw ConfigError("t_end must be nonnegative");
        if (samples < 2) throw ConfigError("samples must be >= 2");
        if (sample_every < 1) throw ConfigError("sample_every must be >= 1");
        if (!(u1_tol > 0.0)) throw ConfigError("u1_tol must be positive");
        if (!(tol > 0.0)) throw ConfigError("tol must be positive");
        if (threads < 1) throw ConfigError("threads must be >= 1");
        try {
            parse_profile(rho0);
            parse_profile(rho1);
            parse_test_functions(test_functions, d);
        } catch (const InputError& e) {
            throw ConfigError(e.what());
        }
    }

    /// Extra checks for the critical sweep.
    void validate_critical() const {
        validate();
        if (!(alpha > 0.0 && alpha < 0.5)) throw ConfigError("alpha must lie in (0, 1/2)");
        if (kernel != "meanfield") throw ConfigError("critical sweeps require kernel = meanfield");
    }

    /// Canonical text, one key per line; parse_config(to_text()) round-trips.
    std::string to_text() const {
        std::ostringstream os;
        os << "kernel = " << kernel << '\n';
        os << "beta = " << join(beta) << '\n';
        os << "d = " << d << '\n';
        os << "L = " << join(L) << '\n';
        os << "alpha = " << num(alpha) << '\n';
        os << "replicas = " << replicas << '\n';
        os << "seed = " << seed << '\n';
        os << "test_functions = " << test_functions << '\n';
        os << "out = " << out << '\n';
        os << "dt = " << num(dt) << '\n';
        os << "t_end = " << num(t_end) << '\n';
        os << "samples = " << samples << '\n';
        os << "rho0 = " << rho0 << '\n';
        os << "rho1 = " << rho1 << '\n';
        os << "u1_tol = " << num(u1_tol) << '\n';
        os << "tol = " << num(tol) << '\n';
        os << "sample_every = " << sample_every << '\n';
        os << "init = " << (init == InitMode::Product ? "product" : "exact") << '\n';
        os << "n_infected = " << n_infected << '\n';
        if (!input.empty()) os << "input = " << input << '\n';
        os << "timing = " << (timing ? "true" : "false") << '\n';
        os << "threads = " << threads << '\n';
        return os.str();
    }

    static std::string num(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

private:
    template <class T>
    static std::string join(const std::vector<T>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) s += ",";
            if constexpr (std::is_floating_point_v<T>)
                s += num(v[i]);
            else
                s += std::to_string(v[i]);
        }
        return s;
    }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) throw ConfigError("bad number for " + key + ": '" + v + "'");
    return out;
}

inline long long to_integer(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) throw ConfigError("bad integer for " + key + ": '" + v + "'");
    return out;
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    return out;
}

inline int to_int(const std::string& key, const std::string& v) {
    const long long x = to_integer(key, v);
    if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max())
        throw ConfigError("value out of range for " + key);
    return static_cast<int>(x);
}

}  // namespace detail

inline ExperimentConfig parse_config(std::istream& in, const std::string& origin = "<config>") {
    ExperimentConfig c;
    std::map<std::string, int> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string v = detail::trim(line.substr(eq + 1));
        if (key.rfind("run.", 0) == 0) continue;
        if (seen[key]++) throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key " + key);
        using namespace detail;
        if (key == "kernel") c.kernel = v;
        else if (key == "beta") {
            c.beta.clear();
            for (const auto& s : split_list(v)) c.beta.push_back(to_double(key, s));
        } else if (key == "d") c.d = to_int(key, v);
        else if (key == "L") {
            c.L.clear();
            for (const auto& s : split_list(v)) c.L.push_back(to_integer(key, s));
        } else if (key == "alpha") c.alpha = to_double(key, v);
        else if (key == "replicas") c.replicas = to_int(key, v);
        else if (key == "seed") {
            const long long s = to_integer(key, v);
            if (s < 0) throw ConfigError("seed must be nonnegative");
            c.seed = static_cast<std::uint64_t>(s);
        } else if (key == "test_functions") c.test_functions = v;
        else if (key == "out") c.out = v;
        else if (key == "dt") c.dt = to_double(key, v);
        else if (key == "t_end") c.t_end = to_double(key, v);
        else if (key == "samples") c.samples = to_int(key, v);
        else if (key == "rho0") c.rho0 = v;
        else if (key == "rho1") c.rho1 = v;
        else if (key == "u1_tol") c.u1_tol = to_double(key, v);
        else if (key == "tol") c.tol = to_double(key, v);
        else if (key == "sample_every") c.sample_every = to_int(key, v);
        else if (key == "init") {
            if (v == "product") c.init = InitMode::Product;
            else if (v == "exact") c.init = InitMode::Exact;
            else throw ConfigError("init must be product or exact");
        } else if (key == "n_infected") c.n_infected = to_integer(key, v);
        else if (key == "input") c.input = v;
        else if (key == "timing") {
            if (v == "true") c.timing = true;
            else if (v == "false") c.timing = false;
            else throw ConfigError("timing must be true or false");
        } else if (key == "threads") c.threads = to_int(key, v);
        else throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key " + key);
    }
    try {
        c.validate();
    } catch (const InputError& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_config(in, path);
}

/// Value of a "const:<v>" profile; ConfigError for anything else.
inline double uniform_value(const std::string& profile_text) {
    if (profile_text.rfind("const:", 0) != 0)
        throw ConfigError("profile must be uniform (const:<v>) here, got " + profile_text);
    return detail::to_double("profile", profile_text.substr(6));
}

}  // namespace epi
