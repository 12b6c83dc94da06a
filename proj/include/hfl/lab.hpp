#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hfl/diagnostics.hpp"
#include "hfl/errors.hpp"
#include "hfl/interp.hpp"
#include "hfl/mrs.hpp"
#include "hfl/orthopoly.hpp"
#include "hfl/weights.hpp"
#include "hfl/wnorm.hpp"

#ifndef HFL_VERSION
#define HFL_VERSION "0.0.0"
#endif

namespace hfl::lab {

using json = nlohmann::json;

/// Process exit codes of the harness.
enum exit_code : int {
    exit_ok = 0,
    exit_config = 2,
    exit_gate = 3,
    exit_numeric = 4,
    exit_acceptance = 5,
};

/// Parsed experiment configuration. See README for the schema.
struct RunConfig {
    // weight
    std::string family = "freud";
    double m = 2.0;
    double alpha_q = 0.0;
    int ell = 1;
    double delta_smooth = 0.0;
    double rho = 0.0;
    // interp
    int nu = 2;
    int l = 0;
    std::vector<int> n_list{8, 16, 32, 64};
    // norm
    double p = 2.0;
    double Delta = 1.0;
    double alpha = 1.0;
    double eta = 0.5;
    double gamma = -1.0;  ///< negative: family default
    // numerics
    int digits = 50;
    double rel_tol = 1e-10;
    double resolution = 1.0;
    double mrs_tol = 1e-13;
    std::uint64_t seed = 1;
    // selections
    std::vector<std::string> functions{"sin"};
    std::vector<std::string> diagnostics;
    std::string output = "hflab-out";
    std::string cache;
    bool require_cache = false;

    std::string checksum;  ///< fnv1a64 of the canonical JSON text

    WeightSpec weight_spec() const {
        WeightFamily fam = family == "freud"      ? WeightFamily::freud(m, delta_smooth)
                           : family == "exppower" ? WeightFamily::exp_power(ell, alpha_q, m, delta_smooth)
                                                  : WeightFamily::power_exp(alpha_q, delta_smooth);
        return WeightSpec(fam, rho, nu);
    }

    NormSpec norm_spec() const {
        NormSpec ns;
        ns.p = p;
        ns.Delta = Delta;
        ns.alpha = alpha;
        ns.nu = nu;
        ns.rho = rho;
        ns.eta = eta;
        return ns;
    }

    NormOptions norm_options() const {
        NormOptions o;
        o.rel_tol = rel_tol;
        o.resolution = resolution;
        return o;
    }

    std::filesystem::path cache_dir() const {
        return RecurrenceCache::resolve_dir(cache.empty() ? std::filesystem::path(output) / "cache"
                                                          : std::filesystem::path(cache));
    }
};

namespace detail {

inline std::string location(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') ++line, col = 1;
        else ++col;
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

/// Typed field reader that reports the dotted field path on mismatch and
/// rejects unknown keys.
class Block {
public:
    Block(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw config_error("field '" + path_ + "': expected an object");
    }

    template <class T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) return;
        std::string f = field(key);
        if constexpr (std::is_same_v<T, bool>) {
            if (!it->is_boolean()) throw config_error("field '" + f + "': expected a boolean");
        } else if constexpr (std::is_integral_v<T>) {
            if (!it->is_number_integer()) throw config_error("field '" + f + "': expected an integer");
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!it->is_number()) throw config_error("field '" + f + "': expected a number");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!it->is_string()) throw config_error("field '" + f + "': expected a string");
        } else {
            if (!it->is_array()) throw config_error("field '" + f + "': expected an array");
            for (std::size_t i = 0; i < it->size(); ++i) {
                const auto& e = (*it)[i];
                using E = typename T::value_type;
                bool good = std::is_integral_v<E> ? e.is_number_integer() : e.is_string();
                if (!good)
                    throw config_error("field '" + f + "[" + std::to_string(i) + "]': expected " +
                                       (std::is_integral_v<E> ? "an integer" : "a string"));
            }
        }
        out = it->get<T>();
    }

    std::optional<Block> sub(const char* key) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return std::nullopt;
        return Block(*it, field(key));
    }

    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw config_error("field '" + field(k.c_str()) + "': unknown key");
    }

    std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace detail

/// Parses and validates a configuration; throws config_error naming the
/// offending line or field.
inline RunConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        std::string msg = e.what();
        auto pos = msg.find("syntax error");
        throw config_error("config parse error at " + detail::location(text, e.byte) + ": " +
                           (pos == std::string::npos ? msg : msg.substr(pos)));
    }
    RunConfig c;
    detail::Block root(j, "");
    if (auto w = root.sub("weight")) {
        w->read("family", c.family);
        w->read("m", c.m);
        w->read("alpha", c.alpha_q);
        w->read("ell", c.ell);
        w->read("delta", c.delta_smooth);
        w->read("rho", c.rho);
        w->finish();
    }
    if (auto b = root.sub("interp")) {
        b->read("nu", c.nu);
        b->read("l", c.l);
        b->read("n_list", c.n_list);
        b->finish();
    }
    if (auto b = root.sub("norm")) {
        b->read("p", c.p);
        b->read("Delta", c.Delta);
        b->read("alpha", c.alpha);
        b->read("eta", c.eta);
        b->read("gamma", c.gamma);
        b->finish();
    }
    if (auto b = root.sub("numerics")) {
        b->read("digits", c.digits);
        b->read("rel_tol", c.rel_tol);
        b->read("resolution", c.resolution);
        b->read("mrs_tol", c.mrs_tol);
        b->read("seed", c.seed);
        b->finish();
    }
    root.read("functions", c.functions);
    root.read("diagnostics", c.diagnostics);
    root.read("output", c.output);
    root.read("cache", c.cache);
    root.read("require_cache", c.require_cache);
    root.finish();

    if (c.family != "freud" && c.family != "exppower" && c.family != "powerexp")
        throw config_error("field 'weight.family': expected \"freud\", \"exppower\" or \"powerexp\", got \"" +
                           c.family + "\"");
    try {
        c.weight_spec();
    } catch (const argument_error& e) {
        throw config_error(std::string("field 'weight': ") + e.what());
    }
    if (c.n_list.empty()) throw config_error("field 'interp.n_list': must not be empty");
    for (std::size_t i = 0; i < c.n_list.size(); ++i) {
        if (c.n_list[i] < 1) throw config_error("field 'interp.n_list': entries must be >= 1");
        if (i > 0 && c.n_list[i] <= c.n_list[i - 1])
            throw config_error("field 'interp.n_list': entries must be strictly ascending");
    }
    if (c.l < 0 || c.l > c.nu - 1) throw config_error("field 'interp.l': must lie in [0, nu - 1]");
    for (const auto& f : c.functions)
        if (!named_function(f)) throw config_error("field 'functions': unknown function \"" + f + "\"");
    const auto& known = diagnostic_checks();
    for (const auto& d : c.diagnostics)
        if (std::find(known.begin(), known.end(), d) == known.end())
            throw config_error("field 'diagnostics': unknown check \"" + d + "\"");
    if (j.contains("diagnostics") && c.diagnostics.empty())
        throw config_error("field 'diagnostics': selection must be non-empty");
    if (c.diagnostics.empty()) c.diagnostics = known;
    if (c.digits < 17 || c.digits > 100) throw config_error("field 'numerics.digits': must lie in [17, 100]");
    if (!(c.rel_tol > 0.0)) throw config_error("field 'numerics.rel_tol': must be > 0");
    if (!(c.resolution > 0.0)) throw config_error("field 'numerics.resolution': must be > 0");
    if (!(c.mrs_tol > 0.0)) throw config_error("field 'numerics.mrs_tol': must be > 0");
    if (c.gamma >= 1.0) throw config_error("field 'norm.gamma': must lie in [0, 1)");
    if (c.output.empty()) throw config_error("field 'output': must not be empty");
    c.checksum = hex64(fnv1a64(j.dump()));
    return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw config_error("cannot read config file '" + path.string() + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str());
}

/// Fixed-width scientific formatting used by every report.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12e", v);
    return buf;
}

/// CSV text with a provenance header of version, config checksum and command.
class CsvWriter {
public:
    CsvWriter(const RunConfig& c, const std::string& command, const std::vector<std::string>& columns) {
        os_ << "# hflab " << HFL_VERSION << "\n# config " << c.checksum << "\n# command " << command << '\n';
        for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
        os_ << '\n';
    }

    CsvWriter& row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
        os_ << '\n';
        return *this;
    }

    std::string str() const { return os_.str(); }

private:
    std::ostringstream os_;
};

/// Runs subcommands for one configuration and writes their outputs.
class Lab {
public:
    explicit Lab(RunConfig cfg, std::ostream& log = std::cerr)
        : cfg_(std::move(cfg)),
          spec_(cfg_.weight_spec()),
          solver_(spec_, 64, cfg_.mrs_tol),
          scales_(ScaleTable::shared(solver_, cfg_.gamma >= 0.0 ? cfg_.gamma : ScaleTable::default_gamma(spec_))),
          cache_(cfg_.cache_dir()),
          log_(log) {}

    const RunConfig& config() const { return cfg_; }
    const std::vector<std::filesystem::path>& written() const { return written_; }

    int run(const std::string& command) {
        if (command == "mrs") return cmd_mrs();
        if (command == "nodes") return cmd_nodes();
        if (command == "interp") return cmd_interp();
        if (command == "converge") return cmd_converge();
        if (command == "diagnose") return cmd_diagnose();
        if (command == "selftest") return cmd_selftest();
        throw config_error("unknown subcommand '" + command + "'");
    }

    /// t, a_t, delta_t, T(a_t), eps_t for t in the n list and its doublings.
    int cmd_mrs() {
        std::set<double> ts;
        for (int n : cfg_.n_list) ts.insert(n), ts.insert(2.0 * n);
        CsvWriter w(cfg_, "mrs", {"t", "a_t", "delta_t", "T_a_t", "eps_t"});
        for (double t : ts)
            w.row({fmt(t), fmt(scales_->a(t)), fmt(scales_->delta(t)), fmt(scales_->t_at_a(t)),
                   fmt(scales_->eps(static_cast<int>(t)))});
        write("mrs.csv", w.str());
        return exit_ok;
    }

    /// Zeros of p_n with p_n'(x_k) and phi_n(x_k).
    int cmd_nodes() {
        const auto& t = table();
        CsvWriter w(cfg_, "nodes", {"n", "k", "x", "p_prime", "phi_n"});
        for (int n : cfg_.n_list) {
            auto ns = zeros(t, n, cfg_.nu, *scales_);
            for (int k = 0; k < n; ++k)
                w.row({std::to_string(n), std::to_string(k + 1), fmt(ns.x[k]), fmt(ns.pn_prime(k)), fmt(ns.varphi[k])});
        }
        write("nodes.csv", w.str());
        return exit_ok;
    }

    /// L_n(l, nu, f) and its X / Y / Z split on a grid of [-a_n, a_n],
    /// every column multiplied by w(x)^nu.
    int cmd_interp(int points = 41) {
        const auto& t = table();
        CsvWriter w(cfg_, "interp", {"function", "n", "x", "f_w", "L_w", "X_w", "Y_w", "Z_w"});
        for (int n : cfg_.n_list) {
            Interpolator in(t, zeros(t, n, cfg_.nu, *scales_), cfg_.l);
            const double an = scales_->a(n);
            for (const auto& name : cfg_.functions) {
                auto f = *named_function(name);
                auto samples = in.sample(f, cfg_.l);
                for (int i = 0; i < points; ++i) {
                    double x = an * (2.0 * i / (points - 1) - 1.0);
                    double lw = -q_eval(spec_, x, 0);
                    auto s = in.split(samples, x, lw);
                    double fw = f.value(x) * std::exp(cfg_.nu * lw);
                    w.row({name, std::to_string(n), fmt(x), fmt(fw), fmt(s.L()), fmt(s.X), fmt(s.Y), fmt(s.Z)});
                }
            }
        }
        write("interp.csv", w.str());
        return exit_ok;
    }

    /// Error reports per function plus a manifest; gate rejections exit 3,
    /// a non-decreasing E_n exits 5.
    int cmd_converge() {
        const auto& t = table();
        json manifest = header("converge");
        manifest["functions"] = json::array();
        bool all_monotone = true;
        for (const auto& name : cfg_.functions) {
            auto f = *named_function(name);
            ErrorReport rep;
            try {
                rep = convergence_run(cfg_.norm_spec(), spec_, f, cfg_.n_list, cfg_.l, t, *scales_, cfg_.norm_options());
            } catch (const gate_rejection& g) {
                log_ << "gate rejection [" << g.condition() << "] for function '" << name << "': " << g.what() << '\n';
                return exit_gate;
            }
            CsvWriter w(cfg_, "converge " + name,
                        {"n", "a_n", "eps_n", "E_n", "normX", "normY", "normZ", "ratioY", "ratioZ", "quad_err", "flagged"});
            int flagged = 0;
            for (const auto& r : rep.rows) {
                flagged += r.flagged;
                w.row({std::to_string(r.n), fmt(r.a_n), fmt(r.eps_n), fmt(r.E), fmt(r.normX), fmt(r.normY),
                       fmt(r.normZ), fmt(r.ratioY), fmt(r.ratioZ), fmt(r.quad_err), r.flagged ? "1" : "0"});
            }
            std::string file = "converge_" + name + ".csv";
            write(file, w.str());
            bool mono = rep.monotone();
            all_monotone = all_monotone && mono;
            json e;
            e["function"] = name;
            e["file"] = file;
            e["l"] = rep.l;
            e["c_f"] = fmt(rep.c_f);
            e["monotone"] = mono;
            e["spread_y"] = fmt(rep.spread_y());
            e["spread_y_ok"] = rep.spread_y() < kBandLimit;
            e["flagged_rows"] = flagged;
            if (rep.l > 0) {
                e["spread_z"] = fmt(rep.spread_z());
                e["spread_z_ok"] = rep.spread_z() < kBandLimit;
            }
            manifest["functions"].push_back(e);
            if (!mono) log_ << "E_n is not strictly decreasing for function '" << name << "'\n";
        }
        manifest["all_monotone"] = all_monotone;
        write("converge.json", manifest.dump(2) + "\n");
        return all_monotone ? exit_ok : exit_acceptance;
    }

    /// Selected diagnostics; a check whose recorded band is unbounded exits 5.
    int cmd_diagnose() {
        json summary = header("diagnose");
        summary["checks"] = json::array();
        bool all_ok = true;
        for (const auto& name : cfg_.diagnostics) {
            DiagTable d = diagnostic(name);
            CsvWriter w(cfg_, "diagnose " + name, d.columns);
            for (const auto& r : d.rows) {
                std::vector<std::string> cells;
                for (double v : r) cells.push_back(fmt(v));
                w.row(cells);
            }
            std::string file = "diagnose_" + name + ".csv";
            write(file, w.str());
            json e;
            e["check"] = name;
            e["file"] = file;
            e["ok"] = d.ok;
            for (const auto& [k, v] : d.summary) e["summary"][k] = fmt(v);
            summary["checks"].push_back(e);
            all_ok = all_ok && d.ok;
            if (!d.ok) log_ << "diagnostic '" << name << "' left its band\n";
        }
        summary["all_ok"] = all_ok;
        write("diagnose.json", summary.dump(2) + "\n");
        return all_ok ? exit_ok : exit_acceptance;
    }

    DiagTable diagnostic(const std::string& name) {
        if (name == "class_membership") return diag_class_membership(spec_);
        if (name == "mrs_residual") return diag_mrs_residual(*scales_, cfg_.n_list);
        if (name == "assumption") return diag_assumption(*scales_, cfg_.n_list);
        const auto& t = table();
        if (name == "spacing") return diag_spacing(t, *scales_, cfg_.n_list, cfg_.nu);
        if (name == "supbound") return diag_supbound(t, *scales_, cfg_.n_list);
        if (name == "coeffbound") return diag_coeffbound(t, *scales_, cfg_.n_list, cfg_.nu);
        throw config_error("unknown diagnostic '" + name + "'");
    }

    /// Reference problems with closed forms on the Hermite weight, a short
    /// convergence run and diagnostics; writes selftest_report.txt.
    int cmd_selftest() {
        RunConfig ref = cfg_;
        ref.family = "freud";
        ref.m = 2.0;
        ref.delta_smooth = 0.0;
        ref.rho = 0.0;
        ref.nu = 2;
        ref.l = 0;
        ref.n_list = {8, 16, 32};
        ref.functions = {"sin"};
        ref.gamma = -1.0;
        Lab lab(ref, log_);
        std::ostringstream os;
        bool ok = true;
        auto check = [&](const std::string& what, double value, double limit) {
            bool pass = value <= limit;
            ok = ok && pass;
            os << (pass ? "PASS " : "FAIL ") << what << ' ' << fmt(value) << " <= " << fmt(limit) << '\n';
        };
        os << "# hflab " << HFL_VERSION << "\n# config " << cfg_.checksum << "\n# command selftest\n";

        double mrs_err = 0.0;
        for (double t : {1.0, 4.0, 16.0, 64.0, 256.0})
            mrs_err = std::max(mrs_err, std::fabs(lab.scales_->a(t) / std::sqrt(t) - 1.0));
        check("mrs_sqrt_t", mrs_err, 1e-10);

        const auto& t = lab.table();
        double beta_err = std::fabs(static_cast<double>(t.beta[0]) / std::sqrt(std::numbers::pi / 2.0) - 1.0);
        for (int k = 1; k <= t.N; ++k) beta_err = std::max(beta_err, std::fabs(t.beta_d[k] / (k / 4.0) - 1.0));
        check("recurrence_k_over_4", beta_err, 1e-12);

        double orth = 0.0;
        for (int m : {0, 3, 8})
            for (int n : {0, 5, 8}) orth = std::max(orth, orthonormality_residual(t, lab.spec_, m, n, *lab.scales_).residual);
        check("orthonormality", orth, 1e-8);

        auto rep = convergence_run(ref.norm_spec(), lab.spec_, *named_function("sin"), ref.n_list, 0, t, *lab.scales_,
                                   ref.norm_options());
        for (const auto& r : rep.rows) os << "E_n n=" << r.n << ' ' << fmt(r.E) << '\n';
        check("E_n_monotone_violations", rep.monotone() ? 0.0 : 1.0, 0.0);

        for (const char* name : {"spacing", "supbound"}) {
            auto d = lab.diagnostic(name);
            for (const auto& [k, v] : d.summary) os << name << ' ' << k << ' ' << fmt(v) << '\n';
            check(std::string(name) + "_band_width", d.get(std::string(name) == "spacing" ? "spacing_width" : "product_width"),
                  kBandLimit);
        }
        os << (ok ? "selftest PASS" : "selftest FAIL") << '\n';
        write("selftest_report.txt", os.str());
        return ok ? exit_ok : exit_acceptance;
    }

    /// Recurrence table up to max(n_list), served from the cache.
    const RecurrenceTable& table() {
        if (!table_) {
            int N = cfg_.n_list.back();
            table_ = cache_.get(spec_, N, cfg_.digits, *scales_, cfg_.require_cache);
        }
        return *table_;
    }

private:
    json header(const std::string& command) const {
        json j;
        j["hflab"] = HFL_VERSION;
        j["config"] = cfg_.checksum;
        j["command"] = command;
        j["weight"] = spec_.key();
        return j;
    }

    void write(const std::string& name, const std::string& text) {
        std::filesystem::path dir(cfg_.output);
        std::filesystem::create_directories(dir);
        auto p = dir / name;
        std::ofstream f(p, std::ios::binary | std::ios::trunc);
        f << text;
        if (!f) throw error("cannot write '" + p.string() + "'");
        written_.push_back(p);
    }

    RunConfig cfg_;
    WeightSpec spec_;
    MrsSolver solver_;
    std::shared_ptr<ScaleTable> scales_;
    RecurrenceCache cache_;
    std::ostream& log_;
    std::optional<RecurrenceTable> table_;
    std::vector<std::filesystem::path> written_;
};

/// Runs `command` on the config at `path`, mapping failures to exit codes.
inline int run_command(const std::string& command, const std::filesystem::path& path, std::ostream& err = std::cerr) {
    try {
        Lab lab(load_config(path), err);
        return lab.run(command);
    } catch (const config_error& e) {
        err << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const gate_rejection& e) {
        err << "gate rejection [" << e.condition() << "]: " << e.what() << '\n';
        return exit_gate;
    } catch (const std::exception& e) {
        err << "numeric failure: " << e.what() << '\n';
        return exit_numeric;
    }
}

}  // namespace hfl::lab
