#pragma once

#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "oblique/counterexamples.hpp"
#include "oblique/extension.hpp"
#include "oblique/mollification.hpp"
#include "oblique/norms.hpp"
#include "oblique/regdist.hpp"
#include "oblique/solver.hpp"

/// Batch driver behind the command line tool: config validation, sweep
/// expansion, cell execution on a small worker pool, and report files. One
/// run produces <out>/index.json (all cells merged, deterministic bytes for
/// a fixed config + seed) and one CSV per cell. Timing lives only in the
/// CSVs so the JSON index stays reproducible.

namespace oblique::cli {

inline constexpr const char* kToolName = "oblique";
inline constexpr const char* kToolVersion = "0.2.0";

using nlohmann::json;

/// Schema violation; `where` is the JSON-pointer-ish path of the bad key.
struct config_error : std::runtime_error {
    std::string where;
    config_error(std::string path, const std::string& msg)
        : std::runtime_error("config error at " + path + ": " + msg),
          where(std::move(path)) {}
};

struct ExperimentConfig {
    std::string kind;
    std::uint64_t seed = 0;
    std::string tolerance_profile = "default";
    std::string out;
    json payload;  ///< kind-specific parameters, sweep axes already removed
    std::vector<std::pair<std::string, json>> sweep;  ///< axis path -> value list
    json canonical;                                   ///< full config as parsed
};

/// Numeric tolerances a profile resolves to; recorded in every index.
struct ToleranceSet {
    double picard_tol = 1e-8;
    double linear_tol = 1e-10;
};

inline ToleranceSet resolve_tolerances(const std::string& profile) {
    if (profile == "strict") return {1e-10, 1e-12};
    return {1e-8, 1e-10};
}

namespace detail {

inline const std::vector<std::string>& known_kinds() {
    static const std::vector<std::string> k{"regdist", "mollify",  "extend",
                                            "solve",   "probe",    "counterexample"};
    return k;
}

inline bool has(const json& j, const char* key) { return j.is_object() && j.contains(key); }

inline double num_at(const json& j, const std::string& path, const char* key, double dflt) {
    if (!has(j, key)) return dflt;
    if (!j.at(key).is_number())
        throw config_error(path + "/" + key, "expected a number");
    return j.at(key).get<double>();
}

inline int int_at(const json& j, const std::string& path, const char* key, int dflt) {
    if (!has(j, key)) return dflt;
    if (!j.at(key).is_number_integer())
        throw config_error(path + "/" + key, "expected an integer");
    return j.at(key).get<int>();
}

inline std::string str_at(const json& j, const std::string& path, const char* key,
                          const std::string& dflt) {
    if (!has(j, key)) return dflt;
    if (!j.at(key).is_string())
        throw config_error(path + "/" + key, "expected a string");
    return j.at(key).get<std::string>();
}

/// Walks a dotted path ("domain.amplitude") inside an object.
inline const json* walk(const json& root, const std::string& dotted) {
    const json* cur = &root;
    size_t pos = 0;
    while (pos <= dotted.size()) {
        const size_t dot = dotted.find('.', pos);
        const std::string key = dotted.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (!cur->is_object() || !cur->contains(key)) return nullptr;
        cur = &cur->at(key);
        if (dot == std::string::npos) break;
        pos = dot + 1;
    }
    return cur;
}

inline void poke(json& root, const std::string& dotted, const json& value) {
    json* cur = &root;
    size_t pos = 0;
    while (true) {
        const size_t dot = dotted.find('.', pos);
        const std::string key = dotted.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (dot == std::string::npos) {
            (*cur)[key] = value;
            return;
        }
        cur = &(*cur)[key];
        pos = dot + 1;
    }
}

inline GraphDomain<2> build_domain(const json& payload, const std::string& path) {
    if (!has(payload, "domain")) throw config_error(path + "/domain", "missing domain spec");
    const json& d = payload.at("domain");
    const std::string where = path + "/domain";
    const std::string type = str_at(d, where, "type", "");
    // Solver-grade default: keeps the obliqueness gate satisfiable for the
    // stock boundary fields on mildly sloped graphs.
    const double delta = num_at(d, where, "delta", 0.9);
    const double R0 = num_at(d, where, "R0", 1.0);
    const double height = num_at(d, where, "height", 0.0);
    if (type == "flat") return flat_domain2(height, delta, R0);
    if (type == "tilted") return tilted_domain2(num_at(d, where, "slope", 0.1), height, delta, R0);
    if (type == "sine")
        return sine_domain2(num_at(d, where, "amplitude", 0.05),
                            num_at(d, where, "frequency", 2.0), height, delta, R0);
    if (type == "sawtooth")
        return sawtooth_domain2(num_at(d, where, "eps0", 0.05),
                                num_at(d, where, "period", 0.37), height,
                                num_at(d, where, "phase", 0.0), delta, R0);
    throw config_error(where + "/type", "unknown domain type '" + type + "'");
}

/// Per-kind schema checks that do not need the cell to run first.
inline void validate_kind(const std::string& kind, const json& payload,
                          const std::string& path) {
    const auto one_of = [&path](const json& j, const char* key, const std::string& got,
                                std::initializer_list<const char*> allowed) {
        (void)j;
        for (const char* a : allowed)
            if (got == a) return;
        std::string msg = "expected one of {";
        bool first = true;
        for (const char* a : allowed) {
            if (!first) msg += ", ";
            msg += a;
            first = false;
        }
        throw config_error(path + "/" + key, msg + "}, got '" + got + "'");
    };

    if (kind == "counterexample") {
        const std::string ex = str_at(payload, path, "example", "");
        one_of(payload, "example", ex, {"cusp", "wedge"});
    } else if (kind == "probe") {
        one_of(payload, "variant", str_at(payload, path, "variant", "model"),
               {"model", "main"});
        build_domain(payload, path);
    } else if (kind == "solve") {
        one_of(payload, "problem", str_at(payload, path, "problem", "mms_trig"),
               {"homogeneous", "mms_trig", "quadratic"});
        build_domain(payload, path);
    } else if (kind == "extend") {
        one_of(payload, "datum", str_at(payload, path, "datum", "sin3"),
               {"const", "linear", "sin3"});
        build_domain(payload, path);
    } else if (kind == "regdist" || kind == "mollify") {
        build_domain(payload, path);
    }
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw config_error("/", "config must be a JSON object");

    ExperimentConfig cfg;
    cfg.canonical = j;
    cfg.kind = detail::str_at(j, "", "kind", "");
    bool known = false;
    for (const auto& k : detail::known_kinds()) known = known || (k == cfg.kind);
    if (!known) throw config_error("/kind", "unknown experiment kind '" + cfg.kind + "'");

    if (detail::has(j, "seed")) {
        if (!j.at("seed").is_number_unsigned() && !j.at("seed").is_number_integer())
            throw config_error("/seed", "expected a nonnegative integer");
        const auto s = j.at("seed").get<std::int64_t>();
        if (s < 0) throw config_error("/seed", "expected a nonnegative integer");
        cfg.seed = static_cast<std::uint64_t>(s);
    }
    cfg.tolerance_profile = detail::str_at(j, "", "tolerance_profile", "default");
    if (cfg.tolerance_profile != "default" && cfg.tolerance_profile != "strict")
        throw config_error("/tolerance_profile", "expected 'strict' or 'default'");
    cfg.out = detail::str_at(j, "", "out", "");

    cfg.payload = j;
    for (const char* k : {"kind", "seed", "tolerance_profile", "out", "sweep"})
        cfg.payload.erase(k);

    if (detail::has(j, "sweep")) {
        const json& sw = j.at("sweep");
        if (!sw.is_object()) throw config_error("/sweep", "expected an object of value lists");
        for (const auto& [axis, values] : sw.items()) {
            if (!values.is_array())
                throw config_error("/sweep/" + axis, "expected an array of values");
            if (detail::walk(cfg.payload, axis) == nullptr)
                throw config_error("/sweep/" + axis,
                                   "axis does not reference a known parameter");
            cfg.sweep.emplace_back(axis, values);
        }
    }

    detail::validate_kind(cfg.kind, cfg.payload, "");
    return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw config_error("/", std::string("not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

inline ExperimentConfig load_config(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw config_error("/", "cannot read config file '" + file + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

namespace detail {

/// FNV-1a over the canonical config dump; hex string for the index.
inline std::string config_hash(const json& canonical) {
    const std::string s = canonical.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct Cell {
    std::string id;
    json payload;
    std::uint64_t seed = 0;
};

inline std::string sanitize(std::string s) {
    for (char& c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' ||
              c == '.' || c == '='))
            c = '_';
    return s;
}

inline std::vector<Cell> expand_cells(const ExperimentConfig& cfg) {
    std::vector<Cell> cells{{"cell000", cfg.payload, cfg.seed}};
    for (const auto& [axis, values] : cfg.sweep) {
        std::vector<Cell> next;
        for (const Cell& c : cells)
            for (const json& v : values) {
                Cell n = c;
                poke(n.payload, axis, v);
                n.id += "_" + sanitize(axis + "=" + (v.is_string()
                                                         ? v.get<std::string>()
                                                         : v.dump()));
                next.push_back(n);
            }
        cells = std::move(next);  // an empty axis empties the product
    }
    for (size_t i = 0; i < cells.size(); ++i) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "%03zu", i);
        cells[i].id.replace(4, 3, buf);
        cells[i].seed = cfg.seed + i;
    }
    return cells;
}

// Cell executors. Each wraps one library entry point and flattens the
// outcome into a NormReport; hard invariant violations throw.

inline NormReport run_regdist(const json& p, std::uint64_t seed) {
    const GraphDomain<2> dom = build_domain(p, "");
    const int kernel_n = int_at(p, "", "kernel_n", 33);
    const int samples = int_at(p, "", "samples", 200);
    const auto f = make_regdist(dom, kernel_n);

    Rng rng(seed);
    double ratio_min = 1e300, ratio_max = 0.0, vert_max = -1e300;
    for (int k = 0; k < samples; ++k) {
        const double s = rng.uniform(-0.8 * dom.R0, 0.8 * dom.R0);
        const double gap = rng.uniform(1e-3 * dom.R0, 0.5 * dom.R0);
        const Vec<2> y{s, dom.psi(Vec<1>{s}) - gap};
        const double rho = regularized_distance<2>(f, y);
        const double ratio = rho / gap;
        ratio_min = std::min(ratio_min, ratio);
        ratio_max = std::max(ratio_max, ratio);
        vert_max = std::max(vert_max, grad_regdist_at<2>(f, y, rho)[1]);
    }
    // Comparability with the true gap is the contract; losing it is a bug,
    // not a property of the inputs.
    if (!(ratio_min >= 1.0 / (1.05 * f.M) && ratio_max <= 1.05 * f.M))
        throw std::runtime_error("regdist cell: rho/gap left [1/M, M]");

    NormReport rep;
    const std::string grid = "kernel_n=" + std::to_string(kernel_n);
    rep.put("ratio_min", ratio_min, grid);
    rep.put("ratio_max", ratio_max, grid);
    rep.put("comparability_M", f.M, grid);
    rep.put("vertical_grad_max", vert_max, grid);
    rep.meta["samples"] = std::to_string(samples);
    return rep;
}

inline NormReport run_mollify(const json& p, std::uint64_t seed) {
    const GraphDomain<2> dom = build_domain(p, "");
    const double R = num_at(p, "", "R", 0.3);
    const double lp = num_at(p, "", "p", 2.0);
    const int trials = int_at(p, "", "trials", 100);
    const YoungReport yr = verify_young_bounds(dom, R, lp, trials,
                                               static_cast<unsigned>(seed));
    if (yr.containment_failures > 0)
        throw std::runtime_error("mollify cell: stencil left the enlarged patch");

    NormReport rep;
    const std::string grid = "trials=" + std::to_string(trials);
    rep.put("lp_ratio_max", yr.lp_ratio_max, grid);
    rep.put("grad_ratio_max", yr.grad_ratio_max, grid);
    rep.put("containment_failures", yr.containment_failures, grid);
    rep.meta["p"] = oblique::detail::fmt_num(lp);
    return rep;
}

inline NormReport run_extend(const json& p, std::uint64_t) {
    const GraphDomain<2> dom = build_domain(p, "");
    const double R = num_at(p, "", "R", 0.05);
    ExtensionOptions opt;
    opt.p = num_at(p, "", "p", 2.0);
    opt.columns = int_at(p, "", "columns", 25);
    opt.rows = int_at(p, "", "rows", 101);
    opt.kernel_n = int_at(p, "", "kernel_n", 17);

    const std::string datum = str_at(p, "", "datum", "sin3");
    std::function<double(double)> g;
    if (datum == "const")
        g = [](double) { return 1.0; };
    else if (datum == "linear")
        g = [](double s) { return s; };
    else
        g = [](double s) { return std::sin(3.0 * s); };

    const ExtensionResult res = extend_neumann(cyl_neighborhood<2>(dom, R), g, opt);
    NormReport rep;
    const std::string grid =
        std::to_string(opt.columns) + "x" + std::to_string(opt.rows);
    rep.put("residual_sup", res.residual_sup, grid);
    rep.put("n_ext", res.n_ext, grid);
    rep.put("v_w2p", res.vnorms.w2p, grid);
    rep.put("g_lp_boundary", res.g_lp_boundary, grid);
    rep.put("g_gagliardo_boundary", res.g_gagliardo_boundary, grid);
    rep.meta["datum"] = datum;
    rep.meta["p"] = oblique::detail::fmt_num(opt.p);
    return rep;
}

inline NormReport run_solve(const json& p, const ToleranceSet& tol) {
    const GraphDomain<2> dom = build_domain(p, "");
    const std::string problem = str_at(p, "", "problem", "mms_trig");

    EllipticOperator op = laplacian_op();
    ObliqueSolveOptions so;
    so.grid.R = num_at(p, "", "R", 0.5);
    so.grid.H = num_at(p, "", "H", 0.5);
    so.grid.n1 = int_at(p, "", "n1", 49);
    so.grid.n2 = int_at(p, "", "n2", 33);
    so.grid.kernel_n = int_at(p, "", "kernel_n", 17);
    so.grid.shear = detail::has(p, "chart") && p.at("chart") == "shear";
    so.picard_tol = tol.picard_tol;
    so.linear.tol = tol.linear_tol;

    ObliqueField<2> bc;
    double b1 = 0.3, b2 = -1.0, b0v = -1.0;
    if (detail::has(p, "bc")) {
        const json& b = p.at("bc");
        b1 = num_at(b, "/bc", "b1", b1);
        b2 = num_at(b, "/bc", "b2", b2);
        b0v = num_at(b, "/bc", "b0", b0v);
    }
    bc.b = [b1, b2](const Vec<2>&) { return Vec<2>{b1, b2}; };
    bc.b0 = [b0v](const Vec<2>&) { return b0v; };

    // Manufactured targets; "homogeneous" checks the zero solution.
    std::function<double(const Vec<2>&)> star, f, g;
    if (problem == "quadratic") {
        star = [](const Vec<2>& y) { return y[0] * y[0] + 2.0 * y[1] * y[1] - 1.0; };
        f = [](const Vec<2>&) { return 6.0; };
    } else if (problem == "mms_trig") {
        star = [](const Vec<2>& y) { return std::sin(y[0]) * std::cosh(y[1]); };
        f = [](const Vec<2>&) { return 0.0; };
    } else {
        star = [](const Vec<2>&) { return 0.0; };
        f = [](const Vec<2>&) { return 0.0; };
    }
    g = [&bc, &star](const Vec<2>& y) {
        const double h = 1e-6;
        const Vec<2> b = bc.b(y);
        const double ux = (star(Vec<2>{y[0] + h, y[1]}) - star(Vec<2>{y[0] - h, y[1]})) / (2 * h);
        const double uy = (star(Vec<2>{y[0], y[1] + h}) - star(Vec<2>{y[0], y[1] - h})) / (2 * h);
        return b[0] * ux + b[1] * uy + bc.b0(y) * star(y);
    };
    so.dirichlet = star;

    const ObliqueSolution sol = solve_oblique(dom, op, bc, g, f, so);
    double err = 0.0;
    for (int i = 0; i < sol.fp.spec.n1; ++i)
        for (int j = 0; j < sol.fp.spec.n2; ++j)
            err = std::max(err, std::abs(sol.u.values[i * sol.fp.spec.n2 + j] -
                                         star(sol.fp.ypoint(i, j))));

    NormReport rep;
    const std::string grid =
        std::to_string(so.grid.n1) + "x" + std::to_string(so.grid.n2);
    rep.put("err_sup", err, grid);
    rep.put("picard_iters", sol.picard_iters, grid);
    rep.put("linear_residual", sol.linear.rel_residual, grid);
    rep.meta["problem"] = problem;
    return rep;
}

inline NormReport run_probe(const json& p, const ToleranceSet& tol) {
    const GraphDomain<2> dom = build_domain(p, "");
    const std::string variant = str_at(p, "", "variant", "model");
    const double lp = num_at(p, "", "p", 2.0);

    if (variant == "model") {
        ModelProbeOptions mo;
        mo.p = lp;
        mo.n1 = int_at(p, "", "n1", 81);
        mo.n2 = int_at(p, "", "n2", 49);
        mo.ny = int_at(p, "", "ny", 61);
        mo.linear.tol = tol.linear_tol;
        const double r = num_at(p, "", "r", 0.2);
        return probe_model_problem(dom, laplacian_op(),
                                   [](const Vec<2>&) { return 1.0; }, r, mo);
    }

    MainProbeOptions mo;
    mo.R = num_at(p, "", "R", 0.25);
    mo.n1 = int_at(p, "", "n1", 65);
    mo.n2 = int_at(p, "", "n2", 49);
    mo.ny = int_at(p, "", "ny", 61);
    mo.linear.tol = tol.linear_tol;

    ObliqueField<2> bc;
    bc.b = [](const Vec<2>& y) { return Vec<2>{0.2 + 0.1 * std::sin(y[0]), -1.0}; };
    bc.b0 = [](const Vec<2>&) { return -0.5; };
    return probe_main_estimate(
        dom, laplacian_op(), bc, [](const Vec<2>&) { return 1.0; },
        [](const Vec<2>& y) { return std::sin(2.0 * y[0]); }, lp, mo);
}

inline NormReport run_counterexample(const json& p) {
    const std::string ex = str_at(p, "", "example", "");
    if (ex == "cusp") {
        const CuspExample c = make_cusp(num_at(p, "", "p", 8.0), num_at(p, "", "eps", 1.0),
                                        num_at(p, "", "beta", 0.5), num_at(p, "", "R", 1.0));
        return certify_cusp(c, int_at(p, "", "levels", 40));
    }
    const WedgeExample w =
        make_wedge(num_at(p, "", "theta0", 2.356194490192345), num_at(p, "", "R", 1.0));
    std::vector<double> ps;
    if (has(p, "p")) {
        if (p.at("p").is_array())
            for (const json& v : p.at("p")) ps.push_back(v.get<double>());
        else
            ps.push_back(p.at("p").get<double>());
    } else {
        ps = {4.0, 8.0};
    }
    return certify_wedge(w, ps, int_at(p, "", "levels", 120));
}

inline NormReport execute_cell(const std::string& kind, const Cell& cell,
                               const ToleranceSet& tol) {
    if (kind == "regdist") return run_regdist(cell.payload, cell.seed);
    if (kind == "mollify") return run_mollify(cell.payload, cell.seed);
    if (kind == "extend") return run_extend(cell.payload, cell.seed);
    if (kind == "solve") return run_solve(cell.payload, tol);
    if (kind == "probe") return run_probe(cell.payload, tol);
    return run_counterexample(cell.payload);
}

}  // namespace detail

struct RunOutcome {
    int exit_code = 0;
    int cells = 0;
    int failed = 0;
    std::string index_path;
};

/// Executes every sweep cell and writes <out>/index.json plus per-cell
/// CSVs. Cell failures are recorded and the run continues; the exit code is
/// 1 when any cell failed. Hypothesis warnings inside probe reports are
/// data, never failures.
inline RunOutcome run(const ExperimentConfig& cfg, const std::string& out_dir, int jobs = 1) {
    if (out_dir.empty()) throw config_error("/out", "no output directory given");
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    const ToleranceSet tol = resolve_tolerances(cfg.tolerance_profile);
    const std::vector<detail::Cell> cells = detail::expand_cells(cfg);

    struct Done {
        NormReport rep;
        bool ok = false;
        std::string error;
        long long wall_ms = 0;
    };
    std::vector<Done> done(cells.size());

    std::atomic<size_t> next{0};
    const auto worker = [&]() {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                done[i].rep = detail::execute_cell(cfg.kind, cells[i], tol);
                done[i].ok = true;
            } catch (const std::exception& e) {
                done[i].error = e.what();
            }
            done[i].wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();
        }
    };
    const int nw = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
    if (nw <= 1 || cells.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nw; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    // Merge into the deterministic index; timing goes to the CSVs only.
    json index;
    index["tool"] = kToolName;
    index["version"] = kToolVersion;
    index["kind"] = cfg.kind;
    index["config_hash"] = detail::config_hash(cfg.canonical);
    index["seed"] = cfg.seed;
    index["tolerance_profile"] = cfg.tolerance_profile;
    index["tolerances"] = {{"picard_tol", tol.picard_tol}, {"linear_tol", tol.linear_tol}};
    index["cells"] = json::array();

    RunOutcome out;
    out.cells = static_cast<int>(cells.size());
    for (size_t i = 0; i < cells.size(); ++i) {
        json jc;
        jc["id"] = cells[i].id;
        jc["seed"] = cells[i].seed;
        jc["params"] = cells[i].payload;
        jc["status"] = done[i].ok ? "ok" : "failed";
        if (!done[i].ok) {
            jc["error"] = done[i].error;
            ++out.failed;
        }
        json names = json::object(), meta = json::object();
        for (const auto& [name, e] : done[i].rep.entries)
            names[name] = {{"value", e.value}, {"grid", e.grid}};
        for (const auto& [k, v] : done[i].rep.meta) meta[k] = v;
        jc["entries"] = names;
        jc["meta"] = meta;
        index["cells"].push_back(jc);

        std::ofstream csv(fs::path(out_dir) / (cells[i].id + ".csv"));
        csv << "row,key,value,grid\n";
        csv << "status," << (done[i].ok ? "ok" : "failed") << ",,\n";
        csv << "wall,wall_ms," << done[i].wall_ms << ",\n";
        for (const auto& [name, e] : done[i].rep.entries)
            csv << "entry," << name << "," << json(e.value).dump() << "," << e.grid << "\n";
        for (const auto& [k, v] : done[i].rep.meta)
            csv << "meta," << k << "," << v << ",\n";
        if (!done[i].ok) csv << "error," << done[i].error << ",,\n";
    }

    const fs::path ipath = fs::path(out_dir) / "index.json";
    std::ofstream(ipath) << index.dump(2) << "\n";
    out.index_path = ipath.string();
    out.exit_code = out.failed > 0 ? 1 : 0;
    return out;
}

struct IndexSummary {
    std::vector<std::string> header{"file",   "version", "cell",    "kind",
                                    "status", "wall_ms", "summary"};
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> warnings;

    std::string to_text() const {
        std::vector<size_t> w(header.size());
        for (size_t c = 0; c < header.size(); ++c) w[c] = header[c].size();
        for (const auto& r : rows)
            for (size_t c = 0; c < r.size(); ++c) w[c] = std::max(w[c], r[c].size());
        std::ostringstream os;
        const auto emit = [&](const std::vector<std::string>& r) {
            for (size_t c = 0; c < r.size(); ++c) {
                os << r[c];
                if (c + 1 < r.size()) os << std::string(w[c] - r[c].size() + 2, ' ');
            }
            os << "\n";
        };
        emit(header);
        for (const auto& r : rows) emit(r);
        return os.str();
    }
};

/// Scans a directory of run outputs and summarizes one row per cell.
/// Unreadable JSON becomes a diagnostic row instead of an error; an empty
/// directory yields an empty table with a warning.
inline IndexSummary report_index(const std::string& dir) {
    namespace fs = std::filesystem;
    IndexSummary out;
    if (!fs::is_directory(dir)) {
        out.warnings.push_back("not a directory: " + dir);
        return out;
    }

    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".json")
            files.push_back(e.path());
    std::sort(files.begin(), files.end());

    const auto wall_of = [&dir](const std::string& cell_id) -> std::string {
        std::ifstream csv(fs::path(dir) / (cell_id + ".csv"));
        std::string line;
        while (std::getline(csv, line))
            if (line.rfind("wall,wall_ms,", 0) == 0) {
                const std::string rest = line.substr(13);
                return rest.substr(0, rest.find(','));
            }
        return "-";
    };

    for (const fs::path& f : files) {
        json j;
        try {
            std::ifstream in(f);
            j = json::parse(in);
        } catch (...) {
            out.rows.push_back({f.filename().string(), "-", "-", "-", "unreadable", "-", ""});
            continue;
        }
        if (!j.is_object() || !j.contains("cells") || !j.at("cells").is_array()) continue;
        const std::string version = j.value("version", std::string("-"));
        const std::string kind = j.value("kind", std::string("-"));
        for (const json& c : j.at("cells")) {
            const std::string id = c.value("id", std::string("-"));
            std::ostringstream sum;
            int picked = 0;
            if (c.contains("meta"))
                for (const auto& [k, v] : c.at("meta").items())
                    if (picked < 3 && k.size() > 8 && k.substr(k.size() - 8) == "_verdict") {
                        sum << (picked ? " " : "") << k << "=" << v.get<std::string>();
                        ++picked;
                    }
            if (c.contains("entries"))
                for (const auto& [k, v] : c.at("entries").items()) {
                    if (picked >= 6) break;
                    if (k.find("slope") != std::string::npos ||
                        k.find("ratio") != std::string::npos ||
                        k.find("n_e") != std::string::npos ||
                        k.find("err") != std::string::npos) {
                        sum << (picked ? " " : "") << k << "="
                            << v.at("value").dump();
                        ++picked;
                    }
                }
            out.rows.push_back({f.filename().string(), version, id, kind,
                                c.value("status", std::string("-")), wall_of(id),
                                sum.str()});
        }
    }
    if (out.rows.empty()) out.warnings.push_back("no run outputs found in " + dir);
    return out;
}

}  // namespace oblique::cli
