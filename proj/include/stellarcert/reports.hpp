#pragma once

// Run configuration, report builders, CSV/JSON emitters, the on-disk
// boundary cache and the self-check suites behind the CLI. Reports are plain
// structs so tests can drive them in-process. Emitters are pure string
// builders; numbers are written as shortest round-trip decimals, so a fixed
// config (seed included) reproduces output files byte for byte.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "stellarcert/detector_model.hpp"
#include "stellarcert/gaussian_states.hpp"
#include "stellarcert/witness_engine.hpp"

namespace stellarcert {

inline constexpr int kSchemaVersion = 1;

struct RunConfig {
    DetectorParams params{};
    std::vector<int> ranks{1, 2, 3};
    std::string lambda_grid = "default";
    SearchConfig search{};
    std::string format = "csv"; // "csv" | "json"
    std::string out_path;       // empty: stdout
    std::uint64_t seed = 12345;
    int n_max = 20;             // depth of the probability table
    std::string cache_dir;      // empty: default location

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

inline void validate(const RunConfig& c) {
    validate(c.params);
    validate(c.search);
    if (c.ranks.empty())
        throw std::invalid_argument("RunConfig: empty rank list");
    for (int m : c.ranks)
        if (m < 1 || m > 64)
            throw std::invalid_argument("RunConfig: ranks must lie in [1, 64]");
    if (c.format != "csv" && c.format != "json")
        throw std::invalid_argument("RunConfig: format must be csv or json");
    if (c.n_max < 0 || c.n_max > 100000)
        throw std::invalid_argument("RunConfig: n_max out of range");
}

inline void to_json(nlohmann::json& j, const SearchConfig& s) {
    j = nlohmann::json{{"alpha_max", s.alpha_max},
                       {"r_max", s.r_max},
                       {"alpha_points", s.alpha_points},
                       {"r_points", s.r_points},
                       {"multistarts", s.multistarts},
                       {"refine_tol", s.refine_tol},
                       {"max_refine_iters", s.max_refine_iters}};
}

inline void from_json(const nlohmann::json& j, SearchConfig& s) {
    const SearchConfig d;
    s.alpha_max = j.value("alpha_max", d.alpha_max);
    s.r_max = j.value("r_max", d.r_max);
    s.alpha_points = j.value("alpha_points", d.alpha_points);
    s.r_points = j.value("r_points", d.r_points);
    s.multistarts = j.value("multistarts", d.multistarts);
    s.refine_tol = j.value("refine_tol", d.refine_tol);
    s.max_refine_iters = j.value("max_refine_iters", d.max_refine_iters);
}

inline void to_json(nlohmann::json& j, const RunConfig& c) {
    j = nlohmann::json{{"eta", c.params.eta},
                       {"transmittance", c.params.transmittance},
                       {"ranks", c.ranks},
                       {"lambda_grid", c.lambda_grid},
                       {"search", c.search},
                       {"format", c.format},
                       {"out", c.out_path},
                       {"seed", c.seed},
                       {"n_max", c.n_max},
                       {"cache_dir", c.cache_dir}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
    const RunConfig d;
    c.params.eta = j.value("eta", d.params.eta);
    c.params.transmittance = j.value("transmittance", d.params.transmittance);
    c.ranks = j.value("ranks", d.ranks);
    c.lambda_grid = j.value("lambda_grid", d.lambda_grid);
    if (j.contains("search")) c.search = j.at("search").get<SearchConfig>();
    c.format = j.value("format", d.format);
    c.out_path = j.value("out", d.out_path);
    c.seed = j.value("seed", d.seed);
    c.n_max = j.value("n_max", d.n_max);
    c.cache_dir = j.value("cache_dir", d.cache_dir);
}

// ---------------------------------------------------------------------------
// Lambda grid specification. Elements joined by ';':
//   default          the built-in grid
//   lin:lo,hi,n      n equally spaced points from lo to hi
//   geo:lo,hi,n      n geometrically spaced points, lo and hi positive
//   vals:a,b,...     literal values
// Duplicates are fine; the sweep sorts and dedupes.

namespace detail {

inline std::vector<double> parse_number_list(const std::string& s,
                                             const std::string& ctx) {
    std::vector<double> out;
    size_t pos = 0;
    while (pos <= s.size()) {
        size_t next = s.find(',', pos);
        std::string tok = s.substr(pos, next == std::string::npos ? next : next - pos);
        const char* b = tok.c_str();
        char* e = nullptr;
        double v = std::strtod(b, &e);
        if (e == b || *e != '\0' || !std::isfinite(v))
            throw std::invalid_argument("lambda grid: bad number '" + tok +
                                        "' in " + ctx);
        out.push_back(v);
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    if (out.empty())
        throw std::invalid_argument("lambda grid: empty number list in " + ctx);
    return out;
}

inline int checked_count(double v, const std::string& ctx) {
    double r = std::round(v);
    if (std::abs(v - r) > 1e-9 || r < 1 || r > 100000)
        throw std::invalid_argument("lambda grid: bad point count in " + ctx);
    return int(r);
}

} // namespace detail

inline std::vector<double> parse_lambda_grid(const std::string& spec) {
    if (spec.empty())
        throw std::invalid_argument("lambda grid: empty specification");
    std::vector<double> out;
    size_t pos = 0;
    while (pos <= spec.size()) {
        size_t next = spec.find(';', pos);
        std::string piece =
            spec.substr(pos, next == std::string::npos ? next : next - pos);
        if (piece == "default") {
            auto d = default_lambda_grid();
            out.insert(out.end(), d.begin(), d.end());
        } else if (piece.rfind("lin:", 0) == 0) {
            auto v = detail::parse_number_list(piece.substr(4), piece);
            if (v.size() != 3)
                throw std::invalid_argument("lambda grid: lin needs lo,hi,n");
            int n = detail::checked_count(v[2], piece);
            if (n == 1) {
                out.push_back(v[0]);
            } else {
                for (int k = 0; k < n; ++k)
                    out.push_back(v[0] + (v[1] - v[0]) * k / (n - 1));
            }
        } else if (piece.rfind("geo:", 0) == 0) {
            auto v = detail::parse_number_list(piece.substr(4), piece);
            if (v.size() != 3)
                throw std::invalid_argument("lambda grid: geo needs lo,hi,n");
            if (!(v[0] > 0.0) || !(v[1] > 0.0))
                throw std::invalid_argument("lambda grid: geo bounds must be positive");
            int n = detail::checked_count(v[2], piece);
            if (n == 1) {
                out.push_back(v[0]);
            } else {
                double ratio = std::log(v[1] / v[0]);
                for (int k = 0; k < n; ++k)
                    out.push_back(v[0] * std::exp(ratio * k / (n - 1)));
            }
        } else if (piece.rfind("vals:", 0) == 0) {
            auto v = detail::parse_number_list(piece.substr(5), piece);
            out.insert(out.end(), v.begin(), v.end());
        } else {
            throw std::invalid_argument("lambda grid: unrecognized element '" +
                                        piece + "'");
        }
        if (next == std::string::npos) break;
        pos = next + 1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Number formatting and file plumbing.

namespace detail {

// Shortest decimal that parses back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

inline std::uint64_t fnv1a64(const void* data, size_t len, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a64_double(double v, std::uint64_t h) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    return fnv1a64(&bits, sizeof bits, h);
}

// Uniform doubles straight from the engine's 64-bit stream; keeps the draw
// sequence independent of standard-library distribution internals.
struct Rand {
    std::mt19937_64 eng;
    explicit Rand(std::uint64_t seed) : eng(seed) {}
    double u01() { return double(eng() >> 11) * 0x1.0p-53; }
    double range(double lo, double hi) { return lo + (hi - lo) * u01(); }
    int below(int n) { return int(eng() % std::uint64_t(n)); }
};

} // namespace detail

inline void write_text_atomic(const std::filesystem::path& path,
                              const std::string& text) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        f << text;
        f.flush();
        if (!f)
            throw std::runtime_error("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// Report builders.

struct ProbabilityRow {
    int n;
    double no_click;
    double click_d1;
    double click_d2;
    double double_click;

    friend bool operator==(const ProbabilityRow&, const ProbabilityRow&) = default;
};

struct ProbabilityTable {
    DetectorParams params;
    std::vector<ProbabilityRow> rows;

    friend bool operator==(const ProbabilityTable&, const ProbabilityTable&) = default;
};

inline ProbabilityTable probabilities_table(const DetectorParams& p, int n_max) {
    validate(p);
    if (n_max < 0 || n_max > 100000)
        throw std::invalid_argument("probabilities_table: n_max out of range");
    ProbabilityTable t;
    t.params = p;
    for (int n = 0; n <= n_max; ++n)
        t.rows.push_back({n, prob_no_click(p, n), prob_single_click(p, n, Outcome::CLICK_D1_ONLY),
                          prob_single_click(p, n, Outcome::CLICK_D2_ONLY), prob_double_click(p, n)});
    return t;
}

struct ThresholdRow {
    int m = 0;
    ThresholdResult result;

    friend bool operator==(const ThresholdRow&, const ThresholdRow&) = default;
};

struct ThresholdsReport {
    DetectorParams params;
    std::vector<ThresholdRow> rows;
    WmaxResult wmax;

    friend bool operator==(const ThresholdsReport&, const ThresholdsReport&) = default;
};

namespace detail {

inline std::vector<int> sorted_unique(std::vector<int> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

} // namespace detail

inline ThresholdsReport thresholds_report(const RunConfig& cfg) {
    validate(cfg);
    ThresholdsReport rep;
    rep.params = cfg.params;
    const WitnessSpec spec = witness_single_click(cfg.params);
    for (int m : detail::sorted_unique(cfg.ranks))
        rep.rows.push_back({m, optimize_threshold(spec, m, cfg.search)});
    rep.wmax = wmax_single_click(cfg.params);
    return rep;
}

struct BoundaryReport {
    DetectorParams params;
    std::vector<double> lambdas; // sorted, deduped
    PhysicalBoundary physical;
    std::vector<RegionBoundary> levels;
    std::vector<bool> from_cache; // parallel to levels

    friend bool operator==(const BoundaryReport&, const BoundaryReport&) = default;
};

// ---------------------------------------------------------------------------
// Boundary cache. One JSON file per (detector, rank, lambda grid, search
// settings), named by an FNV-1a key over those fields. The stored config
// block is compared on load, so a key collision degrades to a recompute.

inline std::filesystem::path default_cache_dir() {
    if (const char* env = std::getenv("STELLARCERT_CACHE_DIR"))
        return std::filesystem::path(env);
    if (const char* home = std::getenv("HOME"))
        return std::filesystem::path(home) / ".stellarcert-cache";
    return std::filesystem::path(".stellarcert-cache");
}

inline std::uint64_t boundary_cache_key(const DetectorParams& p, int m,
                                        const std::vector<double>& lambdas,
                                        const SearchConfig& s) {
    const char tag[] = "stellarcert.boundary.v1";
    std::uint64_t h = detail::fnv1a64(tag, sizeof tag - 1, 1469598103934665603ull);
    h = detail::fnv1a64_double(p.eta, h);
    h = detail::fnv1a64_double(p.transmittance, h);
    h = detail::fnv1a64_double(double(m), h);
    h = detail::fnv1a64_double(double(lambdas.size()), h);
    for (double l : lambdas) h = detail::fnv1a64_double(l, h);
    h = detail::fnv1a64_double(s.alpha_max, h);
    h = detail::fnv1a64_double(s.r_max, h);
    h = detail::fnv1a64_double(double(s.alpha_points), h);
    h = detail::fnv1a64_double(double(s.r_points), h);
    h = detail::fnv1a64_double(double(s.multistarts), h);
    h = detail::fnv1a64_double(s.refine_tol, h);
    h = detail::fnv1a64_double(double(s.max_refine_iters), h);
    return h;
}

inline std::filesystem::path boundary_cache_path(const std::filesystem::path& dir,
                                                 std::uint64_t key) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "boundary_%016llx.json",
                  static_cast<unsigned long long>(key));
    return dir / buf;
}

namespace detail {

inline nlohmann::json sample_json(const BoundarySample& s) {
    return nlohmann::json{{"lambda", s.lambda},
                          {"threshold", s.threshold},
                          {"converged", s.converged},
                          {"alpha_re", s.argmax.alpha.real()},
                          {"alpha_im", s.argmax.alpha.imag()},
                          {"r", s.argmax.r},
                          {"boundary_hugging", s.boundary_hugging}};
}

inline BoundarySample sample_from_json(const nlohmann::json& j) {
    BoundarySample s;
    s.lambda = j.at("lambda").get<double>();
    s.threshold = j.at("threshold").get<double>();
    s.converged = j.at("converged").get<bool>();
    s.argmax.alpha = complex(j.at("alpha_re").get<double>(),
                             j.at("alpha_im").get<double>());
    s.argmax.r = j.at("r").get<double>();
    s.boundary_hugging = j.at("boundary_hugging").get<bool>();
    return s;
}

inline nlohmann::json level_json(const RegionBoundary& b) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : b.samples) samples.push_back(sample_json(s));
    nlohmann::json poly = nlohmann::json::array();
    for (const auto& [x, y] : b.polyline) poly.push_back({x, y});
    return nlohmann::json{{"m", b.m}, {"samples", samples}, {"polyline", poly}};
}

inline RegionBoundary level_from_json(const nlohmann::json& j) {
    RegionBoundary b;
    b.m = j.at("m").get<int>();
    for (const auto& s : j.at("samples")) b.samples.push_back(sample_from_json(s));
    for (const auto& v : j.at("polyline"))
        b.polyline.emplace_back(v.at(0).get<double>(), v.at(1).get<double>());
    return b;
}

inline nlohmann::json boundary_cache_config(const DetectorParams& p, int m,
                                            const std::vector<double>& lambdas,
                                            const SearchConfig& s) {
    return nlohmann::json{{"eta", p.eta},
                          {"transmittance", p.transmittance},
                          {"m", m},
                          {"lambda_grid", lambdas},
                          {"search", s}};
}

inline std::optional<RegionBoundary>
load_cached_boundary(const std::filesystem::path& file,
                     const nlohmann::json& expected_config) {
    std::ifstream f(file);
    if (!f) return std::nullopt;
    nlohmann::json doc = nlohmann::json::parse(f, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
    if (doc.value("schema_version", -1) != kSchemaVersion) return std::nullopt;
    if (!doc.contains("config") || doc.at("config") != expected_config)
        return std::nullopt;
    try {
        return level_from_json(doc.at("results"));
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

} // namespace detail

inline BoundaryReport boundary_report(const RunConfig& cfg, bool use_cache = true) {
    validate(cfg);
    BoundaryReport rep;
    rep.params = cfg.params;
    rep.lambdas = parse_lambda_grid(cfg.lambda_grid);
    std::sort(rep.lambdas.begin(), rep.lambdas.end());
    rep.lambdas.erase(std::unique(rep.lambdas.begin(), rep.lambdas.end()),
                      rep.lambdas.end());
    rep.physical = physical_boundary(cfg.params);

    const std::filesystem::path dir =
        cfg.cache_dir.empty() ? default_cache_dir()
                              : std::filesystem::path(cfg.cache_dir);
    for (int m : detail::sorted_unique(cfg.ranks)) {
        const std::uint64_t key =
            boundary_cache_key(cfg.params, m, rep.lambdas, cfg.search);
        const std::filesystem::path file = boundary_cache_path(dir, key);
        const nlohmann::json cache_config =
            detail::boundary_cache_config(cfg.params, m, rep.lambdas, cfg.search);
        if (use_cache) {
            if (auto hit = detail::load_cached_boundary(file, cache_config)) {
                rep.levels.push_back(std::move(*hit));
                rep.from_cache.push_back(true);
                continue;
            }
        }
        RegionBoundary level = lambda_sweep(cfg.params, m, rep.lambdas, cfg.search);
        if (use_cache) {
            try {
                std::filesystem::create_directories(dir);
                nlohmann::json doc{{"schema_version", kSchemaVersion},
                                   {"config", cache_config},
                                   {"results", detail::level_json(level)}};
                write_text_atomic(file, doc.dump(2) + "\n");
            } catch (const std::exception&) {
                // cache is an accelerator, not a dependency
            }
        }
        rep.levels.push_back(std::move(level));
        rep.from_cache.push_back(false);
    }
    return rep;
}

struct CertifyReport {
    double r1 = 0.0;
    double r2 = 0.0;
    CertificationVerdict verdict;
    double active_threshold = 0.0; // W of the strongest witness line
    BoundaryReport boundaries;
};

inline CertifyReport certify_report(const RunConfig& cfg, double r1, double r2,
                                    double slack = 0.0, bool use_cache = true) {
    // Fail on bad inputs before the boundary sweeps, not after.
    if (!(r1 >= 0.0) || !(r1 <= 1.0) || !(r2 >= 0.0) || !(r2 <= 1.0))
        throw std::invalid_argument("certify: probabilities must be in [0, 1]");
    if (!(slack >= 0.0)) throw std::invalid_argument("certify: slack must be >= 0");
    CertifyReport rep;
    rep.r1 = r1;
    rep.r2 = r2;
    rep.boundaries = boundary_report(cfg, use_cache);
    rep.verdict = certify(r1, r2, rep.boundaries.levels, rep.boundaries.physical,
                          slack);
    rep.active_threshold = r1 - rep.verdict.witness_lambda * r2 - rep.verdict.margin;
    return rep;
}

// ---------------------------------------------------------------------------
// CSV emitters. First line carries the schema version, second the header row.

inline std::string csv_probabilities(const ProbabilityTable& t) {
    std::string s = "schema_version,1\n";
    s += "n,no_click,click_d1_only,click_d2_only,double_click\n";
    for (const auto& r : t.rows) {
        s += std::to_string(r.n);
        s += ',' + detail::format_double(r.no_click);
        s += ',' + detail::format_double(r.click_d1);
        s += ',' + detail::format_double(r.click_d2);
        s += ',' + detail::format_double(r.double_click);
        s += '\n';
    }
    return s;
}

inline std::string csv_thresholds(const ThresholdsReport& t) {
    std::string s = "schema_version,1\n";
    s += "kind,m,value,display,status,evaluations\n";
    for (const auto& row : t.rows) {
        s += "threshold," + std::to_string(row.m);
        s += ',' + detail::format_double(row.result.value);
        s += ',' + detail::format_fixed4(row.result.value);
        s += row.result.converged ? ",ok" : ",unconverged";
        s += ',' + std::to_string(row.result.evaluations);
        s += '\n';
    }
    s += "wmax," + std::to_string(t.wmax.n_star);
    s += ',' + detail::format_double(t.wmax.value);
    s += ',' + detail::format_fixed4(t.wmax.value);
    s += t.wmax.capped ? ",capped" : ",exact";
    s += ",0\n";
    return s;
}

inline std::string csv_boundary(const BoundaryReport& b) {
    std::string s = "schema_version,1\n";
    s += "series,m,x,y,aux\n";
    auto point_rows = [&](const char* name, const std::vector<BoundaryPoint>& pts) {
        for (const auto& p : pts) {
            s += name;
            s += ",," + detail::format_double(p.r2);
            s += ',' + detail::format_double(p.r1);
            s += ',' + std::to_string(p.n);
            s += '\n';
        }
    };
    point_rows("physical_fock", b.physical.fock_points);
    point_rows("physical_hull", b.physical.hull);
    for (const auto& level : b.levels) {
        const std::string m = std::to_string(level.m);
        for (const auto& smp : level.samples) {
            s += "sample," + m;
            s += ',' + detail::format_double(smp.lambda);
            s += ',' + detail::format_double(smp.threshold);
            s += smp.converged ? ",1\n" : ",0\n";
        }
        for (const auto& [x, y] : level.polyline) {
            s += "polyline," + m;
            s += ',' + detail::format_double(x);
            s += ',' + detail::format_double(y);
            s += ",\n";
        }
    }
    return s;
}

inline std::string csv_certify(const CertifyReport& c) {
    std::string s = "schema_version,1\n";
    s += "r1,r2,certified_rank,witness_lambda,active_threshold,margin,"
         "outside_physical,slack\n";
    s += detail::format_double(c.r1);
    s += ',' + detail::format_double(c.r2);
    s += ',' + std::to_string(c.verdict.certified_rank);
    s += ',' + detail::format_double(c.verdict.witness_lambda);
    s += ',' + detail::format_double(c.active_threshold);
    s += ',' + detail::format_double(c.verdict.margin);
    s += c.verdict.outside_physical ? ",1" : ",0";
    s += ',' + detail::format_double(c.verdict.slack);
    s += '\n';
    return s;
}

// ---------------------------------------------------------------------------
// JSON emitters and loaders. One top-level object per document:
// {schema_version, config, results}.

namespace detail {

inline nlohmann::json threshold_row_json(const ThresholdRow& row) {
    return nlohmann::json{{"m", row.m},
                          {"value", row.result.value},
                          {"display", format_fixed4(row.result.value)},
                          {"grid_value", row.result.grid_value},
                          {"alpha_re", row.result.argmax.alpha.real()},
                          {"alpha_im", row.result.argmax.alpha.imag()},
                          {"r", row.result.argmax.r},
                          {"evaluations", row.result.evaluations},
                          {"converged", row.result.converged},
                          {"boundary_hugging", row.result.boundary_hugging}};
}

inline ThresholdRow threshold_row_from_json(const nlohmann::json& j) {
    ThresholdRow row;
    row.m = j.at("m").get<int>();
    row.result.value = j.at("value").get<double>();
    row.result.grid_value = j.at("grid_value").get<double>();
    row.result.argmax.alpha = complex(j.at("alpha_re").get<double>(),
                                      j.at("alpha_im").get<double>());
    row.result.argmax.r = j.at("r").get<double>();
    row.result.evaluations = j.at("evaluations").get<long>();
    row.result.converged = j.at("converged").get<bool>();
    row.result.boundary_hugging = j.at("boundary_hugging").get<bool>();
    return row;
}

inline nlohmann::json boundary_points_json(const std::vector<BoundaryPoint>& pts) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : pts)
        arr.push_back({{"r2", p.r2}, {"r1", p.r1}, {"n", p.n}});
    return arr;
}

inline std::vector<BoundaryPoint> boundary_points_from_json(const nlohmann::json& arr) {
    std::vector<BoundaryPoint> pts;
    for (const auto& p : arr)
        pts.push_back({p.at("r2").get<double>(), p.at("r1").get<double>(),
                       p.at("n").get<long>()});
    return pts;
}

} // namespace detail

inline nlohmann::json results_probabilities(const ProbabilityTable& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows)
        rows.push_back({{"n", r.n},
                        {"no_click", r.no_click},
                        {"click_d1_only", r.click_d1},
                        {"click_d2_only", r.click_d2},
                        {"double_click", r.double_click}});
    return nlohmann::json{{"table", "probabilities"},
                          {"eta", t.params.eta},
                          {"transmittance", t.params.transmittance},
                          {"rows", rows}};
}

inline nlohmann::json results_thresholds(const ThresholdsReport& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : t.rows) rows.push_back(detail::threshold_row_json(row));
    return nlohmann::json{{"table", "thresholds"},
                          {"eta", t.params.eta},
                          {"transmittance", t.params.transmittance},
                          {"thresholds", rows},
                          {"wmax",
                           {{"value", t.wmax.value},
                            {"display", detail::format_fixed4(t.wmax.value)},
                            {"n_star", t.wmax.n_star},
                            {"capped", t.wmax.capped}}}};
}

inline nlohmann::json results_boundary(const BoundaryReport& b) {
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& level : b.levels) levels.push_back(detail::level_json(level));
    return nlohmann::json{
        {"table", "boundary"},
        {"eta", b.params.eta},
        {"transmittance", b.params.transmittance},
        {"lambda_grid", b.lambdas},
        {"physical",
         {{"fock_points", detail::boundary_points_json(b.physical.fock_points)},
          {"hull", detail::boundary_points_json(b.physical.hull)}}},
        {"levels", levels}};
}

inline nlohmann::json results_certify(const CertifyReport& c) {
    return nlohmann::json{{"table", "certify"},
                          {"r1", c.r1},
                          {"r2", c.r2},
                          {"certified_rank", c.verdict.certified_rank},
                          {"witness_lambda", c.verdict.witness_lambda},
                          {"active_threshold", c.active_threshold},
                          {"margin", c.verdict.margin},
                          {"outside_physical", c.verdict.outside_physical},
                          {"slack", c.verdict.slack}};
}

inline std::string json_document(const RunConfig& cfg, const nlohmann::json& results) {
    nlohmann::json doc{{"schema_version", kSchemaVersion},
                       {"config", cfg},
                       {"results", results}};
    return doc.dump(2) + "\n";
}

inline ThresholdsReport thresholds_from_json(const nlohmann::json& doc) {
    const nlohmann::json& res = doc.at("results");
    ThresholdsReport rep;
    rep.params.eta = res.at("eta").get<double>();
    rep.params.transmittance = res.at("transmittance").get<double>();
    for (const auto& row : res.at("thresholds"))
        rep.rows.push_back(detail::threshold_row_from_json(row));
    rep.wmax.value = res.at("wmax").at("value").get<double>();
    rep.wmax.n_star = res.at("wmax").at("n_star").get<long>();
    rep.wmax.capped = res.at("wmax").at("capped").get<bool>();
    return rep;
}

inline BoundaryReport boundary_from_json(const nlohmann::json& doc) {
    const nlohmann::json& res = doc.at("results");
    BoundaryReport rep;
    rep.params.eta = res.at("eta").get<double>();
    rep.params.transmittance = res.at("transmittance").get<double>();
    rep.lambdas = res.at("lambda_grid").get<std::vector<double>>();
    rep.physical.fock_points =
        detail::boundary_points_from_json(res.at("physical").at("fock_points"));
    rep.physical.hull =
        detail::boundary_points_from_json(res.at("physical").at("hull"));
    for (const auto& level : res.at("levels")) {
        rep.levels.push_back(detail::level_from_json(level));
        rep.from_cache.push_back(false);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Validation suites. Each suite is independently seeded from the config seed
// so draw counts in one suite do not shift another's stream. block_fn lets a
// test inject a corrupted closed-form evaluator; the oracle suite must then
// fail, which proves the comparison has teeth.

struct SuiteResult {
    std::string name;
    bool passed = false;
    double max_deviation = 0.0;
    std::string detail; // comma-free, CSV-safe
};

struct ValidationReport {
    std::vector<SuiteResult> suites;
    bool all_passed = false;
};

struct ValidationOptions {
    int povm_draws = 50;
    int oracle_draws = 50;
    int oracle_block = 11; // element indices up to oracle_block - 1
    int crosscheck_draws = 8;
    int soundness_draws = 60;
};

using BlockFn =
    std::function<HermitianMatrix(int, const GaussianParams&, double)>;

namespace detail {

inline std::string short_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline SuiteResult suite_povm_completeness(std::uint64_t seed, int draws) {
    SuiteResult res{"povm_completeness", true, 0.0, ""};
    Rand rng(seed);
    double comp_dev = 0.0, decomp_dev = 0.0;
    double worst_eta = 0.0, worst_t = 0.0;
    for (int d = 0; d < draws; ++d) {
        DetectorParams p{rng.range(0.05, 1.0), rng.range(0.05, 0.95)};
        for (int n = 0; n <= 60; ++n) {
            const double r0 = prob_no_click(p, n);
            const double r1a = prob_single_click(p, n, Outcome::CLICK_D1_ONLY);
            const double r1b = prob_single_click(p, n, Outcome::CLICK_D2_ONLY);
            const double r2 = prob_double_click(p, n);
            double dev = std::abs(r0 + r1a + r1b + r2 - 1.0);
            for (double v : {r0, r1a, r1b, r2})
                dev = std::max(dev, std::max(-v, v - 1.0));
            for (Outcome oc : {Outcome::NO_CLICK, Outcome::CLICK_D1_ONLY,
                               Outcome::CLICK_D2_ONLY, Outcome::DOUBLE_CLICK}) {
                const ThermalCombo c = povm_thermal_decomposition(p, oc);
                double direct = oc == Outcome::NO_CLICK       ? r0
                                : oc == Outcome::CLICK_D1_ONLY ? r1a
                                : oc == Outcome::CLICK_D2_ONLY ? r1b
                                                               : r2;
                decomp_dev = std::max(
                    decomp_dev, std::abs(combo_coefficient(c, n) - direct));
            }
            if (dev > comp_dev) {
                comp_dev = dev;
                worst_eta = p.eta;
                worst_t = p.transmittance;
            }
        }
    }
    res.max_deviation = std::max(comp_dev, decomp_dev);
    res.passed = comp_dev <= 1e-13 && decomp_dev <= 1e-12;
    res.detail = std::to_string(draws) + " draws; n <= 60; worst eta=" +
                 short_num(worst_eta) + " T=" + short_num(worst_t);
    return res;
}

inline SuiteResult suite_analytic_vs_oracle(std::uint64_t seed, int draws,
                                            int block, const BlockFn& fn) {
    SuiteResult res{"analytic_vs_oracle", true, 0.0, ""};
    Rand rng(seed);
    std::string worst;
    for (int d = 0; d < draws; ++d) {
        GaussianParams g;
        g.alpha = complex(rng.range(0.0, 2.0), 0.0);
        const double mag = rng.range(0.05, 1.5);
        g.r = rng.u01() < 0.5 ? -mag : mag;
        const double nbar = rng.range(0.0, 3.0);
        const HermitianMatrix a = fn(block, g, nbar);
        const HermitianMatrix o = dst_block_oracle(block, g, nbar);
        const double dev = (a - o).cwiseAbs().maxCoeff();
        if (dev > res.max_deviation) {
            res.max_deviation = dev;
            worst = "alpha=" + short_num(g.alpha.real()) + " r=" + short_num(g.r) +
                    " nbar=" + short_num(nbar);
        }
        if (dev > 1e-8) break; // a corrupted evaluator should fail fast
    }
    res.passed = res.max_deviation < 1e-8;
    res.detail = std::to_string(draws) + " draws; block " + std::to_string(block) +
                 "x" + std::to_string(block) + "; worst " + worst;
    return res;
}

inline SuiteResult suite_appendix_concavity() {
    SuiteResult res{"appendix_concavity", true, 0.0, ""};
    const double h = 1e-4;
    for (int e = 1; e <= 9; ++e) {
        const DetectorParams p{0.1 * e, 0.5};
        auto r1c = [&](double n) {
            return std::pow(1.0 - p.eta / 2.0, n) - std::pow(1.0 - p.eta, n);
        };
        auto r2c = [&](double n) {
            return 1.0 - 2.0 * std::pow(1.0 - p.eta / 2.0, n) +
                   std::pow(1.0 - p.eta, n);
        };
        for (int k = 0; k <= 190; ++k) {
            const double n = 1.0 + 0.1 * k;
            const CurvatureCheck c = boundary_curvature_check(p, n);
            if (!(c.r2_derivative > 0.0) || !(c.curvature_indicator < 0.0)) {
                res.passed = false;
                res.detail = "sign condition failed at eta=" + short_num(p.eta) +
                             " n=" + short_num(n);
                return res;
            }
            const double fd_r2p = (r2c(n + h) - r2c(n - h)) / (2.0 * h);
            const double fd_r1p = (r1c(n + h) - r1c(n - h)) / (2.0 * h);
            const double fd_r2pp = (r2c(n + h) - 2.0 * r2c(n) + r2c(n - h)) / (h * h);
            const double fd_r1pp = (r1c(n + h) - 2.0 * r1c(n) + r1c(n - h)) / (h * h);
            const double fd_curv = fd_r1pp * fd_r2p - fd_r1p * fd_r2pp;
            const double dev = std::max(std::abs(c.r2_derivative - fd_r2p),
                                        std::abs(c.curvature_indicator - fd_curv));
            res.max_deviation = std::max(res.max_deviation, dev);
        }
    }
    if (res.max_deviation > 1e-6) res.passed = false;
    if (res.detail.empty())
        res.detail = "eta 0.1..0.9; n in [1;20] step 0.1; T=0.5";
    return res;
}

inline SuiteResult suite_envelope_consistency(const DetectorParams& p) {
    SuiteResult res{"envelope_consistency", true, 0.0, ""};
    SearchConfig cfg;
    cfg.alpha_points = 41;
    cfg.r_points = 41;
    cfg.multistarts = 6;
    const std::vector<double> lambdas{-0.5, -0.2, 0.0, 0.4, 1.0, 3.0, 10.0};
    const RegionBoundary b = lambda_sweep(p, 1, lambdas, cfg);
    for (size_t i = 1; i < b.samples.size(); ++i) {
        const double growth = b.samples[i].threshold - b.samples[i - 1].threshold;
        if (growth > 1e-6) {
            res.passed = false;
            res.detail = "threshold not non-increasing at lambda=" +
                         short_num(b.samples[i].lambda);
        }
        res.max_deviation = std::max(res.max_deviation, growth);
    }
    auto envelope = [&](double x) {
        double v = std::numeric_limits<double>::infinity();
        for (const auto& s : b.samples)
            v = std::min(v, s.threshold + s.lambda * x);
        return std::min(1.0, v);
    };
    for (size_t i = 0; i < b.polyline.size(); ++i) {
        const auto& [x, y] = b.polyline[i];
        const double dev = std::abs(y - std::max(0.0, envelope(x)));
        if (dev > 1e-9) {
            res.passed = false;
            res.detail = "vertex off the line envelope at x=" + short_num(x);
        }
        res.max_deviation = std::max(res.max_deviation, dev);
        if (i >= 2) {
            const auto& [x0, y0] = b.polyline[i - 2];
            const auto& [x1, y1] = b.polyline[i - 1];
            const double s0 = (y1 - y0) / (x1 - x0);
            const double s1 = (y - y1) / (x - x1);
            if (s1 > s0 + 1e-9) {
                res.passed = false;
                res.detail = "polyline slopes increase at x=" + short_num(x);
            }
        }
    }
    if (res.detail.empty())
        res.detail = "rank 1; " + std::to_string(lambdas.size()) +
                     " lambdas; 41x41 grid";
    return res;
}

inline SuiteResult suite_gaussian_moment_crosscheck(const DetectorParams& p,
                                                    std::uint64_t seed,
                                                    int draws) {
    SuiteResult res{"gaussian_moment_crosscheck", true, 0.0, ""};
    Rand rng(seed);
    const ThermalCombo combos[2] = {
        povm_thermal_decomposition(p, Outcome::CLICK_D1_ONLY),
        povm_thermal_decomposition(p, Outcome::DOUBLE_CLICK)};
    const int n_trunc = 240;
    for (int d = 0; d < draws; ++d) {
        GaussianParams g{rng.range(-1.0, 1.0),
                         complex(rng.range(-1.5, 1.5), rng.range(-1.5, 1.5))};
        const double nbar = rng.range(0.0, 0.8);
        const HermitianMatrix rho = dst_block(n_trunc + 1, g, nbar);
        double trace = 0.0;
        for (int n = 0; n <= n_trunc; ++n) trace += rho(n, n).real();
        res.max_deviation = std::max(res.max_deviation, std::abs(1.0 - trace));
        for (const ThermalCombo& c : combos) {
            double truncated = 0.0;
            for (int n = 0; n <= n_trunc; ++n)
                truncated += combo_coefficient(c, n) * rho(n, n).real();
            const double closed = combo_expectation(c, g, nbar);
            res.max_deviation =
                std::max(res.max_deviation, std::abs(closed - truncated));
        }
    }
    res.passed = res.max_deviation <= 1e-6;
    res.detail = std::to_string(draws) + " draws; truncation " +
                 std::to_string(n_trunc);
    return res;
}

inline SuiteResult suite_gaussian_soundness(const DetectorParams& p,
                                            std::uint64_t seed, int draws) {
    SuiteResult res{"gaussian_soundness", true, 0.0, ""};
    SearchConfig cfg;
    cfg.alpha_points = 41;
    cfg.r_points = 41;
    cfg.multistarts = 6;
    const std::vector<double> lambdas{-0.5, -0.25, 0.0, 0.3, 1.0, 3.0, 10.0, 30.0};
    std::vector<RegionBoundary> levels;
    for (int m : {1, 2}) levels.push_back(lambda_sweep(p, m, lambdas, cfg));
    const PhysicalBoundary physical = physical_boundary(p);
    const ThermalCombo c1 = povm_thermal_decomposition(p, Outcome::CLICK_D1_ONLY);
    const ThermalCombo c2 = povm_thermal_decomposition(p, Outcome::DOUBLE_CLICK);

    Rand rng(seed);
    double worst_margin = -std::numeric_limits<double>::infinity();
    int flagged = 0;
    for (int d = 0; d < draws; ++d) {
        const int parts = 1 + rng.below(4);
        double r1 = 0.0, r2 = 0.0, wsum = 0.0;
        std::vector<double> w(parts);
        for (int i = 0; i < parts; ++i) {
            w[i] = 0.05 + rng.u01();
            wsum += w[i];
        }
        for (int i = 0; i < parts; ++i) {
            GaussianParams g{rng.range(-1.2, 1.2),
                             complex(rng.range(-1.8, 1.8), rng.range(-1.8, 1.8))};
            const double nbar = rng.range(0.0, 0.8);
            r1 += w[i] / wsum * combo_expectation(c1, g, nbar);
            r2 += w[i] / wsum * combo_expectation(c2, g, nbar);
        }
        const CertificationVerdict v =
            certify(clamp01(r1), clamp01(r2), levels, physical);
        worst_margin = std::max(worst_margin, v.margin);
        if (v.certified_rank != 0) ++flagged;
    }
    res.passed = flagged == 0;
    res.max_deviation = worst_margin;
    res.detail = std::to_string(draws) + " mixtures; " + std::to_string(flagged) +
                 " false certifications; worst margin " + short_num(worst_margin);
    return res;
}

} // namespace detail

inline ValidationReport run_validation(const RunConfig& cfg,
                                       const ValidationOptions& opts = {},
                                       const BlockFn& block_fn = {}) {
    validate(cfg);
    const BlockFn fn = block_fn ? block_fn
                                : [](int m, const GaussianParams& g, double nb) {
                                      return detail::dst_block_analytic(m, g, nb);
                                  };
    ValidationReport rep;
    rep.suites.push_back(detail::suite_povm_completeness(cfg.seed + 1, opts.povm_draws));
    rep.suites.push_back(detail::suite_analytic_vs_oracle(
        cfg.seed + 2, opts.oracle_draws, opts.oracle_block, fn));
    rep.suites.push_back(detail::suite_appendix_concavity());
    rep.suites.push_back(detail::suite_envelope_consistency(cfg.params));
    rep.suites.push_back(detail::suite_gaussian_moment_crosscheck(
        cfg.params, cfg.seed + 3, opts.crosscheck_draws));
    rep.suites.push_back(detail::suite_gaussian_soundness(cfg.params, cfg.seed + 4,
                                                          opts.soundness_draws));
    rep.all_passed = std::all_of(rep.suites.begin(), rep.suites.end(),
                                 [](const SuiteResult& s) { return s.passed; });
    return rep;
}

inline std::string csv_validation(const ValidationReport& v) {
    std::string s = "schema_version,1\n";
    s += "suite,passed,max_deviation,detail\n";
    for (const auto& r : v.suites) {
        s += r.name;
        s += r.passed ? ",1" : ",0";
        s += ',' + detail::format_double(r.max_deviation);
        s += ',' + r.detail;
        s += '\n';
    }
    return s;
}

inline nlohmann::json results_validation(const ValidationReport& v) {
    nlohmann::json suites = nlohmann::json::array();
    for (const auto& r : v.suites)
        suites.push_back({{"name", r.name},
                          {"passed", r.passed},
                          {"max_deviation", r.max_deviation},
                          {"detail", r.detail}});
    return nlohmann::json{{"table", "validation"},
                          {"all_passed", v.all_passed},
                          {"suites", suites}};
}

} // namespace stellarcert
