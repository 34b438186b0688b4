#pragma once

// Witness thresholds and certifiable-region geometry. A witness is a
// photon-number-diagonal combination of outcome POVMs (single click, or
// single click minus lambda times the coincidence). Its rank-m threshold is
// the supremum, over Gaussian unitaries U = D(alpha) S(r) with on-axis
// displacement, of the largest eigenvalue of the witness compressed to the
// U-rotated span of the first m Fock states. A measured pair (R2, R1)
// certifies stellar rank >= m when R1 - lambda R2 strictly exceeds the
// rank-m threshold for some sampled lambda.

#include <algorithm>
#include <cmath>
#include <array>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "stellarcert/detector_model.hpp"
#include "stellarcert/fock_linalg.hpp"
#include "stellarcert/gaussian_states.hpp"

namespace stellarcert {

struct WitnessSpec {
    ThermalCombo combo;    // thermal decomposition of the witness operator
    DetectorParams params; // detector the combo was derived from
    double lambda = 0.0;   // coincidence penalty; 0 = plain single-click
};

inline WitnessSpec witness_single_click(const DetectorParams& p) {
    return {povm_thermal_decomposition(p, Outcome::CLICK_D1_ONLY), p, 0.0};
}

inline WitnessSpec witness_click_minus_double(const DetectorParams& p,
                                              double lambda) {
    ThermalCombo pi1 = povm_thermal_decomposition(p, Outcome::CLICK_D1_ONLY);
    ThermalCombo pi2 = povm_thermal_decomposition(p, Outcome::DOUBLE_CLICK);
    return {combo_axpy(pi1, -lambda, pi2), p, lambda};
}

// Witness compressed to the rotated m-level span: for U = D S and the
// witness sum_i w_i rho_th(nbar_i) + c I, the (j,k) element is
// sum_i w_i <j| U rho_th(nbar_i) U^dag |k> + c delta_jk.
inline HermitianMatrix projected_witness(const WitnessSpec& spec, int m,
                                         const GaussianParams& g) {
    if (m < 1) throw std::invalid_argument("projected_witness: m must be >= 1");
    HermitianMatrix w = HermitianMatrix::Zero(m, m);
    for (const auto& t : spec.combo.terms) w += t.weight * dst_block(m, g, t.nbar);
    w.diagonal().array() += spec.combo.identity_coeff;
    return w;
}

inline double objective(const WitnessSpec& spec, int m, const GaussianParams& g) {
    return hermitian_max_eig(projected_witness(spec, m, g));
}

// Exact expectation of a thermal-combination observable in a displaced
// squeezed thermal state: each geometric term contracts to a thermal overlap,
// so no Fock truncation enters. This is the reference route for feeding exact
// Gaussian detection statistics into certify().
inline double combo_expectation(const ThermalCombo& combo,
                                const GaussianParams& g, double nbar_state) {
    double v = combo.identity_coeff;
    for (const auto& t : combo.terms)
        v += t.weight * thermal_overlap(g, nbar_state, t.nbar);
    return v;
}

struct SearchConfig {
    double alpha_max = -1.0;  // < 0: use 3 + sqrt(m)
    double r_max = 2.0;
    int alpha_points = 81;
    int r_points = 81;
    int multistarts = 16;
    double refine_tol = 1e-7; // simplex diameter in parameter units
    int max_refine_iters = 400;

    friend bool operator==(const SearchConfig&, const SearchConfig&) = default;
};

inline void validate(const SearchConfig& cfg) {
    if (cfg.alpha_points < 2 || cfg.r_points < 2)
        throw std::invalid_argument("SearchConfig: need at least 2 grid points per axis");
    if (cfg.multistarts < 1)
        throw std::invalid_argument("SearchConfig: multistarts must be >= 1");
    if (!(cfg.r_max > 0.0))
        throw std::invalid_argument("SearchConfig: r_max must be > 0");
    if (!(cfg.refine_tol > 0.0) || cfg.max_refine_iters < 1)
        throw std::invalid_argument("SearchConfig: bad refinement settings");
}

struct ThresholdResult {
    double value = 0.0;
    GaussianParams argmax;
    double grid_value = 0.0; // best value seen on the coarse grid alone
    long evaluations = 0;
    bool converged = true;       // every simplex met the tolerance
    bool boundary_hugging = false; // argmax within 2% of the search box edge

    friend bool operator==(const ThresholdResult&, const ThresholdResult&) = default;
};

namespace detail {

// Deterministic preference for equal objective values: smaller displacement,
// then smaller |r|, then negative r. Keeps exact ties (notably the identity
// point at unit efficiency) reproducible across grid layouts.
inline bool better_candidate(double v, const GaussianParams& g, double best_v,
                             const GaussianParams& best_g) {
    if (v != best_v) return v > best_v;
    const double a = g.alpha.real(), ba = best_g.alpha.real();
    if (a != ba) return a < ba;
    if (std::abs(g.r) != std::abs(best_g.r)) return std::abs(g.r) < std::abs(best_g.r);
    return g.r < best_g.r;
}

// Grid pass plus Nelder-Mead polish. f_grid serves the structured grid scan
// (callers may back it with precomputed blocks); f_cont evaluates arbitrary
// continuum points for the simplex. The r grid is offset by a quarter cell
// so no grid point has r = 0 exactly (the closed form has no singularity
// there, but the exact-zero column would route through the slower dispatch
// fallback); the identity point itself is always evaluated separately since
// several exact threshold values are attained at it.
template <typename FGrid, typename FCont>
ThresholdResult maximize_over_box(FGrid&& f_grid, FCont&& f_cont,
                                  const SearchConfig& cfg, double alpha_max) {
    validate(cfg);
    const int na = cfg.alpha_points, nr = cfg.r_points;
    const double ha = alpha_max / (na - 1);
    const double hr = 2.0 * cfg.r_max / nr;
    auto alpha_at = [&](int i) { return i * ha; };
    auto r_at = [&](int j) { return -cfg.r_max + (j + 0.25) * hr; };

    ThresholdResult res;
    res.value = -std::numeric_limits<double>::infinity();
    auto consider = [&](double v, const GaussianParams& g) {
        if (better_candidate(v, g, res.value, res.argmax)) {
            res.value = v;
            res.argmax = g;
        }
    };

    struct Cell {
        double value;
        int i, j;
    };
    std::vector<Cell> cells;
    cells.reserve(size_t(na) * nr);
    for (int i = 0; i < na; ++i) {
        for (int j = 0; j < nr; ++j) {
            GaussianParams g{r_at(j), complex(alpha_at(i), 0.0)};
            double v = f_grid(i, j);
            ++res.evaluations;
            cells.push_back({v, i, j});
            consider(v, g);
        }
    }
    consider(f_cont(GaussianParams{0.0, complex(0.0)}), GaussianParams{});
    ++res.evaluations;
    res.grid_value = res.value;

    std::sort(cells.begin(), cells.end(), [&](const Cell& a, const Cell& b) {
        if (a.value != b.value) return a.value > b.value;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    std::vector<Cell> starts;
    for (const Cell& c : cells) {
        if (int(starts.size()) >= cfg.multistarts) break;
        bool spaced = true;
        for (const Cell& s : starts)
            if (std::abs(s.i - c.i) < 2 && std::abs(s.j - c.j) < 2) {
                spaced = false;
                break;
            }
        if (spaced) starts.push_back(c);
    }

    // Nelder-Mead on (alpha, r), maximizing. Coordinates are folded into the
    // box: alpha reflects at 0, r clamps at +-r_max and is nudged off exact 0.
    auto eval_point = [&](double a, double r, GaussianParams& g_out) {
        double ae = std::abs(a);
        double re = std::clamp(r, -cfg.r_max, cfg.r_max);
        if (std::abs(re) < 1e-12) re = re < 0.0 ? -1e-12 : 1e-12;
        g_out = GaussianParams{re, complex(ae, 0.0)};
        ++res.evaluations;
        double v = f_cont(g_out);
        consider(v, g_out);
        return v;
    };

    for (const Cell& s : starts) {
        struct Vertex {
            double a, r, v;
            GaussianParams g;
        };
        std::array<Vertex, 3> vx;
        const double da = std::max(ha, 1e-4), dr = std::max(hr, 1e-4);
        const double a0 = alpha_at(s.i), r0 = r_at(s.j);
        const double steps[3][2] = {{0.0, 0.0}, {da, 0.0}, {0.0, dr}};
        for (int k = 0; k < 3; ++k) {
            vx[k].a = a0 + steps[k][0];
            vx[k].r = r0 + steps[k][1];
            vx[k].v = eval_point(vx[k].a, vx[k].r, vx[k].g);
        }
        bool ok = false;
        for (int it = 0; it < cfg.max_refine_iters; ++it) {
            std::sort(vx.begin(), vx.end(),
                      [](const Vertex& x, const Vertex& y) { return x.v > y.v; });
            double diam = 0.0;
            for (int k = 1; k < 3; ++k)
                diam = std::max({diam, std::abs(vx[k].a - vx[0].a),
                                 std::abs(vx[k].r - vx[0].r)});
            if (diam < cfg.refine_tol) {
                ok = true;
                break;
            }
            const double ca = 0.5 * (vx[0].a + vx[1].a);
            const double cr = 0.5 * (vx[0].r + vx[1].r);
            Vertex ref;
            ref.a = ca + (ca - vx[2].a);
            ref.r = cr + (cr - vx[2].r);
            ref.v = eval_point(ref.a, ref.r, ref.g);
            if (ref.v > vx[0].v) {
                Vertex exp_;
                exp_.a = ca + 2.0 * (ca - vx[2].a);
                exp_.r = cr + 2.0 * (cr - vx[2].r);
                exp_.v = eval_point(exp_.a, exp_.r, exp_.g);
                vx[2] = (exp_.v > ref.v) ? exp_ : ref;
            } else if (ref.v > vx[1].v) {
                vx[2] = ref;
            } else {
                Vertex con;
                con.a = ca + 0.5 * (vx[2].a - ca);
                con.r = cr + 0.5 * (vx[2].r - cr);
                con.v = eval_point(con.a, con.r, con.g);
                if (con.v > vx[2].v) {
                    vx[2] = con;
                } else {
                    for (int k = 1; k < 3; ++k) {
                        vx[k].a = vx[0].a + 0.5 * (vx[k].a - vx[0].a);
                        vx[k].r = vx[0].r + 0.5 * (vx[k].r - vx[0].r);
                        vx[k].v = eval_point(vx[k].a, vx[k].r, vx[k].g);
                    }
                }
            }
        }
        if (!ok) res.converged = false;
    }

    const double a_fin = res.argmax.alpha.real();
    res.boundary_hugging = a_fin > 0.98 * alpha_max ||
                           std::abs(res.argmax.r) > 0.98 * cfg.r_max;
    return res;
}

}  // namespace detail

inline ThresholdResult optimize_threshold(const WitnessSpec& spec, int m,
                                          const SearchConfig& cfg = {}) {
    if (m < 1) throw std::invalid_argument("optimize_threshold: m must be >= 1");
    validate(cfg);
    const double alpha_max = cfg.alpha_max > 0.0 ? cfg.alpha_max : 3.0 + std::sqrt(m);
    const double hr = 2.0 * cfg.r_max / cfg.r_points;
    auto f = [&](const GaussianParams& g) { return objective(spec, m, g); };
    auto f_grid = [&](int i, int j) {
        GaussianParams g{-cfg.r_max + (j + 0.25) * hr,
                         complex(i * (alpha_max / (cfg.alpha_points - 1)), 0.0)};
        return f(g);
    };
    return detail::maximize_over_box(f_grid, f, cfg, alpha_max);
}

// Minimal single-click advantage of the target Fock state over every other
// photon number: Delta = R1(m) - max_{n != m} R1(n). The enumeration extends
// until the geometric tail bound x1^(n+1) on all remaining R1(n) drops below
// the maximum already found, so the result is exact.
inline double gap_delta(const DetectorParams& p, int m) {
    validate(p);
    if (m < 1) throw std::invalid_argument("gap_delta: m must be >= 1");
    const double x1 = 1.0 - p.eta * (1.0 - p.transmittance);
    double competitor = 0.0;
    long n_cap = std::max<long>(4 * m, 32);
    for (;;) {
        for (long n = 0; n <= n_cap; ++n) {
            if (n == m) continue;
            competitor = std::max(competitor,
                                  prob_single_click(p, n, Outcome::CLICK_D1_ONLY));
        }
        if (std::pow(x1, double(n_cap + 1)) <= competitor) break;
        if (n_cap > (1L << 40))
            throw std::runtime_error("gap_delta: tail bound failed to close");
        n_cap *= 2;
    }
    return prob_single_click(p, m, Outcome::CLICK_D1_ONLY) - competitor;
}

// Fidelity floor with the m-photon Fock state implied by a measured
// single-click probability: F >= 1 - (R1(m) - p_meas)/Delta. Only valid when
// the Fock-m state is the unique R1 maximizer (Delta > 0).
inline double fidelity_lower_bound(double p_meas, const DetectorParams& p, int m) {
    if (!(p_meas >= 0.0) || !(p_meas <= 1.0))
        throw std::invalid_argument("fidelity_lower_bound: p_meas must be in [0, 1]");
    const double delta = gap_delta(p, m);
    if (!(delta > 0.0))
        throw std::domain_error(
            "fidelity_lower_bound: Fock state is not the single-click maximizer "
            "at these detector settings");
    return 1.0 - (prob_single_click(p, m, Outcome::CLICK_D1_ONLY) - p_meas) / delta;
}

struct BoundarySample {
    double lambda;
    double threshold;
    bool converged;
    GaussianParams argmax;
    bool boundary_hugging;

    friend bool operator==(const BoundarySample&, const BoundarySample&) = default;
};

struct RegionBoundary {
    int m = 0;
    std::vector<BoundarySample> samples;
    // Upper boundary of the region { (R2, R1) : R1 <= W_lambda + lambda R2
    // for every sampled lambda }, clipped to the unit square.
    std::vector<std::pair<double, double>> polyline;

    friend bool operator==(const RegionBoundary&, const RegionBoundary&) = default;
};

inline std::vector<double> default_lambda_grid() {
    std::vector<double> l;
    for (int k = 0; k < 50; ++k) l.push_back(-1.0 + k / 50.0);
    l.push_back(0.0);
    for (int i = 0; i < 200; ++i)
        l.push_back(1e-3 * std::pow(1e5, i / 199.0));
    return l;
}

namespace detail {

// Lower envelope of the lines y = W_s + lambda_s x over x in [0, 1], clipped
// to y in [0, 1]. The envelope of a line family is concave, and thresholds
// guarantee y(0) >= 0, so the clip can only flatten the top and cut the tail.
inline std::vector<std::pair<double, double>> envelope_polyline(
    const std::vector<BoundarySample>& samples) {
    struct Line {
        double slope, icpt;
    };
    std::vector<Line> lines;
    for (const auto& s : samples) lines.push_back({s.lambda, s.threshold});
    std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
        return a.slope > b.slope || (a.slope == b.slope && a.icpt < b.icpt);
    });
    lines.erase(std::unique(lines.begin(), lines.end(),
                            [](const Line& a, const Line& b) {
                                return a.slope == b.slope;
                            }),
                lines.end());

    auto xint = [](const Line& a, const Line& b) {
        return (b.icpt - a.icpt) / (a.slope - b.slope);
    };
    std::vector<Line> hull; // active lines in order of increasing x
    for (const Line& l : lines) {
        while (hull.size() >= 2 &&
               xint(hull[hull.size() - 2], l) <= xint(hull[hull.size() - 2], hull.back()))
            hull.pop_back();
        if (hull.size() == 1 && hull.back().slope == l.slope) continue;
        hull.push_back(l);
    }

    // Raw envelope vertices on [0, 1].
    std::vector<std::pair<double, double>> raw;
    auto y_of = [](const Line& l, double x) { return l.icpt + l.slope * x; };
    size_t k = 0;
    while (k + 1 < hull.size() && xint(hull[k], hull[k + 1]) <= 0.0) ++k;
    raw.emplace_back(0.0, y_of(hull[k], 0.0));
    for (; k + 1 < hull.size(); ++k) {
        double x = xint(hull[k], hull[k + 1]);
        if (x >= 1.0) break;
        raw.emplace_back(x, y_of(hull[k], x));
    }
    raw.emplace_back(1.0, y_of(hull[k], 1.0));

    // Clip to the unit square: clamp the top at y = 1 (inserting the crossing
    // vertices) and truncate at the single possible descent through y = 0.
    std::vector<std::pair<double, double>> out;
    auto push = [&](double x, double y) {
        if (out.empty() || out.back().first != x || out.back().second != y)
            out.emplace_back(x, y);
    };
    for (size_t i = 0; i < raw.size(); ++i) {
        auto [x, y] = raw[i];
        if (i > 0) {
            auto [px, py] = raw[i - 1];
            for (double level : {1.0, 0.0}) {
                if ((py - level) * (y - level) < 0.0) {
                    double t = (level - py) / (y - py);
                    push(px + t * (x - px), level);
                }
            }
        }
        if (y < 0.0) { // concave: once below zero the envelope stays below
            break;
        }
        push(x, std::min(y, 1.0));
    }
    return out;
}

}  // namespace detail

// Thresholds W_{lambda,m} over a lambda grid, sharing one set of
// density-matrix blocks across all lambda values: the thermal means entering
// the witness do not depend on lambda, so the grid scan reuses per-point
// blocks and only the combination weights change.
inline RegionBoundary lambda_sweep(const DetectorParams& p, int m,
                                   const std::vector<double>& lambdas,
                                   const SearchConfig& cfg = {}) {
    validate(p);
    validate(cfg);
    if (m < 1) throw std::invalid_argument("lambda_sweep: m must be >= 1");
    if (lambdas.empty())
        throw std::invalid_argument("lambda_sweep: empty lambda grid");

    std::vector<double> grid = lambdas;
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    const double alpha_max = cfg.alpha_max > 0.0 ? cfg.alpha_max : 3.0 + std::sqrt(m);
    const int na = cfg.alpha_points, nr = cfg.r_points;
    const double ha = alpha_max / (na - 1);
    const double hr = 2.0 * cfg.r_max / nr;

    // One block per (grid point, thermal mean). The union of thermal means of
    // both POVMs covers every lambda combination.
    std::vector<double> nbars;
    for (Outcome oc : {Outcome::CLICK_D1_ONLY, Outcome::DOUBLE_CLICK})
        for (const auto& t : povm_thermal_decomposition(p, oc).terms)
            if (std::find(nbars.begin(), nbars.end(), t.nbar) == nbars.end())
                nbars.push_back(t.nbar);
    std::map<double, std::vector<HermitianMatrix>> cache;
    for (double nb : nbars) {
        auto& blocks = cache[nb];
        blocks.reserve(size_t(na) * nr);
        for (int i = 0; i < na; ++i)
            for (int j = 0; j < nr; ++j)
                blocks.push_back(dst_block(
                    m, {-cfg.r_max + (j + 0.25) * hr, complex(i * ha, 0.0)}, nb));
    }

    RegionBoundary out;
    out.m = m;
    for (double lambda : grid) {
        WitnessSpec spec = witness_click_minus_double(p, lambda);
        auto f_grid = [&](int i, int j) {
            HermitianMatrix w = HermitianMatrix::Zero(m, m);
            for (const auto& t : spec.combo.terms)
                w += t.weight * cache.at(t.nbar)[size_t(i) * nr + j];
            w.diagonal().array() += spec.combo.identity_coeff;
            return hermitian_max_eig(w);
        };
        auto f_cont = [&](const GaussianParams& g) { return objective(spec, m, g); };
        ThresholdResult r = detail::maximize_over_box(f_grid, f_cont, cfg, alpha_max);
        out.samples.push_back({lambda, r.value, r.converged, r.argmax,
                               r.boundary_hugging});
    }
    out.polyline = detail::envelope_polyline(out.samples);
    return out;
}

struct CertificationVerdict {
    int certified_rank = 0;
    double witness_lambda = 0.0; // lambda of the strongest violation
    double margin = 0.0;         // R1 - lambda R2 - W at that lambda
    bool outside_physical = false;
    double slack = 0.0;
};

// Compare a measured (R1, R2) pair against per-rank boundary samples. Rank m
// is certified when some sampled lambda gives R1 - lambda R2 > W_{lambda,m}
// + slack; the verdict carries the highest certified rank. Points above the
// physical hull are flagged but still evaluated.
inline CertificationVerdict certify(double r1, double r2,
                                    const std::vector<RegionBoundary>& levels,
                                    const PhysicalBoundary& physical,
                                    double slack = 0.0) {
    if (!(r1 >= 0.0) || !(r1 <= 1.0) || !(r2 >= 0.0) || !(r2 <= 1.0))
        throw std::invalid_argument("certify: probabilities must be in [0, 1]");
    if (!(slack >= 0.0)) throw std::invalid_argument("certify: slack must be >= 0");

    CertificationVerdict v;
    v.slack = slack;

    const auto& hull = physical.hull;
    if (hull.size() >= 2) {
        double hull_y = 0.0;
        if (r2 <= hull.front().r2) {
            hull_y = hull.front().r1;
        } else {
            for (size_t i = 1; i < hull.size(); ++i) {
                if (r2 <= hull[i].r2 || i + 1 == hull.size()) {
                    const auto& a = hull[i - 1];
                    const auto& b = hull[i];
                    hull_y = a.r1 + (b.r1 - a.r1) * (r2 - a.r2) / (b.r2 - a.r2);
                    break;
                }
            }
        }
        v.outside_physical = r1 > hull_y + 1e-12;
    }

    bool have_margin = false;
    for (const auto& level : levels) {
        double best = -std::numeric_limits<double>::infinity();
        double best_lambda = 0.0;
        for (const auto& s : level.samples) {
            double margin = r1 - s.lambda * r2 - s.threshold;
            if (margin > best) {
                best = margin;
                best_lambda = s.lambda;
            }
        }
        if (level.samples.empty()) continue;
        if (best > slack) {
            if (level.m > v.certified_rank) {
                v.certified_rank = level.m;
                v.margin = best;
                v.witness_lambda = best_lambda;
                have_margin = true;
            }
        } else if (!have_margin && v.certified_rank == 0) {
            v.margin = best; // most informative failure at the lowest level
            v.witness_lambda = best_lambda;
            have_margin = true;
        }
    }
    return v;
}

}  // namespace stellarcert
