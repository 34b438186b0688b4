#pragma once

// Click statistics for the attenuator + beam-splitter + two-binary-detector
// scheme, and exact thermal-operator decompositions of the outcome POVMs.
// All outcome probabilities depend on the photon number n only through
// powers of the three survival factors
//   x0 = 1 - eta,  x1 = 1 - eta (1 - T),  x2 = 1 - eta T,
// so every POVM element is a short combination of thermal-state diagonals
// plus a multiple of the identity.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "stellarcert/fock_linalg.hpp"

namespace stellarcert {

struct DetectorParams {
    double eta = 0.5;           // total efficiency seen by the input mode
    double transmittance = 0.5; // beam-splitter transmittance toward D2

    friend bool operator==(const DetectorParams&, const DetectorParams&) = default;
};

enum class Outcome {
    NO_CLICK,
    CLICK_D1_ONLY,
    CLICK_D2_ONLY,
    DOUBLE_CLICK,
    CLICK_SINGLE_DETECTOR, // single binary detector, no beam splitter
};

inline void validate(const DetectorParams& p) {
    if (!(p.eta > 0.0) || !(p.eta <= 1.0))
        throw std::invalid_argument("DetectorParams: eta must be in (0, 1]");
    if (!(p.transmittance > 0.0) || !(p.transmittance < 1.0))
        throw std::invalid_argument("DetectorParams: transmittance must be in (0, 1)");
}

inline double prob_no_click(const DetectorParams& p, long n) {
    validate(p);
    if (n < 0) throw std::invalid_argument("prob_no_click: n must be >= 0");
    return std::pow(1.0 - p.eta, double(n));
}

namespace detail {
// Outcome probabilities are differences of n-th powers; round-off can push
// them a few ulp outside [0, 1] (e.g. the coincidence probability at n = 1,
// which is exactly zero). Clamp so downstream geometry sees probabilities.
inline double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }
}  // namespace detail

inline double prob_single_click(const DetectorParams& p, long n, Outcome which) {
    if (n < 0) throw std::invalid_argument("prob_single_click: n must be >= 0");
    const double x0 = 1.0 - p.eta;
    switch (which) {
        case Outcome::CLICK_D1_ONLY:
            validate(p);
            return detail::clamp01(
                std::pow(1.0 - p.eta * (1.0 - p.transmittance), double(n)) -
                std::pow(x0, double(n)));
        case Outcome::CLICK_D2_ONLY:
            validate(p);
            return detail::clamp01(std::pow(1.0 - p.eta * p.transmittance, double(n)) -
                                   std::pow(x0, double(n)));
        case Outcome::CLICK_SINGLE_DETECTOR:
            if (!(p.eta > 0.0) || !(p.eta <= 1.0))
                throw std::invalid_argument("DetectorParams: eta must be in (0, 1]");
            return detail::clamp01(1.0 - std::pow(x0, double(n)));
        default:
            throw std::invalid_argument("prob_single_click: not a single-click outcome");
    }
}

inline double prob_double_click(const DetectorParams& p, long n) {
    validate(p);
    if (n < 0) throw std::invalid_argument("prob_double_click: n must be >= 0");
    return detail::clamp01(1.0 - std::pow(1.0 - p.eta * p.transmittance, double(n)) -
                           std::pow(1.0 - p.eta * (1.0 - p.transmittance), double(n)) +
                           std::pow(1.0 - p.eta, double(n)));
}

// One thermal term: weight * rho_thermal(nbar). Diagonal in the Fock basis,
// <n|rho_th|n> = nbar^n / (nbar+1)^(n+1).
struct ThermalTerm {
    double weight;
    double nbar;
};

// identity_coeff * I + sum_i weight_i * rho_thermal(nbar_i)
struct ThermalCombo {
    double identity_coeff = 0.0;
    std::vector<ThermalTerm> terms;
};

// Fock-diagonal coefficient <n| combo |n>.
inline double combo_coefficient(const ThermalCombo& c, long n) {
    if (n < 0) throw std::invalid_argument("combo_coefficient: n must be >= 0");
    double v = c.identity_coeff;
    for (const auto& t : c.terms) {
        const double q = t.nbar / (t.nbar + 1.0);
        v += t.weight * std::pow(q, double(n)) / (t.nbar + 1.0);
    }
    return v;
}

inline DiagonalOperator combo_diagonal(const ThermalCombo& c, int n_max) {
    if (n_max < 0) throw std::invalid_argument("combo_diagonal: n_max must be >= 0");
    DiagonalOperator d(n_max + 1);
    for (int n = 0; n <= n_max; ++n) d(n) = combo_coefficient(c, n);
    return d;
}

// Scaled sum of two combos, merging terms with identical nbar. The nbar
// values come from the same DetectorParams arithmetic on both sides, so an
// exact compare is the right merge test.
inline ThermalCombo combo_axpy(const ThermalCombo& a, double scale,
                               const ThermalCombo& b) {
    ThermalCombo out = a;
    out.identity_coeff += scale * b.identity_coeff;
    for (const auto& t : b.terms) {
        bool merged = false;
        for (auto& ot : out.terms) {
            if (ot.nbar == t.nbar) {
                ot.weight += scale * t.weight;
                merged = true;
                break;
            }
        }
        if (!merged) out.terms.push_back({scale * t.weight, t.nbar});
    }
    return out;
}

inline DiagonalOperator povm_diagonal(const DetectorParams& p, Outcome oc,
                                      int n_max) {
    if (n_max < 0) throw std::invalid_argument("povm_diagonal: n_max must be >= 0");
    DiagonalOperator d(n_max + 1);
    for (long n = 0; n <= n_max; ++n) {
        switch (oc) {
            case Outcome::NO_CLICK: d(n) = prob_no_click(p, n); break;
            case Outcome::DOUBLE_CLICK: d(n) = prob_double_click(p, n); break;
            default: d(n) = prob_single_click(p, n, oc); break;
        }
    }
    return d;
}

// Exact finite thermal decomposition of each outcome POVM. A geometric
// diagonal x^n equals (nbar+1) * rho_thermal(nbar) with nbar = 1/(1-x) - 1,
// which turns the survival factors into the thermal means
//   nbar_1 = 1/(eta (1-T)) - 1,  nbar_3 = 1/(eta T) - 1,  nbar_2 = 1/eta - 1.
inline ThermalCombo povm_thermal_decomposition(const DetectorParams& p,
                                               Outcome oc) {
    const double nbar2 = 1.0 / p.eta - 1.0;
    if (oc == Outcome::CLICK_SINGLE_DETECTOR) {
        if (!(p.eta > 0.0) || !(p.eta <= 1.0))
            throw std::invalid_argument("DetectorParams: eta must be in (0, 1]");
        return {1.0, {{-(1.0 + nbar2), nbar2}}};
    }
    validate(p);
    const double nbar1 = 1.0 / (p.eta * (1.0 - p.transmittance)) - 1.0;
    const double nbar3 = 1.0 / (p.eta * p.transmittance) - 1.0;
    switch (oc) {
        case Outcome::NO_CLICK:
            return {0.0, {{1.0 + nbar2, nbar2}}};
        case Outcome::CLICK_D1_ONLY:
            return {0.0, {{1.0 + nbar1, nbar1}, {-(1.0 + nbar2), nbar2}}};
        case Outcome::CLICK_D2_ONLY:
            return {0.0, {{1.0 + nbar3, nbar3}, {-(1.0 + nbar2), nbar2}}};
        case Outcome::DOUBLE_CLICK:
            return {1.0,
                    {{-(1.0 + nbar1), nbar1},
                     {-(1.0 + nbar3), nbar3},
                     {1.0 + nbar2, nbar2}}};
        default:
            throw std::invalid_argument("povm_thermal_decomposition: bad outcome");
    }
}

struct WmaxResult {
    double value = 0.0;
    long n_star = 0;
    bool capped = false; // scan hit the hard cap before the peak settled

    friend bool operator==(const WmaxResult&, const WmaxResult&) = default;
};

// Largest single-click (D1 only) probability over Fock states. The sequence
// R1(n) is unimodal in n, so the scan stops after ten consecutive decreases.
inline WmaxResult wmax_single_click(const DetectorParams& p) {
    validate(p);
    constexpr long kCap = 10000;
    WmaxResult best;
    double prev = 0.0;
    int decreasing = 0;
    for (long n = 1; n <= kCap; ++n) {
        const double r1 = prob_single_click(p, n, Outcome::CLICK_D1_ONLY);
        if (r1 > best.value) {
            best.value = r1;
            best.n_star = n;
        }
        decreasing = (r1 < prev) ? decreasing + 1 : 0;
        if (decreasing >= 10) return best;
        prev = r1;
    }
    best.capped = true;
    return best;
}

// Efficiency above which R1 peaks at n = 1 (and W_max = eta T).
inline double peak_threshold_efficiency(double transmittance) {
    if (!(transmittance > 0.0) || !(transmittance < 1.0))
        throw std::invalid_argument("peak_threshold_efficiency: T must be in (0, 1)");
    return 1.0 / (2.0 - transmittance);
}

struct BoundaryPoint {
    double r2;
    double r1;
    long n; // Fock index; -1 marks the n -> infinity limit vertex (1, 0)

    friend bool operator==(const BoundaryPoint&, const BoundaryPoint&) = default;
};

struct PhysicalBoundary {
    std::vector<BoundaryPoint> fock_points; // (R2(n), R1(n)) for n = 0..n_stop
    std::vector<BoundaryPoint> hull;        // upper convex chain, left to right

    friend bool operator==(const PhysicalBoundary&, const PhysicalBoundary&) = default;
};

// Fock-state points in the (R2, R1) plane and the upper convex hull that
// bounds the physically reachable region from above. Points accumulate at
// (1, 0); the scan stops once 1 - R2(n) < tail_tol and the exact limit
// vertex is appended. At eta = 1 every Fock point is collinear and the hull
// degenerates to the segment (0, T) -- (1, 0).
inline PhysicalBoundary physical_boundary(const DetectorParams& p,
                                          double tail_tol = 1e-9) {
    validate(p);
    if (!(tail_tol > 0.0))
        throw std::invalid_argument("physical_boundary: tail_tol must be > 0");
    PhysicalBoundary out;
    constexpr long kCap = 100000;
    for (long n = 0; n <= kCap; ++n) {
        const double r2 = prob_double_click(p, n);
        const double r1 = prob_single_click(p, n, Outcome::CLICK_D1_ONLY);
        out.fock_points.push_back({r2, r1, n});
        if (n >= 1 && 1.0 - r2 < tail_tol) break;
    }
    out.fock_points.push_back({1.0, 0.0, -1});

    // Monotone-chain upper hull; collinear interior points are dropped so the
    // eta = 1 triangle comes out with exactly two vertices.
    auto cross = [](const BoundaryPoint& o, const BoundaryPoint& a,
                    const BoundaryPoint& b) {
        return (a.r2 - o.r2) * (b.r1 - o.r1) - (a.r1 - o.r1) * (b.r2 - o.r2);
    };
    std::vector<BoundaryPoint> pts = out.fock_points;
    std::sort(pts.begin(), pts.end(), [](const BoundaryPoint& a, const BoundaryPoint& b) {
        return a.r2 < b.r2 || (a.r2 == b.r2 && a.r1 > b.r1);
    });
    for (const auto& pt : pts) {
        if (!out.hull.empty() && out.hull.back().r2 == pt.r2) continue; // keep top of column
        while (out.hull.size() >= 2 &&
               cross(out.hull[out.hull.size() - 2], out.hull.back(), pt) >= 0.0)
            out.hull.pop_back();
        out.hull.push_back(pt);
    }
    return out;
}

struct CurvatureCheck {
    double r2_derivative;       // d R2 / dn at real n; positive for n >= 1
    double curvature_indicator; // numerator of d^2 R1 / d R2^2; negative
};

// Closed forms for the balanced scheme (T = 1/2) with R1, R2 continued to
// real n. Writing a = (1-eta/2)^n, b = (1-eta)^n, L1 = ln(1-eta/2),
// L0 = ln(1-eta):
//   dR2/dn                = -2 a L1 + b L0
//   R1'' R2' - R1' R2''   = a b L0 L1 (L0 - L1)
// The second expression is the numerator of the parametric curvature
// d^2 R1 / d R2^2, whose denominator (dR2/dn)^3 is positive; its negative
// sign is what makes the upper physical boundary concave.
inline CurvatureCheck boundary_curvature_check(const DetectorParams& p, double n) {
    validate(p);
    if (p.transmittance != 0.5)
        throw std::invalid_argument(
            "boundary_curvature_check: closed forms hold for transmittance 1/2 only");
    if (!(p.eta < 1.0))
        throw std::invalid_argument("boundary_curvature_check: requires eta < 1");
    if (!(n > 0.0))
        throw std::invalid_argument("boundary_curvature_check: n must be > 0");
    const double a = std::pow(1.0 - 0.5 * p.eta, n);
    const double b = std::pow(1.0 - p.eta, n);
    const double l1 = std::log(1.0 - 0.5 * p.eta);
    const double l0 = std::log(1.0 - p.eta);
    return {-2.0 * a * l1 + b * l0, a * b * l0 * l1 * (l0 - l1)};
}

}  // namespace stellarcert
