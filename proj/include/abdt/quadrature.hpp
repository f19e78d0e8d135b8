#pragma once
// Globally adaptive Gauss-Kronrod (10/21 point) integration over a finite
// interval split at caller-supplied breakpoints. The interval with the
// largest error estimate is bisected until the summed estimate meets
// max(abs_tol, rel_tol * |result|). Error estimates use the QUADPACK scaling.

#include <algorithm>
#include <cmath>
#include <queue>
#include <span>
#include <vector>

namespace abdt {

struct QuadOptions {
    double abs_tol = 1e-12;
    double rel_tol = 1e-12;
    int max_intervals = 4000;
};

struct QuadResult {
    double value = 0.0;
    double abs_error = 0.0;
    double l1 = 0.0;  // estimate of the integral of |f|
    int evaluations = 0;
    bool converged = false;
};

namespace detail {

struct GkSegment {
    double a, b, value, error, l1;
    bool operator<(const GkSegment& o) const { return error < o.error; }
};

template <class F>
GkSegment gauss_kronrod21(F& f, double a, double b, int& evals) {
    static constexpr double xgk[11] = {
        0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
        0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
        0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
        0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
        0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
        0.0};
    static constexpr double wgk[11] = {
        0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
        0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
        0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
        0.123491976262065851077208031464550, 0.134709217311473325928054001771707,
        0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
        0.149445554002916905664936468389821};
    static constexpr double wg[5] = {
        0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
        0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
        0.295524224714752870173892994651338};

    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double fv1[10], fv2[10];

    const double fc = f(center);
    double res_k = fc * wgk[10];
    double res_g = 0.0;
    double res_abs = std::fabs(res_k);
    for (int j = 0; j < 10; ++j) {
        const double dx = half * xgk[j];
        const double f1 = f(center - dx);
        const double f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += wgk[j] * (f1 + f2);
        res_abs += wgk[j] * (std::fabs(f1) + std::fabs(f2));
        if (j % 2 == 1) res_g += wg[j / 2] * (f1 + f2);
    }
    evals += 21;

    const double mean = 0.5 * res_k;
    double res_asc = wgk[10] * std::fabs(fc - mean);
    for (int j = 0; j < 10; ++j) res_asc += wgk[j] * (std::fabs(fv1[j] - mean) + std::fabs(fv2[j] - mean));

    const double ahalf = std::fabs(half);
    res_k *= half;
    res_g *= half;
    res_abs *= ahalf;
    res_asc *= ahalf;

    double err = std::fabs(res_k - res_g);
    if (res_asc != 0.0 && err != 0.0) err = res_asc * std::min(1.0, std::pow(200.0 * err / res_asc, 1.5));
    constexpr double eps = 2.220446049250313e-16;
    if (res_abs > 5e-308 / (50.0 * eps)) err = std::max(50.0 * eps * res_abs, err);
    return {a, b, res_k, err, res_abs};
}

}  // namespace detail

// Integrates f over [points.front(), points.back()], using every entry of
// `points` (sorted, duplicates allowed) as an initial split.
template <class F>
QuadResult integrate(F&& f, std::span<const double> points, const QuadOptions& opt = {}) {
    QuadResult out;
    if (points.size() < 2) return out;

    std::priority_queue<detail::GkSegment> heap;
    double total = 0.0, total_err = 0.0, total_l1 = 0.0;
    for (std::size_t i = 0; i + 1 < points.size(); ++i) {
        if (!(points[i + 1] > points[i])) continue;
        auto seg = detail::gauss_kronrod21(f, points[i], points[i + 1], out.evaluations);
        total += seg.value;
        total_err += seg.error;
        total_l1 += seg.l1;
        heap.push(seg);
    }

    while (!heap.empty()) {
        if (total_err <= std::max(opt.abs_tol, opt.rel_tol * std::fabs(total))) {
            out.converged = true;
            break;
        }
        if (static_cast<int>(heap.size()) >= opt.max_intervals) break;
        const auto worst = heap.top();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) break;
        heap.pop();
        auto left = detail::gauss_kronrod21(f, worst.a, mid, out.evaluations);
        auto right = detail::gauss_kronrod21(f, mid, worst.b, out.evaluations);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        total_l1 += left.l1 + right.l1 - worst.l1;
        heap.push(left);
        heap.push(right);
    }
    if (heap.empty()) out.converged = true;

    // Re-sum from the final partition; the running total drifts by rounding.
    double sum = 0.0, err = 0.0, l1 = 0.0;
    std::vector<detail::GkSegment> segs;
    segs.reserve(heap.size());
    while (!heap.empty()) {
        segs.push_back(heap.top());
        heap.pop();
    }
    std::sort(segs.begin(), segs.end(), [](const auto& x, const auto& y) { return x.a < y.a; });
    for (const auto& s : segs) {
        sum += s.value;
        err += s.error;
        l1 += s.l1;
    }
    out.value = sum;
    out.abs_error = err;
    out.l1 = l1;
    return out;
}

inline std::vector<double> sorted_breakpoints(std::vector<double> pts, double lo, double hi) {
    std::vector<double> out{lo, hi};
    for (double p : pts)
        if (std::isfinite(p) && p > lo && p < hi) out.push_back(p);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace abdt
