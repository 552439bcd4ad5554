#include "alphadesk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "alphadesk/common.hpp"

namespace alphadesk {

double mean(std::span<const double> xs) {
    if (xs.empty()) return 0.0;
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double correlation(std::span<const double> xs, std::span<const double> ys) {
    const std::size_t n = std::min(xs.size(), ys.size());
    if (n < 2) return 0.0;
    const double mx = mean(xs.first(n));
    const double my = mean(ys.first(n));
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        sxx += (xs[k] - mx) * (xs[k] - mx);
        syy += (ys[k] - my) * (ys[k] - my);
        sxy += (xs[k] - mx) * (ys[k] - my);
    }
    const double denom = static_cast<double>(n - 1);
    if (std::sqrt(sxx / denom) < kStdFloor || std::sqrt(syy / denom) < kStdFloor) return 0.0;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> fractional_ranks(std::span<const double> xs) {
    const std::size_t n = xs.size();
    std::vector<double> ranks(n, 0.5);
    if (n < 2) return ranks;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::size_t p = 0;
    while (p < n) {
        std::size_t q = p;
        while (q + 1 < n && xs[order[q + 1]] == xs[order[p]]) ++q;
        const double avg = (static_cast<double>(p) + static_cast<double>(q)) / 2.0;
        for (std::size_t k = p; k <= q; ++k) ranks[order[k]] = avg / static_cast<double>(n - 1);
        p = q + 1;
    }
    return ranks;
}

std::vector<double> zscores(std::span<const double> xs) {
    if (xs.size() < 2) return {};
    const double m = mean(xs);
    const double sd = sample_std(xs);
    if (sd < kStdFloor) return {};
    std::vector<double> out(xs.size());
    for (std::size_t k = 0; k < xs.size(); ++k) out[k] = (xs[k] - m) / sd;
    return out;
}

}  // namespace alphadesk
