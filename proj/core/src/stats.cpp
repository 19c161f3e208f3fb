#include "cbesq/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cbesq/error.hpp"

namespace cbesq::stats {

double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 16) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
    }
    const auto half = x.size() / 2;
    return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

double mean(std::span<const double> x) {
    if (x.empty()) throw ConfigError("mean of empty sample");
    return pairwise_sum(x) / static_cast<double>(x.size());
}

namespace {
std::vector<double> centred_products(std::span<const double> x, std::span<const double> y) {
    const double mx = mean(x);
    const double my = mean(y);
    std::vector<double> p(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) p[i] = (x[i] - mx) * (y[i] - my);
    return p;
}
}  // namespace

double variance(std::span<const double> x) {
    if (x.size() < 2) throw ConfigError("variance needs at least 2 samples");
    auto p = centred_products(x, x);
    return pairwise_sum(p) / static_cast<double>(x.size() - 1);
}

double stderr_mean(std::span<const double> x) {
    return std::sqrt(variance(x) / static_cast<double>(x.size()));
}

Estimate covariance(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ConfigError("covariance: sample sizes differ");
    if (x.size() < 3) throw ConfigError("covariance needs at least 3 samples");
    auto p = centred_products(x, y);
    const auto n = static_cast<double>(p.size());
    Estimate e;
    e.value = pairwise_sum(p) / (n - 1.0);
    e.stderr = stderr_mean(p);
    return e;
}

Estimate variance_estimate(std::span<const double> x) {
    return covariance(x, x);
}

double quantile(std::span<const double> x, double q) {
    if (x.empty()) throw ConfigError("quantile of empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile level outside [0, 1]");
    std::vector<double> s(x.begin(), x.end());
    std::sort(s.begin(), s.end());
    const double pos = q * static_cast<double>(s.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, s.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * s[lo] + w * s[hi];
}

double clopper_pearson_zero_upper(std::size_t n, double confidence) {
    if (n == 0) throw ConfigError("Clopper-Pearson bound needs n > 0");
    return 1.0 - std::pow(1.0 - confidence, 1.0 / static_cast<double>(n));
}

double log_sum_exp(std::span<const double> x) {
    if (x.empty()) return -std::numeric_limits<double>::infinity();
    const double m = *std::max_element(x.begin(), x.end());
    if (!std::isfinite(m)) return m;
    std::vector<double> e(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) e[i] = std::exp(x[i] - m);
    return m + std::log(pairwise_sum(e));
}

}  // namespace cbesq::stats
