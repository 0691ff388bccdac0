#include "retentia/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

#include "retentia/rng.hpp"

namespace retentia::stats {

double mean(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty vector");
    if (q <= 0.0) return sorted.front();
    if (q >= 1.0) return sorted.back();
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

// --- special functions -----------------------------------------------------

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double normal_quantile(double p) {
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("normal_quantile needs p in (0,1)");
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

namespace {

// Continued fraction for the incomplete beta (Lentz).
double beta_cf(double a, double b, double x) {
    constexpr double kTiny = 1e-300;
    constexpr double kEps = 1e-14;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 300; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * beta_cf(a, b, x) / a;
    }
    return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
    const double x = df / (df + t * t);
    return incomplete_beta(df / 2.0, 0.5, x);
}

double student_t_quantile(double p, double df) {
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("student_t_quantile needs p in (0,1)");
    // cdf(t) = 1 - p_two_sided(t)/2 for t >= 0; bisection on the cdf.
    auto cdf = [df](double t) {
        const double half = 0.5 * student_t_two_sided_p(std::fabs(t), df);
        return t >= 0.0 ? 1.0 - half : half;
    };
    double lo = -1e6, hi = 1e6;
    for (int i = 0; i < 300; ++i) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// --- correlations ----------------------------------------------------------

CorrelationResult pearson_r(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson_r: length mismatch");
    const std::size_t n = x.size();
    if (n < 4) throw std::invalid_argument("pearson_r: need n >= 4");
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson_r: zero variance");
    double r = sxy / std::sqrt(sxx * syy);
    r = std::clamp(r, -1.0, 1.0);

    CorrelationResult out;
    out.r = r;
    out.n = n;
    const double se = 1.0 / std::sqrt(static_cast<double>(n) - 3.0);
    if (std::fabs(r) < 1.0) {
        const double z = std::atanh(r);
        out.ci_low = std::tanh(z - 1.959963984540054 * se);
        out.ci_high = std::tanh(z + 1.959963984540054 * se);
        out.p_value = 2.0 * (1.0 - normal_cdf(std::fabs(z) / se));
    } else {
        out.ci_low = out.ci_high = r;
        out.p_value = 0.0;
    }
    return out;
}

TestResult fisher_z_compare(double r1, std::size_t n1, double r2, std::size_t n2) {
    if (std::fabs(r1) >= 1.0 || std::fabs(r2) >= 1.0)
        throw std::invalid_argument("fisher_z_compare: |r| must be < 1");
    if (n1 < 4 || n2 < 4) throw std::invalid_argument("fisher_z_compare: need n >= 4");
    const double z1 = std::atanh(r1), z2 = std::atanh(r2);
    const double se = std::sqrt(1.0 / (static_cast<double>(n1) - 3.0) +
                                1.0 / (static_cast<double>(n2) - 3.0));
    TestResult out;
    out.statistic = (z1 - z2) / se;
    out.p_value = 2.0 * (1.0 - normal_cdf(std::fabs(out.statistic)));
    out.effect_size_d = z1 - z2;
    out.ci_low = (z1 - z2) - 1.959963984540054 * se;
    out.ci_high = (z1 - z2) + 1.959963984540054 * se;
    return out;
}

// --- mutual information ----------------------------------------------------

namespace {

// Equal-frequency bin assignment; collapses to per-value bins when the
// number of distinct values does not exceed the bin count.
std::vector<int> discretize(std::span<const double> v, int bins) {
    const std::size_t n = v.size();
    std::vector<double> sorted(v.begin(), v.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> uniq(sorted);
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

    std::vector<int> out(n);
    if (uniq.size() <= static_cast<std::size_t>(bins)) {
        std::map<double, int> idx;
        for (std::size_t i = 0; i < uniq.size(); ++i) idx[uniq[i]] = static_cast<int>(i);
        for (std::size_t i = 0; i < n; ++i) out[i] = idx[v[i]];
        return out;
    }
    // Bin edges at quantile cut points; duplicate edges merged.
    std::vector<double> edges;
    for (int b = 1; b < bins; ++b) {
        const double e = sorted[(n * static_cast<std::size_t>(b)) / bins];
        if (edges.empty() || e > edges.back()) edges.push_back(e);
    }
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), v[i]) -
                                  edges.begin());
        // values exactly at an edge fall to the lower bin
        if (out[i] > 0 && v[i] == edges[out[i] - 1]) out[i] -= 1;
    }
    return out;
}

}  // namespace

double mutual_information(std::span<const double> x, std::span<const double> y,
                          int x_bins, int y_bins) {
    if (x.size() != y.size()) throw std::invalid_argument("mutual_information: length mismatch");
    if (x_bins < 2 || y_bins < 2) throw std::invalid_argument("mutual_information: bins >= 2");
    const std::size_t n = x.size();
    if (n == 0) return 0.0;

    const std::vector<int> bx = discretize(x, x_bins);
    const std::vector<int> by = discretize(y, y_bins);
    const int nx = *std::max_element(bx.begin(), bx.end()) + 1;
    const int ny = *std::max_element(by.begin(), by.end()) + 1;

    std::vector<double> joint(static_cast<std::size_t>(nx) * ny, 0.0);
    std::vector<double> px(nx, 0.0), py(ny, 0.0);
    const double w = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        joint[static_cast<std::size_t>(bx[i]) * ny + by[i]] += w;
        px[bx[i]] += w;
        py[by[i]] += w;
    }
    double mi = 0.0;
    for (int a = 0; a < nx; ++a) {
        for (int b = 0; b < ny; ++b) {
            const double pab = joint[static_cast<std::size_t>(a) * ny + b];
            if (pab > 0.0) mi += pab * std::log(pab / (px[a] * py[b]));
        }
    }
    return std::max(mi, 0.0);
}

// --- bootstrap -------------------------------------------------------------

std::pair<double, double> bootstrap_ci(std::span<const double> samples,
                                       const Statistic& statistic,
                                       int iterations, double level,
                                       std::uint64_t seed) {
    if (samples.empty()) throw std::invalid_argument("bootstrap_ci: empty samples");
    if (iterations < 100) throw std::invalid_argument("bootstrap_ci: iterations >= 100");
    const std::size_t n = samples.size();
    std::vector<double> stats(iterations);
    std::vector<double> resample(n);
    for (int it = 0; it < iterations; ++it) {
        auto stream = rng::Stream::keyed(seed, 0x626f6f74ULL, static_cast<std::uint64_t>(it));
        for (std::size_t j = 0; j < n; ++j) resample[j] = samples[stream.uniform_int(n)];
        stats[it] = statistic(resample);
    }
    std::sort(stats.begin(), stats.end());
    const double alpha = 1.0 - level;
    return {quantile_sorted(stats, alpha / 2.0), quantile_sorted(stats, 1.0 - alpha / 2.0)};
}

// --- t-tests ---------------------------------------------------------------

TestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("paired_t_test: length mismatch");
    const std::size_t n = a.size();
    if (n < 2) throw std::invalid_argument("paired_t_test: need n >= 2");
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    const double md = mean(d);
    const double sd = sample_sd(d);
    if (sd == 0.0) throw std::invalid_argument("paired_t_test: zero variance of differences");
    const double se = sd / std::sqrt(static_cast<double>(n));
    const double df = static_cast<double>(n - 1);
    TestResult out;
    out.statistic = md / se;
    out.p_value = student_t_two_sided_p(out.statistic, df);
    out.effect_size_d = md / sd;
    const double tcrit = student_t_quantile(0.975, df);
    out.ci_low = md - tcrit * se;
    out.ci_high = md + tcrit * se;
    return out;
}

TestResult two_sample_t_test(std::span<const double> a, std::span<const double> b) {
    const std::size_t n1 = a.size(), n2 = b.size();
    if (n1 < 2 || n2 < 2) throw std::invalid_argument("two_sample_t_test: need n >= 2 per group");
    const double m1 = mean(a), m2 = mean(b);
    const double s1 = sample_sd(a), s2 = sample_sd(b);
    const double df = static_cast<double>(n1 + n2 - 2);
    const double sp2 = ((n1 - 1) * s1 * s1 + (n2 - 1) * s2 * s2) / df;
    if (sp2 == 0.0) throw std::invalid_argument("two_sample_t_test: zero pooled variance");
    const double se = std::sqrt(sp2 * (1.0 / n1 + 1.0 / n2));
    TestResult out;
    out.statistic = (m1 - m2) / se;
    out.p_value = student_t_two_sided_p(out.statistic, df);
    out.effect_size_d = (m1 - m2) / std::sqrt(sp2);
    const double tcrit = student_t_quantile(0.975, df);
    out.ci_low = (m1 - m2) - tcrit * se;
    out.ci_high = (m1 - m2) + tcrit * se;
    return out;
}

double cohens_d_paired(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("cohens_d_paired: length mismatch");
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    const double sd = sample_sd(d);
    if (sd == 0.0) throw std::invalid_argument("cohens_d_paired: zero variance of differences");
    return mean(d) / sd;
}

double cohens_d_independent(std::span<const double> a, std::span<const double> b) {
    const std::size_t n1 = a.size(), n2 = b.size();
    if (n1 < 2 || n2 < 2) throw std::invalid_argument("cohens_d_independent: need n >= 2 per group");
    const double s1 = sample_sd(a), s2 = sample_sd(b);
    const double sp2 = ((n1 - 1) * s1 * s1 + (n2 - 1) * s2 * s2) / static_cast<double>(n1 + n2 - 2);
    if (sp2 == 0.0) throw std::invalid_argument("cohens_d_independent: zero pooled variance");
    return (mean(a) - mean(b)) / std::sqrt(sp2);
}

// --- classification metrics ------------------------------------------------

double accuracy(std::span<const double> scores, std::span<const int> labels,
                double threshold) {
    if (scores.size() != labels.size()) throw std::invalid_argument("accuracy: length mismatch");
    if (scores.empty()) throw std::invalid_argument("accuracy: empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const int pred = scores[i] > threshold ? 1 : 0;
        if (pred == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: length mismatch");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (int y : labels) n_pos += (y == 1);
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("roc_auc: both classes required");

    // Rank-sum with average ranks for ties: equivalent to counting pairs
    // with ties at half credit.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
        for (std::size_t k = i; k < j; ++k) {
            if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
        }
        i = j;
    }
    const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

}  // namespace retentia::stats
