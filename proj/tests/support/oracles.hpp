#pragma once

// Independent reference computations. Nothing here calls into the code
// paths they check.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <vector>

#include "netprint/forest.hpp"

namespace netprint::testing {

struct NaiveStats {
    double mean;
    double sigma;
};

/// Two-pass mean and population standard deviation in long double.
inline NaiveStats naive_mean_sigma(const std::vector<double>& xs) {
    long double sum = 0;
    for (double x : xs) sum += x;
    const long double mean = sum / xs.size();
    long double sq = 0;
    for (double x : xs) sq += (x - mean) * (x - mean);
    return {static_cast<double>(mean), static_cast<double>(std::sqrt(sq / xs.size()))};
}

/// Exact non-negative-denominator rational over 128-bit integers.
struct Fraction {
    __int128 num = 0;
    __int128 den = 1;

    static __int128 gcd(__int128 a, __int128 b) {
        if (a < 0) a = -a;
        while (b != 0) {
            const __int128 t = a % b;
            a = b;
            b = t;
        }
        return a == 0 ? 1 : a;
    }
    Fraction normalized() const {
        const auto g = gcd(num, den);
        return {num / g, den / g};
    }
    friend Fraction operator+(Fraction a, Fraction b) { return Fraction{a.num * b.den + b.num * a.den, a.den * b.den}.normalized(); }
    friend Fraction operator-(Fraction a, Fraction b) { return Fraction{a.num * b.den - b.num * a.den, a.den * b.den}.normalized(); }
    friend Fraction operator*(Fraction a, Fraction b) { return Fraction{a.num * b.num, a.den * b.den}.normalized(); }
    friend bool operator<(Fraction a, Fraction b) { return a.num * b.den < b.num * a.den; }
    double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
};

/// Gini impurity 1 - sum (c/n)^2 as an exact fraction.
inline Fraction gini_exact(const std::vector<std::int64_t>& counts) {
    std::int64_t n = 0;
    for (auto c : counts) n += c;
    if (n == 0) return {0, 1};
    Fraction g{1, 1};
    for (auto c : counts) g = g - Fraction{c * c, n * n};
    return g;
}

struct OracleSplit {
    std::size_t feature;
    double threshold;
    Fraction gain;
};

/// Scans every feature in `subset` (ascending) and every midpoint between
/// consecutive distinct values (ascending), recounting both sides from
/// scratch each time. The first strictly best candidate wins.
inline std::optional<OracleSplit> brute_force_split(const std::vector<SplitSample>& samples,
                                                    std::vector<std::size_t> subset, std::size_t n_classes,
                                                    std::size_t min_leaf = 1) {
    std::sort(subset.begin(), subset.end());
    subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
    const auto n = static_cast<std::int64_t>(samples.size());
    std::vector<std::int64_t> all(n_classes);
    for (const auto& s : samples) ++all[s.cls];
    const Fraction parent = gini_exact(all);

    std::optional<OracleSplit> best;
    for (auto f : subset) {
        std::set<double> distinct;
        for (const auto& s : samples) distinct.insert(s.x[f]);
        std::vector<double> values(distinct.begin(), distinct.end());
        for (std::size_t i = 0; i + 1 < values.size(); ++i) {
            const double t = (values[i] + values[i + 1]) / 2;
            std::vector<std::int64_t> left(n_classes), right(n_classes);
            std::int64_t nl = 0, nr = 0;
            for (const auto& s : samples) {
                if (s.x[f] <= t) {
                    ++left[s.cls];
                    ++nl;
                } else {
                    ++right[s.cls];
                    ++nr;
                }
            }
            if (nl < static_cast<std::int64_t>(min_leaf) || nr < static_cast<std::int64_t>(min_leaf)) continue;
            const Fraction children = Fraction{nl, n} * gini_exact(left) + Fraction{nr, n} * gini_exact(right);
            const Fraction gain = parent - children;
            if (!best || best->gain < gain) best = OracleSplit{f, t, gain};
        }
    }
    if (!best || !(Fraction{0, 1} < best->gain)) return std::nullopt;
    return best;
}

}  // namespace netprint::testing
