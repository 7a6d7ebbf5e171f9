#pragma once

#include <array>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "error.hpp"

namespace phi4 {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

inline double to_double(const Rational& value)
{
    return static_cast<double>(value);
}

inline BigInt factorial(int k)
{
    BigInt result = 1;
    for (int i = 2; i <= k; ++i)
        result *= i;
    return result;
}

inline BigInt binomial(int total, int chosen)
{
    if (chosen < 0 || chosen > total)
        return 0;
    return factorial(total) / (factorial(chosen) * factorial(total - chosen));
}

/** Odd triple i1 <= i2 <= i3 of a C-term partition with weight n!/(i1! i2! i3! sigma). */
struct TriplePartition {
    std::array<int, 3> parts{};
    Rational weight;
    int symmetry = 1;
};

/** Pair (j1 odd, j2 even) of a B-term split with its multiplicity. */
struct PairPartition {
    std::array<int, 2> parts{};
    Rational weight;
};

/** Closed-form tree-term counts: the full count and its leading quadratic part. */
struct TreeTermCounts {
    Rational total;
    Rational leading;
};

inline void require_odd_order(int order, int minimum, const char* what)
{
    if (order < minimum || order % 2 == 0)
        throw config_error(std::string(what) + ": order must be odd and >= " + std::to_string(minimum) +
                           ", got " + std::to_string(order));
}

/** Permutations of three parts fixing the multiset. */
inline int symmetry_factor(const std::array<int, 3>& parts)
{
    const bool first = parts[0] == parts[1];
    const bool second = parts[1] == parts[2];
    if (first && second)
        return 6;
    if (first || second || parts[0] == parts[2])
        return 2;
    return 1;
}

inline std::vector<TriplePartition> triple_partitions(int order)
{
    require_odd_order(order, 3, "triple_partitions");
    std::vector<TriplePartition> result;
    const BigInt total = factorial(order);
    for (int first = 1; 3 * first <= order; first += 2) {
        for (int second = first; first + 2 * second <= order; second += 2) {
            const int third = order - first - second;
            if (third < second || third % 2 == 0)
                continue;
            TriplePartition partition;
            partition.parts = {first, second, third};
            partition.symmetry = symmetry_factor(partition.parts);
            const BigInt denominator =
                factorial(first) * factorial(second) * factorial(third) * partition.symmetry;
            partition.weight = Rational(total, denominator);
            result.push_back(partition);
        }
    }
    return result;
}

inline std::vector<PairPartition> pair_partitions(int order)
{
    require_odd_order(order, 3, "pair_partitions");
    std::vector<PairPartition> result;
    for (int odd_part = 1; odd_part <= order - 2; odd_part += 2) {
        PairPartition partition;
        partition.parts = {odd_part, order - odd_part};
        partition.weight = Rational(binomial(order, odd_part));
        result.push_back(partition);
    }
    return result;
}

inline TreeTermCounts tree_term_counts(int order)
{
    require_odd_order(order, 5, "tree_term_counts");
    const Rational shifted = order - 3;
    TreeTermCounts counts;
    counts.leading = shifted * shifted / 48;
    counts.total = counts.leading + shifted / 3 + 1;
    return counts;
}

/** Floating-point value of the tree-term count, usable for continuous n in the ratio inequalities. */
inline double tree_term_count(double order)
{
    const double shifted = order - 3.0;
    return shifted * shifted / 48.0 + shifted / 3.0 + 1.0;
}

} // namespace phi4
