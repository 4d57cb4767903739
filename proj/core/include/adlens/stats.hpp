#pragma once

#include <span>
#include <vector>

// Small descriptive-statistics helpers shared across modules.
namespace adlens::stats {

double mean(std::span<const double> xs);

// Population variance (divides by n).
double variance(std::span<const double> xs);
double stddev(std::span<const double> xs);

double median(std::span<const double> xs);

// Percentile with linear interpolation between order statistics at
// position q * (n - 1), q in [0, 1].
double percentile(std::span<const double> xs, double q);

// Ranks starting at 1; tied values share their average rank.
std::vector<double> average_ranks(std::span<const double> xs);

double pearson(std::span<const double> xs, std::span<const double> ys);
double spearman(std::span<const double> xs, std::span<const double> ys);

}  // namespace adlens::stats
