#pragma once

#include <cstddef>
#include <functional>

#include "roughkit/grid.hpp"

namespace roughkit {

enum class PairBudget { automatic, all, dyadic_spans };

// Grids up to this many points scan every pair under the automatic budget.
inline constexpr std::size_t kAllPairsLimit = 1025;

bool scans_all_pairs(std::size_t points, PairBudget budget);

using PairScore = std::function<double(std::size_t, std::size_t)>;

// Max of score(i, j) over the selected pairs lo <= i < j <= hi.
double max_over_pairs(std::size_t lo, std::size_t hi, PairBudget budget, const PairScore& score);
double max_over_pairs_serial(std::size_t lo, std::size_t hi, PairBudget budget, const PairScore& score);

double holder_seminorm(const SampledPath& p, double alpha, PairBudget budget = PairBudget::automatic);
double holder_seminorm(const SampledPath& p, double alpha, std::size_t lo, std::size_t hi,
                       PairBudget budget = PairBudget::automatic);
double holder_seminorm(const TwoParamField& f, double alpha, PairBudget budget = PairBudget::automatic);
double holder_seminorm(const TwoParamField& f, double alpha, std::size_t lo, std::size_t hi,
                       PairBudget budget = PairBudget::automatic);

}  // namespace roughkit
