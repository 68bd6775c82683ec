#pragma once

#include <cstdint>
#include <vector>

#include "ild/dataset.hpp"

namespace ild {

struct IndexSplit {
    std::vector<int> train;
    std::vector<int> test;  // validation set for MCCV splits
};

struct SplitPlan {
    enum class Kind { stratified_kfold, monte_carlo_cv };
    Kind kind = Kind::monte_carlo_cv;
    int folds_or_repeats = 3;
    double val_fraction = 0.3;  // MCCV only
    std::uint64_t seed = 0;
};

// Per-class round-robin assignment after a seeded in-class shuffle: per-class
// fold counts differ by at most one; classes smaller than K leave some folds
// without that class.
std::vector<IndexSplit> stratified_kfold(const std::vector<int>& y, int num_classes, int K,
                                         std::uint64_t seed);
std::vector<IndexSplit> stratified_kfold(const Dataset& ds, int K, std::uint64_t seed);

// Stratified Monte-Carlo cross-validation: per repeat the validation side has
// exactly round(val_fraction * N) rows, allocated per class by largest
// remainder.
std::vector<IndexSplit> mccv_splits(const std::vector<int>& y, int num_classes, int repeats,
                                    double val_fraction, std::uint64_t seed);
std::vector<IndexSplit> mccv_splits(const Dataset& ds, int repeats, double val_fraction,
                                    std::uint64_t seed);

std::vector<IndexSplit> make_splits(const Dataset& ds, const SplitPlan& plan);

}  // namespace ild
