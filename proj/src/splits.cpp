#include "ild/splits.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ild/rng.hpp"

namespace ild {

namespace {

std::vector<std::vector<int>> indices_by_class(const std::vector<int>& y, int num_classes) {
    std::vector<std::vector<int>> per_class(static_cast<std::size_t>(num_classes));
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (y[i] < 0 || y[i] >= num_classes) throw std::invalid_argument("splits: label out of range");
        per_class[static_cast<std::size_t>(y[i])].push_back(static_cast<int>(i));
    }
    return per_class;
}

}  // namespace

std::vector<IndexSplit> stratified_kfold(const std::vector<int>& y, int num_classes, int K,
                                         std::uint64_t seed) {
    const int N = static_cast<int>(y.size());
    if (K < 2) throw std::invalid_argument("stratified_kfold: K must be >= 2");
    if (K > N) throw std::invalid_argument("stratified_kfold: K exceeds dataset size");

    auto per_class = indices_by_class(y, num_classes);
    std::vector<std::vector<int>> folds(static_cast<std::size_t>(K));
    for (int c = 0; c < num_classes; ++c) {
        auto& members = per_class[static_cast<std::size_t>(c)];
        Rng rng(derive_seed(seed, 0x5f01, static_cast<std::uint64_t>(c)));
        rng.shuffle(members);
        // rotate the starting fold per class so remainders spread across folds
        for (std::size_t j = 0; j < members.size(); ++j)
            folds[(j + static_cast<std::size_t>(c)) % static_cast<std::size_t>(K)].push_back(members[j]);
    }

    std::vector<IndexSplit> out(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        auto& test = folds[static_cast<std::size_t>(k)];
        std::sort(test.begin(), test.end());
        std::vector<char> in_test(static_cast<std::size_t>(N), 0);
        for (int i : test) in_test[static_cast<std::size_t>(i)] = 1;
        auto& split = out[static_cast<std::size_t>(k)];
        split.test = test;
        split.train.reserve(static_cast<std::size_t>(N) - test.size());
        for (int i = 0; i < N; ++i)
            if (!in_test[static_cast<std::size_t>(i)]) split.train.push_back(i);
    }
    return out;
}

std::vector<IndexSplit> stratified_kfold(const Dataset& ds, int K, std::uint64_t seed) {
    return stratified_kfold(ds.y, ds.num_classes, K, seed);
}

std::vector<IndexSplit> mccv_splits(const std::vector<int>& y, int num_classes, int repeats,
                                    double val_fraction, std::uint64_t seed) {
    const int N = static_cast<int>(y.size());
    if (repeats < 1) throw std::invalid_argument("mccv_splits: repeats must be >= 1");
    if (val_fraction <= 0.0 || val_fraction >= 1.0)
        throw std::invalid_argument("mccv_splits: val_fraction must be in (0,1)");
    const int total_val = static_cast<int>(std::llround(val_fraction * N));
    if (total_val <= 0 || total_val >= N)
        throw std::invalid_argument("mccv_splits: val_fraction leaves an empty side");

    auto per_class = indices_by_class(y, num_classes);

    // largest-remainder allocation of total_val across classes
    std::vector<int> take(static_cast<std::size_t>(num_classes), 0);
    std::vector<std::pair<double, int>> rema;  // (-fraction, class) for stable pick order
    int assigned = 0;
    for (int c = 0; c < num_classes; ++c) {
        double ideal = val_fraction * static_cast<double>(per_class[static_cast<std::size_t>(c)].size());
        take[static_cast<std::size_t>(c)] = static_cast<int>(std::floor(ideal));
        assigned += take[static_cast<std::size_t>(c)];
        rema.emplace_back(-(ideal - std::floor(ideal)), c);
    }
    std::stable_sort(rema.begin(), rema.end());
    for (int i = 0; assigned < total_val; i = (i + 1) % num_classes) {
        int c = rema[static_cast<std::size_t>(i)].second;
        if (take[static_cast<std::size_t>(c)] <
            static_cast<int>(per_class[static_cast<std::size_t>(c)].size())) {
            ++take[static_cast<std::size_t>(c)];
            ++assigned;
        }
    }

    std::vector<IndexSplit> out(static_cast<std::size_t>(repeats));
    for (int rep = 0; rep < repeats; ++rep) {
        IndexSplit& split = out[static_cast<std::size_t>(rep)];
        for (int c = 0; c < num_classes; ++c) {
            auto members = per_class[static_cast<std::size_t>(c)];
            Rng rng(derive_seed(seed, 0x3c11, static_cast<std::uint64_t>(rep),
                                static_cast<std::uint64_t>(c)));
            rng.shuffle(members);
            const int t = take[static_cast<std::size_t>(c)];
            for (std::size_t j = 0; j < members.size(); ++j)
                (static_cast<int>(j) < t ? split.test : split.train).push_back(members[j]);
        }
        std::sort(split.train.begin(), split.train.end());
        std::sort(split.test.begin(), split.test.end());
    }
    return out;
}

std::vector<IndexSplit> mccv_splits(const Dataset& ds, int repeats, double val_fraction,
                                    std::uint64_t seed) {
    return mccv_splits(ds.y, ds.num_classes, repeats, val_fraction, seed);
}

std::vector<IndexSplit> make_splits(const Dataset& ds, const SplitPlan& plan) {
    if (plan.kind == SplitPlan::Kind::stratified_kfold)
        return stratified_kfold(ds, plan.folds_or_repeats, plan.seed);
    return mccv_splits(ds, plan.folds_or_repeats, plan.val_fraction, plan.seed);
}

}  // namespace ild
