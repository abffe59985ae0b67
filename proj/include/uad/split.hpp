#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace uad {

/// Patient-wise split. `train` keeps the seeded shuffle order so that
/// subsampling is a prefix and smaller fractions nest inside larger ones.
struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
    double fraction = 1.0;
};

/// Deterministic Fisher-Yates shuffle driven by a 64-bit Mersenne twister.
/// Unlike std::shuffle the resulting order is identical on every platform.
std::vector<std::string> seeded_shuffle(std::vector<std::string> items, std::uint64_t seed);

/// Shuffles subjects and cuts round(train_frac*n) for training, round(val_frac*n)
/// for validation and the rest for testing.
DatasetSplit make_split(const std::vector<std::string>& subjects, double train_frac, double val_frac,
                        std::uint64_t seed);

/// Keeps the first ceil(fraction * |train|) training subjects. The fraction is
/// relative to the split passed in. Throws EmptyTrain if nothing is left.
DatasetSplit subsample_training(const DatasetSplit& split, double fraction);

/// Split manifests: train.txt, validation.txt, test.txt with one subject per line.
void write_split(const std::filesystem::path& dir, const DatasetSplit& split);
DatasetSplit read_split(const std::filesystem::path& dir);

}  // namespace uad
