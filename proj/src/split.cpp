#include "uad/split.hpp"

#include <cmath>
#include <fstream>
#include <utility>

#include "uad/error.hpp"
#include "uad/rng.hpp"

namespace uad {

std::vector<std::string> seeded_shuffle(std::vector<std::string> items, std::uint64_t seed) {
    StableRng rng(seed);
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i - 1)));
        std::swap(items[i - 1], items[j]);
    }
    return items;
}

DatasetSplit make_split(const std::vector<std::string>& subjects, double train_frac, double val_frac,
                        std::uint64_t seed) {
    if (train_frac < 0 || val_frac < 0 || train_frac + val_frac > 1.0 + 1e-12) {
        throw Error(Errc::InvalidConfig, "split fractions must be non-negative and sum to at most 1");
    }
    const auto shuffled = seeded_shuffle(subjects, seed);
    const auto n = static_cast<double>(shuffled.size());
    const auto n_train = static_cast<std::size_t>(std::llround(train_frac * n));
    const auto n_val = std::min(static_cast<std::size_t>(std::llround(val_frac * n)), shuffled.size() - n_train);

    DatasetSplit split;
    split.train.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.validation.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train),
                            shuffled.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    split.test.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), shuffled.end());
    return split;
}

DatasetSplit subsample_training(const DatasetSplit& split, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw Error(Errc::InvalidConfig, "subsample fraction must lie in (0, 1]");
    }
    // Guard against 0.1 * 110 evaluating to 11.000000000000002.
    const double raw = fraction * static_cast<double>(split.train.size());
    const auto keep = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    if (keep == 0) throw Error(Errc::EmptyTrain, "subsampling leaves no training subject");

    DatasetSplit out = split;
    out.train.resize(std::min(keep, split.train.size()));
    out.fraction = split.fraction * fraction;
    return out;
}

namespace {

void write_list(const std::filesystem::path& p, const std::vector<std::string>& items) {
    std::ofstream f(p);
    if (!f) throw Error(Errc::UnreadableFile, "cannot write " + p.string());
    for (const auto& s : items) f << s << '\n';
}

std::vector<std::string> read_list(const std::filesystem::path& p) {
    std::ifstream f(p);
    if (!f) throw Error(Errc::UnreadableFile, "cannot read " + p.string());
    std::vector<std::string> items;
    for (std::string line; std::getline(f, line);) {
        if (!line.empty()) items.push_back(line);
    }
    return items;
}

}  // namespace

void write_split(const std::filesystem::path& dir, const DatasetSplit& split) {
    std::filesystem::create_directories(dir);
    write_list(dir / "train.txt", split.train);
    write_list(dir / "validation.txt", split.validation);
    write_list(dir / "test.txt", split.test);
}

DatasetSplit read_split(const std::filesystem::path& dir) {
    DatasetSplit split;
    split.train = read_list(dir / "train.txt");
    split.validation = read_list(dir / "validation.txt");
    split.test = read_list(dir / "test.txt");
    return split;
}

}  // namespace uad
