#ifndef LORDSIG_DATASET_HPP
#define LORDSIG_DATASET_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "lordsig/path.hpp"

namespace lordsig::path {

enum class Split { train, val, test };

struct Sample {
    std::string id;
    TimeSeriesPath series;
    double target = 0.0;
    Split split = Split::train;
};

struct Dataset {
    std::vector<Sample> samples;
    bool classification = false;  // true when every label is a small integer
    int num_classes = 0;

    std::vector<std::size_t> indices(Split s) const;
    int raw_channels() const { return samples.empty() ? 0 : samples.front().series.raw_channels; }
    int channels() const { return samples.empty() ? 0 : samples.front().series.channels(); }
};

// Directory format: root/samples/<id>.csv with header t,c1,...,ck;
// root/labels.csv with header id,target; optional root/splits.csv with
// header id,split and split in {train,val,test}. Without splits.csv a fixed
// seeded 70/15/15 split over lexicographically sorted ids is used.
Dataset load_dataset(const std::filesystem::path& root);

// Per-channel standardization (zero mean, unit variance) fit on the training
// split and applied everywhere; the time channel is rescaled so the longest
// training horizon becomes 1, preserving spacing ratios. Returns one warning
// line per zero-variance channel (those are centered only).
std::vector<std::string> normalize(Dataset& dataset);

}  // namespace lordsig::path

#endif
