#ifndef LORDSIG_SYNTH_HPP
#define LORDSIG_SYNTH_HPP

#include <cstdint>
#include <filesystem>

#include "lordsig/dataset.hpp"

namespace lordsig::synth {

// Binary classification where the class is the sign of the signed (Levy)
// area accumulated over the path. Samples are noisy circular arcs sampled at
// the window-boundary knots of a P-observation plan and filled linearly, so
// the area signal lives at window scale.
struct AreaTaskSpec {
    int n_train = 300;
    int n_val = 100;
    int n_test = 100;
    int length = 512;       // observations per sample
    int window_obs = 32;    // knots fall on the boundaries plan_windows(P) picks
    double noise = 0.03;    // knot jitter relative to the arc radius
    double margin = 0.15;   // reject samples with |area| below margin * radius^2
    std::uint64_t seed = 1;
};

path::Dataset make_area_classification(const AreaTaskSpec& spec);

// Regression targets from a fixed random depth-2 log-signature functional of
// random-walk paths; the autoencoder criteria only need the paths.
struct ReconTaskSpec {
    int n_samples = 200;
    int length = 512;
    int knot_stride = 16;
    std::uint64_t seed = 1;
};

path::Dataset make_logsig_regression(const ReconTaskSpec& spec);

// Writes samples/<id>.csv, labels.csv and splits.csv under root in the
// dataset directory format.
void write_dataset(const std::filesystem::path& root, const path::Dataset& dataset);

// Shortest round-trip decimal text for a double; used by every CSV writer so
// reruns stay byte-identical.
std::string format_double(double x);

}  // namespace lordsig::synth

#endif
