#include "lordsig/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>

namespace lordsig::path {

namespace {

constexpr std::uint64_t kSplitSeed = 0x5eeded;  // fixed so splits are stable across runs

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& s, const std::string& context) {
    double value = 0.0;
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value))
        throw std::runtime_error(context + ": malformed number '" + s + "'");
    return value;
}

TimeSeriesPath load_sample_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error(file.string() + ": cannot open");
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(file.string() + ": empty file");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "t")
        throw std::runtime_error(file.string() + ": header must be t,c1,...,ck");
    const int raw_channels = static_cast<int>(header.size()) - 1;

    std::vector<double> times;
    std::vector<double> raw;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        const std::string context = file.string() + ":" + std::to_string(line_no);
        if (fields.size() != header.size())
            throw std::runtime_error(context + ": expected " + std::to_string(header.size()) +
                                     " fields, got " + std::to_string(fields.size()));
        times.push_back(parse_double(fields[0], context));
        for (std::size_t j = 1; j < fields.size(); ++j) raw.push_back(parse_double(fields[j], context));
    }
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1]))
            throw std::runtime_error(file.string() + ": non-monotone timestamps");
    return TimeSeriesPath::from_raw(std::move(times), std::move(raw), raw_channels);
}

}  // namespace

std::vector<std::size_t> Dataset::indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (samples[i].split == s) out.push_back(i);
    return out;
}

Dataset load_dataset(const std::filesystem::path& root) {
    const auto samples_dir = root / "samples";
    if (!std::filesystem::is_directory(samples_dir))
        throw std::runtime_error(samples_dir.string() + ": missing samples directory");

    // labels.csv
    std::map<std::string, double> labels;
    {
        const auto labels_file = root / "labels.csv";
        std::ifstream in(labels_file);
        if (!in) throw std::runtime_error(labels_file.string() + ": cannot open");
        std::string line;
        if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"id", "target"})
            throw std::runtime_error(labels_file.string() + ": header must be id,target");
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            const auto fields = split_csv_line(line);
            const std::string context = labels_file.string() + ":" + std::to_string(line_no);
            if (fields.size() != 2) throw std::runtime_error(context + ": expected id,target");
            labels[fields[0]] = parse_double(fields[1], context);
        }
    }

    // optional splits.csv
    std::map<std::string, Split> splits;
    bool have_splits = false;
    {
        const auto splits_file = root / "splits.csv";
        std::ifstream in(splits_file);
        if (in) {
            have_splits = true;
            std::string line;
            if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"id", "split"})
                throw std::runtime_error(splits_file.string() + ": header must be id,split");
            std::size_t line_no = 1;
            while (std::getline(in, line)) {
                ++line_no;
                if (line.empty()) continue;
                const auto fields = split_csv_line(line);
                const std::string context = splits_file.string() + ":" + std::to_string(line_no);
                if (fields.size() != 2) throw std::runtime_error(context + ": expected id,split");
                if (fields[1] == "train") splits[fields[0]] = Split::train;
                else if (fields[1] == "val") splits[fields[0]] = Split::val;
                else if (fields[1] == "test") splits[fields[0]] = Split::test;
                else throw std::runtime_error(context + ": split must be train, val or test");
            }
        }
    }

    std::vector<std::string> ids;
    for (const auto& entry : std::filesystem::directory_iterator(samples_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".csv")
            ids.push_back(entry.path().stem().string());
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw std::runtime_error(samples_dir.string() + ": no sample files");

    Dataset ds;
    for (const auto& id : ids) {
        auto label_it = labels.find(id);
        if (label_it == labels.end())
            throw std::runtime_error((root / "labels.csv").string() + ": missing label for sample '" + id + "'");
        Sample s;
        s.id = id;
        s.series = load_sample_csv(samples_dir / (id + ".csv"));
        s.target = label_it->second;
        if (s.series.raw_channels != ds.raw_channels() && !ds.samples.empty())
            throw std::runtime_error(samples_dir.string() + ": inconsistent channel count at sample '" + id + "'");
        if (have_splits) {
            auto it = splits.find(id);
            if (it == splits.end())
                throw std::runtime_error((root / "splits.csv").string() + ": missing split for sample '" + id + "'");
            s.split = it->second;
        }
        ds.samples.push_back(std::move(s));
    }

    if (!have_splits) {
        std::vector<std::size_t> order(ds.samples.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::mt19937_64 rng(kSplitSeed);
        for (std::size_t i = order.size(); i-- > 1;) std::swap(order[i], order[rng() % (i + 1)]);
        const std::size_t n = order.size();
        const std::size_t n_train = (n * 7) / 10;
        const std::size_t n_val = (n * 15) / 100;
        for (std::size_t k = 0; k < n; ++k) {
            Split s = k < n_train ? Split::train : (k < n_train + n_val ? Split::val : Split::test);
            ds.samples[order[k]].split = s;
        }
    }

    ds.classification = true;
    double max_label = 0.0;
    for (const auto& s : ds.samples) {
        if (s.target != std::floor(s.target) || s.target < 0.0 || s.target > 1e6) ds.classification = false;
        max_label = std::max(max_label, s.target);
    }
    ds.num_classes = ds.classification ? static_cast<int>(max_label) + 1 : 0;
    return ds;
}

std::vector<std::string> normalize(Dataset& dataset) {
    const auto train = dataset.indices(Split::train);
    if (train.empty()) throw std::runtime_error("normalize: empty training split");
    const int raw = dataset.raw_channels();

    std::vector<double> mean(static_cast<std::size_t>(raw), 0.0);
    std::vector<double> var(static_cast<std::size_t>(raw), 0.0);
    std::size_t count = 0;
    for (std::size_t i : train) {
        const auto& p = dataset.samples[i].series;
        for (std::size_t k = 0; k < p.size(); ++k) {
            auto obs = p.observation(k);
            for (int j = 0; j < raw; ++j) mean[static_cast<std::size_t>(j)] += obs[static_cast<std::size_t>(j)];
        }
        count += p.size();
    }
    for (auto& m : mean) m /= static_cast<double>(count);
    for (std::size_t i : train) {
        const auto& p = dataset.samples[i].series;
        for (std::size_t k = 0; k < p.size(); ++k) {
            auto obs = p.observation(k);
            for (int j = 0; j < raw; ++j) {
                const double dv = obs[static_cast<std::size_t>(j)] - mean[static_cast<std::size_t>(j)];
                var[static_cast<std::size_t>(j)] += dv * dv;
            }
        }
    }
    for (auto& v : var) v /= static_cast<double>(count);

    std::vector<std::string> warnings;
    std::vector<double> scale(static_cast<std::size_t>(raw), 1.0);
    for (int j = 0; j < raw; ++j) {
        if (var[static_cast<std::size_t>(j)] > 0.0) {
            scale[static_cast<std::size_t>(j)] = 1.0 / std::sqrt(var[static_cast<std::size_t>(j)]);
        } else {
            warnings.push_back("normalize: channel " + std::to_string(j + 1) +
                               " has zero variance on the training split; centering only");
        }
    }

    double max_duration = 0.0;
    for (std::size_t i : train) max_duration = std::max(max_duration, dataset.samples[i].series.duration());
    const double time_scale = max_duration > 0.0 ? 1.0 / max_duration : 1.0;

    for (auto& s : dataset.samples) {
        auto& p = s.series;
        const int d = p.channels();
        for (std::size_t k = 0; k < p.size(); ++k) {
            for (int j = 0; j < raw; ++j) {
                auto& x = p.values[k * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];
                x = (x - mean[static_cast<std::size_t>(j)]) * scale[static_cast<std::size_t>(j)];
            }
            p.values[k * static_cast<std::size_t>(d) + static_cast<std::size_t>(raw)] = p.times[k] * time_scale;
        }
        for (auto& t : p.times) t *= time_scale;
    }
    return warnings;
}

}  // namespace lordsig::path
