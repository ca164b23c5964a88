#ifndef LORDSIG_CHECKPOINT_HPP
#define LORDSIG_CHECKPOINT_HPP

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lordsig::io {

// Self-describing parameter container: a small key/value shape spec plus
// named little-endian float64 blocks in declaration order. The byte layout
// is documented in docs/formats.md.
struct CheckpointBlock {
    std::string name;
    int rows = 0;
    int cols = 1;
    std::vector<double> data;
};

struct Checkpoint {
    std::map<std::string, std::string> meta;  // ordered for reproducible bytes
    std::vector<CheckpointBlock> blocks;

    const CheckpointBlock* find(const std::string& name) const;
    std::string meta_at(const std::string& key) const;
};

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace lordsig::io

#endif
