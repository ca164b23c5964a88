#include "doctest.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "lordsig/checkpoint.hpp"

using namespace lordsig::io;

namespace {

struct TempFile {
    std::filesystem::path file;
    TempFile() {
        file = std::filesystem::temp_directory_path() /
               ("lordsig_ckpt_" + std::to_string(std::random_device{}()) + ".bin");
    }
    ~TempFile() { std::filesystem::remove(file); }
};

}  // namespace

TEST_CASE("checkpoint round-trips meta and blocks bit for bit") {
    Checkpoint ckpt;
    ckpt.meta["kind"] = "lord";
    ckpt.meta["channels"] = "3";
    ckpt.meta["d1"] = "1";
    CheckpointBlock a{"encoder.w0", 2, 3, {1.0, -2.5, 3.25, 0.0, 1e-300, -0.125}};
    CheckpointBlock b{"encoder.b0", 2, 1, {0.5, -0.5}};
    ckpt.blocks = {a, b};

    TempFile tmp;
    save_checkpoint(tmp.file, ckpt);
    auto loaded = load_checkpoint(tmp.file);
    CHECK(loaded.meta == ckpt.meta);
    REQUIRE(loaded.blocks.size() == 2);
    CHECK(loaded.blocks[0].name == "encoder.w0");
    CHECK(loaded.blocks[0].rows == 2);
    CHECK(loaded.blocks[0].cols == 3);
    CHECK(std::memcmp(loaded.blocks[0].data.data(), a.data.data(), a.data.size() * sizeof(double)) == 0);
    CHECK(loaded.find("encoder.b0") != nullptr);
    CHECK(loaded.find("missing") == nullptr);
    CHECK(loaded.meta_at("kind") == "lord");
    CHECK_THROWS_AS((void)loaded.meta_at("nope"), std::runtime_error);

    SUBCASE("rewriting produces identical bytes") {
        TempFile tmp2;
        save_checkpoint(tmp2.file, loaded);
        std::ifstream f1(tmp.file, std::ios::binary), f2(tmp2.file, std::ios::binary);
        std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
        std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
        CHECK(s1 == s2);
    }
}

TEST_CASE("checkpoint loader rejects damaged files") {
    TempFile tmp;
    {
        std::ofstream f(tmp.file, std::ios::binary);
        f << "not a checkpoint at all";
    }
    CHECK_THROWS_AS((void)load_checkpoint(tmp.file), std::runtime_error);

    Checkpoint ckpt;
    ckpt.blocks.push_back({"w", 2, 2, {1, 2, 3, 4}});
    save_checkpoint(tmp.file, ckpt);
    // truncate mid-data
    std::error_code ec;
    std::filesystem::resize_file(tmp.file, 20, ec);
    REQUIRE(!ec);
    CHECK_THROWS_WITH_AS((void)load_checkpoint(tmp.file), doctest::Contains("truncated"),
                         std::runtime_error);
}
