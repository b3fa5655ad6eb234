#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>
#include <sstream>

#include "netprint/dataset.hpp"
#include "netprint/error.hpp"
#include "netprint/random.hpp"
#include "support/temp_dir.hpp"

using namespace netprint;
using namespace netprint::testing;

namespace {

Dataset numbered(std::size_t n, std::size_t n_labels = 3) {
    std::vector<LabeledInstance> v;
    for (std::size_t i = 0; i < n; ++i)
        v.push_back({Fingerprint{double(i), 0.5, double(i % 7), 1.25}, "dev" + std::to_string(i % n_labels)});
    return Dataset(std::move(v));
}

std::vector<double> keys(const Dataset& d) {
    std::vector<double> k;
    for (const auto& inst : d.instances()) k.push_back(inst.fingerprint.iplen_mu);
    return k;
}

}  // namespace

TEST_CASE("Dataset keeps a sorted distinct label vocabulary") {
    Dataset d({{Fingerprint{}, "tablet"}, {Fingerprint{}, "bulb"}, {Fingerprint{}, "tablet"}});
    CHECK(d.labels() == std::vector<std::string>{"bulb", "tablet"});
    CHECK(d.label_counts().at("tablet") == 2);
    CHECK(kFeatureNames[0] == std::string("iplen_mu"));
    CHECK(kFeatureNames[3] == std::string("tcpwin_sigma"));
}

TEST_CASE("train_count rounds half away from zero") {
    CHECK(train_count(1368948, 0.8) == 1095158);  // 1,095,158.4
    CHECK(train_count(703141, 0.8) == 562513);    // 562,512.8
    CHECK(train_count(88594, 0.8) == 70875);      // 70,875.2
    CHECK(train_count(5, 0.8) == 4);
    CHECK(train_count(4, 0.5) == 2);
    CHECK(train_count(3, 0.5) == 2);  // 1.5 -> 2
    CHECK(train_count(1, 0.5) == 1);
}

TEST_CASE("split sizes follow the rounding rule for N = 1..10000") {
    for (std::size_t n = 1; n <= 10000; ++n) {
        // integer oracles: round(0.8 n) = floor((8n + 5) / 10); round(0.5 n) = floor((n + 1) / 2)
        REQUIRE(train_count(n, 0.8) == (8 * n + 5) / 10);
        REQUIRE(train_count(n, 0.5) == (n + 1) / 2);
    }
    for (std::size_t n : {1, 2, 3, 7, 10, 99, 1000}) {
        const auto parts = split(numbered(n), {0.8, 1, false});
        CHECK(parts.train.size() == (8 * n + 5) / 10);
        CHECK(parts.test.size() == n - (8 * n + 5) / 10);
    }
}

TEST_CASE("split partitions the dataset and is deterministic") {
    const auto d = numbered(257);
    for (bool stratified : {false, true}) {
        CAPTURE(stratified);
        const SplitSpec spec{0.8, 42, stratified};
        const auto a = split(d, spec);
        const auto b = split(d, spec);
        CHECK(a.train_indices == b.train_indices);
        CHECK(a.test_indices == b.test_indices);
        CHECK(a.train == b.train);

        auto all = a.train_indices;
        all.insert(all.end(), a.test_indices.begin(), a.test_indices.end());
        std::sort(all.begin(), all.end());
        std::vector<std::size_t> expect(d.size());
        std::iota(expect.begin(), expect.end(), std::size_t{0});
        CHECK(all == expect);

        auto merged = keys(a.train);
        const auto test_keys = keys(a.test);
        merged.insert(merged.end(), test_keys.begin(), test_keys.end());
        std::sort(merged.begin(), merged.end());
        CHECK(merged == keys(d));

        const auto other = split(d, {0.8, 43, stratified});
        CHECK(other.train_indices != a.train_indices);
    }
}

TEST_CASE("split shuffles: first train member is not always the first instance") {
    const auto d = numbered(100);
    std::set<std::size_t> firsts;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) firsts.insert(split(d, {0.8, seed, false}).train_indices[0]);
    CHECK(firsts.size() > 10);
}

TEST_CASE("stratified split cuts each label with the rounding rule") {
    const auto d = numbered(103, 4);
    const auto parts = split(d, {0.8, 9, true});
    const auto total = d.label_counts();
    const auto train = parts.train.label_counts();
    for (const auto& [label, count] : total) CHECK(train.at(label) == train_count(count, 0.8));
}

TEST_CASE("split rejects empty data and bad fractions") {
    CHECK_THROWS_AS(split(Dataset{}, {}), ContractError);
    CHECK_THROWS_AS(split(numbered(4), {0.0, 1, false}), ContractError);
    CHECK_THROWS_AS(split(numbered(4), {1.0, 1, false}), ContractError);
    const auto half = split(numbered(4), {0.5, 1, false});
    CHECK(half.train.size() == 2);
    CHECK(half.test.size() == 2);
}

TEST_CASE("relabel maps devices to categories") {
    const auto d = numbered(10, 3);  // dev0 x4, dev1 x3, dev2 x3
    const CategoryMap map{{"dev0", "iot"}, {"dev1", "non-iot"}, {"dev2", "iot"}};
    const auto r = relabel(d, map);
    CHECK(r.labels() == std::vector<std::string>{"iot", "non-iot"});
    CHECK(r.size() == d.size());
    // brute-force tally oracle
    std::map<std::string, std::size_t> tally;
    for (const auto& [label, count] : d.label_counts()) tally[map.at(label)] += count;
    CHECK(r.label_counts() == tally);
    for (std::size_t i = 0; i < d.size(); ++i) CHECK(r[i].fingerprint == d[i].fingerprint);

    const CategoryMap identity{{"dev0", "dev0"}, {"dev1", "dev1"}, {"dev2", "dev2"}};
    CHECK(relabel(d, identity) == d);

    try {
        relabel(d, {{"dev0", "iot"}});
        FAIL("expected an error");
    } catch (const ContractError& e) {
        CHECK(std::string(e.what()).find("dev1") != std::string::npos);
    }
}

TEST_CASE("dedupe keeps first occurrences and is idempotent") {
    const Fingerprint f{60, 0, 512, 0};
    const Fingerprint g{61, 0, 512, 0};
    Dataset d({{f, "a"}, {g, "a"}, {f, "a"}, {f, "b"}, {g, "a"}});
    auto [clean, removed] = dedupe(d);
    CHECK(removed == 2);
    CHECK(clean.instances() == std::vector<LabeledInstance>{{f, "a"}, {g, "a"}, {f, "b"}});
    auto [again, removed_again] = dedupe(clean);
    CHECK(removed_again == 0);
    CHECK(again == clean);

    auto [untouched, none] = dedupe(numbered(20));
    CHECK(none == 0);
    CHECK(untouched == numbered(20));
}

TEST_CASE("dedupe matches a set-based oracle on random data") {
    Xoshiro256StarStar rng(4);
    std::vector<LabeledInstance> v;
    for (int i = 0; i < 500; ++i)
        v.push_back({Fingerprint{double(rng.uniform_below(4)), 0, double(rng.uniform_below(3)), 0},
                     rng.uniform_below(2) ? "x" : "y"});
    std::set<std::tuple<std::string, double, double>> seen;
    std::vector<LabeledInstance> want;
    for (const auto& inst : v)
        if (seen.insert({inst.label, inst.fingerprint.iplen_mu, inst.fingerprint.tcpwin_mu}).second) want.push_back(inst);
    auto [clean, removed] = dedupe(Dataset(v));
    CHECK(clean.instances() == want);
    CHECK(removed == v.size() - want.size());
}

TEST_CASE("instance CSV round trip is bit exact") {
    std::ostringstream empty;
    write_instances(Dataset{}, empty);
    CHECK(empty.str() == std::string(kInstanceHeader) + "\n");

    Xoshiro256StarStar rng(6);
    std::vector<LabeledInstance> v;
    for (int i = 0; i < 300; ++i)
        v.push_back({Fingerprint{40 + rng.uniform01() * 1460, rng.uniform01() * 700, rng.uniform01() * 65535,
                                 std::sqrt(rng.uniform01())},
                     i % 3 ? "Belkin Wemo, switch" : "printer"});
    const Dataset d(v);
    std::ostringstream out;
    write_instances(d, out);
    std::istringstream in(out.str());
    CHECK(read_instances(in) == d);

    TempDir dir;
    write_instances(d, dir / "x.csv");
    CHECK(read_instances(dir / "x.csv") == d);
}

TEST_CASE("instance CSV errors carry line numbers") {
    auto read = [](const std::string& text) {
        std::istringstream in(text);
        return read_instances(in);
    };
    const std::string h = std::string(kInstanceHeader) + "\n";
    CHECK_THROWS_AS(read(""), FormatError);
    CHECK_THROWS_AS(read("label,a,b,c,d\n"), FormatError);
    try {
        read(h + "a,1,2,3,4\nb,1,x,3,4\n");
        FAIL("expected an error");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(read(h + "a,1,2,3\n"), FormatError);
    CHECK_THROWS_AS(read(h + ",1,2,3,4\n"), FormatError);
    CHECK_THROWS_AS(read(h + "a,1,2,3,inf\n"), FormatError);
    CHECK(read(h).empty());
}

TEST_CASE("category map file") {
    TempDir dir;
    const auto ok = dir.write("c.csv", "device_label,category\nbulb,iot\nlaptop,non-iot\n");
    CHECK(read_category_map(ok) == CategoryMap{{"bulb", "iot"}, {"laptop", "non-iot"}});
    CHECK_THROWS_AS(read_category_map(dir.write("bad.csv", "label,category\n")), FormatError);
    CHECK_THROWS_AS(read_category_map(dir.write("dup.csv", "device_label,category\na,x\na,y\n")), FormatError);
    CHECK_THROWS_AS(read_category_map(dir / "missing.csv"), IoError);
}
