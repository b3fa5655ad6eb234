#include <doctest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "netprint/error.hpp"
#include "netprint/packet_ingest.hpp"
#include "netprint/random.hpp"
#include "support/pcap_builder.hpp"
#include "support/temp_dir.hpp"

using namespace netprint;
using namespace netprint::testing;

namespace {

IngestResult ingest_bytes(const PcapBuilder& pcap, const MacSet* keep = nullptr) {
    std::istringstream in(pcap.str());
    return ingest_pcap(in, keep);
}

IngestResult ingest_csv_text(const std::string& text) {
    std::istringstream in(text);
    return ingest_trace_csv(in);
}

const MacAddress kA = MacAddress(kMacA);
const MacAddress kB = MacAddress(kMacB);

}  // namespace

TEST_CASE("MAC addresses parse case-insensitively and print canonically") {
    const auto mac = MacAddress::from_string("34:23:87:B7:56:17");
    CHECK(mac.to_string() == "34:23:87:b7:56:17");
    CHECK(mac == MacAddress::from_string("34-23-87-b7-56-17"));
    CHECK_FALSE(MacAddress::parse("34:23:87:b7:56").has_value());
    CHECK_FALSE(MacAddress::parse("34:23:87:b7:56:1g").has_value());
    CHECK_FALSE(MacAddress::parse("34:23-87:b7:56:17").has_value());
    CHECK_THROWS_AS(MacAddress::from_string("nope"), FormatError);

    Xoshiro256StarStar rng(5);
    for (int i = 0; i < 500; ++i) {
        std::array<std::uint8_t, 6> o{};
        for (auto& b : o) b = static_cast<std::uint8_t>(rng.uniform_below(256));
        const MacAddress m(o);
        CHECK(MacAddress::from_string(m.to_string()) == m);
    }
}

TEST_CASE("empty pcap yields nothing") {
    const auto r = ingest_bytes(PcapBuilder{});
    CHECK(r.records.empty());
    CHECK(r.stats.packets_seen == 0);
    CHECK(r.stats.balanced());
}

TEST_CASE("three-frame fixture: TCP, UDP, TCP") {
    for (bool big : {false, true}) {
        for (bool nanos : {false, true}) {
            CAPTURE(big);
            CAPTURE(nanos);
            const auto r = ingest_bytes(three_frame_fixture(big, nanos));
            REQUIRE(r.records.size() == 2);
            CHECK(r.records[0].ip_total_length == 60);
            CHECK(r.records[0].tcp_window == 64240);
            CHECK(r.records[1].ip_total_length == 1500);
            CHECK(r.records[1].tcp_window == 512);
            CHECK(r.records[0].src_mac == kA);
            CHECK(r.stats.packets_seen == 3);
            CHECK(r.stats.packets_kept == 2);
            CHECK(r.stats.packets_skipped_non_tcp_ipv4 == 1);
            CHECK(r.stats.packets_skipped_malformed == 0);
            const double frac = nanos ? 250000e-9 : 0.25;
            CHECK(r.records[0].timestamp == doctest::Approx(1632000000.0 + frac).epsilon(1e-15));
        }
    }
}

TEST_CASE("pcap global header errors") {
    std::istringstream empty("");
    CHECK_THROWS_AS(ingest_pcap(empty), FormatError);
    std::istringstream junk(std::string(24, 'x'));
    CHECK_THROWS_AS(ingest_pcap(junk), FormatError);
    std::istringstream raw_ip(PcapBuilder(false, false, 101).str());
    CHECK_THROWS_AS(ingest_pcap(raw_ip), FormatError);
    CHECK_THROWS_AS(ingest_pcap(std::filesystem::path("/nonexistent/x.pcap")), IoError);
}

TEST_CASE("one 802.1Q tag is unwrapped, QinQ is skipped") {
    PcapBuilder pcap;
    pcap.add(build_frame({.vlan_tags = 1, .total_length = 52, .window = 29200}));
    pcap.add(build_frame({.vlan_tags = 2, .total_length = 52, .window = 29200}));
    const auto r = ingest_bytes(pcap);
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].ip_total_length == 52);
    CHECK(r.records[0].tcp_window == 29200);
    CHECK(r.stats.packets_skipped_non_tcp_ipv4 == 1);
}

TEST_CASE("IPv6, ARP, ICMP and later fragments are non-TCP/IPv4") {
    PcapBuilder pcap;
    pcap.add(build_frame({.ethertype = 0x86dd}));
    pcap.add(build_frame({.ethertype = 0x0806}));
    pcap.add(build_frame({.protocol = 1, .total_length = 84}));
    pcap.add(build_frame({.total_length = 60, .fragment = 0x00b9}));
    const auto r = ingest_bytes(pcap);
    CHECK(r.records.empty());
    CHECK(r.stats.packets_skipped_non_tcp_ipv4 == 4);
    CHECK(r.stats.balanced());
}

TEST_CASE("IP options and TCP options shift the window offset") {
    PcapBuilder pcap;
    pcap.add(build_frame({.ihl = 6, .total_length = 64, .tcp_data_offset = 6, .window = 4242}));
    const auto r = ingest_bytes(pcap);
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].tcp_window == 4242);
    CHECK(r.records[0].ip_total_length == 64);
}

TEST_CASE("damaged packets are counted malformed and reading continues") {
    PcapBuilder pcap;
    pcap.add(build_frame({.total_length = 60, .window = 1, .truncate_to = 40}));  // TCP header cut
    pcap.add(build_frame({.total_length = 60, .window = 2, .truncate_to = 10}));  // shorter than Ethernet
    pcap.add(build_frame({.total_length = 39, .window = 3}));                     // below TCP/IPv4 minimum
    pcap.add(build_frame({.ip_version = 6, .total_length = 60}));                 // version mismatch
    pcap.add(build_frame({.ihl = 4, .total_length = 60}));
    pcap.add(build_frame({.total_length = 60, .tcp_data_offset = 15, .window = 4}));  // claims 60-byte TCP header
    pcap.add(build_frame({.total_length = 60, .window = 777}));
    const auto r = ingest_bytes(pcap);
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].tcp_window == 777);
    CHECK(r.stats.packets_skipped_malformed == 6);
    CHECK(r.stats.balanced());
}

TEST_CASE("truncated record header or body at end of file") {
    auto pcap = three_frame_fixture();
    pcap.raw({0x01, 0x02, 0x03});
    auto r = ingest_bytes(pcap);
    CHECK(r.records.size() == 2);
    CHECK(r.stats.packets_seen == 4);
    CHECK(r.stats.packets_skipped_malformed == 1);

    auto cut = three_frame_fixture().bytes();
    cut.resize(cut.size() - 100);
    PcapBuilder header_only;
    std::string text = std::string(cut.begin(), cut.end());
    std::istringstream in(text);
    r = ingest_pcap(in);
    CHECK(r.records.size() == 1);
    CHECK(r.stats.packets_skipped_malformed == 1);
    CHECK(r.stats.balanced());
}

TEST_CASE("records come out in file order even when timestamps go backwards") {
    PcapBuilder pcap;
    pcap.add(build_frame({.total_length = 40, .window = 1}), 300);
    pcap.add(build_frame({.total_length = 40, .window = 2}), 100);
    pcap.add(build_frame({.total_length = 40, .window = 3}), 200);
    const auto r = ingest_bytes(pcap);
    REQUIRE(r.records.size() == 3);
    CHECK(r.records[0].tcp_window == 1);
    CHECK(r.records[1].tcp_window == 2);
    CHECK(r.records[2].tcp_window == 3);
    CHECK(r.records[1].timestamp == 100.0);
}

TEST_CASE("keep_macs filters sources and accounts for them") {
    PcapBuilder pcap;
    pcap.add(build_frame({.src = kMacA, .total_length = 40}));
    pcap.add(build_frame({.src = kMacB, .total_length = 40}));
    pcap.add(build_frame({.src = kMacA, .total_length = 44}));
    const MacSet keep{kA};
    const auto r = ingest_bytes(pcap, &keep);
    REQUIRE(r.records.size() == 2);
    CHECK(r.stats.packets_kept == 3);
    CHECK(r.stats.packets_filtered_mac == 1);
    CHECK(r.stats.packets_emitted() == 2);
    CHECK(r.stats.balanced());
}

TEST_CASE("fuzzed pcap bytes never crash or emit invalid records") {
    PcapBuilder base;
    for (int i = 0; i < 6; ++i) {
        base.add(build_frame({.vlan_tags = i % 2, .total_length = static_cast<std::uint16_t>(40 + 10 * i),
                              .window = static_cast<std::uint16_t>(1000 * i)}));
    }
    base.add(build_frame({.protocol = 17, .total_length = 60}));
    const auto original = base.bytes();

    Xoshiro256StarStar rng(2024);
    for (int round = 0; round < 3000; ++round) {
        auto bytes = original;
        const auto flips = 1 + rng.uniform_below(12);
        for (std::uint64_t f = 0; f < flips; ++f) {
            // mostly past the global header so the reader gets to the packets
            const auto at = 24 + rng.uniform_below(bytes.size() - 24);
            bytes[at] = static_cast<std::uint8_t>(rng.uniform_below(256));
        }
        if (rng.uniform_below(4) == 0) bytes.resize(24 + rng.uniform_below(bytes.size() - 24));
        std::istringstream in(std::string(bytes.begin(), bytes.end()));
        const auto r = ingest_pcap(in);
        REQUIRE(r.stats.balanced());
        REQUIRE(r.records.size() == r.stats.packets_emitted());
        for (const auto& rec : r.records) REQUIRE(is_valid(rec));
    }
}

TEST_CASE("trace CSV: header only, skip rule, field mapping") {
    const std::string header = "frame.time_epoch,eth.src,ip.len,tcp.window_size\n";
    auto r = ingest_csv_text(header);
    CHECK(r.records.empty());
    CHECK(r.stats.packets_seen == 0);

    r = ingest_csv_text(header +
                        "1.0,34:23:87:b7:56:17,60,64240\n"
                        "2.0,34:23:87:b7:56:17,60,\n"
                        "3.0,34:23:87:b7:56:17,52,100\n"
                        "4.0,34:23:87:b7:56:17,1500,512\n");
    CHECK(r.records.size() == 3);
    CHECK(r.stats.packets_skipped_malformed == 1);
    CHECK(r.stats.balanced());

    r = ingest_csv_text(header + "1632000000.25, 34:23:87:b7:56:17, 60, 64240\n");
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0] == PacketRecord{1632000000.25, kA, 60, 64240});
}

TEST_CASE("trace CSV: extra and reordered columns, quoting, junk rows") {
    const auto r = ingest_csv_text(
        "frame.number,tcp.window_size,\"eth.src\",ip.len,frame.time_epoch,ip.src\r\n"
        "1,512,34:23:87:B7:56:17,1500,10.5,192.168.0.2\r\n"
        "2,\"700\",00:25:b3:47:da:6f,\"44\",11,10.0.0.1\r\n"
        "\r\n"
        "3,70000,00:25:b3:47:da:6f,44,12,x\r\n"
        "4,1,00:25:b3:47:da:6f,20,13,x\r\n"
        "5,1,00:25:b3:47:da:6f,44,-1,x\r\n"
        "6,1,not-a-mac,44,1,x\r\n"
        "7,1,00:25:b3:47:da:6f,\"44,40\",1,x\r\n");
    REQUIRE(r.records.size() == 2);
    CHECK(r.records[0] == PacketRecord{10.5, kA, 1500, 512});
    CHECK(r.records[1] == PacketRecord{11.0, kB, 44, 700});
    CHECK(r.stats.packets_skipped_malformed == 6);
    CHECK(r.stats.balanced());
}

TEST_CASE("trace CSV: missing header or column is a format error") {
    CHECK_THROWS_AS(ingest_csv_text(""), FormatError);
    CHECK_THROWS_AS(ingest_csv_text("frame.time_epoch,eth.src,ip.len\n1,34:23:87:b7:56:17,60\n"), FormatError);
}

TEST_CASE("trace CSV write/read round trip") {
    Xoshiro256StarStar rng(11);
    std::vector<PacketRecord> records;
    std::ostringstream out;
    out << "frame.time_epoch,eth.src,ip.len,tcp.window_size\n";
    for (int i = 0; i < 200; ++i) {
        std::array<std::uint8_t, 6> o{};
        for (auto& b : o) b = static_cast<std::uint8_t>(rng.uniform_below(256));
        PacketRecord rec{1.6e9 + rng.uniform01() * 1e6, MacAddress(o),
                         static_cast<std::uint16_t>(40 + rng.uniform_below(65536 - 40)),
                         static_cast<std::uint16_t>(rng.uniform_below(65536))};
        records.push_back(rec);
        char ts[64];
        std::snprintf(ts, sizeof ts, "%.17g", rec.timestamp);
        out << ts << ',' << rec.src_mac.to_string() << ',' << rec.ip_total_length << ',' << rec.tcp_window << '\n';
    }
    const auto r = ingest_csv_text(out.str());
    CHECK(r.records == records);
}

TEST_CASE("ingest_file dispatches on content") {
    TempDir dir;
    const auto pcap = dir.write("capture.bin", three_frame_fixture().str());
    const auto trace = dir.write("trace.txt",
                                 "frame.time_epoch,eth.src,ip.len,tcp.window_size\n"
                                 "1,34:23:87:b7:56:17,60,1\n"
                                 "2,00:25:b3:47:da:6f,60,2\n");
    CHECK(ingest_file(pcap).records.size() == 2);
    const MacSet keep{kB};
    const auto r = ingest_file(trace, &keep);
    REQUIRE(r.records.size() == 1);
    CHECK(r.records[0].tcp_window == 2);
    CHECK(r.stats.packets_filtered_mac == 1);
    CHECK(r.stats.balanced());
}

TEST_CASE("filter_by_mac keeps matching records in order") {
    auto rec = [](const MacAddress& m, double ts) { return PacketRecord{ts, m, 40, 0}; };
    const std::vector<PacketRecord> none{rec(kB, 1), rec(kB, 2)};
    CHECK(filter_by_mac(none, kA).empty());

    // A,B,A,A,B -> A,A,A with timestamps intact; oracle is a plain loop
    const std::vector<PacketRecord> s{rec(kA, 1), rec(kB, 2), rec(kA, 3), rec(kA, 4), rec(kB, 5)};
    const auto got = filter_by_mac(s, kA);
    std::vector<PacketRecord> want;
    for (const auto& r : s)
        if (r.src_mac == kA) want.push_back(r);
    CHECK(got == want);
    REQUIRE(got.size() == 3);
    CHECK(got[1].timestamp == 3.0);
}

TEST_CASE("per-MAC filters re-merged by index reproduce the stream") {
    Xoshiro256StarStar rng(99);
    std::vector<MacAddress> macs;
    for (std::uint8_t i = 0; i < 5; ++i) macs.push_back(MacAddress({0, 0, 0, 0, 0, i}));
    for (int round = 0; round < 50; ++round) {
        std::vector<PacketRecord> stream;
        const auto n = rng.uniform_below(60);
        for (std::uint64_t i = 0; i < n; ++i)
            stream.push_back({double(i), macs[rng.uniform_below(macs.size())], 40, static_cast<std::uint16_t>(i)});
        std::map<double, PacketRecord> merged;  // timestamp doubles as original index
        for (const auto& m : macs)
            for (const auto& r : filter_by_mac(stream, m)) merged.emplace(r.timestamp, r);
        std::vector<PacketRecord> back;
        for (auto& [k, r] : merged) back.push_back(r);
        CHECK(back == stream);
    }
}
