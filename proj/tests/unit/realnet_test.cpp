#include "acme/realnet/node.hpp"
#include "acme/realnet/trigger_io.hpp"

#include <gtest/gtest.h>

#include <future>

using namespace acme;
using namespace acme::realnet;

TEST(ClusterConfig, RoundTripsAndValidates) {
    auto c = loopback_cluster(3, 10, 21000, 22000);
    ASSERT_EQ(c.nodes.size(), 3u);
    EXPECT_EQ(c.nodes[2].port(22000), 22020);
    auto d = parse_cluster_config(format_cluster_config(c));
    EXPECT_EQ(d.nodes.size(), 3u);
    EXPECT_EQ(d.roots, c.roots);
    EXPECT_EQ(d.find("n1")->port_offset, 10);
    EXPECT_THROW(parse_cluster_config("{\"nodes\": []}"), std::invalid_argument);
    EXPECT_THROW(parse_cluster_config("{\"nodes\": [{\"name\": \"a\"}], \"roots\": [\"b\"]}"), std::invalid_argument);
    EXPECT_THROW(parse_cluster_config("{\"nodes\": [{\"name\": \"a\"}], \"extra\": 1}"), std::invalid_argument);
    EXPECT_THROW(parse_cluster_config("not json"), std::invalid_argument);
}

TEST(HostPort, Splits) {
    EXPECT_EQ(split_host_port("127.0.0.1:8000"), (std::pair<std::string, int>{"127.0.0.1", 8000}));
    EXPECT_THROW(split_host_port("nohost"), std::invalid_argument);
    EXPECT_THROW(split_host_port("h:99999"), std::invalid_argument);
}

TEST(RealNode, LoopbackClusterAnswersAggregates) {
    auto c = loopback_cluster(4, 10, 23000, 24000);
    std::vector<std::unique_ptr<RealNode>> nodes;
    for (std::size_t i = 0; i < c.nodes.size(); ++i) {
        nodes.push_back(std::make_unique<RealNode>(c, c.nodes[i].name));
        const double v = static_cast<double>(i + 1);
        nodes.back()->server(25000).add("v", [v](const sensact::SensorRequest&) { return ising::format_number(v); });
    }
    for (auto& n : nodes) n->start();

    auto body = http_get("127.0.0.1", 24000, "/ising?port=25000&sensor=v&op=SUM", 5000);
    ASSERT_TRUE(body);
    auto tuples = parse_tuples(*body);
    ASSERT_EQ(tuples.size(), 1u);
    EXPECT_EQ(tuples[0].data, "10");

    body = http_get("127.0.0.1", 24000, "/ising?port=25000&sensor=v&op=VALUE", 5000);
    ASSERT_TRUE(body);
    EXPECT_EQ(parse_tuples(*body).size(), 4u);

    EXPECT_FALSE(http_get("127.0.0.1", 24010, "/ising?port=25000&sensor=v&op=SUM", 2000));
    auto bad = http_get("127.0.0.1", 24000, "/ising?sensor=v", 2000);
    EXPECT_FALSE(bad);

    AsioLoop loop;
    loop.start();
    {
        HttpTriggerIo io(loop, c, "", 2000);
        ising::SensorQuery q;
        q.port = 25000;
        q.sensor = "v";
        q.op = ising::AggregateOp::kMax;
        std::promise<std::optional<std::vector<ResultTuple>>> p;
        loop.run_in_loop([&] {
            io.query({"127.0.0.1:1", "n0:24000"}, q, [&](auto r) { p.set_value(std::move(r)); });
        });
        auto r = p.get_future().get();
        ASSERT_TRUE(r);
        EXPECT_EQ(r->at(0).data, "4");
        EXPECT_EQ(io.failovers(), 1u);

        q.host = "n2";
        q.op = ising::AggregateOp::kValue;
        std::promise<std::optional<std::vector<ResultTuple>>> direct;
        loop.run_in_loop([&] { io.query({}, q, [&](auto r) { direct.set_value(std::move(r)); }); });
        auto d = direct.get_future().get();
        ASSERT_TRUE(d);
        EXPECT_EQ(d->at(0).source, "n2:25000");
        EXPECT_EQ(d->at(0).data, "3");
    }
    loop.stop();
    for (auto& n : nodes) n->stop();
}
