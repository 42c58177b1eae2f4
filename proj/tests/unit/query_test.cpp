#include "acme/common/csv.hpp"
#include "acme/ising/query.hpp"

#include <gtest/gtest.h>

using namespace acme::ising;

TEST(Query, ParsesFullUrl) {
    auto q = parse_query("/ising?port=9100&sensor=load&host=ALL&op=avg&epoch=5000");
    EXPECT_EQ(q.port, 9100);
    EXPECT_EQ(q.sensor, "load");
    EXPECT_TRUE(q.all_hosts());
    EXPECT_EQ(q.op, AggregateOp::kAvg);
    EXPECT_EQ(q.epoch_ms, 5000);
    EXPECT_FALSE(q.is_snapshot());
}

TEST(Query, DefaultsToSnapshot) {
    auto q = parse_query("/ising?port=1&sensor=s&host=n3&op=VALUE");
    EXPECT_EQ(q.op, AggregateOp::kValue);
    EXPECT_TRUE(q.is_snapshot());
    EXPECT_EQ(*q.host, "n3");
}

TEST(Query, FormatRoundTrips) {
    for (const char* url : {"/ising?port=9100&sensor=load&op=MAX",
                            "/ising?port=1&sensor=procs&host=h1&op=COUNT&rowcol=2&rowregex=%5Ehttpd&valcol=3",
                            "/ising?port=1&sensor=s&op=SUM&epoch=1000&pred=1%3Aload%20%3E%203%3BAND%3B1%3Amem%20%3C%202"}) {
        auto q = parse_query(url);
        EXPECT_EQ(parse_query(format_query(q)), q) << url;
    }
}

TEST(Query, ErrorsNameTheField) {
    auto field_of = [](const char* url) {
        try {
            parse_query(url);
        } catch (const QueryParseError& e) {
            return e.field();
        }
        return std::string("none");
    };
    EXPECT_EQ(field_of("/ising?sensor=s"), "port");
    EXPECT_EQ(field_of("/ising?port=70000&sensor=s"), "port");
    EXPECT_EQ(field_of("/ising?port=1"), "sensor");
    EXPECT_EQ(field_of("/ising?port=1&sensor=s&op=MODE"), "op");
    EXPECT_EQ(field_of("/ising?port=1&sensor=s"), "op");
    EXPECT_EQ(field_of("/ising?port=1&sensor=s&op=MIN&epoch=-5"), "epoch");
    EXPECT_EQ(field_of("/ising?port=1&sensor=s&op=MIN&rowcol=1"), "rowregex");
    EXPECT_EQ(field_of("/ising?port=1&sensor=s&op=MIN&rowcol=1&rowregex=("), "rowregex");
    EXPECT_EQ(field_of("/ising?port=1&sensor=s&op=MIN&bogus=1"), "bogus");
}

TEST(Selection, FiltersAndProjects) {
    const std::string csv = "httpd,12,0.5\nsshd,3,0.1\nhttpd,40,2.5\nshort\n";
    Selection sel{1, "^httpd$", 3};
    EXPECT_EQ(apply_selection(csv, sel), (std::vector<std::string>{"0.5", "2.5"}));
    Selection col_only{std::nullopt, "", 2};
    EXPECT_EQ(apply_selection(csv, col_only), (std::vector<std::string>{"12", "3", "40"}));
    EXPECT_EQ(apply_selection("a,b\n", std::nullopt), (std::vector<std::string>{"a,b"}));
}

TEST(Predicate, ParsesAndEvaluates) {
    auto p = parse_predicate("1:load > 3;AND;1:mem <= 1:limit");
    ASSERT_EQ(p.clauses.size(), 2u);
    EXPECT_EQ(p.joins[0], Connective::kAnd);
    EXPECT_EQ(p.clauses[0].cmp, Comparator::kGt);
    EXPECT_TRUE(std::holds_alternative<SensorRef>(p.clauses[1].rhs));
    EXPECT_EQ(parse_predicate(format_predicate(p)), p);

    std::map<std::string, std::string> data{{"load", "4\n"}, {"mem", "10\n"}, {"limit", "12\n"}};
    LocalFetch fetch = [&](const SensorRef& r) -> std::optional<std::string> {
        auto it = data.find(r.sensor);
        if (it == data.end()) return std::nullopt;
        return it->second;
    };
    EXPECT_TRUE(eval_predicate(fetch, p));
    data["load"] = "2\n";
    EXPECT_FALSE(eval_predicate(fetch, p));
    EXPECT_TRUE(eval_predicate(fetch, parse_predicate("1:load > 3;OR;1:mem = 10")));
    EXPECT_FALSE(eval_predicate(fetch, parse_predicate("1:missing = 1")));
    EXPECT_EQ(referenced_sensors(p).size(), 3u);
}

TEST(Predicate, RejectsMalformed) {
    EXPECT_THROW(parse_predicate("1:load >"), QueryParseError);
    EXPECT_THROW(parse_predicate("1:load > 3;XOR;1:a = 1"), QueryParseError);
    EXPECT_THROW(parse_predicate("1:load > 3;AND"), QueryParseError);
    EXPECT_THROW(parse_predicate("load > 3"), QueryParseError);
}

TEST(Compare, NumericThenLexical) {
    EXPECT_TRUE(compare_values("10", Comparator::kGt, "9"));
    EXPECT_FALSE(compare_values("10", Comparator::kGt, "9x"));
    EXPECT_TRUE(compare_values("abc", Comparator::kLt, "abd"));
    EXPECT_TRUE(compare_values("1.0", Comparator::kEq, "1"));
}

TEST(Url, EncodeDecode) {
    EXPECT_EQ(url_decode("a%20b+c"), "a b c");
    EXPECT_EQ(url_decode(url_encode("x=1&y=^z$")), "x=1&y=^z$");
    auto m = parse_query_string("a=1&b=%3D&a=2");
    EXPECT_EQ(m["a"], "2");
    EXPECT_EQ(m["b"], "=");
}

TEST(Tuples, CsvRoundTrip) {
    acme::ResultTuple t{"h1:9000", 123, "x,y"};
    EXPECT_EQ(acme::parse_tuple(acme::format_tuple(t)), t);
    auto many = acme::parse_tuples("a:1,1,5\nb:2,2,6\n");
    ASSERT_EQ(many.size(), 2u);
    EXPECT_EQ(many[1].data, "6");
    EXPECT_THROW(acme::parse_tuple("nonsense"), std::invalid_argument);
    EXPECT_EQ(acme::split_csv_row("a,\"b,c\",d"), (std::vector<std::string>{"a", "b,c", "d"}));
}
