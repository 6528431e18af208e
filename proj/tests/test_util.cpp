#include <doctest.h>

#include <map>

#include "ideabench/util.hpp"

using namespace ideabench;

TEST_CASE("first_number finds the leading numeric token") {
    CHECK(*util::first_number("85") == doctest::Approx(85.0));
    CHECK(*util::first_number("Score: 0.5 because ...") == doctest::Approx(0.5));
    CHECK(*util::first_number("the answer is -3") == doctest::Approx(-3.0));
    CHECK(*util::first_number(".25") == doctest::Approx(0.25));
    CHECK(*util::first_number("I pick candidate 2.") == doctest::Approx(2.0));
    CHECK_FALSE(util::first_number("the second one").has_value());
    CHECK_FALSE(util::first_number("").has_value());
    CHECK_FALSE(util::first_number("very similar").has_value());
}

TEST_CASE("normalize_text trims, lowercases and collapses whitespace") {
    CHECK(util::normalize_text("  Hello   World \n") == "hello world");
    CHECK(util::normalize_text("same") == util::normalize_text("  SAME  "));
    CHECK(util::normalize_text(" \t\n ").empty());
}

TEST_CASE("derive_seed separates parts") {
    CHECK(util::derive_seed(1, {"ab", "c"}) != util::derive_seed(1, {"a", "bc"}));
    CHECK(util::derive_seed(1, {"x"}) != util::derive_seed(2, {"x"}));
    CHECK(util::derive_seed(7, {"x", "y"}) == util::derive_seed(7, {"x", "y"}));
}

TEST_CASE("sample_categorical respects degenerate weights") {
    auto rng = util::make_rng(3);
    for (int i = 0; i < 100; ++i) CHECK(util::sample_categorical({1.0, 0.0, 0.0}, rng) == 0);
    for (int i = 0; i < 100; ++i) CHECK(util::sample_categorical({0.0, 0.0, 2.5}, rng) == 2);
    CHECK_THROWS_AS(util::sample_categorical({}, rng), ValidationError);
    CHECK_THROWS_AS(util::sample_categorical({0.0, 0.0}, rng), ValidationError);
    CHECK_THROWS_AS(util::sample_categorical({1.0, -0.1}, rng), ValidationError);
}

TEST_CASE("shuffle is a seed-determined permutation") {
    std::vector<int> a{1, 2, 3, 4, 5, 6, 7};
    std::vector<int> b = a;
    auto r1 = util::make_rng(11, {"shuffle"});
    auto r2 = util::make_rng(11, {"shuffle"});
    util::shuffle(a, r1);
    util::shuffle(b, r2);
    CHECK(a == b);
    std::vector<int> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("csv escaping round-trips") {
    std::string line = util::csv_field("plain") + "," + util::csv_field("has,comma") + "," +
                       util::csv_field("has \"quote\"");
    auto fields = util::parse_csv_line(line);
    REQUIRE(fields.size() == 3);
    CHECK(fields[0] == "plain");
    CHECK(fields[1] == "has,comma");
    CHECK(fields[2] == "has \"quote\"");
}

TEST_CASE("parallel_map keeps order and captures errors per item") {
    std::vector<int> in{1, 2, 3, 4, 5};
    auto out = util::parallel_map(in, 3, [](const int& x, std::size_t) {
        if (x == 4) throw std::runtime_error("boom");
        return x * x;
    });
    REQUIRE(out.size() == 5);
    CHECK(*out[0].value == 1);
    CHECK(*out[2].value == 9);
    CHECK_FALSE(out[3].ok());
    CHECK(out[3].error_message() == "boom");
    CHECK(*out[4].value == 25);
}
