#include "doctest.h"

#include "tracelens/error.hpp"
#include "tracelens/static_features.hpp"

#include <sstream>

using namespace tracelens;
using namespace tracelens::pruning;

namespace {

StaticFeatures only(std::string_view src) {
    const auto all = extract_static_features(src);
    REQUIRE(all.size() == 1);
    return all[0];
}

const StaticFeatures& named(const std::vector<StaticFeatures>& all, const std::string& name) {
    for (const auto& f : all) {
        if (f.function.name == name) return f;
    }
    FAIL("no function " << name);
    return all.front();
}

} // namespace

TEST_CASE("trivial function") {
    const auto f = only("int f(void){return 0;}");
    CHECK(f.function == FunctionId("f"));
    CHECK(f.loc == 1);
    CHECK(f.loops == 0);
    CHECK(f.nested_loops == 0);
    CHECK(f.branches == 0);
    CHECK(f.params == 0);
    CHECK(f.calls == 0);
    CHECK_FALSE(f.is_recursive);
}

TEST_CASE("nested loops") {
    const auto f = only("void g(int n, int m) {\n  for (int i = 0; i < n; ++i) {\n    for (int j = 0; j < m; ++j) {}\n  }\n}\n");
    CHECK(f.loops == 2);
    CHECK(f.nested_loops == 1);
    CHECK(f.params == 2);
}

TEST_CASE("recursion, branches and calls") {
    const auto f = only(
        "int f(int x) {\n"
        "  // f(0) in a comment does not count\n"
        "  if (x <= 0) return 0;\n"
        "  else if (x == 1) return helper(\"f(\");\n"
        "  switch (x) { case 2: return 2; case 3: return 3; }\n"
        "  return f(x-1);\n"
        "}\n");
    CHECK(f.is_recursive);
    CHECK(f.branches == 4);
    CHECK(f.calls == 2);
    CHECK(f.params == 1);
}

TEST_CASE("qualified names and several definitions") {
    const auto all = extract_static_features(
        "namespace solver {\n"
        "struct Grid {\n"
        "  int size() const { return n; }\n"
        "  int n;\n"
        "};\n"
        "void step(Grid& g) {\n"
        "  while (g.size() > 0) { do { g.n--; } while (g.n % 2); }\n"
        "}\n"
        "}\n"
        "int main() { solver::Grid g{3}; solver::step(g); return 0; }\n");
    CHECK(all.size() == 3);
    const auto& step = named(all, "solver::step");
    CHECK(step.loops == 2);
    CHECK(step.nested_loops == 1);
    CHECK(step.params == 1);
    CHECK(named(all, "solver::Grid::size").loc == 1);
    CHECK_FALSE(named(all, "main").is_recursive);
}

TEST_CASE("unbalanced braces report a location") {
    CHECK_THROWS_AS(extract_static_features("int f() {\n  if (x) {\n"), ParseError);
    CHECK_THROWS_AS(extract_static_features("int f() { }\n}\n"), ParseError);
}

TEST_CASE("feature validation") {
    StaticFeatures f{FunctionId("f"), 3, 1, 2, 0, false, 0, 0};
    CHECK_THROWS_AS(f.validate(), ValidationError);
    f.nested_loops = 0;
    f.loc = -1;
    CHECK_THROWS_AS(f.validate(), ValidationError);
}

TEST_CASE("csv round-trip") {
    const std::vector<StaticFeatures> in{{FunctionId("a::b"), 10, 2, 1, 4, true, 3, 2},
                                         {FunctionId("c"), 1, 0, 0, 0, false, 0, 0}};
    std::ostringstream out;
    write_static_features_csv(out, in);
    CHECK(out.str().rfind("function,loc,loops,nested_loops,calls,recursive,branches,params\n", 0) == 0);
    std::istringstream back(out.str());
    const auto parsed = parse_static_features_csv(back);
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0].function == FunctionId("a::b"));
    CHECK(parsed[0].is_recursive);
    CHECK(parsed[0].branches == 3);
    CHECK(parsed[1].loc == 1);

    std::istringstream bad("function,loc,loops,nested_loops,calls,recursive,branches,params\nf,1,2\n");
    CHECK_THROWS_AS(parse_static_features_csv(bad), ParseError);
}
