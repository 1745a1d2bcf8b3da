#include <doctest.h>

#include "sparsesdf/error.hpp"
#include "sparsesdf/verify.hpp"

using namespace sparsesdf;

namespace {

VerifyConfig quick() {
  VerifyConfig c;
  c.seed = 5;
  c.support_instances = 24;
  c.support_T = {5, 12};
  c.limit_instances = 10;
  c.gap_instances = 20;
  c.monotone_seeds = 4;
  c.scale_instances = 10;
  c.feasible_instances = 2;
  c.table_T = 8;
  return c;
}

const PropertyResult& find(const TheoryReport& r, const std::string& name) {
  for (const auto& p : r.properties) {
    if (p.name == name) return p;
  }
  throw std::runtime_error("no property " + name);
}

}  // namespace

TEST_CASE("theory suite passes on default settings") {
  const auto rep = run_theory_suite(quick());
  for (const auto& p : rep.properties) {
    INFO(p.name << ": " << p.note);
    CHECK(p.passed);
    CHECK(p.instances > 0);
  }
  CHECK(rep.all_passed);
  CHECK(rep.gap_table.levels.size() == 4);
  CHECK(rep.gap_table.mean_oracle == "planted");
}

TEST_CASE("zeroing the kernel move breaks the mean-gap identity and names the seed") {
  VerifyConfig c = quick();
  c.fault = "zero_kernel_move";
  const auto rep = run_theory_suite(c);
  CHECK_FALSE(rep.all_passed);
  const auto& gap = find(rep, "mean_gap_identity");
  CHECK_FALSE(gap.passed);
  REQUIRE(gap.failing_seed.has_value());
  // the reported seed is the first failing instance's seed
  bool matched = false;
  for (int i = 0; i < c.gap_instances && !matched; ++i) matched = instance_seed(c.seed, 3, i) == *gap.failing_seed;
  CHECK(matched);
  CHECK(find(rep, "support_bound").passed);
}

TEST_CASE("theory report does not depend on the thread count") {
  VerifyConfig c = quick();
  auto a = to_json(run_theory_suite(c));
  c.threads = 3;
  auto b = to_json(run_theory_suite(c));
  a.erase("seconds");
  b.erase("seconds");
  CHECK(a == b);
}

TEST_CASE("suite instances alternate between Gaussian and RFF factors") {
  const Matrix g = suite_instance(2, 4, 9);
  const Matrix r = suite_instance(3, 4, 9);
  CHECK(g.rows() == 4);
  CHECK(r.cols() == 9);
  CHECK(suite_instance(2, 4, 9) == g);
  CHECK(suite_instance(3, 4, 9) == r);
}

TEST_CASE("verify config validation") {
  VerifyConfig c = quick();
  c.fault = "flip_signs";
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = quick();
  c.support_T = {};
  CHECK_THROWS_AS(c.validate(), ValidationError);
}
