#include <doctest.h>

#include <cstring>
#include <sstream>

#include "opcnn/metrics.hpp"
#include "opcnn/rng.hpp"

using namespace opcnn;

TEST_CASE("confusion counts") {
  const std::vector<int> pred{1, 1, 0, 0, 1};
  const std::vector<int> gold{1, 0, 1, 0, 1};
  const auto c = confusion(pred, gold);
  CHECK(c == ConfusionCounts{2, 1, 1, 1});
  CHECK(c.total() == 5);
  CHECK(c.swapped() == ConfusionCounts{1, 1, 1, 2});
  CHECK_THROWS(confusion(std::vector<int>{1}, std::vector<int>{1, 0}));
  CHECK_THROWS(confusion(std::vector<int>{2}, std::vector<int>{1}));
}

TEST_CASE("scores") {
  const ConfusionCounts c{2, 1, 1, 1};
  CHECK(precision(c).value == doctest::Approx(2.0 / 3.0));
  CHECK(recall(c).value == doctest::Approx(2.0 / 3.0));
  CHECK(f1(c).value == doctest::Approx(2.0 / 3.0));
  CHECK(accuracy(c).value == doctest::Approx(0.6));
  CHECK_FALSE(f1(c).degenerate);
}

TEST_CASE("degenerate denominators") {
  const ConfusionCounts none_predicted{0, 0, 3, 5};
  CHECK(precision(none_predicted).degenerate);
  CHECK(precision(none_predicted).value == 0.0);
  CHECK_FALSE(recall(none_predicted).degenerate);
  const ConfusionCounts all_negative{0, 0, 0, 4};
  CHECK(f1(all_negative).degenerate);
  CHECK(f1_counts(all_negative).degenerate);
  CHECK(f1(all_negative).value == 0.0);
  CHECK(accuracy(ConfusionCounts{}).degenerate);
}

TEST_CASE("f1 forms are bitwise identical") {
  Rng rng(8);
  for (int t = 0; t < 1000; ++t) {
    ConfusionCounts c{rng.below(500), rng.below(500), rng.below(500), rng.below(500)};
    if (t % 10 == 0) c.tp = 0;
    const auto a = f1(c), b = f1_counts(c);
    CHECK(std::memcmp(&a.value, &b.value, sizeof(double)) == 0);
    CHECK(a.degenerate == b.degenerate);
  }
}

TEST_CASE("accuracy gain") {
  CHECK(accuracy_gain(70.02, 67.33) == doctest::Approx(1.0400).epsilon(5e-4));
  CHECK(accuracy_gain(84.50, 82.04) == doctest::Approx(1.0300).epsilon(5e-4));
  CHECK(accuracy_gain(0.5, 0.5) == 1.0);
  CHECK_THROWS_AS(accuracy_gain(0.5, 0.0), std::domain_error);
  CHECK_THROWS_AS(accuracy_gain(0.5, -1.0), std::domain_error);
}

TEST_CASE("metrics csv") {
  std::ostringstream out;
  write_metrics_header(out);
  write_metrics_row(out, {"opcnn", ConfusionCounts{2, 1, 1, 1}});
  write_metrics_row(out, {"empty", ConfusionCounts{0, 0, 0, 4}});
  CHECK(out.str() ==
        "method,accuracy,precision,recall,f1,accuracy_degenerate,precision_degenerate,recall_degenerate,f1_degenerate\n"
        "opcnn,0.600000,0.666667,0.666667,0.666667,0,0,0,0\n"
        "empty,1.000000,0.000000,0.000000,0.000000,0,1,1,1\n");
}
