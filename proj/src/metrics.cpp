#include "opcnn/metrics.hpp"

#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace opcnn {

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("confusion: " + std::to_string(predictions.size()) + " predictions vs " +
                                std::to_string(labels.size()) + " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = predictions[i], y = labels[i];
    if ((p != 0 && p != 1) || (y != 0 && y != 1)) throw std::invalid_argument("confusion: values must be 0 or 1");
    if (p == 1 && y == 1) ++c.tp;
    else if (p == 1) ++c.fp;
    else if (y == 1) ++c.fn;
    else ++c.tn;
  }
  return c;
}

namespace {

// Non-negative fraction kept in lowest terms.
struct Fraction {
  unsigned __int128 num = 0;
  unsigned __int128 den = 1;

  static Fraction make(unsigned __int128 n, unsigned __int128 d) {
    unsigned __int128 a = n, b = d;
    while (b != 0) {
      auto t = a % b;
      a = b;
      b = t;
    }
    if (a > 1) {
      n /= a;
      d /= a;
    }
    return {n, d};
  }
  double to_double() const { return static_cast<double>(num) / static_cast<double>(den); }
};

Fraction operator*(Fraction a, Fraction b) {
  auto l = Fraction::make(a.num, b.den), r = Fraction::make(b.num, a.den);
  return Fraction::make(l.num * r.num, l.den * r.den);
}
Fraction operator+(Fraction a, Fraction b) { return Fraction::make(a.num * b.den + b.num * a.den, a.den * b.den); }
Fraction operator/(Fraction a, Fraction b) { return a * Fraction::make(b.den, b.num); }

Score ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return {0.0, true};
  return {static_cast<double>(num) / static_cast<double>(den), false};
}

}  // namespace

Score precision(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fp); }
Score recall(const ConfusionCounts& c) { return ratio(c.tp, c.tp + c.fn); }
Score accuracy(const ConfusionCounts& c) { return ratio(c.tp + c.tn, c.total()); }
Score f1_counts(const ConfusionCounts& c) { return ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn); }

Score f1(const ConfusionCounts& c) {
  if (2 * c.tp + c.fp + c.fn == 0) return {0.0, true};
  if (c.tp == 0) return {0.0, false};
  const Fraction p = Fraction::make(c.tp, c.tp + c.fp);
  const Fraction r = Fraction::make(c.tp, c.tp + c.fn);
  const Fraction sum = p + r;
  if (sum.num == 0) return {0.0, true};
  const Fraction f = Fraction{2, 1} * p * r / sum;
  return {f.to_double(), false};
}

double accuracy_gain(double experimental, double control) {
  if (!(control > 0.0)) throw std::domain_error("accuracy_gain: control accuracy must be positive");
  return experimental / control;
}

void write_metrics_header(std::ostream& out) {
  out << "method,accuracy,precision,recall,f1,accuracy_degenerate,precision_degenerate,recall_degenerate,"
         "f1_degenerate\n";
}

void write_metrics_row(std::ostream& out, const MethodReport& report) {
  const Score a = accuracy(report.counts), p = precision(report.counts), r = recall(report.counts),
              f = f1(report.counts);
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f,%.6f,%d,%d,%d,%d", a.value, p.value, r.value, f.value,
                a.degenerate, p.degenerate, r.degenerate, f.degenerate);
  out << report.method << ',' << buf << '\n';
}

}  // namespace opcnn
