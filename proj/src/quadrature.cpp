#include "qmem/quadrature.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <queue>

#include "qmem/types.hpp"

namespace qmem {

namespace {

constexpr std::array<double, 8> kronrod_nodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

constexpr std::array<double, 8> kronrod_weights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

// Gauss weights for the odd Kronrod nodes (1, 3, 5, 7).
constexpr std::array<double, 4> gauss_weights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

Segment gk15(const std::function<double(double)>& f, double a, double b, int& evals) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  if (!std::isfinite(fc)) throw NumericalError("non-finite integrand");
  double kronrod = kronrod_weights[7] * fc;
  double gauss = gauss_weights[3] * fc;
  for (int i = 0; i < 7; ++i) {
    const double x = h * kronrod_nodes[i];
    const double f1 = f(c - x);
    const double f2 = f(c + x);
    if (!std::isfinite(f1) || !std::isfinite(f2)) throw NumericalError("non-finite integrand");
    kronrod += kronrod_weights[i] * (f1 + f2);
    if (i % 2 == 1) gauss += gauss_weights[i / 2] * (f1 + f2);
  }
  evals += 15;
  return {a, b, kronrod * h, std::abs((kronrod - gauss) * h)};
}

} // namespace

QuadratureResult integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                    double rel_tol, double abs_tol, int max_intervals) {
  QuadratureResult out;
  if (a == b) return out;
  std::priority_queue<Segment> heap;
  Segment first = gk15(f, a, b, out.evaluations);
  double total = first.value;
  double error = first.error;
  heap.push(first);
  while (error > std::max(abs_tol, rel_tol * std::abs(total))) {
    if (static_cast<int>(heap.size()) >= max_intervals) throw NumericalError("quadrature did not converge");
    const Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const Segment left = gk15(f, worst.a, mid, out.evaluations);
    const Segment right = gk15(f, mid, worst.b, out.evaluations);
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    if (error < std::numeric_limits<double>::epsilon() * std::abs(total)) break;
  }
  // re-sum to drop accumulated update roundoff
  total = 0.0;
  error = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    error += heap.top().error;
    heap.pop();
  }
  out.value = total;
  out.error = error;
  return out;
}

} // namespace qmem
