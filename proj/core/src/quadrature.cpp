#include "psmrwm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "psmrwm/errors.hpp"

namespace psmrwm {

const double GaussKronrod15::kAbscissae[kNodes] = {
    -0.991455371120812639206854697526329, -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926, -0.741531185599394439863864773280788,
    -0.586087235467691130294144845693013, -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245, 0.0,
    0.207784955007898467600689403773245,  0.405845151377397166906606412076961,
    0.586087235467691130294144845693013,  0.741531185599394439863864773280788,
    0.864864423359769072789712788640926,  0.949107912342758524526189684047851,
    0.991455371120812639206854697526329};

const double GaussKronrod15::kKronrodWeights[kNodes] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
    0.204432940075298892414161999234649, 0.190350578064785409913256402421014,
    0.169004726639267902826583426598550, 0.140653259715525918745189590510238,
    0.104790010322250183839876322541518, 0.063092092629978553290700663189204,
    0.022935322010529224963732008058970};

const double GaussKronrod15::kGaussWeights[kNodes] = {
    0.0, 0.129484966168869693270611432679082, 0.0, 0.279705391489276667901467771423780,
    0.0, 0.381830050505118944950369775488975, 0.0, 0.417959183673469387755102040816327,
    0.0, 0.381830050505118944950369775488975, 0.0, 0.279705391489276667901467771423780,
    0.0, 0.129484966168869693270611432679082, 0.0};

namespace {

struct SimpsonState {
  const std::function<double(double)>& fn;
  int max_depth;
  bool exhausted = false;
  double worst_residual = 0.0;
};

double simpson_recurse(SimpsonState& st, double a, double b, double fa, double fm, double fb,
                       double whole, double tol, int depth, double& err) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = st.fn(lm);
  const double frm = st.fn(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol) {
    err += std::abs(delta) / 15.0;
    return left + right + delta / 15.0;
  }
  if (depth >= st.max_depth) {
    st.exhausted = true;
    st.worst_residual = std::max(st.worst_residual, std::abs(delta) / 15.0);
    err += std::abs(delta) / 15.0;
    return left + right + delta / 15.0;
  }
  return simpson_recurse(st, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, err) +
         simpson_recurse(st, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, err);
}

}  // namespace

QuadResult adaptive_simpson(const std::function<double(double)>& fn, double lo, double hi,
                            std::span<const double> breakpoints, const SimpsonOptions& opts) {
  QuadResult out;
  if (!(hi > lo)) return out;

  std::vector<double> cuts{lo};
  for (double bp : breakpoints)
    if (bp > lo && bp < hi) cuts.push_back(bp);
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<double> edges;
  const int pieces = std::max(1, opts.initial_segments);
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double a = cuts[c];
    const double b = cuts[c + 1];
    for (int k = 0; k < pieces; ++k) edges.push_back(a + (b - a) * k / pieces);
  }
  edges.push_back(hi);

  const double total_len = hi - lo;
  SimpsonState st{fn, opts.max_depth};
  for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
    const double a = edges[k];
    const double b = edges[k + 1];
    if (!(b > a)) continue;
    const double fa = fn(a);
    const double fb = fn(b);
    const double fm = fn(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double tol = opts.abs_tol * (b - a) / total_len;
    out.value += simpson_recurse(st, a, b, fa, fm, fb, whole, tol, 0, out.error);
  }
  if (st.exhausted && out.error > opts.abs_tol) {
    throw QuadratureError("adaptive Simpson hit maximum depth", out.error);
  }
  return out;
}

}  // namespace psmrwm
