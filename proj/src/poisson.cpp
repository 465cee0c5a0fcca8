#include "mvr/poisson.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <stdexcept>

namespace mvr {

namespace {

struct TrilinearStencil {
  int i0[3], i1[3];
  double f[3];  // fractional coordinate per axis
};

// Periodic trilinear footprint of a world point; clamps to the lattice range
// when the point has drifted outside the bounds cube.
TrilinearStencil stencil_for(const Eigen::Vector3d& p, const GridLayout& layout,
                             bool* clamped = nullptr) {
  TrilinearStencil s;
  const Eigen::Vector3d g = layout.to_grid(p);
  for (int d = 0; d < 3; ++d) {
    double gd = g[d];
    if (gd < 0.0 || gd >= layout.res) {
      if (clamped) *clamped = true;
      gd = std::min(std::max(gd, 0.0), static_cast<double>(layout.res) - 1e-9);
    }
    const int i = static_cast<int>(std::floor(gd));
    s.i0[d] = i;
    s.i1[d] = (i + 1) % layout.res;
    s.f[d] = gd - i;
  }
  return s;
}

inline double weight(const TrilinearStencil& s, int cx, int cy, int cz) {
  return (cx ? s.f[0] : 1.0 - s.f[0]) * (cy ? s.f[1] : 1.0 - s.f[1]) *
         (cz ? s.f[2] : 1.0 - s.f[2]);
}

// d(weight)/d(grid coordinate along axis d)
inline double weight_deriv(const TrilinearStencil& s, int cx, int cy, int cz, int d) {
  const int c[3] = {cx, cy, cz};
  double out = 1.0;
  for (int a = 0; a < 3; ++a) {
    if (a == d)
      out *= c[a] ? 1.0 : -1.0;
    else
      out *= c[a] ? s.f[a] : 1.0 - s.f[a];
  }
  return out;
}

inline std::size_t corner_index(const TrilinearStencil& s, const GridLayout& layout,
                                int cx, int cy, int cz) {
  return layout.index(cx ? s.i1[0] : s.i0[0], cy ? s.i1[1] : s.i0[1],
                      cz ? s.i1[2] : s.i0[2]);
}

// Applies the spectral map chi_hat = sign * i * (k . v_hat) g(k) / |k|^2 to
// three real fields, returning one real field. `conjugate` flips the sign of
// the imaginary multiplier, which is exactly the adjoint map per component.
// Sign convention: FFTW's forward transform uses e^{-i...}; the +i multiplier
// makes outward-oriented normals produce a positive interior.
void spectral_solve(const GridLayout& layout, const std::vector<double>* in3,
                    std::vector<double>* out, double sig, bool adjoint,
                    const std::vector<double>* in1) {
  const int res = layout.res;
  const std::size_t n_real = layout.cell_count();
  const int half = res / 2 + 1;
  const std::size_t n_cplx = static_cast<std::size_t>(res) * res * half;

  fftw_complex* spec = fftw_alloc_complex(n_cplx);
  fftw_complex* accum = fftw_alloc_complex(n_cplx);
  double* work = fftw_alloc_real(n_real);

  auto freq_of = [res](int idx) { return idx <= res / 2 ? idx : idx - res; };
  const double sig_scale = -2.0 * sig * sig / (static_cast<double>(res) * res);

  const int n_fields = adjoint ? 1 : 3;
  const int n_outputs = adjoint ? 3 : 1;

  // Forward: accumulate sum_c M_c(k) v_hat_c(k). Adjoint: transform the one
  // input field and emit conj(M_c) * g_hat per component.
  for (int field = 0; field < (adjoint ? 1 : n_fields); ++field) {
    const std::vector<double>& src = adjoint ? *in1 : in3[field];
    std::copy(src.begin(), src.end(), work);
    fftw_plan plan = fftw_plan_dft_r2c_3d(res, res, res, work, spec, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);

    if (adjoint) {
      std::copy(&spec[0][0], &spec[0][0] + 2 * n_cplx, &accum[0][0]);
    } else {
      std::size_t idx = 0;
      for (int z = 0; z < res; ++z) {
        const int fz = freq_of(z);
        for (int y = 0; y < res; ++y) {
          const int fy = freq_of(y);
          for (int x = 0; x < half; ++x, ++idx) {
            const int fx = x;
            const double k2 = static_cast<double>(fx) * fx + static_cast<double>(fy) * fy +
                              static_cast<double>(fz) * fz;
            double mult = 0.0;
            const bool nyquist = fx == res / 2 || std::abs(fy) == res / 2 ||
                                 std::abs(fz) == res / 2;
            if (k2 > 0.0 && !nyquist) {
              const int fc = field == 0 ? fx : (field == 1 ? fy : fz);
              mult = fc * std::exp(sig_scale * k2) / k2;
            }
            // chi_hat += i * mult * v_hat  (i * (a+bi) = -b + ai)
            const double re = spec[idx][0], im = spec[idx][1];
            if (field == 0) {
              accum[idx][0] = -mult * im;
              accum[idx][1] = mult * re;
            } else {
              accum[idx][0] += -mult * im;
              accum[idx][1] += mult * re;
            }
          }
        }
      }
    }
  }

  const double norm = 1.0 / static_cast<double>(n_real);
  for (int out_field = 0; out_field < n_outputs; ++out_field) {
    if (adjoint) {
      std::size_t idx = 0;
      for (int z = 0; z < res; ++z) {
        const int fz = freq_of(z);
        for (int y = 0; y < res; ++y) {
          const int fy = freq_of(y);
          for (int x = 0; x < half; ++x, ++idx) {
            const int fx = x;
            const double k2 = static_cast<double>(fx) * fx + static_cast<double>(fy) * fy +
                              static_cast<double>(fz) * fz;
            double mult = 0.0;
            const bool nyquist = fx == res / 2 || std::abs(fy) == res / 2 ||
                                 std::abs(fz) == res / 2;
            if (k2 > 0.0 && !nyquist) {
              const int fc = out_field == 0 ? fx : (out_field == 1 ? fy : fz);
              mult = fc * std::exp(sig_scale * k2) / k2;
            }
            // conj(i * mult) = -i * mult
            const double re = accum[idx][0], im = accum[idx][1];
            spec[idx][0] = mult * im;
            spec[idx][1] = -mult * re;
          }
        }
      }
    } else {
      std::copy(&accum[0][0], &accum[0][0] + 2 * n_cplx, &spec[0][0]);
    }

    fftw_plan plan = fftw_plan_dft_c2r_3d(res, res, res, spec, work, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    out[out_field].resize(n_real);
    for (std::size_t i = 0; i < n_real; ++i) out[out_field][i] = work[i] * norm;
  }

  fftw_free(spec);
  fftw_free(accum);
  fftw_free(work);
}

GridLayout layout_for(int res, const Aabb& bounds) {
  const Aabb cube = bounds.cubified();
  GridLayout layout;
  layout.res = res;
  layout.origin = cube.min;
  layout.spacing = cube.extent().x() / res;
  return layout;
}

}  // namespace

SplatResult splat(const OrientedPointCloud& points, int res, const Aabb& bounds) {
  if (res < 2 || (res & (res - 1)) != 0)
    throw std::runtime_error("splat: res must be a power of two");
  if (points.size() < 4) throw std::runtime_error("splat: need at least 4 points");

  SplatResult out;
  out.field.layout = layout_for(res, bounds);
  for (auto& c : out.field.comp) c.assign(out.field.layout.cell_count(), 0.0);

  for (std::size_t p = 0; p < points.size(); ++p) {
    bool clamped = false;
    const TrilinearStencil s = stencil_for(points.positions[p], out.field.layout, &clamped);
    if (clamped) ++out.clamped_points;
    const Eigen::Vector3d& n = points.normals[p];
    for (int cz = 0; cz < 2; ++cz)
      for (int cy = 0; cy < 2; ++cy)
        for (int cx = 0; cx < 2; ++cx) {
          const double w = weight(s, cx, cy, cz);
          const std::size_t idx = corner_index(s, out.field.layout, cx, cy, cz);
          for (int c = 0; c < 3; ++c) out.field.comp[c][idx] += w * n[c];
        }
  }
  return out;
}

IndicatorGrid solve_indicator(const VectorGrid& v, double sig,
                              const OrientedPointCloud& points) {
  IndicatorGrid chi;
  chi.layout = v.layout;
  spectral_solve(v.layout, v.comp, &chi.values, sig, false, nullptr);

  double mean = 0.0;
  for (const auto& p : points.positions) {
    const TrilinearStencil s = stencil_for(p, chi.layout);
    double val = 0.0;
    for (int cz = 0; cz < 2; ++cz)
      for (int cy = 0; cy < 2; ++cy)
        for (int cx = 0; cx < 2; ++cx)
          val += weight(s, cx, cy, cz) * chi.values[corner_index(s, chi.layout, cx, cy, cz)];
    mean += val;
  }
  mean /= static_cast<double>(points.size());
  for (auto& x : chi.values) x -= mean;
  chi.mean_offset = mean;
  return chi;
}

PointGradients dpsr_adjoint(const std::vector<double>& grad_chi,
                            const OrientedPointCloud& points, double sig, int res,
                            const Aabb& bounds) {
  const GridLayout layout = layout_for(res, bounds);
  if (grad_chi.size() != layout.cell_count())
    throw std::runtime_error("dpsr_adjoint: gradient size does not match res^3");

  const std::size_t N = points.size();
  const double inv_n = 1.0 / static_cast<double>(N);
  double grad_sum = 0.0;
  for (const double g : grad_chi) grad_sum += g;

  // chi_final = chi_raw - mean(trilerp(chi_raw, p_j)); the mean couples every
  // cell to the point footprints and adds a direct position term.
  std::vector<double> grad_raw = grad_chi;
  for (std::size_t p = 0; p < N; ++p) {
    const TrilinearStencil s = stencil_for(points.positions[p], layout);
    for (int cz = 0; cz < 2; ++cz)
      for (int cy = 0; cy < 2; ++cy)
        for (int cx = 0; cx < 2; ++cx)
          grad_raw[corner_index(s, layout, cx, cy, cz)] -=
              grad_sum * inv_n * weight(s, cx, cy, cz);
  }

  // Rebuild chi_raw for the offset position term: solve the forward problem
  // again (linear, so this is exact).
  SplatResult sp = splat(points, res, bounds);
  std::vector<double> chi_raw;
  spectral_solve(layout, sp.field.comp, &chi_raw, sig, false, nullptr);

  std::vector<double> grad_v[3];
  spectral_solve(layout, nullptr, grad_v, sig, true, &grad_raw);

  PointGradients out;
  out.positions.assign(N, Eigen::Vector3d::Zero());
  out.normals.assign(N, Eigen::Vector3d::Zero());
  const double inv_spacing = 1.0 / layout.spacing;

  for (std::size_t p = 0; p < N; ++p) {
    const TrilinearStencil s = stencil_for(points.positions[p], layout);
    const Eigen::Vector3d& n = points.normals[p];
    Eigen::Vector3d gp = Eigen::Vector3d::Zero();
    Eigen::Vector3d gn = Eigen::Vector3d::Zero();
    for (int cz = 0; cz < 2; ++cz)
      for (int cy = 0; cy < 2; ++cy)
        for (int cx = 0; cx < 2; ++cx) {
          const std::size_t idx = corner_index(s, layout, cx, cy, cz);
          const double w = weight(s, cx, cy, cz);
          const double ndotg = n.x() * grad_v[0][idx] + n.y() * grad_v[1][idx] +
                               n.z() * grad_v[2][idx];
          for (int c = 0; c < 3; ++c) gn[c] += w * grad_v[c][idx];
          for (int d = 0; d < 3; ++d) {
            const double dw = weight_deriv(s, cx, cy, cz, d) * inv_spacing;
            // splat path + offset path (offset contributes -grad_sum/N per point)
            gp[d] += dw * ndotg;
            gp[d] -= dw * chi_raw[idx] * grad_sum * inv_n;
          }
        }
    out.positions[p] = gp;
    out.normals[p] = gn;
  }
  return out;
}

IndicatorGrid tanh_grid(const IndicatorGrid& chi) {
  IndicatorGrid out;
  out.layout = chi.layout;
  out.mean_offset = chi.mean_offset;
  out.values.resize(chi.values.size());
  for (std::size_t i = 0; i < chi.values.size(); ++i) out.values[i] = std::tanh(chi.values[i]);
  return out;
}

std::vector<double> tanh_grid_adjoint(const std::vector<double>& grad_tanh,
                                      const IndicatorGrid& chi) {
  std::vector<double> out(grad_tanh.size());
  for (std::size_t i = 0; i < grad_tanh.size(); ++i) {
    const double t = std::tanh(chi.values[i]);
    out[i] = grad_tanh[i] * (1.0 - t * t);
  }
  return out;
}

}  // namespace mvr
