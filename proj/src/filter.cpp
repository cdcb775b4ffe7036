#include "spes/filter.hpp"

#include <cmath>
#include <complex>

#include "spes/error.hpp"

namespace spes {

namespace {
using cplx = std::complex<double>;
}

std::vector<SosSection> butterworth_bandpass(int order, double low_hz, double high_hz,
                                             double fs) {
  if (order < 2 || order % 2 != 0)
    throw Error(ErrorKind::config, "butterworth_bandpass: order must be even and >= 2");
  if (!(0.0 < low_hz && low_hz < high_hz && high_hz < fs / 2.0))
    throw Error(ErrorKind::config,
                "butterworth_bandpass: need 0 < low < high < fs/2");

  // prewarped analog edges
  const double w_lo = 2.0 * fs * std::tan(M_PI * low_hz / fs);
  const double w_hi = 2.0 * fs * std::tan(M_PI * high_hz / fs);
  const double w0 = std::sqrt(w_lo * w_hi);  // centre
  const double bw = w_hi - w_lo;

  // analog lowpass prototype poles on the unit circle, upper half plane only;
  // conjugates are implied by the real-coefficient sections
  std::vector<SosSection> sos;
  for (int k = 0; k < order / 2; ++k) {
    double theta = M_PI * (2.0 * k + 1.0) / (2.0 * order) + M_PI / 2.0;
    cplx proto(std::cos(theta), std::sin(theta));

    // lowpass -> bandpass: s_lp = (s^2 + w0^2) / (bw * s)
    // each prototype pole maps to the two roots of s^2 - bw*p*s + w0^2 = 0
    cplx bp = bw * proto;
    cplx disc = std::sqrt(bp * bp - 4.0 * w0 * w0);
    for (cplx s : {(bp + disc) / 2.0, (bp - disc) / 2.0}) {
      // bilinear transform z = (2fs + s) / (2fs - s)
      cplx z = (2.0 * fs + s) / (2.0 * fs - s);
      SosSection sec;
      sec.b0 = 1.0;
      sec.b1 = 0.0;
      sec.b2 = -1.0;  // one zero at z=+1, one at z=-1 per section
      sec.a1 = -2.0 * z.real();
      sec.a2 = std::norm(z);
      sos.push_back(sec);
    }
  }

  // normalise to unit gain at the digital centre frequency
  double f0 = std::atan(w0 / (2.0 * fs)) * fs / M_PI;
  double g = sos_gain_at(sos, f0, fs);
  if (!(g > 0.0) || !std::isfinite(g))
    throw Error(ErrorKind::config, "butterworth_bandpass: degenerate design");
  sos.front().b0 /= g;
  sos.front().b1 /= g;
  sos.front().b2 /= g;
  return sos;
}

double sos_gain_at(const std::vector<SosSection>& sos, double f_hz, double fs) {
  cplx z = std::exp(cplx(0.0, -2.0 * M_PI * f_hz / fs));  // z^-1
  cplx h(1.0, 0.0);
  for (const auto& s : sos)
    h *= (s.b0 + s.b1 * z + s.b2 * z * z) / (1.0 + s.a1 * z + s.a2 * z * z);
  return std::abs(h);
}

void sosfilt(const std::vector<SosSection>& sos, std::vector<double>& x) {
  for (const auto& s : sos) {
    double z1 = 0.0, z2 = 0.0;
    for (double& v : x) {
      double in = v;
      double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
}

void sosfiltfilt(const std::vector<SosSection>& sos, std::vector<double>& x, int pad_len) {
  const long n = long(x.size());
  if (n < 2) return;
  const long pad = std::min<long>(pad_len, n - 1);

  // odd reflection about the end points damps edge transients
  std::vector<double> ext;
  ext.reserve(size_t(n + 2 * pad));
  for (long i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[size_t(i)]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (long i = n - 2; i >= n - 1 - pad; --i) ext.push_back(2.0 * x[size_t(n - 1)] - x[size_t(i)]);

  sosfilt(sos, ext);
  std::reverse(ext.begin(), ext.end());
  sosfilt(sos, ext);
  std::reverse(ext.begin(), ext.end());

  for (long i = 0; i < n; ++i) x[size_t(i)] = ext[size_t(i + pad)];
}

}  // namespace spes
