#pragma once

#include <vector>

namespace spes {

// One biquad section, direct form II transposed, a0 normalised to 1.
struct SosSection {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
};

// Butterworth bandpass of even prototype order (default design is order 4,
// giving 2*order poles after the bandpass transform), via pole placement,
// s-plane bandpass transform and the bilinear transform with prewarping.
std::vector<SosSection> butterworth_bandpass(int order, double low_hz, double high_hz,
                                             double fs);

// Single forward pass through the cascade.
void sosfilt(const std::vector<SosSection>& sos, std::vector<double>& x);

// Zero-phase forward-backward pass with odd-reflection padding.
void sosfiltfilt(const std::vector<SosSection>& sos, std::vector<double>& x,
                 int pad_len);

// Cascade magnitude response at frequency f (Hz).
double sos_gain_at(const std::vector<SosSection>& sos, double f_hz, double fs);

}  // namespace spes
