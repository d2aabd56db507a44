#pragma once

// Small fixed competing-risks sample (tau = 1) with reference fits computed
// by an independent subject-level implementation.

#include "cifreg/datagen.hpp"

namespace fixture {

inline cifreg::Dataset small_sample() {
  cifreg::Dataset d;
  d.tau = 1.0;
  d.records = {
      {1, 1.000000, 0, 0},
      {2, 0.627442, 0, 1},
      {3, 0.129488, 1, 1},
      {4, 1.000000, 0, 0},
      {5, 1.000000, 0, 1},
      {6, 0.041470, 2, 0},
      {7, 0.462994, 1, 0},
      {8, 0.975709, 0, 0},
      {9, 0.177977, 1, 0},
      {10, 0.419894, 1, 0},
      {11, 0.228891, 2, 0},
      {12, 0.716105, 0, 1},
      {13, 0.099977, 1, 0},
      {14, 1.000000, 0, 1},
      {15, 0.101423, 0, 0},
      {16, 0.245370, 1, 0},
      {17, 0.043988, 2, 1},
      {18, 0.068156, 1, 1},
      {19, 0.264668, 0, 1},
      {20, 0.581331, 0, 1},
      {21, 0.423445, 1, 0},
      {22, 0.349518, 1, 1},
      {23, 0.000877, 1, 0},
      {24, 0.734231, 1, 0},
      {25, 0.831859, 2, 0},
      {26, 1.000000, 0, 1},
      {27, 1.000000, 0, 1},
      {28, 0.642874, 0, 0},
      {29, 0.120176, 2, 0},
      {30, 0.432887, 0, 1},
      {31, 0.504114, 2, 0},
      {32, 0.818019, 0, 1},
      {33, 0.409360, 1, 0},
      {34, 1.000000, 0, 1},
      {35, 1.000000, 0, 1},
      {36, 0.022182, 1, 0},
      {37, 0.564904, 1, 1},
      {38, 0.864909, 0, 1},
      {39, 1.000000, 0, 0},
      {40, 1.000000, 0, 1},
      {41, 0.869107, 1, 1},
      {42, 0.815068, 1, 0},
      {43, 0.074272, 2, 0},
      {44, 0.543958, 2, 0},
      {45, 0.123825, 0, 0},
      {46, 0.098979, 0, 0},
      {47, 0.070283, 0, 0},
      {48, 0.975816, 1, 1},
      {49, 0.021461, 2, 0},
      {50, 0.449628, 1, 0},
      {51, 0.117766, 2, 0},
      {52, 1.000000, 0, 0},
      {53, 1.000000, 0, 0},
      {54, 0.733657, 0, 0},
      {55, 0.414788, 0, 0},
      {56, 1.000000, 0, 1},
      {57, 1.000000, 0, 0},
      {58, 1.000000, 0, 1},
      {59, 1.000000, 0, 0},
      {60, 0.266803, 1, 1},
  };
  return d;
}

// Fine-Gray with stabilized censoring weights.
inline constexpr double kFgBeta = -0.28333613548319;
inline constexpr double kFgSeNaive = 0.475887240766455;
inline constexpr double kFgGammaTau = 0.519223208262552;
// Cause-specific Cox models, Breslow ties.
inline constexpr double kCox1Gamma = -0.516263489898083;
inline constexpr double kCox1Se = 0.478282184101608;
inline constexpr double kCox2Gamma = -2.10019079824752;
inline constexpr double kCox2Se = 1.05679113618543;
// Direct binomial on the grid (0.25, 0.5, 0.75).
inline constexpr double kDbAlpha[3] = {-1.85734349577339, -1.03459878887594, -0.849520826729506};
inline constexpr double kDbBeta = -0.540513185687219;

}  // namespace fixture
