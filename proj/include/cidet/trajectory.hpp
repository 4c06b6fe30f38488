#pragma once

#include <cidet/common.hpp>

#include <vector>

namespace cidet {

/// Per-trial recording.  Estimate errors are strided; the decision statistic
/// is kept at full resolution.
struct Trajectory {
  std::vector<long> theta_times;     // strided ticks
  Mat err_norm;                      // theta_times.size() x N, ||theta_n(t) - theta*||
  std::vector<long> z_times;         // 0..horizon
  Mat z;                             // z_times.size() x N
  std::vector<char> refresh_mark;    // aligned with z_times; 1 where a refresh published
  Mat theta_final;                   // N x M
  std::vector<long> probe_times;
  std::vector<Mat> probe_abs_err;    // one N x M matrix of |theta - theta*| per probe time
};

}  // namespace cidet
