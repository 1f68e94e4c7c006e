// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------


#pragma once

#include <Eigen/Core>

#include <complex>
#include <cstdint>
#include <random>
#include <vector>

// Beamforming codebooks, array responses, path loss and stochastic channel
// draws for a 2D mmWave geometric channel model with a uniform linear array.
namespace bcmq::radio {

using ComplexVector = Eigen::VectorXcd;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

double distance(Point a, Point b);

// Close-in free-space reference log-distance model.
struct PathLossParams {
  double carrier_freq_hz = 28e9;
  double ref_distance_m = 1.0;
  double exponent = 3.0;
  int num_paths = 3;

  void validate() const;
};

class Codebook {
public:
  explicit Codebook(std::vector<ComplexVector> entries);

  int size() const { return static_cast<int>(entries_.size()); }
  int antennas() const { return static_cast<int>(entries_.front().size()); }
  const ComplexVector& operator[](int i) const { return entries_.at(static_cast<std::size_t>(i)); }

private:
  std::vector<ComplexVector> entries_;
};

// Entry i has components exp(j*2*pi*m*i/F)/sqrt(M).
Codebook dft_codebook(int antennas, int size);

// Half-wavelength ULA steering vector, unit norm. The angle is measured from
// broadside so component m is exp(j*pi*m*sin(angle))/sqrt(M).
ComplexVector array_response(double angle, int antennas);

// PL(d) = FSPL(d0) + 10*alpha*log10(d/d0); distances below d0 clamp to d0.
double path_loss_db(double distance_m, const PathLossParams& params);

struct ChannelVector {
  ComplexVector coefficients;
  double large_scale_gain = 0.0;
};

// h = sqrt(G/L) * sum_l g_l a(theta_l) sqrt(M). Path 1 is the line of sight,
// the remaining paths arrive uniformly in [-pi/2, pi/2].
ChannelVector sample_channel(Point ue, Point bs, int antennas, const PathLossParams& params,
                             std::mt19937_64& rng);

// |h^H v|^2
double beam_gain(const ChannelVector& h, const ComplexVector& v);

}  // namespace bcmq::radio
