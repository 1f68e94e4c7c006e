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


#include "bcmq/radio.hpp"

#include "bcmq/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace bcmq::radio {

namespace {
constexpr double kSpeedOfLight = 2.99792458e8;
}

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

void PathLossParams::validate() const {
  if (!(carrier_freq_hz > 0.0)) throw Error(ErrorKind::InvalidConfig, "carrier frequency must be positive");
  if (!(ref_distance_m > 0.0)) throw Error(ErrorKind::InvalidConfig, "reference distance must be positive");
  if (!(exponent > 0.0)) throw Error(ErrorKind::InvalidConfig, "path loss exponent must be positive");
  if (num_paths < 1) throw Error(ErrorKind::InvalidConfig, "at least one propagation path is required");
}

Codebook::Codebook(std::vector<ComplexVector> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw Error(ErrorKind::InvalidConfig, "codebook needs at least one entry");
  const auto m = entries_.front().size();
  if (m == 0) throw Error(ErrorKind::InvalidConfig, "codebook entries need at least one antenna");
  for (const auto& e : entries_) {
    if (e.size() != m) throw Error(ErrorKind::InvalidConfig, "codebook entries differ in length");
  }
}

Codebook dft_codebook(int antennas, int size) {
  if (antennas < 1 || size < 1) {
    throw Error(ErrorKind::InvalidConfig, "dft codebook needs M >= 1 and F >= 1, got M=" +
                                              std::to_string(antennas) + " F=" + std::to_string(size));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(antennas));
  std::vector<ComplexVector> entries;
  entries.reserve(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i) {
    ComplexVector v(antennas);
    for (int m = 0; m < antennas; ++m) {
      const double phase = 2.0 * std::numbers::pi * m * i / size;
      v[m] = std::polar(scale, phase);
    }
    entries.push_back(std::move(v));
  }
  return Codebook(std::move(entries));
}

ComplexVector array_response(double angle, int antennas) {
  if (antennas < 1) throw Error(ErrorKind::InvalidConfig, "array needs at least one antenna");
  const double scale = 1.0 / std::sqrt(static_cast<double>(antennas));
  const double s = std::sin(angle);
  ComplexVector a(antennas);
  for (int m = 0; m < antennas; ++m) a[m] = std::polar(scale, std::numbers::pi * m * s);
  return a;
}

double path_loss_db(double distance_m, const PathLossParams& params) {
  if (!(distance_m > 0.0)) {
    throw Error(ErrorKind::InvalidInput, "path loss needs a positive distance, got " + std::to_string(distance_m));
  }
  const double d0 = params.ref_distance_m;
  const double d = std::max(distance_m, d0);
  const double fspl = 20.0 * std::log10(4.0 * std::numbers::pi * d0 * params.carrier_freq_hz / kSpeedOfLight);
  return fspl + 10.0 * params.exponent * std::log10(d / d0);
}

ChannelVector sample_channel(Point ue, Point bs, int antennas, const PathLossParams& params,
                             std::mt19937_64& rng) {
  const double d = std::max(distance(ue, bs), params.ref_distance_m);
  const double gain = std::pow(10.0, -path_loss_db(d, params) / 10.0);
  const double los = std::atan2(ue.y - bs.y, ue.x - bs.x);

  // Complex standard normal: each quadrature has variance 1/2.
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5));
  std::uniform_real_distribution<double> scatter(-std::numbers::pi / 2.0, std::numbers::pi / 2.0);

  ComplexVector h = ComplexVector::Zero(antennas);
  for (int l = 0; l < params.num_paths; ++l) {
    const double theta = (l == 0) ? los : scatter(rng);
    const double re = normal(rng);
    const double im = normal(rng);
    h += std::complex<double>(re, im) * array_response(theta, antennas);
  }
  h *= std::sqrt(gain / params.num_paths) * std::sqrt(static_cast<double>(antennas));
  return ChannelVector{std::move(h), gain};
}

double beam_gain(const ChannelVector& h, const ComplexVector& v) {
  return std::norm(h.coefficients.dot(v));
}

}  // namespace bcmq::radio
