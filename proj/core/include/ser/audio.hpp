// Copyright 2026 The serbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ser {

/// Decoded PCM audio, interleaved, scaled to [-1, 1].
struct PcmAudio {
  std::uint32_t sample_rate_hz = 0;
  std::uint16_t channels = 0;
  std::vector<float> samples;

  std::size_t frames() const { return channels == 0 ? 0 : samples.size() / channels; }
};

/// Parses a RIFF/WAVE byte stream. Supports integer PCM (8/16/24/32 bit) and
/// 32-bit float, including WAVE_FORMAT_EXTENSIBLE wrappers.
/// Throws CorruptHeader or UnsupportedCodec.
PcmAudio decode_wav(std::span<const std::uint8_t> bytes);

enum class WavEncoding { Pcm16, Pcm24, Pcm32, Float32, Pcm8 };

/// Encodes interleaved samples as a canonical 44-byte-header WAV.
std::vector<std::uint8_t> encode_wav(std::span<const float> interleaved, std::uint32_t sample_rate_hz,
                                     std::uint16_t channels, WavEncoding encoding = WavEncoding::Pcm16);

/// Channel mean of interleaved audio.
std::vector<float> downmix_mono(const PcmAudio& audio);

/// Rational-ratio polyphase resampler with a Kaiser-windowed sinc kernel.
///
/// The kernel spans 64 taps at the lower of the two rates (so 64 taps per
/// polyphase branch when upsampling, 64 * in/out input taps when
/// downsampling) with cutoff 0.45 * min(in, out). Each branch is normalised
/// to unit DC gain. Output sample n is centred on input time n * in / out,
/// so no delay compensation is needed.
class Resampler {
 public:
  Resampler(std::uint32_t input_rate_hz, std::uint32_t output_rate_hz);

  std::vector<float> process(std::span<const float> input) const;

  /// round(input_frames * out / in), half up.
  std::size_t output_length(std::size_t input_frames) const;

  static constexpr int kTapsPerPhase = 64;
  static constexpr double kCutoffFraction = 0.45;
  static constexpr double kKaiserBeta = 8.6;

 private:
  std::uint64_t up_ = 1;    // L
  std::uint64_t down_ = 1;  // M
  int half_width_ = 0;      // kernel half-width in input samples
  std::vector<std::vector<double>> phases_;
};

inline constexpr std::uint32_t kTargetSampleRate = 16000;

/// Decodes a WAV stream, downmixes to mono and resamples to `target_rate_hz`.
/// Output values are clamped to [-1, 1].
std::vector<float> decode_resample(std::span<const std::uint8_t> wav_bytes,
                                   std::uint32_t target_rate_hz = kTargetSampleRate);

}  // namespace ser
