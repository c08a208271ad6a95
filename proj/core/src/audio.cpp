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

#include "ser/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <numeric>

#include "ser/error.hpp"

namespace ser {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

float decode_sample(const std::uint8_t* p, std::uint16_t format, std::uint16_t bits) {
  if (format == kFormatFloat) {
    float f;
    std::uint32_t u = le32(p);
    std::memcpy(&f, &u, sizeof f);
    return f;
  }
  switch (bits) {
    case 8: return (static_cast<float>(p[0]) - 128.0f) / 128.0f;
    case 16: return static_cast<float>(static_cast<std::int16_t>(le16(p))) / 32768.0f;
    case 24: {
      std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
      if (v & 0x800000) v |= ~0xFFFFFF;
      return static_cast<float>(v) / 8388608.0f;
    }
    case 32:
      return static_cast<float>(static_cast<double>(static_cast<std::int32_t>(le32(p))) / 2147483648.0);
    default: return 0.0f;
  }
}

double bessel_i0(double x) { return std::cyl_bessel_i(0.0, x); }

}  // namespace

PcmAudio decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail(ErrorKind::CorruptHeader, "not a RIFF/WAVE stream");
  }
  std::uint16_t format = 0, channels = 0, bits = 0, block_align = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || available < 16) fail(ErrorKind::CorruptHeader, "fmt chunk too short");
      const std::uint8_t* f = bytes.data() + body;
      format = le16(f);
      channels = le16(f + 2);
      rate = le32(f + 4);
      block_align = le16(f + 12);
      bits = le16(f + 14);
      if (format == kFormatExtensible) {
        if (size < 40 || available < 40) fail(ErrorKind::CorruptHeader, "extensible fmt chunk too short");
        format = le16(f + 24);  // first two bytes of the sub-format GUID
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      // Streams written without a final size carry 0 or 0xFFFFFFFF; read what is there.
      data_size = std::min<std::size_t>(size, available);
      if (size == 0 || size == 0xFFFFFFFFu) data_size = available;
      break;
    }
    pos = body + size + (size & 1u);
  }

  if (!have_fmt) fail(ErrorKind::CorruptHeader, "missing fmt chunk");
  if (data == nullptr) fail(ErrorKind::CorruptHeader, "missing data chunk");
  if (channels == 0 || rate == 0) fail(ErrorKind::CorruptHeader, "zero channels or sample rate");
  if (format == kFormatPcm) {
    if (bits != 8 && bits != 16 && bits != 24 && bits != 32) {
      fail(ErrorKind::UnsupportedCodec, "unsupported PCM bit depth " + std::to_string(bits));
    }
  } else if (format == kFormatFloat) {
    if (bits != 32) fail(ErrorKind::UnsupportedCodec, "only 32-bit float WAV is supported");
  } else {
    fail(ErrorKind::UnsupportedCodec, "WAV format tag " + std::to_string(format));
  }
  const std::size_t bytes_per_sample = bits / 8;
  if (block_align != bytes_per_sample * channels) {
    fail(ErrorKind::CorruptHeader, "block alignment does not match channels and bit depth");
  }

  PcmAudio audio;
  audio.sample_rate_hz = rate;
  audio.channels = channels;
  const std::size_t frames = data_size / block_align;
  audio.samples.resize(frames * channels);
  for (std::size_t i = 0; i < audio.samples.size(); ++i) {
    audio.samples[i] = decode_sample(data + i * bytes_per_sample, format, bits);
  }
  return audio;
}

std::vector<std::uint8_t> encode_wav(std::span<const float> interleaved, std::uint32_t sample_rate_hz,
                                     std::uint16_t channels, WavEncoding encoding) {
  std::uint16_t bits = 16;
  std::uint16_t format = kFormatPcm;
  switch (encoding) {
    case WavEncoding::Pcm8: bits = 8; break;
    case WavEncoding::Pcm16: bits = 16; break;
    case WavEncoding::Pcm24: bits = 24; break;
    case WavEncoding::Pcm32: bits = 32; break;
    case WavEncoding::Float32: bits = 32; format = kFormatFloat; break;
  }
  const std::uint16_t block_align = static_cast<std::uint16_t>(channels * (bits / 8));
  const std::uint32_t data_size = static_cast<std::uint32_t>(interleaved.size() * (bits / 8));

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + data_size);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, format);
  put16(out, channels);
  put32(out, sample_rate_hz);
  put32(out, sample_rate_hz * block_align);
  put16(out, block_align);
  put16(out, bits);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, data_size);

  for (float s : interleaved) {
    const double c = std::clamp(static_cast<double>(s), -1.0, 1.0);
    switch (encoding) {
      case WavEncoding::Pcm8:
        out.push_back(static_cast<std::uint8_t>(std::lround(std::min(c * 128.0 + 128.0, 255.0))));
        break;
      case WavEncoding::Pcm16:
        put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(
                       std::lround(std::clamp(c * 32768.0, -32768.0, 32767.0)))));
        break;
      case WavEncoding::Pcm24: {
        const auto v = static_cast<std::int32_t>(std::lround(std::clamp(c * 8388608.0, -8388608.0, 8388607.0)));
        out.push_back(static_cast<std::uint8_t>(v & 0xFF));
        out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
        out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
        break;
      }
      case WavEncoding::Pcm32:
        put32(out, static_cast<std::uint32_t>(static_cast<std::int32_t>(
                       std::llround(std::clamp(c * 2147483648.0, -2147483648.0, 2147483647.0)))));
        break;
      case WavEncoding::Float32: {
        std::uint32_t u;
        const float f = static_cast<float>(c);
        std::memcpy(&u, &f, sizeof u);
        put32(out, u);
        break;
      }
    }
  }
  return out;
}

std::vector<float> downmix_mono(const PcmAudio& audio) {
  const std::size_t frames = audio.frames();
  std::vector<float> mono(frames);
  if (audio.channels == 1) {
    std::copy_n(audio.samples.begin(), frames, mono.begin());
    return mono;
  }
  for (std::size_t i = 0; i < frames; ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < audio.channels; ++c) sum += audio.samples[i * audio.channels + c];
    mono[i] = static_cast<float>(sum / audio.channels);
  }
  return mono;
}

Resampler::Resampler(std::uint32_t input_rate_hz, std::uint32_t output_rate_hz) {
  if (input_rate_hz == 0 || output_rate_hz == 0) fail(ErrorKind::InvalidArgument, "zero sample rate");
  const std::uint64_t g = std::gcd<std::uint64_t>(input_rate_hz, output_rate_hz);
  up_ = output_rate_hz / g;
  down_ = input_rate_hz / g;
  if (up_ == down_) return;

  const double in = input_rate_hz;
  const double out = output_rate_hz;
  const double ratio = std::max(1.0, in / out);
  half_width_ = static_cast<int>(std::ceil(kTapsPerPhase / 2 * ratio));
  // Cutoff in cycles per input sample.
  const double fc = kCutoffFraction * std::min(in, out) / in;
  const double norm = bessel_i0(kKaiserBeta);

  phases_.resize(up_);
  for (std::uint64_t p = 0; p < up_; ++p) {
    const double frac = static_cast<double>(p) / static_cast<double>(up_);
    auto& taps = phases_[p];
    taps.resize(2 * half_width_);
    double sum = 0.0;
    for (int j = 0; j < 2 * half_width_; ++j) {
      // Tap j multiplies input sample floor(t) - half_width + 1 + j.
      const double tau = static_cast<double>(j - half_width_ + 1) - frac;
      const double x = 2.0 * fc * tau;
      const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      const double r = tau / half_width_;
      const double window = std::abs(r) >= 1.0 ? 0.0 : bessel_i0(kKaiserBeta * std::sqrt(1.0 - r * r)) / norm;
      taps[j] = 2.0 * fc * sinc * window;
      sum += taps[j];
    }
    for (double& t : taps) t /= sum;
  }
}

std::size_t Resampler::output_length(std::size_t input_frames) const {
  return static_cast<std::size_t>((2 * static_cast<std::uint64_t>(input_frames) * up_ + down_) / (2 * down_));
}

std::vector<float> Resampler::process(std::span<const float> input) const {
  if (up_ == down_) return {input.begin(), input.end()};
  const std::size_t n_out = output_length(input.size());
  const auto n_in = static_cast<std::int64_t>(input.size());
  std::vector<float> out(n_out);
  for (std::size_t n = 0; n < n_out; ++n) {
    const std::uint64_t pos = n * down_;
    const auto base = static_cast<std::int64_t>(pos / up_);
    const auto& taps = phases_[pos % up_];
    const std::int64_t first = base - half_width_ + 1;
    double acc = 0.0;
    const std::int64_t j0 = std::max<std::int64_t>(0, -first);
    const std::int64_t j1 = std::min<std::int64_t>(2 * half_width_, n_in - first);
    for (std::int64_t j = j0; j < j1; ++j) acc += taps[j] * input[first + j];
    out[n] = static_cast<float>(acc);
  }
  return out;
}

std::vector<float> decode_resample(std::span<const std::uint8_t> wav_bytes, std::uint32_t target_rate_hz) {
  const PcmAudio audio = decode_wav(wav_bytes);
  std::vector<float> mono = downmix_mono(audio);
  std::vector<float> out = Resampler(audio.sample_rate_hz, target_rate_hz).process(mono);
  for (float& s : out) s = std::clamp(s, -1.0f, 1.0f);
  return out;
}

}  // namespace ser
