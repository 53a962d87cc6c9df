#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "affex/labels.hpp"

namespace affex::audio {

// Decoded mono signal. Samples are dimensionless amplitudes in [-1, 1];
// construction rejects anything outside that range.
class AudioClip {
 public:
  AudioClip() = default;
  AudioClip(std::vector<double> samples, int sample_rate, int source_bit_depth = 0);

  std::span<const double> samples() const noexcept { return samples_; }
  int sample_rate() const noexcept { return sample_rate_; }
  int source_bit_depth() const noexcept { return source_bit_depth_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  double duration() const noexcept {
    return sample_rate_ > 0 ? static_cast<double>(samples_.size()) / sample_rate_ : 0.0;
  }

  // Returns a copy with every sample multiplied by `gain`; throws DomainError
  // if the result would leave [-1, 1].
  AudioClip scaled(double gain) const;

  friend bool operator==(const AudioClip&, const AudioClip&) = default;

 private:
  std::vector<double> samples_;
  int sample_rate_ = 0;
  int source_bit_depth_ = 0;
};

enum class SampleFormat { Pcm16, Pcm24, Float32 };

int bits_of(SampleFormat format);

// RIFF/WAVE, one channel, PCM 16/24-bit or IEEE float 32-bit. Integer samples
// are scaled by 1/2^(bits-1). Float samples outside [-1, 1] are clamped.
AudioClip decode_wav(const std::filesystem::path& path);
AudioClip decode_wav_bytes(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_wav_bytes(const AudioClip& clip, SampleFormat format);
void encode_wav(const std::filesystem::path& path, const AudioClip& clip,
                SampleFormat format = SampleFormat::Pcm24);

struct SilenceOptions {
  double threshold_db = -60.0;  // dB
  double rms_window = 0.010;    // seconds
  // Measure the threshold against the clip's peak sample instead of full
  // scale, so trimming does not depend on the recording level. A clip whose
  // peak is below the threshold in dBFS is silent either way.
  bool relative_to_peak = true;
};

// Trims leading/trailing material below the threshold and re-pads both ends
// with exactly round(pad * sample_rate) zeros. Applying it twice is the same
// as applying it once.
AudioClip normalize_silence(const AudioClip& clip, double pad,
                            const SilenceOptions& options = {});

// Index range [first, last] of the above-threshold content, as used by
// normalize_silence. Throws SilentClipError when nothing crosses.
struct ActiveRange {
  std::size_t first = 0;
  std::size_t last = 0;
};
ActiveRange active_range(const AudioClip& clip, const SilenceOptions& options = {});

struct RecordingMeta {
  std::filesystem::path path;
  std::string performer_id;
  Emotion emotion = Emotion::Neutral;

  friend bool operator==(const RecordingMeta&, const RecordingMeta&) = default;
};

// CSV with header `path,performer,emotion`. Emotion labels are matched
// case-insensitively. Relative paths are kept as written.
std::vector<RecordingMeta> parse_manifest(std::istream& in);
std::vector<RecordingMeta> load_manifest(const std::filesystem::path& path);

void write_manifest(std::ostream& out, std::span<const RecordingMeta> records);
void save_manifest(const std::filesystem::path& path, std::span<const RecordingMeta> records);

}  // namespace affex::audio
