#include "affex/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>
#include <set>
#include <sstream>
#include <utility>

#include "affex/error.hpp"

namespace affex::audio {

AudioClip::AudioClip(std::vector<double> samples, int sample_rate, int source_bit_depth)
    : samples_(std::move(samples)),
      sample_rate_(sample_rate),
      source_bit_depth_(source_bit_depth) {
  if (sample_rate_ <= 0) throw DomainError("sample rate must be positive");
  for (double s : samples_) {
    if (!(std::abs(s) <= 1.0)) {
      throw DomainError("sample outside [-1, 1]: " + std::to_string(s));
    }
  }
}

AudioClip AudioClip::scaled(double gain) const {
  std::vector<double> out(samples_.begin(), samples_.end());
  for (double& s : out) s *= gain;
  return AudioClip(std::move(out), sample_rate_, source_bit_depth_);
}

int bits_of(SampleFormat format) {
  switch (format) {
    case SampleFormat::Pcm16: return 16;
    case SampleFormat::Pcm24: return 24;
    case SampleFormat::Float32: return 32;
  }
  return 0;
}

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) |
         (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t block_align = 0;
  std::uint16_t bits = 0;
};

}  // namespace

AudioClip decode_wav_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE")) {
    throw FormatError("not a RIFF/WAVE container");
  }

  std::optional<FmtChunk> fmt;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t chunk_size = read_u32(bytes, pos + 4);
    const std::size_t body = pos + 8;

    if (tag_is(bytes, pos, "fmt ")) {
      if (chunk_size < 16 || body + chunk_size > bytes.size()) {
        throw CorruptFileError("fmt chunk truncated");
      }
      FmtChunk f;
      f.format = read_u16(bytes, body);
      f.channels = read_u16(bytes, body + 2);
      f.sample_rate = read_u32(bytes, body + 4);
      f.block_align = read_u16(bytes, body + 12);
      f.bits = read_u16(bytes, body + 14);
      if (f.format == kFormatExtensible) {
        if (chunk_size < 40) throw CorruptFileError("extensible fmt chunk truncated");
        f.format = read_u16(bytes, body + 24);  // first two bytes of the sub-format GUID
      }
      fmt = f;
    } else if (tag_is(bytes, pos, "data")) {
      if (!fmt) throw FormatError("data chunk precedes fmt chunk");
      if (fmt->channels != 1) {
        throw ChannelCountError("expected mono, file has " + std::to_string(fmt->channels) +
                                " channels");
      }
      const bool pcm = fmt->format == kFormatPcm && (fmt->bits == 16 || fmt->bits == 24);
      const bool flt = fmt->format == kFormatFloat && fmt->bits == 32;
      if (!pcm && !flt) {
        throw FormatError("unsupported codec: format tag " + std::to_string(fmt->format) +
                          ", " + std::to_string(fmt->bits) + " bits");
      }
      if (fmt->sample_rate == 0) throw FormatError("sample rate is zero");
      const std::size_t width = fmt->bits / 8;
      if (fmt->block_align != width) throw FormatError("block alignment does not match mono");
      if (body + chunk_size > bytes.size()) {
        throw CorruptFileError("data chunk declares " + std::to_string(chunk_size) +
                               " bytes, only " + std::to_string(bytes.size() - body) +
                               " present");
      }

      const std::size_t frames = chunk_size / width;
      std::vector<double> samples(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        const std::size_t at = body + i * width;
        if (flt) {
          const std::uint32_t raw = read_u32(bytes, at);
          float value;
          std::memcpy(&value, &raw, sizeof value);
          double v = std::isfinite(value) ? static_cast<double>(value) : 0.0;
          samples[i] = std::clamp(v, -1.0, 1.0);
        } else if (fmt->bits == 16) {
          const auto raw = static_cast<std::int16_t>(read_u16(bytes, at));
          samples[i] = raw / 32768.0;
        } else {
          std::int32_t raw = bytes[at] | (bytes[at + 1] << 8) | (bytes[at + 2] << 16);
          if (raw & 0x800000) raw -= 0x1000000;
          samples[i] = raw / 8388608.0;
        }
      }
      return AudioClip(std::move(samples), static_cast<int>(fmt->sample_rate), fmt->bits);
    }

    pos = body + chunk_size + (chunk_size & 1u);
  }
  if (!fmt) throw FormatError("missing fmt chunk");
  throw CorruptFileError("missing data chunk");
}

AudioClip decode_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_wav_bytes(bytes);
}

std::vector<std::uint8_t> encode_wav_bytes(const AudioClip& clip, SampleFormat format) {
  const std::uint16_t bits = static_cast<std::uint16_t>(bits_of(format));
  const std::uint16_t width = bits / 8;
  const auto data_size = static_cast<std::uint32_t>(clip.size() * width);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_size + 1);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_size + (data_size & 1u));
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, format == SampleFormat::Float32 ? kFormatFloat : kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate()));
  put_u32(out, static_cast<std::uint32_t>(clip.sample_rate()) * width);
  put_u16(out, width);
  put_u16(out, bits);
  put_tag(out, "data");
  put_u32(out, data_size);

  const double full_scale = std::ldexp(1.0, bits - 1);
  for (double s : clip.samples()) {
    if (format == SampleFormat::Float32) {
      const float f = static_cast<float>(s);
      std::uint32_t raw;
      std::memcpy(&raw, &f, sizeof raw);
      put_u32(out, raw);
      continue;
    }
    const double q = std::clamp(std::round(s * full_scale), -full_scale, full_scale - 1.0);
    const auto v = static_cast<std::int32_t>(q);
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    if (bits == 24) out.push_back(static_cast<std::uint8_t>(v >> 16));
  }
  if (data_size & 1u) out.push_back(0);
  return out;
}

void encode_wav(const std::filesystem::path& path, const AudioClip& clip, SampleFormat format) {
  const auto bytes = encode_wav_bytes(clip, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

ActiveRange active_range(const AudioClip& clip, const SilenceOptions& options) {
  const auto s = clip.samples();
  const std::size_t n = s.size();
  if (n == 0) throw SilentClipError("empty clip");

  const double level = std::pow(10.0, options.threshold_db / 20.0);
  double peak = 0.0;
  for (double v : s) peak = std::max(peak, std::abs(v));
  if (!(peak >= level)) {
    throw SilentClipError("no material above " + std::to_string(options.threshold_db) + " dBFS");
  }
  const double threshold = options.relative_to_peak ? level * peak : level;
  const auto window = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(options.rms_window * clip.sample_rate())));
  const std::size_t half = window / 2;

  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + s[i] * s[i];
  auto rms_at = [&](std::size_t i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, lo + window);
    return std::sqrt((prefix[hi] - prefix[lo]) / static_cast<double>(window));
  };

  std::size_t rms_first = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (rms_at(i) >= threshold) {
      rms_first = i;
      break;
    }
  }
  if (rms_first == n) {
    throw SilentClipError("no material above " + std::to_string(options.threshold_db) + " dB");
  }
  std::size_t rms_last = rms_first;
  for (std::size_t i = n; i-- > rms_first;) {
    if (rms_at(i) >= threshold) {
      rms_last = i;
      break;
    }
  }

  // Snap to the outermost individual samples that cross the threshold within
  // one window of the RMS crossings.
  ActiveRange range{rms_first, rms_last};
  const std::size_t search_lo = rms_first >= window ? rms_first - window : 0;
  const std::size_t search_hi = std::min(n - 1, rms_last + window);
  for (std::size_t i = search_lo; i <= search_hi; ++i) {
    if (std::abs(s[i]) >= threshold) {
      range.first = i;
      break;
    }
  }
  for (std::size_t i = search_hi + 1; i-- > range.first;) {
    if (std::abs(s[i]) >= threshold) {
      range.last = i;
      break;
    }
  }
  return range;
}

AudioClip normalize_silence(const AudioClip& clip, double pad, const SilenceOptions& options) {
  if (!(pad >= 0.0)) throw DomainError("pad must be non-negative");
  const auto pad_samples = static_cast<std::size_t>(std::lround(pad * clip.sample_rate()));

  std::vector<double> current(clip.samples().begin(), clip.samples().end());
  // Each pass can only shrink the content, so this reaches a fixed point,
  // which is what makes the operation idempotent.
  while (true) {
    const AudioClip view(current, clip.sample_rate(), clip.source_bit_depth());
    const ActiveRange r = active_range(view, options);
    const std::size_t content = r.last - r.first + 1;
    std::vector<double> next(pad_samples * 2 + content, 0.0);
    std::copy(current.begin() + static_cast<std::ptrdiff_t>(r.first),
              current.begin() + static_cast<std::ptrdiff_t>(r.last + 1),
              next.begin() + static_cast<std::ptrdiff_t>(pad_samples));
    if (next == current) break;
    current = std::move(next);
  }
  return AudioClip(std::move(current), clip.sample_rate(), clip.source_bit_depth());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

std::vector<RecordingMeta> parse_manifest(std::istream& in) {
  std::vector<RecordingMeta> records;
  std::set<std::pair<std::string, Emotion>> seen;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    for (auto& f : fields) f = trim(f);

    if (!header_seen) {
      header_seen = true;
      if (fields.size() != 3 || fields[0] != "path" || fields[1] != "performer" ||
          fields[2] != "emotion") {
        throw FormatError("manifest line 1: expected header path,performer,emotion");
      }
      continue;
    }
    if (fields.size() != 3) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": expected 3 fields, got " +
                        std::to_string(fields.size()));
    }
    const auto emotion = parse_emotion(fields[2]);
    if (!emotion) {
      throw LabelError("manifest line " + std::to_string(line_no) + ": unknown emotion '" +
                       fields[2] + "'");
    }
    if (!seen.emplace(fields[1], *emotion).second) {
      throw DuplicateError("manifest line " + std::to_string(line_no) + ": performer '" +
                           fields[1] + "' already has a " + std::string(to_string(*emotion)) +
                           " recording");
    }
    records.push_back({fields[0], fields[1], *emotion});
  }
  return records;
}

std::vector<RecordingMeta> load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  return parse_manifest(in);
}

void write_manifest(std::ostream& out, std::span<const RecordingMeta> records) {
  out << "path,performer,emotion\n";
  for (const auto& r : records) {
    out << csv_escape(r.path.generic_string()) << ',' << csv_escape(r.performer_id) << ','
        << to_string(r.emotion) << '\n';
  }
}

void save_manifest(const std::filesystem::path& path, std::span<const RecordingMeta> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  write_manifest(out, records);
}

}  // namespace affex::audio
