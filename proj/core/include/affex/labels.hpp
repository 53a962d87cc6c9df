#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace affex {

// Canonical order: Anger, Disgust, Fear, Happiness, Sadness, Surprise,
// Neutral. Row ordering, confusion matrices and vote tie-breaking all use it.
enum class Emotion : int {
  Anger = 0,
  Disgust,
  Fear,
  Happiness,
  Sadness,
  Surprise,
  Neutral,
};

inline constexpr std::size_t kEmotionCount = 7;
inline constexpr std::size_t kEmotionPairCount =
    kEmotionCount * (kEmotionCount - 1) / 2;

inline constexpr std::array<Emotion, kEmotionCount> kAllEmotions = {
    Emotion::Anger,   Emotion::Disgust,  Emotion::Fear,   Emotion::Happiness,
    Emotion::Sadness, Emotion::Surprise, Emotion::Neutral};

constexpr std::size_t index_of(Emotion e) { return static_cast<std::size_t>(e); }

// Lower-case label used in manifests and CSV files ("anger", ...).
std::string_view to_string(Emotion e);

// One-letter code: A, D, F, H, S, U, N.
char short_code(Emotion e);

// Case-insensitive; returns nullopt for anything outside the seven labels.
std::optional<Emotion> parse_emotion(std::string_view text);

}  // namespace affex
