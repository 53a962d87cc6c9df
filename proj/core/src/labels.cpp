#include "affex/labels.hpp"

#include <algorithm>
#include <cctype>

namespace affex {
namespace {

constexpr std::array<std::string_view, kEmotionCount> kNames = {
    "anger", "disgust", "fear", "happiness", "sadness", "surprise", "neutral"};
constexpr std::array<char, kEmotionCount> kCodes = {'A', 'D', 'F', 'H',
                                                    'S', 'U', 'N'};

}  // namespace

std::string_view to_string(Emotion e) { return kNames[index_of(e)]; }

char short_code(Emotion e) { return kCodes[index_of(e)]; }

std::optional<Emotion> parse_emotion(std::string_view text) {
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front())))
    text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back())))
    text.remove_suffix(1);
  std::string lowered(text);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (lowered == kNames[i]) return static_cast<Emotion>(i);
  }
  return std::nullopt;
}

}  // namespace affex
