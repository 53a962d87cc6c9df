#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace affex {

// Every failure raised by the library derives from Error and carries a
// stable kind name, which the CLI prints next to the offending path.
class Error : public std::runtime_error {
 public:
  Error(std::string_view kind, const std::string& what);
  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

#define AFFEX_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                      \
   public:                                                         \
    explicit Name(const std::string& what) : Error(#Name, what) {} \
  }

// audio-io
AFFEX_DEFINE_ERROR(ChannelCountError);
AFFEX_DEFINE_ERROR(FormatError);
AFFEX_DEFINE_ERROR(CorruptFileError);
AFFEX_DEFINE_ERROR(SilentClipError);
AFFEX_DEFINE_ERROR(LabelError);
AFFEX_DEFINE_ERROR(DuplicateError);
AFFEX_DEFINE_ERROR(IoError);

// dsp / features
AFFEX_DEFINE_ERROR(InputTooShortError);
AFFEX_DEFINE_ERROR(ConfigError);
AFFEX_DEFINE_ERROR(DomainError);
AFFEX_DEFINE_ERROR(InsufficientOnsetsError);

// dataset / stats / classify
AFFEX_DEFINE_ERROR(SchemaError);
AFFEX_DEFINE_ERROR(InsufficientDataError);
AFFEX_DEFINE_ERROR(DegenerateGroupsError);
AFFEX_DEFINE_ERROR(MissingClassError);
AFFEX_DEFINE_ERROR(SubsetError);

#undef AFFEX_DEFINE_ERROR

// A track collapsed to nothing; names the feature so reports can say which.
class FeatureUndefinedError : public Error {
 public:
  FeatureUndefinedError(std::string feature, const std::string& what);
  const std::string& feature() const noexcept { return feature_; }

 private:
  std::string feature_;
};

}  // namespace affex
