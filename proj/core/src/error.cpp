#include "affex/error.hpp"

namespace affex {

Error::Error(std::string_view kind, const std::string& what)
    : std::runtime_error(what), kind_(kind) {}

FeatureUndefinedError::FeatureUndefinedError(std::string feature,
                                             const std::string& what)
    : Error("FeatureUndefinedError", what), feature_(std::move(feature)) {}

}  // namespace affex
