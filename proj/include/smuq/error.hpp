#pragma once
#include <stdexcept>
#include <string>
#include <string_view>

namespace smuq {

enum class ErrorKind {
    config,            // bad or unknown configuration value
    parse,             // malformed numeric/text field
    schema,            // structurally inconsistent input (ragged grids, missing columns)
    spec,              // invalid split specification
    precondition,      // operation called outside its domain
    io,                // file system failure
    missing_artifact,  // required upstream artifact absent
    stale_config,      // artifact was produced under a different configuration
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace smuq
