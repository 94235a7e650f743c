#pragma once

#include <stdexcept>
#include <string>

namespace docmt {

// Error categories map to CLI exit codes: validation 1, engine 2, I/O 3.
class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

class EngineError : public std::runtime_error {
public:
  explicit EngineError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace docmt
