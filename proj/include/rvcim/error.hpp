#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rvcim {

// Base of every error raised by the simulator, compiler and tools.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EncodingError : public Error {
 public:
  EncodingError(std::string field, const std::string& what)
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class IllegalInstruction : public Error {
 public:
  IllegalInstruction(uint32_t word, const std::string& what)
      : Error(what), word_(word) {}
  uint32_t word() const { return word_; }

 private:
  uint32_t word_;
};

class AsmError : public Error {
 public:
  AsmError(int line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class BoundsError : public Error {
 public:
  using Error::Error;
};

class LoweringError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public LoweringError {
 public:
  CapacityError(uint64_t required_bits, uint64_t available_bits, const std::string& what)
      : LoweringError(what), required_bits_(required_bits), available_bits_(available_bits) {}
  uint64_t required_bits() const { return required_bits_; }
  uint64_t available_bits() const { return available_bits_; }

 private:
  uint64_t required_bits_;
  uint64_t available_bits_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace rvcim
