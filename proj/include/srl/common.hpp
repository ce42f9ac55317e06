#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace srl {

// Error taxonomy shared by all modules. The CLI maps each type to a distinct
// exit status (see tools/main.cpp and README).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

class SelectionError : public std::runtime_error {
 public:
  explicit SelectionError(const std::string& what) : std::runtime_error(what) {}
};

// Raised when a data-selection stage filters away every candidate instance.
class CurriculumExhausted : public std::runtime_error {
 public:
  explicit CurriculumExhausted(const std::string& what) : std::runtime_error(what) {}
};

// Half-open index range [begin, end).
struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
};

inline constexpr int kNumSteps = 5;
inline constexpr int kNumGrades = 4;

}  // namespace srl
