#pragma once

#include <stdexcept>
#include <string>

namespace vln {

// Base of every error raised by the library. `category()` drives the CLI exit
// code mapping.
class Error : public std::runtime_error {
 public:
  enum class Category { Usage, Config, Io, Numeric, Data };

  Error(Category c, const std::string& what) : std::runtime_error(what), category_(c) {}
  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

struct DimensionError : Error {
  explicit DimensionError(const std::string& w) : Error(Category::Usage, "dimension error: " + w) {}
};
struct DomainError : Error {
  explicit DomainError(const std::string& w) : Error(Category::Numeric, "domain error: " + w) {}
};
struct UsageError : Error {
  explicit UsageError(const std::string& w) : Error(Category::Usage, "usage error: " + w) {}
};
struct ConfigError : Error {
  explicit ConfigError(const std::string& w) : Error(Category::Config, "config error: " + w) {}
};
struct IoError : Error {
  explicit IoError(const std::string& w) : Error(Category::Io, "io error: " + w) {}
};
struct NumericAbort : Error {
  explicit NumericAbort(const std::string& w) : Error(Category::Numeric, "numeric abort: " + w) {}
};
struct LookupError : Error {
  explicit LookupError(const std::string& w) : Error(Category::Data, "lookup error: " + w) {}
};
struct ActionError : Error {
  explicit ActionError(const std::string& w) : Error(Category::Data, "action error: " + w) {}
};
struct GenerationError : Error {
  explicit GenerationError(const std::string& w) : Error(Category::Config, "generation error: " + w) {}
};
struct RenderError : Error {
  explicit RenderError(const std::string& w) : Error(Category::Data, "rendering error: " + w) {}
};
struct MetricError : Error {
  explicit MetricError(const std::string& w) : Error(Category::Usage, "undefined metric: " + w) {}
};
struct OracleError : Error {
  explicit OracleError(const std::string& w) : Error(Category::Numeric, "oracle error: " + w) {}
};
struct TrainingError : Error {
  explicit TrainingError(const std::string& w) : Error(Category::Data, "training error: " + w) {}
};
struct CorruptLogError : Error {
  explicit CorruptLogError(const std::string& w) : Error(Category::Data, "corrupt log: " + w) {}
};

// Process exit code for an error category: 2 config, 3 io, 4 numeric abort,
// 5 usage, 6 data.
int exit_code_for(Error::Category c) noexcept;

}  // namespace vln
