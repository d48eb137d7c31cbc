// error.hpp
// Exception types shared by every module. Each carries enough context to be
// reported by the CLI without further lookup.
#pragma once

#include <stdexcept>
#include <string>

namespace kep {

/// Broad classes used by the CLI to pick an exit code.
enum class ErrorClass { Config, Data, Runtime };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), class_(cls), kind_(kind) {}

  ErrorClass error_class() const noexcept { return class_; }
  const std::string& kind() const noexcept { return kind_; }

 private:
  ErrorClass class_;
  std::string kind_;
};

#define KEP_DEFINE_ERROR(Name, Cls)                                  \
  class Name : public Error {                                        \
   public:                                                           \
    explicit Name(const std::string& message)                        \
        : Error(ErrorClass::Cls, #Name, message) {}                  \
  };

// HLA scoring
KEP_DEFINE_ERROR(MissingMapEntry, Data)
KEP_DEFINE_ERROR(ResolutionTooLow, Data)
KEP_DEFINE_ERROR(MissingRegistryEntry, Data)
KEP_DEFINE_ERROR(MissingLocus, Data)
KEP_DEFINE_ERROR(EpletsUndefined, Config)

// compatibility / pool ingestion
KEP_DEFINE_ERROR(GraphBuildError, Data)
KEP_DEFINE_ERROR(ParseError, Data)
KEP_DEFINE_ERROR(InvariantViolation, Data)
KEP_DEFINE_ERROR(InvalidDistribution, Config)

// optimization, simulation, equity
KEP_DEFINE_ERROR(MissingWeight, Config)
KEP_DEFINE_ERROR(TooLarge, Runtime)
KEP_DEFINE_ERROR(EmptySubpopulation, Data)
KEP_DEFINE_ERROR(PreconditionError, Config)
KEP_DEFINE_ERROR(SimulationError, Runtime)

// I/O
KEP_DEFINE_ERROR(FileError, Data)
KEP_DEFINE_ERROR(ConfigError, Config)

#undef KEP_DEFINE_ERROR

}  // namespace kep
