#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace intertext {

// Stable numeric codes. The C API maps every thrown error onto one of these,
// and the CLI collapses them to its documented exit statuses.
enum class ErrorCode {
    Internal = 1,
    Config = 2,
    Ingest = 3,
    Index = 4,
    UnknownVerse = 5,
    Provider = 6,
    Parse = 7,
    MissingTranscript = 8,
    DegenerateVector = 9,
    Domain = 10,
    Export = 11,
    Stage = 12,
    SearchUnavailable = 13,
};

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, std::string message)
        : std::runtime_error(std::move(message)), code_(code) {}

    ErrorCode code() const { return code_; }

  private:
    ErrorCode code_;
};

#define INTERTEXT_ERROR_CLASS(Name, Code)                                      \
    class Name : public Error {                                                \
      public:                                                                  \
        explicit Name(std::string message)                                     \
            : Error(ErrorCode::Code, std::move(message)) {}                    \
    };

INTERTEXT_ERROR_CLASS(ConfigError, Config)
INTERTEXT_ERROR_CLASS(IngestError, Ingest)
INTERTEXT_ERROR_CLASS(IndexError, Index)
INTERTEXT_ERROR_CLASS(UnknownVerseError, UnknownVerse)
INTERTEXT_ERROR_CLASS(ProviderError, Provider)
INTERTEXT_ERROR_CLASS(ParseError, Parse)
INTERTEXT_ERROR_CLASS(MissingTranscriptError, MissingTranscript)
INTERTEXT_ERROR_CLASS(DegenerateVectorError, DegenerateVector)
INTERTEXT_ERROR_CLASS(DomainError, Domain)
INTERTEXT_ERROR_CLASS(ExportError, Export)
INTERTEXT_ERROR_CLASS(StageError, Stage)
INTERTEXT_ERROR_CLASS(SearchUnavailableError, SearchUnavailable)

#undef INTERTEXT_ERROR_CLASS

} // namespace intertext
