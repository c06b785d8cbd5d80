#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qexpr {

enum class ErrorKind {
    ParameterArity,
    Unsupported,
    Parse,
    Validation,
    SizeGuard,
    Routing,
    Profile,
    Domain,
    Lookup,
    Encoding,
    Checkpoint,
    Schema,
    Io,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; the kind is what callers branch on
/// and what the CLI reports in its error JSON.
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string &what)
        : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

/// Parse failure with a 1-based source position.
class ParseError : public Error {
  public:
    ParseError(const std::string &msg, std::size_t line, std::size_t column)
        : Error(ErrorKind::Parse, "line " + std::to_string(line) + ", column " +
                                      std::to_string(column) + ": " + msg),
          line_(line), column_(column) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] std::size_t column() const noexcept { return column_; }

  private:
    std::size_t line_;
    std::size_t column_;
};

} // namespace qexpr
