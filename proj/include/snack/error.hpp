#ifndef SNACK_ERROR_HPP
#define SNACK_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace snack {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised by file loaders; carries the 1-based line number of the bad record.
class ParseError : public Error {
public:
    ParseError(const std::string& file, std::size_t line, const std::string& what)
        : Error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

} // namespace snack

#endif
