#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace abdt {

// Invalid argument values: non-positive scales, empty inputs, bad grids.
class DomainError : public std::invalid_argument {
public:
    explicit DomainError(const std::string& what, std::optional<std::size_t> row = std::nullopt)
        : std::invalid_argument(what), row_(row) {}

    // 1-based data row (header excluded) when the error came from an input file.
    std::optional<std::size_t> row() const { return row_; }

private:
    std::optional<std::size_t> row_;
};

// Malformed text input (CSV, JSON, policy strings).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what, std::optional<std::size_t> row = std::nullopt)
        : std::runtime_error(what), row_(row) {}

    std::optional<std::size_t> row() const { return row_; }

private:
    std::optional<std::size_t> row_;
};

namespace detail {

inline void require(bool cond, const char* msg) {
    if (!cond) throw DomainError(msg);
}

}  // namespace detail
}  // namespace abdt
