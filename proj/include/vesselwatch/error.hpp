#pragma once

#include <stdexcept>
#include <string>

namespace vesselwatch {

// Bad input data or configuration; the CLI maps this to exit code 1.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

// A broken internal invariant; the CLI maps this to exit code 2.
class InvariantError : public std::logic_error {
public:
    explicit InvariantError(const std::string& what) : std::logic_error(what) {}
};

} // namespace vesselwatch
