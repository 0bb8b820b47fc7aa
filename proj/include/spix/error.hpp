// SPDX-License-Identifier: Apache-2.0
//
// spix: object-selective single-pixel imaging toolkit
// ------------------------------------------------------------------------

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace spix {

// Base of every error thrown by the library. Callers that only care about
// "something failed" catch this; the CLI maps it to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Extents that do not line up (tensor shapes, image sides, vector lengths).
class DimensionError : public Error {
public:
    using Error::Error;
};

// A scalar argument outside its admissible range.
class ParameterError : public Error {
public:
    using Error::Error;
};

// NaN/Inf encountered, or a numerically unusable system (rank deficiency).
class NumericalError : public Error {
public:
    using Error::Error;
};

// Input that violates a structural precondition (e.g. non-orthonormal basis).
class ValidationError : public Error {
public:
    using Error::Error;
};

// A shape that lands entirely outside the canvas.
class PlacementError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    IoError(const std::string& path, const std::string& what)
        : Error(what + ": " + path), path_(path) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// Malformed binary file; carries the byte offset where parsing stopped.
class FormatError : public Error {
public:
    FormatError(std::uint64_t offset, const std::string& what)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::uint64_t offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

} // namespace spix
