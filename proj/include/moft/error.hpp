#pragma once

#include <stdexcept>
#include <string>

namespace moft {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public Error { using Error::Error; };
class CorruptFileError : public Error { using Error::Error; };
class DataError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };
class ArgumentError : public Error { using Error::Error; };
class RangeError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class ProfileMismatchError : public Error { using Error::Error; };
class CalibrationMissingError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class DegenerateReferenceError : public Error { using Error::Error; };
class UndefinedCorrelationError : public Error { using Error::Error; };

class DivergenceError : public Error {
public:
    DivergenceError(int step, const std::string& what)
        : Error("guidance diverged at step " + std::to_string(step) + ": " + what), step_(step) {}
    int step() const { return step_; }

private:
    int step_;
};

} // namespace moft
